"""Independent autodiff evaluation of the ansatz defect, used only by tests."""

import jax
import jax.numpy as jnp
import numpy as np

jax.config.update("jax_enable_x64", True)


def make_defect(space, centers, lam, r0, y0, delta, smooth_coef, V, Qdev):
    """E(y) = Q (xi Z*)^{m*-1} - (-Delta)^m (xi Z*) - V xi Z* for one point y."""
    N, m = space.N, space.m
    amp = space.bubble_amplitude
    s = space.gamma / 2.0
    p = space.m_star_f - 1.0
    C = jnp.asarray(centers)
    y0 = jnp.asarray(y0)
    coef = jnp.asarray(smooth_coef)

    def xi(y):
        R = jnp.sqrt(jnp.sum(y[:3] ** 2))
        sig = (R - r0) ** 2 + jnp.sum((y[3:] - y0) ** 2)
        x = jnp.clip((sig - delta ** 2) / (3 * delta ** 2), 0.0, 1.0)
        S = jnp.polyval(coef[::-1], x)
        return 1.0 - S

    def zstar(y):
        d2 = jnp.sum((y[None, :] - C) ** 2, axis=1)
        return jnp.sum(amp * (lam / (1.0 + lam ** 2 * d2)) ** s)

    def Z(y):
        return xi(y) * zstar(y)

    def lap(f):
        def g(y):
            return jnp.trace(jax.hessian(f)(y))
        return g

    op = Z
    for _ in range(m):
        op = lap(op)
    sign = (-1) ** m

    def E(y):
        R = jnp.sqrt(jnp.sum(y[:3] ** 2))
        w = y[3:]
        z = Z(y)
        return (1.0 + Qdev(R, w)) * z ** p - sign * op(y) - V(R, w) * z

    return jax.jit(E)
