"""Numerics for multi-bubble solutions of critical polyharmonic equations."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:   # running from a source tree
    __version__ = "0.1.0"

from .core import (Case, DimensionTooSmallError, DoubleCircleConfig, RegimeMismatchError, RegimeParams,
                   SpaceSpec, generate_centers, make_regime, make_space_spec)
from .bubble import BubbleParams, eval_bubble, neg_laplacian_power, polyharm_bubble, polyharmonic_profiles
from .quadrature import (BudgetExhaustedError, MomentSpec, QuadratureSpec, concentrated_integral, integrate,
                         moment, moment_closed_form, moment_quadrature)
from .lattice import a1_limit, a2_limit, branch_scaling, cross_circle_sum, fit_A_constants, same_circle_sum
from .potentials import PotentialModel, builtin_model
from .ansatz import AnsatzSpec, CutoffSpec, eval_ansatz
from .ansatz_error import WeightedNorm, assemble_error_term, error_scaling_fit, weighted_norm
from .reduced import (BalanceSolution, EnergyExpansion, balance_sweep, mass_leading_order, moment_constants,
                      pairing_sweep, solve_balance)
from .pohozaev import (GenericField, PohozaevReport, SeparableField, bilinear_L1, bilinear_L2,
                       pohozaev_residual)

__all__ = [n for n in dir() if not n.startswith("_")]
