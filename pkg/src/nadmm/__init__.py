"""Multi-block splitting solver for nonconvex objectives under coupled
linear equality constraints, with a proximal-operator toolkit, convergence
monitors, a gallery of closed-form benchmark cases, and a CLI harness."""

from .core import (BlockSpec, CouplingHandle, Problem, State, StoppingConfig,
                   SubsolveBudget, Trace, TraceRecord, UpdateOrder,
                   admm_step, augmented_lagrangian, build_problem, solve)
from .diagnostics import (ConstantsDecl, DiagnosticReport, beta_threshold,
                          check_dual_identity, check_im_subset,
                          check_subgradient_bound, check_sufficient_descent,
                          probe_restricted_prox_regularity,
                          running_best_rates)
from .errors import (ConfigParseError, DegenerateB, DimensionMismatch,
                     InfeasibleOffset, InvalidBeta, InvalidParameter,
                     InvalidSpec, MissingConstants, NadmmError, NotConverged,
                     NoSubgradientSampler, NumericalBreakdown,
                     SubproblemFailure, UnknownCase)
from .prox import (PiecewiseLinearSpec, ProxHandle, proj_box,
                   proj_complementarity, proj_sphere, proj_stiefel, prox_l1,
                   prox_lq, prox_mcp, prox_piecewise_linear, prox_scad,
                   prox_schatten_q)
from .subsolvers import (QuadraticHandle, SmoothHandle, SubsolveReport,
                         smooth_block_descent, solve_coltv_block,
                         solve_quadratic_block)

__version__ = "0.1.0"
