"""quadcal: decision-preserving quadratic ReLU replacement for trained MLPs.

Fits a shared quadratic activation q(u) = alpha u^2 + beta u + eta to a
trained single-hidden-layer ReLU MLP (or frozen-feature head) so that the
model's calibration-set decisions are preserved exactly when the lifted
geometry allows it, and approximately (with margin/slack diagnostics)
otherwise.  Ships fixed-interval polynomial baselines and a leveled-CKKS
cost planner for the resulting arithmetic circuit.
"""

from .baselines import (
    PolyActivation,
    empirical_interval,
    fit_least_squares,
    fit_remez,
    square_activation,
)
from .cascade import (
    CascadeOptions,
    FitReport,
    QuadCoeffs,
    fit_binary,
    fit_multiclass,
    quantize_and_certify,
)
from .evaluator import EvalRecord, evaluate, forward_poly, poly_decisions
from .fhecost import (
    ACTIVATIONS,
    ActivationDescriptor,
    CostReport,
    TaskShape,
    depth_of,
    min_feasible_config,
    op_counts,
)
from .geom2d import (
    PlanarHull,
    SeparationCertificate,
    convex_hull,
    directional_margin,
    eta_for_zero_threshold,
    quantization_check,
    separation_certificate,
)
from .lift import (
    BinaryLiftCloud,
    ClassStats,
    PairwiseLiftSet,
    binary_lift,
    class_stats,
    hidden_preacts,
    pairwise_lifts,
)
from .model_io import (
    CalibrationSet,
    Logits,
    MlpModel,
    forward_relu,
    load_model,
    make_calibration_set,
    relu_decisions,
    save_model,
)
from .qpsolvers import (
    McSolution,
    RchSolution,
    mc_hard,
    mc_soft,
    primal_from_dual,
    rch_closest_point,
)

__version__ = "0.1.0"
