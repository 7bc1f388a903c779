"""Kernel herding quadrature: vanilla, fully-corrective and accelerated variants."""

from .embedding import (
    CandidatePool,
    ConditioningError,
    DiscreteMeasure,
    GramCache,
    HerdingState,
    fc_orthogonality_residual,
    inner_residual_vs_atom,
    mmd,
    mmd_squared,
    optimal_weights,
)
from .estimator import KernelHerding
from .gradapprox import CosStepScalars, Direction, InvariantError, align, fc_gcos, fc_pmp, gcos, gcos_closed_form, pmp
from .herding import (
    DegenerateDirection,
    HerdingConfig,
    IterationTrace,
    argmax_vertex,
    herd,
    herd_accelerated,
    herd_fully_corrective,
    herd_vanilla,
    line_search_step,
)
from .kernels import (
    Domain,
    DomainError,
    KernelSpec,
    MeanEmbedding,
    UnsupportedEmbedding,
    analytic_embedding,
    empirical_embedding,
    kernel_eval,
    sample_measure,
)
from .simplexopt import QuadraticProblem, SolverError, nnls, simplex_qp

__version__ = "0.1.0"
