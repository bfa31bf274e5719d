"""Trace-norm regularized least squares: reductions, accelerated dual
solver with duality-gap certificates, exact-penalty machinery, and cone
export, with a CLI front end (``tracereg --help``)."""

from .cone import (
    ConeCheck,
    ConePoint,
    ConeProgram,
    export_constrained,
    export_penalized,
    lift_constrained,
    lift_penalized,
    read_cone_file,
    verify,
    write_cone_file,
)
from .linalg import (
    EmbedEigensystem,
    ThinSVD,
    embed_eigensystem,
    singular_values,
    sym_eig,
    sym_embed,
    sym_embed_adjoint,
    thin_svd,
    trace_norm,
)
from .problem import (
    ConstrainedSpec,
    PenalizedSpec,
    RankDeficientError,
    RawInstance,
    ReducedProblem,
    everett_budget,
    exact_penalty_recover,
    exact_penalty_threshold,
    generate_instance,
    load_problem,
    radius_constrained,
    radius_penalized,
    recover_coefficients,
    reduce_instance,
    save_problem,
)
from .prox import (
    BallSubproblem,
    FactoredSpectahedronPoint,
    RootFindError,
    solve_ball,
    solve_entropy_box,
    solve_entropy_spectahedron,
)
from .solver import (
    IterState,
    SolveReport,
    SolverConfig,
    SolverDerived,
    derive,
    eval_primal_dual,
    iteration_bound,
    solve_constrained,
    solve_penalized,
)

__version__ = "0.1.0"

__all__ = [
    "ConeCheck",
    "ConePoint",
    "ConeProgram",
    "ConstrainedSpec",
    "EmbedEigensystem",
    "IterState",
    "PenalizedSpec",
    "RankDeficientError",
    "RawInstance",
    "ReducedProblem",
    "BallSubproblem",
    "FactoredSpectahedronPoint",
    "RootFindError",
    "SolveReport",
    "SolverConfig",
    "SolverDerived",
    "ThinSVD",
    "derive",
    "embed_eigensystem",
    "eval_primal_dual",
    "everett_budget",
    "exact_penalty_recover",
    "exact_penalty_threshold",
    "export_constrained",
    "export_penalized",
    "generate_instance",
    "iteration_bound",
    "lift_constrained",
    "lift_penalized",
    "load_problem",
    "radius_constrained",
    "radius_penalized",
    "read_cone_file",
    "recover_coefficients",
    "reduce_instance",
    "save_problem",
    "singular_values",
    "solve_ball",
    "solve_constrained",
    "solve_entropy_box",
    "solve_entropy_spectahedron",
    "solve_penalized",
    "sym_eig",
    "sym_embed",
    "sym_embed_adjoint",
    "thin_svd",
    "trace_norm",
    "verify",
    "write_cone_file",
]
