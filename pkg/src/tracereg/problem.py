"""Problem model for trace-norm regularized multivariate least squares.

A raw instance is a pair (A, B) for the fit ``min_U 0.5*||B - A U||_F^2``
plus a trace-norm term on U.  Reduction diagonalizes A^T A, after which every
solver in this package works on the equivalent objective
``0.5*||Lambda X - H||_F^2`` with Lambda positive diagonal; U = Q X maps
solutions back.  This module also carries the exact-penalty machinery that
ties the budget-constrained problem to the penalized one, instance file I/O,
and the reproducible instance generator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .linalg import as_matrix, singular_values, sym_eig, trace_norm

__all__ = [
    "RawInstance",
    "ReducedProblem",
    "PenalizedSpec",
    "ConstrainedSpec",
    "RankDeficientError",
    "RANK_TOL_FACTOR",
    "reduce_instance",
    "recover_coefficients",
    "radius_penalized",
    "radius_constrained",
    "exact_penalty_threshold",
    "exact_penalty_recover",
    "everett_budget",
    "generate_instance",
    "save_problem",
    "load_problem",
]

# Relative eigenvalue floor below which A is treated as column rank deficient.
RANK_TOL_FACTOR = 1e-10


class RankDeficientError(ValueError):
    """A does not have full column rank up to the relative tolerance."""


@dataclass(frozen=True)
class RawInstance:
    """Design matrix ``a`` (l-by-p) and response matrix ``b`` (l-by-q), l >= p."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = as_matrix(self.a, "a")
        b = as_matrix(self.b, "b")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        l, p = a.shape
        if l < p:
            raise ValueError(f"need at least as many rows as columns in a, got {a.shape}")
        if b.shape[0] != l:
            raise ValueError(f"a has {l} rows but b has {b.shape[0]}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.a.shape[0], self.a.shape[1], self.b.shape[1])


@dataclass(frozen=True)
class ReducedProblem:
    """Diagonalized least-squares data.

    ``lambda_diag`` holds the positive diagonal entries of Lambda (singular
    values of A), ``h`` is the p-by-q reduced target, ``q_basis`` the
    orthonormal eigenbasis of A^T A used by :func:`recover_coefficients`,
    and ``norm_b_sq`` the squared Frobenius norm of the original B (kept so
    original-coordinate objective values stay recoverable).
    """

    lambda_diag: np.ndarray
    h: np.ndarray
    q_basis: np.ndarray
    norm_b_sq: float

    def __post_init__(self):
        ld = np.asarray(self.lambda_diag, dtype=np.float64)
        h = as_matrix(self.h, "h")
        qb = as_matrix(self.q_basis, "q_basis")
        if ld.ndim != 1 or ld.size != h.shape[0]:
            raise ValueError("lambda_diag length must equal the row count of h")
        if not np.isfinite(ld).all() or np.any(ld <= 0.0):
            raise ValueError("lambda_diag entries must be positive and finite")
        p = h.shape[0]
        if qb.shape != (p, p):
            raise ValueError(f"q_basis must be {p}-square, got {qb.shape}")
        if np.max(np.abs(qb.T @ qb - np.eye(p))) > 1e-8:
            raise ValueError("q_basis columns are not orthonormal")
        if not (np.isfinite(self.norm_b_sq) and self.norm_b_sq >= 0.0):
            raise ValueError("norm_b_sq must be a nonnegative finite scalar")
        object.__setattr__(self, "lambda_diag", ld)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "q_basis", qb)
        object.__setattr__(self, "norm_b_sq", float(self.norm_b_sq))

    @property
    def p(self) -> int:
        return self.h.shape[0]

    @property
    def q(self) -> int:
        return self.h.shape[1]

    @property
    def rank_dim(self) -> int:
        """min(p, q), the number of singular values of a candidate X."""
        return min(self.h.shape)

    @property
    def embed_dim(self) -> int:
        """p + q, the dimension of the symmetric embedding."""
        return self.h.shape[0] + self.h.shape[1]


@dataclass(frozen=True)
class PenalizedSpec:
    """Penalized problem: minimize 0.5*||Lambda X - H||_F^2 + lam * trace_norm(X)."""

    problem: ReducedProblem
    lam: float

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam > 0.0):
            raise ValueError(f"penalty weight must be positive, got {self.lam}")
        object.__setattr__(self, "lam", float(self.lam))


@dataclass(frozen=True)
class ConstrainedSpec:
    """Constrained problem: minimize 0.5*||Lambda X - H||_F^2 s.t. trace_norm(X) <= budget.

    ``gamma`` is the weight of the exact-penalty reformulation actually
    solved (defaults to ||H||_F^2 / budget, twice the zero-anchor threshold)
    and ``anchor`` a strictly feasible point used to pull near-feasible
    solutions back into the budget (defaults to 0).
    """

    problem: ReducedProblem
    budget: float
    gamma: float = None  # type: ignore[assignment]
    anchor: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        if not (np.isfinite(self.budget) and self.budget > 0.0):
            raise ValueError(f"trace-norm budget must be positive, got {self.budget}")
        object.__setattr__(self, "budget", float(self.budget))
        prob = self.problem
        anchor = self.anchor
        if anchor is None:
            anchor = np.zeros((prob.p, prob.q))
        anchor = as_matrix(anchor, "anchor")
        if anchor.shape != prob.h.shape:
            raise ValueError(f"anchor must be {prob.h.shape}, got {anchor.shape}")
        if trace_norm(anchor) >= self.budget:
            raise ValueError("anchor must be strictly inside the trace-norm budget")
        object.__setattr__(self, "anchor", anchor)
        gamma = self.gamma
        if gamma is None:
            gamma = float(np.sum(prob.h**2)) / self.budget
        if not (np.isfinite(gamma) and gamma >= 0.0):
            raise ValueError(f"gamma must be finite and nonnegative, got {gamma}")
        if gamma < exact_penalty_threshold(prob, self.budget, anchor):
            raise ValueError("gamma is below the exact-penalty threshold for this anchor")
        if gamma == 0.0:
            # H = 0 makes any feasible point optimal; keep a positive weight
            # so the solver's scaling stays well defined.
            gamma = 1.0
        object.__setattr__(self, "gamma", float(gamma))


def reduce_instance(raw: RawInstance) -> ReducedProblem:
    """Diagonalize a raw instance.

    Eigendecomposes A^T A = Q diag(lambda^2) Q^T and returns the reduced
    problem with H = Lambda^{-1} Q^T A^T B.  The map X = Q^T U turns
    ``||B - A U||_F^2 - ||B||_F^2`` into ``||Lambda X - H||_F^2 - ||H||_F^2``
    and preserves singular values, so both formulations transfer verbatim.

    Raises :class:`RankDeficientError` when the smallest eigenvalue of
    A^T A falls at or below ``RANK_TOL_FACTOR`` times the largest.
    """
    ata = raw.a.T @ raw.a
    evals, q_basis = sym_eig(ata)
    if evals[-1] <= RANK_TOL_FACTOR * max(evals[0], 0.0):
        raise RankDeficientError(
            "design matrix is rank deficient: smallest eigenvalue of A^T A is "
            f"{evals[-1]:.6e} against largest {evals[0]:.6e}"
        )
    lambda_diag = np.sqrt(evals)
    h = (q_basis.T @ (raw.a.T @ raw.b)) / lambda_diag[:, None]
    return ReducedProblem(
        lambda_diag=lambda_diag,
        h=h,
        q_basis=q_basis,
        norm_b_sq=float(np.sum(raw.b**2)),
    )


def recover_coefficients(problem: ReducedProblem, x) -> np.ndarray:
    """Map a reduced-coordinate solution X back to original coordinates U = Q X."""
    x = as_matrix(x, "x")
    if x.shape != problem.h.shape:
        raise ValueError(f"x must be {problem.h.shape}, got {x.shape}")
    return problem.q_basis @ x


def radius_penalized(spec: PenalizedSpec) -> float:
    """Frobenius radius certified to contain every penalized minimizer.

    The minimum of ``||H||_F^2 / (2 lam)`` (objective comparison against
    X = 0) and the trace norm of the unregularized fit Lambda^{-1} H.
    """
    prob = spec.problem
    by_zero = float(np.sum(prob.h**2)) / (2.0 * spec.lam)
    by_fit = trace_norm(prob.h / prob.lambda_diag[:, None])
    return min(by_zero, by_fit)


def radius_constrained(spec: ConstrainedSpec) -> float:
    """Frobenius radius certified to contain every constrained minimizer.

    The minimum of ``2 ||Lambda H||_F / lambda_min(Lambda)^2`` and the
    budget itself.
    """
    prob = spec.problem
    lmin = float(np.min(prob.lambda_diag))
    grad_scale = 2.0 * float(np.linalg.norm(prob.lambda_diag[:, None] * prob.h)) / (lmin * lmin)
    return min(grad_scale, spec.budget)


def exact_penalty_threshold(problem: ReducedProblem, budget: float, anchor=None) -> float:
    """Smallest penalty weight that makes the budget penalty exact.

    For a strictly feasible anchor X0 this is half its squared residual
    divided by its budget slack; any gamma at or above it turns the
    constrained problem into an equivalent penalized one.
    """
    if anchor is None:
        anchor = np.zeros(problem.h.shape)
    anchor = as_matrix(anchor, "anchor")
    slack = budget - trace_norm(anchor)
    if slack <= 0.0:
        raise ValueError("anchor must be strictly inside the trace-norm budget")
    resid = problem.lambda_diag[:, None] * anchor - problem.h
    return 0.5 * float(np.sum(resid**2)) / slack


def exact_penalty_recover(x, anchor, budget: float) -> np.ndarray:
    """Pull a near-feasible point back inside the trace-norm budget.

    Blends ``x`` toward the strictly feasible ``anchor``:
    ``(x + theta * anchor) / (1 + theta)`` with
    ``theta = max(trace_norm(x) - budget, 0) / (budget - trace_norm(anchor))``.
    Returns ``x`` unchanged when it is already feasible; the blend is always
    feasible by convexity of the trace norm.
    """
    x = as_matrix(x, "x")
    anchor = as_matrix(anchor, "anchor")
    if anchor.shape != x.shape:
        raise ValueError(f"anchor must be {x.shape}, got {anchor.shape}")
    slack = budget - trace_norm(anchor)
    if slack <= 0.0:
        raise ValueError("anchor must be strictly inside the trace-norm budget")
    excess = trace_norm(x) - budget
    if excess <= 0.0:
        return x
    theta = excess / slack
    return (x + theta * anchor) / (1.0 + theta)


def everett_budget(x) -> float:
    """Trace norm of a penalized solution.

    A solution of the penalized problem with weight lam is optimal for the
    constrained problem whose budget equals this value (up to the solve's
    duality gap), which is how penalty sweeps trace out the budget curve.
    """
    return trace_norm(x)


def generate_instance(q: int, seed: int) -> RawInstance:
    """Reproducible random instance with l = 10q rows and p = 2q predictors.

    Entries of A and B are uniform on [0, 1), drawn from a Philox counter
    generator keyed by ``seed`` (A first, then B, each filled row-major),
    so instances are bit-reproducible across platforms and processes.
    """
    if q < 1:
        raise ValueError(f"q must be a positive integer, got {q}")
    if not 0 <= int(seed) < 2**64:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    a = rng.random((10 * q, 2 * q))
    b = rng.random((10 * q, q))
    return RawInstance(a=a, b=b)


def save_problem(path, problem: Union[RawInstance, ReducedProblem]) -> None:
    """Write an instance or reduced problem as documented JSON (row-major arrays)."""
    if isinstance(problem, RawInstance):
        doc = {
            "format": "raw-instance",
            "l": problem.a.shape[0],
            "p": problem.a.shape[1],
            "q": problem.b.shape[1],
            "a": problem.a.tolist(),
            "b": problem.b.tolist(),
        }
    elif isinstance(problem, ReducedProblem):
        doc = {
            "format": "reduced-problem",
            "p": problem.p,
            "q": problem.q,
            "lambda_diag": problem.lambda_diag.tolist(),
            "h": problem.h.tolist(),
            "q_basis": problem.q_basis.tolist(),
            "norm_b_sq": problem.norm_b_sq,
        }
    else:
        raise TypeError(f"cannot serialize {type(problem).__name__}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_problem(path) -> Union[RawInstance, ReducedProblem]:
    """Read a problem file written by :func:`save_problem`."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    kind = doc.get("format")
    if kind == "raw-instance":
        return RawInstance(a=np.array(doc["a"], dtype=np.float64),
                           b=np.array(doc["b"], dtype=np.float64))
    if kind == "reduced-problem":
        return ReducedProblem(
            lambda_diag=np.array(doc["lambda_diag"], dtype=np.float64),
            h=np.array(doc["h"], dtype=np.float64),
            q_basis=np.array(doc["q_basis"], dtype=np.float64),
            norm_b_sq=float(doc["norm_b_sq"]),
        )
    raise ValueError(f"unrecognized problem format {kind!r}")
