"""Subproblem kernels used once per solver iteration.

Two families: a diagonal quadratic minimized over the Frobenius unit ball
(the inner maximization of the smoothed dual), and entropy-regularized
linear minimization over the capped spectahedron
``{W : 0 <= W <= t I / m, trace W = t}`` and its box extension over
``0 <= t <= 1`` (the prox steps).  Both reduce to one-dimensional
root-finding problems solved by safeguarded Newton inside a certified
bracket with bisection fallback.

Spectahedron minimizers are returned in factored form: a shared weight on
the untouched eigendirections plus 2m explicit eigenpairs, so no
(p+q)-square matrix is ever formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, embed_eigensystem, thin_svd

__all__ = [
    "RootFindError",
    "BallSubproblem",
    "FactoredSpectahedronPoint",
    "solve_ball",
    "solve_entropy_spectahedron",
    "solve_entropy_box",
]

ROOT_TOL = 1e-12
ROOT_MAX_ITER = 200


class RootFindError(RuntimeError):
    """A scalar root was not certified to tolerance within the iteration cap."""


def _newton_bracket(f_df, lo: float, hi: float, flo: float, fhi: float) -> float:
    """Root of a nonincreasing function by safeguarded Newton.

    The caller certifies f(lo) >= 0 >= f(hi).  Newton steps that leave the
    current bracket, stagnate, or lack a usable derivative fall back to
    bisection.  Terminates on |f| <= ROOT_TOL, else raises.
    """
    if not (flo >= 0.0 >= fhi):
        raise RootFindError(f"bracket not certified: f({lo})={flo}, f({hi})={fhi}")
    x = lo
    fx, dfx = flo, None
    for _ in range(ROOT_MAX_ITER):
        fx, dfx = f_df(x)
        if abs(fx) <= ROOT_TOL:
            return x
        if fx > 0.0:
            lo = x
        else:
            hi = x
        if dfx < 0.0:
            step = x - fx / dfx
        else:
            step = x
        if not (lo < step < hi) or step == x:
            step = 0.5 * (lo + hi)
        x = step
    raise RootFindError(
        f"residual not below {ROOT_TOL} after {ROOT_MAX_ITER} iterations"
    )


# ---------------------------------------------------------------------------
# Frobenius-ball quadratic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BallSubproblem:
    """min over ||v||_F <= 1 of  0.5*||radius * Lambda v - target||_F^2 + linear . v."""

    radius: float
    lambda_diag: np.ndarray
    target: np.ndarray
    linear: np.ndarray


def solve_ball(sub: BallSubproblem) -> tuple[np.ndarray, float]:
    """Minimizer and value of a :class:`BallSubproblem`.

    The stationarity system is diagonal per row once the multiplier xi of
    the ball constraint is fixed: v(xi) = (r^2 Lambda^2 + xi I)^{-1}
    (r Lambda target - linear).  xi = 0 when v(0) is already inside the
    ball, otherwise xi solves ||v(xi)||_F = 1.
    """
    ld = np.asarray(sub.lambda_diag, dtype=np.float64)
    h = as_matrix(sub.target, "target")
    g = as_matrix(sub.linear, "linear")
    if not (np.isfinite(sub.radius) and sub.radius > 0.0):
        raise ValueError(f"radius must be positive, got {sub.radius}")
    if ld.ndim != 1 or ld.size != h.shape[0] or np.any(ld <= 0.0):
        raise ValueError("lambda_diag must be positive with one entry per row of target")
    if g.shape != h.shape:
        raise ValueError(f"linear term must be {h.shape}, got {g.shape}")
    rl = sub.radius * ld
    v, value, _ = _ball_core(rl, rl * rl, h, g)
    return v, value


def _ball_core(rl, dsq, target, linear):
    """Unvalidated ball solve; ``rl`` = radius*lambda_diag, ``dsq`` = rl**2."""
    numer = rl[:, None] * target - linear
    dcol = dsq[:, None]
    v = numer / dcol
    psi0 = float(np.sum(v * v)) - 1.0
    xi = 0.0
    if psi0 > 0.0:
        nsq = numer * numer

        def f_df(x):
            den = dcol + x
            terms = nsq / (den * den)
            return float(np.sum(terms)) - 1.0, -2.0 * float(np.sum(terms / den))

        hi = float(np.linalg.norm(numer))
        fhi = f_df(hi)[0]
        expand = 0
        while fhi > 0.0:  # cannot happen in exact arithmetic; certify anyway
            hi *= 2.0
            fhi = f_df(hi)[0]
            expand += 1
            if expand > 60:
                raise RootFindError("failed to bracket the ball multiplier")
        xi = _newton_bracket(f_df, 0.0, hi, psi0, fhi)
        v = numer / (dcol + xi)
    resid = rl[:, None] * v - target
    value = 0.5 * float(np.sum(resid * resid)) + float(np.sum(linear * v))
    return v, value, xi


# ---------------------------------------------------------------------------
# Entropy minimization over the capped spectahedron
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FactoredSpectahedronPoint:
    """Point of the capped spectahedron in factored form.

    Represents ``W = theta * (I - F F^T) + F diag(weights) F^T`` where F is
    the ``dim``-by-2m ``basis`` with orthonormal columns.  Membership in the
    trace-``trace_t`` spectahedron means every weight and theta lie in
    [0, trace_t / cap_m] and ``(dim - 2m) * theta + sum(weights) = trace_t``.
    """

    dim: int
    cap_m: int
    theta: float
    basis: np.ndarray
    weights: np.ndarray
    trace_t: float = 1.0

    def sym_embed_adjoint(self, shape: tuple[int, int]) -> np.ndarray:
        """Adjoint image of the represented W under the symmetric embedding.

        Equals twice W's bottom-left block for the row split (q, p); only
        the factors are touched, never a dense W.
        """
        p, q = shape
        if p + q != self.dim:
            raise ValueError(f"split {(p, q)} does not match dimension {self.dim}")
        f_bottom = self.basis[q:, :]
        f_top = self.basis[:q, :]
        return 2.0 * (f_bottom * (self.weights - self.theta)) @ f_top.T

    def dense(self) -> np.ndarray:
        """Materialize W (desk-scale diagnostics only)."""
        w = self.theta * np.eye(self.dim)
        w += (self.basis * (self.weights - self.theta)) @ self.basis.T
        return w

    def validate(self) -> None:
        """Raise if any representation invariant fails."""
        t = self.trace_t
        m = self.cap_m
        cap = t / m
        tol = 1e-10 * (1.0 + abs(t))
        if not (-tol <= self.theta <= cap + tol):
            raise ValueError(f"theta {self.theta} outside [0, {cap}]")
        if np.any(self.weights < -tol) or np.any(self.weights > cap + tol):
            raise ValueError("weights outside [0, trace_t / cap_m]")
        trace = (self.dim - self.weights.size) * self.theta + float(np.sum(self.weights))
        if abs(trace - t) > tol:
            raise ValueError(f"trace {trace} does not match trace_t {t}")
        gram = self.basis.T @ self.basis
        if np.max(np.abs(gram - np.eye(gram.shape[0]))) > 1e-9:
            raise ValueError("basis columns are not orthonormal")


def _waterfill(scaled_spectrum, group_value: float, group_count: int, cap_m: int):
    """Capped exponential water-filling.

    Minimizes ``a . w + sum(w log w)`` over the simplex with caps
    ``0 <= w_i <= 1/cap_m``, where ``a`` consists of ``scaled_spectrum``
    plus ``group_count`` copies of ``group_value`` handled as one group.
    The optimal weights are ``min(exp(-a_i - 1 - xi), 1/cap_m)`` with the
    water level xi rooting their sum at one.  Exponents are capped before
    exponentiation so no overflow can occur.
    """
    s = -scaled_spectrum - 1.0
    cap_log = -math.log(cap_m)
    sg = -group_value - 1.0
    if group_count > 0:
        smin = min(float(np.min(s)), sg)
        smax = max(float(np.max(s)), sg)
    else:
        smin = float(np.min(s))
        smax = float(np.max(s))
    total = s.size + group_count
    logn = math.log(total)

    def f_df(xi):
        z = np.minimum(s - xi, cap_log)
        w = np.exp(z)
        val = float(np.sum(w))
        der = -float(np.sum(w[z < cap_log]))
        if group_count > 0:
            zg = min(sg - xi, cap_log)
            wg = math.exp(zg)
            val += group_count * wg
            if zg < cap_log:
                der -= group_count * wg
        return val - 1.0, der

    lo, hi = smin - logn, smax + logn
    flo = f_df(lo)[0]
    fhi = f_df(hi)[0]
    expand = 0
    while flo < 0.0 or fhi > 0.0:  # certified analytically; guard regardless
        if flo < 0.0:
            lo -= logn + 1.0
            flo = f_df(lo)[0]
        if fhi > 0.0:
            hi += logn + 1.0
            fhi = f_df(hi)[0]
        expand += 1
        if expand > 60:
            raise RootFindError("failed to bracket the water level")
    xi = _newton_bracket(f_df, lo, hi, flo, fhi)
    z = np.minimum(s - xi, cap_log)
    weights = np.exp(z)
    if group_count > 0:
        zg = min(sg - xi, cap_log)
        theta = math.exp(zg)
    else:
        zg, theta = 0.0, 0.0
    return weights, z, theta, zg, xi


def _entropy_min(scale: float, varsigma: float, h):
    """Shared kernel: factored minimizer plus the scaled reduced value.

    Minimizes ``(varsigma I + E(h)) . u + (1/scale) * trace(u log u)`` over
    the trace-one capped spectahedron, where E is the symmetric embedding.
    The returned value is that objective multiplied by ``scale``, i.e. the
    optimal value of the reduced vector problem on the scaled spectrum.
    """
    h = as_matrix(h, "h")
    if not (np.isfinite(scale) and scale > 0.0):
        raise ValueError(f"scale must be positive, got {scale}")
    if not np.isfinite(varsigma):
        raise ValueError("varsigma must be finite")
    p, q = h.shape
    m = min(p, q)
    n = p + q
    eig = embed_eigensystem(thin_svd(h))
    scaled = scale * (varsigma + eig.values)
    group_value = scale * varsigma
    group_count = n - 2 * m
    weights, z, theta, zg, _ = _waterfill(scaled, group_value, group_count, m)
    point = FactoredSpectahedronPoint(
        dim=n, cap_m=m, theta=theta, basis=eig.vectors, weights=weights, trace_t=1.0
    )
    # w log w = w * z since w = exp(z); exact and overflow-free
    value = float(np.dot(scaled, weights)) + float(np.dot(weights, z))
    if group_count > 0:
        value += group_count * (group_value * theta + theta * zg)
    return point, value


def solve_entropy_spectahedron(scale: float, varsigma: float, h) -> FactoredSpectahedronPoint:
    """Entropy-regularized linear minimization over the trace-one spectahedron.

    Returns the unique minimizer of
    ``(varsigma I + E(h)) . u + (1/scale) * trace(u log u)``
    over ``{u : 0 <= u <= I/m, trace u = 1}`` in factored form; E(h) is the
    symmetric embedding of the p-by-q matrix h and m = min(p, q).  Only the
    2m nonzero eigenpairs of E(h) are materialized; the remaining
    eigendirections share the weight ``theta``.
    """
    point, _ = _entropy_min(scale, varsigma, h)
    return point


def solve_entropy_box(
    scale: float, varsigma: float, h, alpha: float, a_coef: float
) -> tuple[float, FactoredSpectahedronPoint]:
    """Entropy minimization over the trace-box spectahedron.

    Minimizes ``(varsigma I + E(h)) . W + alpha * t
    + (1/scale) * (trace(W log W) + a_coef * t * log t)`` over pairs
    ``(t, W)`` with ``W`` in the trace-``t`` capped spectahedron and
    ``0 <= t <= 1``.  Writing W = t * W' splits the problem: W' solves the
    trace-one subproblem of :func:`solve_entropy_spectahedron`, and with d
    its scaled optimal value, ``t = min(1, exp(-1 - (scale*alpha + d) /
    (a_coef + 1)))`` in closed form.
    """
    if not (np.isfinite(a_coef) and a_coef > 0.0):
        raise ValueError(f"a_coef must be positive, got {a_coef}")
    if not np.isfinite(alpha):
        raise ValueError("alpha must be finite")
    unit, d = _entropy_min(scale, varsigma, h)
    expo = -1.0 - (scale * alpha + d) / (a_coef + 1.0)
    t = 1.0 if expo >= 0.0 else math.exp(expo)
    point = FactoredSpectahedronPoint(
        dim=unit.dim,
        cap_m=unit.cap_m,
        theta=t * unit.theta,
        basis=unit.basis,
        weights=t * unit.weights,
        trace_t=t,
    )
    return t, point
