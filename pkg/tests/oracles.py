"""Independent reference implementations used to cross-check the package.

Everything here is written from first principles with elementary
algorithms (cyclic Jacobi rotations, closed forms, subset enumeration,
dense grids) so that agreement with the package is a two-route check, not
a tautology.  Only suitable for the tiny sizes used in tests.
"""

import itertools
import math

import numpy as np


def jacobi_eigh(a, tol=1e-13, max_sweeps=100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (values, vectors) with values descending and vectors in
    matching columns.  Uses explicit rotation matrices; O(n^5) per sweep,
    fine for n <= ~20.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("jacobi_eigh needs a square matrix")
    if np.max(np.abs(a - a.T)) > 1e-12 * (1.0 + np.max(np.abs(a))):
        raise ValueError("jacobi_eigh needs a symmetric matrix")
    n = a.shape[0]
    v = np.eye(n)
    scale = max(1.0, float(np.max(np.abs(a))))
    for _ in range(max_sweeps):
        off = math.sqrt(float(np.sum(np.tril(a, -1) ** 2)))
        if off <= tol * scale:
            break
        for i in range(n - 1):
            for j in range(i + 1, n):
                aij = a[i, j]
                if abs(aij) <= 1e-300:
                    continue
                theta = (a[j, j] - a[i, i]) / (2.0 * aij)
                if theta == 0.0:
                    t = 1.0
                else:
                    t = math.copysign(1.0, theta) / (
                        abs(theta) + math.sqrt(theta * theta + 1.0)
                    )
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                g = np.eye(n)
                g[i, i] = c
                g[j, j] = c
                g[i, j] = s
                g[j, i] = -s
                a = g.T @ a @ g
                v = v @ g
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def svt_solution(h, lam):
    """Closed-form minimizer of 0.5*||X - H||_F^2 + lam*sum sigma_i(X)."""
    u, s, vt = np.linalg.svd(np.asarray(h, dtype=float), full_matrices=False)
    shrunk = np.maximum(s - lam, 0.0)
    return (u * shrunk) @ vt


def svt_objective(h, lam):
    h = np.asarray(h, dtype=float)
    x = svt_solution(h, lam)
    s = np.linalg.svd(x, compute_uv=False)
    return 0.5 * float(np.sum((x - h) ** 2)) + lam * float(np.sum(s))


def project_simplex_like(sig, budget):
    """Euclidean projection of a nonnegative vector onto {w >= 0, sum w <= budget}."""
    sig = np.asarray(sig, dtype=float)
    if float(np.sum(sig)) <= budget:
        return sig.copy()
    ss = np.sort(sig)[::-1]
    css = np.cumsum(ss)
    for k in range(len(ss), 0, -1):
        theta = (css[k - 1] - budget) / k
        if theta >= 0.0 and ss[k - 1] > theta and (k == len(ss) or theta >= ss[k]):
            return np.maximum(sig - theta, 0.0)
    raise RuntimeError("projection threshold search failed")


def ball_projection_solution(h, budget):
    """Minimizer of 0.5*||X - H||_F^2 subject to sum sigma_i(X) <= budget."""
    u, s, vt = np.linalg.svd(np.asarray(h, dtype=float), full_matrices=False)
    return (u * project_simplex_like(s, budget)) @ vt


def ball_projection_objective(h, budget):
    h = np.asarray(h, dtype=float)
    x = ball_projection_solution(h, budget)
    return 0.5 * float(np.sum((x - h) ** 2))


def waterfill_by_enumeration(scaled, group_value, group_count, cap_m):
    """KKT-enumeration solution of the capped entropy subproblem.

    Minimizes sum_i scaled_i*w_i + sum_i w_i*log(w_i) over w >= 0 with
    sum w = 1 and w_i <= 1/cap_m, where the entries are ``scaled`` plus
    ``group_count`` further entries all equal to ``group_value``.  Solves
    by enumerating every candidate set of entries pinned at the cap and
    checking KKT consistency; returns (weights, objective) over the full
    expanded entry list.
    """
    entries = list(np.asarray(scaled, dtype=float)) + [float(group_value)] * group_count
    n = len(entries)
    cap = 1.0 / cap_m
    s = [-e - 1.0 for e in entries]
    best = None
    for capped in itertools.chain.from_iterable(
        itertools.combinations(range(n), r) for r in range(cap_m)
    ):
        capped = set(capped)
        free = [i for i in range(n) if i not in capped]
        mass = 1.0 - len(capped) * cap
        denom = sum(math.exp(s[i]) for i in free)
        if denom <= 0.0 or mass <= 0.0:
            continue
        # exp(-xi) = mass / denom
        log_scale = math.log(mass) - math.log(denom)
        w = np.empty(n)
        ok = True
        for i in range(n):
            if i in capped:
                w[i] = cap
                if math.exp(s[i] + log_scale) < cap * (1.0 - 1e-9):
                    ok = False
                    break
            else:
                w[i] = math.exp(s[i] + log_scale)
                if w[i] > cap * (1.0 + 1e-9):
                    ok = False
                    break
        if not ok:
            continue
        obj = float(np.dot(entries, w)) + float(np.sum(w * np.log(w)))
        if best is None or obj < best[1]:
            best = (w, obj)
    if best is None:
        raise RuntimeError("no KKT-consistent capped set found")
    return best


def entropy_of_dense(w_dense):
    """tr(W log W) of a positive semidefinite matrix via Jacobi eigenvalues."""
    vals, _ = jacobi_eigh(w_dense)
    out = 0.0
    for mu in vals:
        if mu > 1e-300:
            out += mu * math.log(mu)
        elif mu < -1e-9:
            raise ValueError("matrix is not positive semidefinite")
    return out


def oracle_embed(x):
    """Symmetric embedding [[0, X^T], [X, 0]] with the q-dimension block first."""
    x = np.asarray(x, dtype=float)
    p, q = x.shape
    out = np.zeros((p + q, p + q))
    out[:q, q:] = x.T
    out[q:, :q] = x
    return out


def spectahedron_objective(dense, scale, varsigma, h_lin):
    """Objective (varsigma*I + E(h)) . W + scale^-1 tr(W log W) on a dense W."""
    n = dense.shape[0]
    g = oracle_embed(h_lin) + varsigma * np.eye(n)
    return float(np.sum(g * dense)) + entropy_of_dense(dense) / scale


def random_capped_density(rng, n, cap_m):
    """Random feasible point of the capped spectahedron, as a dense matrix."""
    basis, _ = np.linalg.qr(rng.standard_normal((n, n)))
    raw = rng.random(n) + 1e-3
    w = raw / raw.sum()
    # push below the cap by repeatedly clipping and renormalizing the rest
    cap = 1.0 / cap_m
    for _ in range(64):
        over = w > cap
        if not np.any(over):
            break
        excess = float(np.sum(w[over] - cap))
        w[over] = cap
        under = ~over
        w[under] += excess * (w[under] / max(float(np.sum(w[under])), 1e-300))
    return (basis * w) @ basis.T
