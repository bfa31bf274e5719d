"""Export to an explicit second-order + semidefinite cone program.

Both formulations admit an equivalent cone program over variables
``(r, s, [t,] vec(X), svec(Y))``:

* a rotated-quadratic bound ``4 r >= ||Lambda X - H||_F^2`` written as the
  second-order cone membership ``(r + 1, r - 1, vec(Lambda X - H))``,
* the trace-norm epigraph through the symmetric embedding ``E(X)``:
  ``Y - E(X) + s I >= 0``, ``Y >= 0``, ``m s + tr(Y) <= t`` (penalized,
  ``t`` a variable with objective weight ``lam``) or ``<= budget``
  (constrained),
* objective ``2 r + lam t`` respectively ``2 r``.

The program is stored as plain affine-map triplets so it can be fed to any
conic solver or checked directly with :func:`verify`.  ``svec`` indexing is
upper-triangle row-major without off-diagonal scaling; variable index -1
denotes the constant term.  :func:`write_cone_file` emits a line-oriented
text form that is byte-deterministic for a given program.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .linalg import as_matrix, embed_eigensystem, thin_svd, trace_norm
from .problem import ConstrainedSpec, PenalizedSpec, ReducedProblem

__all__ = [
    "ConeProgram",
    "ConePoint",
    "ConeCheck",
    "export_penalized",
    "export_constrained",
    "lift_penalized",
    "lift_constrained",
    "verify",
    "write_cone_file",
    "read_cone_file",
    "svec_index",
]

FORMAT_HEADER = "cone-program v1"


def svec_index(i: int, j: int, n: int) -> int:
    """Position of upper-triangle cell (i, j), i <= j, in row-major svec order."""
    if not (0 <= i <= j < n):
        raise ValueError(f"svec cell ({i}, {j}) out of range for dimension {n}")
    return i * n - (i * (i - 1)) // 2 + (j - i)


@dataclass(frozen=True)
class ConeProgram:
    """Explicit cone program.

    ``objective``: list of (var, coeff), minimized.
    ``soc_entries``: (row, var, coeff) triplets of the affine map into the
    second-order cone of dimension ``soc_dim`` (row 0 is the cone head).
    ``psd_entries``: (block, svec_row, var, coeff) for two symmetric blocks
    of order ``psd_dim`` (block 0: Y - E(X) + sI, block 1: Y), required to
    be positive semidefinite.
    ``linear_entries``: (var, coeff) of a single inequality <= 0.
    Variable index -1 denotes the constant 1.
    """

    kind: str
    p: int
    q: int
    num_vars: int
    soc_dim: int
    psd_dim: int
    objective: list[tuple[int, float]]
    soc_entries: list[tuple[int, int, float]]
    psd_entries: list[tuple[int, int, int, float]]
    linear_entries: list[tuple[int, float]]

    def var_layout(self) -> dict[str, int]:
        """Starting index of each variable group."""
        x_off = 3 if self.kind == "penalized" else 2
        return {
            "r": 0,
            "s": 1,
            **({"t": 2} if self.kind == "penalized" else {}),
            "x": x_off,
            "y": x_off + self.p * self.q,
        }


@dataclass(frozen=True)
class ConePoint:
    """Assignment to the cone-program variables in natural shapes."""

    r: float
    s: float
    x: np.ndarray
    y: np.ndarray
    t: Optional[float] = None


@dataclass(frozen=True)
class ConeCheck:
    feasible: bool
    worst_slack: float
    objective: float


def _build(problem: ReducedProblem, kind: str, weight: float, m: int) -> ConeProgram:
    p, q = problem.p, problem.q
    n = problem.embed_dim
    ld = problem.lambda_diag
    h = problem.h
    x_off = 3 if kind == "penalized" else 2
    y_off = x_off + p * q
    num_vars = y_off + n * (n + 1) // 2

    objective = [(0, 2.0)]
    if kind == "penalized":
        objective.append((2, float(weight)))

    # second-order cone: (r + 1, r - 1, vec(Lambda X - H)) column-major
    soc: list[tuple[int, int, float]] = [
        (0, 0, 1.0),
        (0, -1, 1.0),
        (1, 0, 1.0),
        (1, -1, -1.0),
    ]
    for b in range(q):
        for a in range(p):
            row = 2 + b * p + a
            soc.append((row, x_off + b * p + a, float(ld[a])))
            if h[a, b] != 0.0:
                soc.append((row, -1, -float(h[a, b])))

    # PSD block 0: Y - E(X) + s I, block 1: Y
    psd: list[tuple[int, int, int, float]] = []
    for i in range(n):
        for j in range(i, n):
            cell = svec_index(i, j, n)
            psd.append((0, cell, y_off + cell, 1.0))
            if i < q <= j:
                # E(X) upper block is X transposed: entry (i, j) is X[j - q, i]
                psd.append((0, cell, x_off + i * p + (j - q), -1.0))
            if i == j:
                psd.append((0, cell, 1, 1.0))
    for i in range(n):
        for j in range(i, n):
            cell = svec_index(i, j, n)
            psd.append((1, cell, y_off + cell, 1.0))

    # m s + tr(Y) - t <= 0, or m s + tr(Y) - budget <= 0
    linear: list[tuple[int, float]] = [(1, float(m))]
    for i in range(n):
        linear.append((y_off + svec_index(i, i, n), 1.0))
    if kind == "penalized":
        linear.append((2, -1.0))
    else:
        linear.append((-1, -float(weight)))

    return ConeProgram(
        kind=kind,
        p=p,
        q=q,
        num_vars=num_vars,
        soc_dim=p * q + 2,
        psd_dim=n,
        objective=objective,
        soc_entries=soc,
        psd_entries=psd,
        linear_entries=linear,
    )


def export_penalized(spec: PenalizedSpec) -> ConeProgram:
    return _build(spec.problem, "penalized", spec.lam, spec.problem.rank_dim)


def export_constrained(spec: ConstrainedSpec) -> ConeProgram:
    return _build(spec.problem, "constrained", spec.budget, spec.problem.rank_dim)


def _lift_y(x: np.ndarray) -> np.ndarray:
    # Y = sum_i sigma_i f_i f_i^T over the positive-eigenvalue embedding basis
    svd = thin_svd(x)
    eig = embed_eigensystem(svd)
    m = svd.singulars.size
    f_pos = eig.vectors[:, :m]
    return (f_pos * svd.singulars) @ f_pos.T


def lift_penalized(spec: PenalizedSpec, x) -> ConePoint:
    """Feasible cone point matching the penalized objective at ``x``."""
    x = as_matrix(x, "x")
    resid = spec.problem.lambda_diag[:, None] * x - spec.problem.h
    r = 0.25 * float(np.sum(resid * resid))
    return ConePoint(r=r, s=0.0, x=x, y=_lift_y(x), t=trace_norm(x))


def lift_constrained(spec: ConstrainedSpec, x) -> ConePoint:
    """Cone point matching the constrained objective at ``x``.

    Feasible exactly when ``trace_norm(x) <= spec.budget``; :func:`verify`
    reports the violation otherwise.
    """
    x = as_matrix(x, "x")
    resid = spec.problem.lambda_diag[:, None] * x - spec.problem.h
    r = 0.25 * float(np.sum(resid * resid))
    return ConePoint(r=r, s=0.0, x=x, y=_lift_y(x))


def _point_vector(program: ConeProgram, point: ConePoint) -> np.ndarray:
    n = program.psd_dim
    layout = program.var_layout()
    vec = np.zeros(program.num_vars)
    vec[layout["r"]] = point.r
    vec[layout["s"]] = point.s
    if program.kind == "penalized":
        if point.t is None:
            raise ValueError("penalized cone point requires t")
        vec[layout["t"]] = point.t
    x = as_matrix(point.x, "point.x")
    if x.shape != (program.p, program.q):
        raise ValueError(f"point.x has shape {x.shape}, expected {(program.p, program.q)}")
    vec[layout["x"]:layout["x"] + program.p * program.q] = x.flatten(order="F")
    y = as_matrix(point.y, "point.y")
    if y.shape != (n, n):
        raise ValueError(f"point.y has shape {y.shape}, expected {(n, n)}")
    if np.max(np.abs(y - y.T)) > 1e-9 * (1.0 + np.max(np.abs(y))):
        raise ValueError("point.y must be symmetric")
    tri = [y[i, j] for i in range(n) for j in range(i, n)]
    vec[layout["y"]:] = tri
    return vec


def _value(var: int, vec: np.ndarray) -> float:
    return 1.0 if var == -1 else float(vec[var])


def verify(program: ConeProgram, point: ConePoint) -> ConeCheck:
    """Evaluate the stored affine maps at the point and check cone membership.

    Slack convention: second-order slack is ``head - tail_norm``, each
    semidefinite slack is the minimum eigenvalue, linear slack is the
    negated inequality value; feasibility allows ``-1e-6 * (1 + scale)``
    per constraint where scale is that constraint's own magnitude.
    """
    vec = _point_vector(program, point)
    slacks: list[tuple[float, float]] = []

    z = np.zeros(program.soc_dim)
    for row, var, coeff in program.soc_entries:
        z[row] += coeff * _value(var, vec)
    tail = float(np.linalg.norm(z[1:]))
    slacks.append((z[0] - tail, abs(z[0]) + tail))

    for block in (0, 1):
        mat = np.zeros((program.psd_dim, program.psd_dim))
        for blk, cell, var, coeff in program.psd_entries:
            if blk != block:
                continue
            i, j = _cell_coords(cell, program.psd_dim)
            mat[i, j] += coeff * _value(var, vec)
        mat = mat + np.triu(mat, 1).T
        scale = float(np.max(np.abs(mat))) if mat.size else 0.0
        slacks.append((float(np.linalg.eigvalsh(mat)[0]), scale))

    lin = 0.0
    lin_scale = 0.0
    for var, coeff in program.linear_entries:
        term = coeff * _value(var, vec)
        lin += term
        lin_scale += abs(term)
    slacks.append((-lin, lin_scale))

    feasible = all(slack >= -1e-6 * (1.0 + scale) for slack, scale in slacks)
    worst = min(slack for slack, _ in slacks)
    objective = sum(coeff * _value(var, vec) for var, coeff in program.objective)
    return ConeCheck(feasible=feasible, worst_slack=worst, objective=float(objective))


def _cell_coords(cell: int, n: int) -> tuple[int, int]:
    # invert row-major upper-triangle indexing
    i = 0
    row_len = n
    offset = cell
    while offset >= row_len:
        offset -= row_len
        row_len -= 1
        i += 1
    return i, i + offset


def write_cone_file(path, program: ConeProgram) -> None:
    """Serialize to the line-oriented text grammar.

    Grammar (one record per line, single spaces, LF endings, floats via
    ``repr``)::

        cone-program v1
        kind {penalized|constrained}
        dims <p> <q> <num_vars> <soc_dim> <psd_dim>
        objective <count>
        <var> <coeff>            * count
        soc <count>
        <row> <var> <coeff>      * count
        psd <count>
        <block> <row> <var> <coeff>   * count
        linear <count>
        <var> <coeff>            * count

    ``var`` -1 denotes the constant 1.  Output bytes are a pure function
    of the program.
    """
    lines = [
        FORMAT_HEADER,
        f"kind {program.kind}",
        f"dims {program.p} {program.q} {program.num_vars} "
        f"{program.soc_dim} {program.psd_dim}",
        f"objective {len(program.objective)}",
    ]
    lines.extend(f"{var} {coeff!r}" for var, coeff in program.objective)
    lines.append(f"soc {len(program.soc_entries)}")
    lines.extend(f"{row} {var} {coeff!r}" for row, var, coeff in program.soc_entries)
    lines.append(f"psd {len(program.psd_entries)}")
    lines.extend(
        f"{blk} {cell} {var} {coeff!r}" for blk, cell, var, coeff in program.psd_entries
    )
    lines.append(f"linear {len(program.linear_entries)}")
    lines.extend(f"{var} {coeff!r}" for var, coeff in program.linear_entries)
    data = "\n".join(lines) + "\n"
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(data)


def read_cone_file(path) -> ConeProgram:
    """Parse a file produced by :func:`write_cone_file`."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [line.rstrip("\n") for line in fh]
    pos = 0

    def take() -> str:
        nonlocal pos
        if pos >= len(lines):
            raise ValueError("truncated cone file")
        line = lines[pos]
        pos += 1
        return line

    if take() != FORMAT_HEADER:
        raise ValueError("not a cone-program v1 file")
    kind_line = take().split()
    if len(kind_line) != 2 or kind_line[0] != "kind":
        raise ValueError("malformed kind line")
    kind = kind_line[1]
    if kind not in ("penalized", "constrained"):
        raise ValueError(f"unknown program kind {kind!r}")
    dims = take().split()
    if len(dims) != 6 or dims[0] != "dims":
        raise ValueError("malformed dims line")
    p, q, num_vars, soc_dim, psd_dim = (int(tok) for tok in dims[1:])

    def section(name: str, width: int):
        header = take().split()
        if len(header) != 2 or header[0] != name:
            raise ValueError(f"expected {name} section header")
        count = int(header[1])
        out = []
        for _ in range(count):
            toks = take().split()
            if len(toks) != width:
                raise ValueError(f"malformed {name} entry")
            out.append(tuple(int(t) for t in toks[:-1]) + (float(toks[-1]),))
        return out

    objective = [(v, c) for v, c in section("objective", 2)]
    soc = [(r, v, c) for r, v, c in section("soc", 3)]
    psd = [(b, r, v, c) for b, r, v, c in section("psd", 4)]
    linear = [(v, c) for v, c in section("linear", 2)]
    if pos != len(lines):
        raise ValueError("trailing content in cone file")
    return ConeProgram(
        kind=kind,
        p=p,
        q=q,
        num_vars=num_vars,
        soc_dim=soc_dim,
        psd_dim=psd_dim,
        objective=objective,
        soc_entries=soc,
        psd_entries=psd,
        linear_entries=linear,
    )
