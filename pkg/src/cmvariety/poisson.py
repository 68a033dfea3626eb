"""Two independent Poisson brackets on the variety.

* The chart bracket: log-canonical in (P, X), {P_i, X_j} = delta_ij P_i X_j,
  evaluated on functions of a chart point from contour-integral partials.
* The Fock-Rosly bracket on triples (A, B, C) of loop holonomies on a
  one-vertex graph, built from the standard r-matrix of gl_N.

Tensor convention: (M (x) N) has entry M_ab N_cd at row a*N + c and column
b*N + d, which is exactly ``np.kron(M, N)``; r21 swaps the two tensor slots.
For N = 2, E_12 (x) E_21 has its single 1 at row 0*2+1 = 1, column 1*2+0 = 2.
"""

from __future__ import annotations

import csv
import io
import itertools
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import numerics as nm
from .chart import ChartPoint, VarietyPoint, build_matrices
from .duality import second_chart_coords

REL_STEP = 1e-6
LOOPS = ("A", "B", "C")

# Order of the half-edges around the vertex: C is outermost, then B, then A.
# Chosen so that the AA and AB brackets take their displayed form and the
# chart/Fock-Rosly comparison holds for every pair.
HALF_EDGE_ORDER = ("outC", "outB", "outA", "inA", "inB", "inC")


class PoissonError(ValueError):
    pass


# --------------------------------------------------------------------------
# function names


_NAME = re.compile(r"^(h|H)([1-9][0-9]*)$")


def parse_name(name: str) -> tuple[str, int]:
    """'h3' -> ('h', 3): tr X^3; 'H2' -> ('H', 2): tr Y^2."""
    m = _NAME.match(name.strip())
    if not m:
        raise PoissonError(f"malformed function name {name!r}; expected h<k> or H<k>")
    return m.group(1), int(m.group(2))


def default_pairs(n: int) -> list[tuple[str, str]]:
    names = [f"h{k}" for k in range(1, n + 1)] + [f"H{k}" for k in range(1, n + 1)]
    return list(itertools.combinations(names, 2))


def parse_pairs(text: str) -> list[tuple[str, str]]:
    """'h1:H1,H1:H2' -> [('h1', 'H1'), ('H1', 'H2')]."""
    out = []
    for item in text.split(","):
        parts = item.split(":")
        if len(parts) != 2:
            raise PoissonError(f"malformed pair {item!r}; expected f:g")
        for part in parts:
            parse_name(part)
        out.append((parts[0].strip(), parts[1].strip()))
    if not out:
        raise PoissonError("empty pair list")
    return out


def chart_function(name: str) -> Callable[[ChartPoint], complex]:
    """tr X^k or tr Y^k evaluated on the quadruple built at a chart point."""
    kind, k = parse_name(name)

    def f(pt: ChartPoint) -> complex:
        vp = build_matrices(pt, check=False)
        m = vp.X if kind == "h" else vp.Y
        return complex(np.trace(np.linalg.matrix_power(m, k)))

    f.__name__ = name
    return f


# --------------------------------------------------------------------------
# chart bracket


CONTOUR_POINTS = 32


def _pole_distance(pt: ChartPoint, which: str, i: int) -> float:
    """Distance from coordinate i to the nearest pole of the chart matrices
    as a function of that coordinate alone."""
    if which == "p":
        return abs(pt.p[i])
    x = pt.x
    others = np.delete(x, i)
    cands = np.concatenate([[0.0, 1.0, -1.0], others, 1 / others])
    return float(np.min(np.abs(x[i] - cands)))


def _shifted(pt: ChartPoint, which: str, i: int, dz: complex) -> ChartPoint:
    coords = (pt.p if which == "p" else pt.x).copy()
    coords[i] += dz
    return pt.replace_coords(**{which: coords})


def chart_gradient(
    f: Callable[[ChartPoint], complex],
    pt: ChartPoint,
    method: str = "contour",
    rel_step: float = REL_STEP,
) -> tuple[np.ndarray, np.ndarray]:
    """Partials (df/dp, df/dx) of a function holomorphic in each coordinate.

    ``central``: real-step central differences with step rel_step*|z|.
    ``contour``: the Cauchy integral for f' by the trapezoid rule on a circle
    of radius a quarter of the distance to the nearest pole; the error decays
    like 4**-CONTOUR_POINTS, so there is no step/roundoff trade-off.
    """
    if method not in ("contour", "central"):
        raise PoissonError(f"unknown differentiation method {method!r}")
    n = pt.n
    grads = {"p": np.empty(n, dtype=complex), "x": np.empty(n, dtype=complex)}
    roots = np.exp(2j * np.pi * np.arange(CONTOUR_POINTS) / CONTOUR_POINTS)
    try:
        for which, out in grads.items():
            coords = pt.p if which == "p" else pt.x
            for i in range(n):
                if method == "central":
                    h = rel_step * abs(coords[i])
                    out[i] = (f(_shifted(pt, which, i, h)) - f(_shifted(pt, which, i, -h))) / (2 * h)
                else:
                    r = 0.25 * _pole_distance(pt, which, i)
                    vals = np.array([f(_shifted(pt, which, i, r * w)) for w in roots])
                    out[i] = np.sum(vals / roots) / (CONTOUR_POINTS * r)
    except (ValueError, ZeroDivisionError) as exc:
        raise PoissonError(f"differentiation stencil left the chart domain: {exc}") from exc
    return grads["p"], grads["x"]


def bracket_from_gradients(pt: ChartPoint, gf, gg) -> complex:
    fp, fx = gf
    gp, gx = gg
    return complex(np.sum(pt.p * pt.x * (fp * gx - fx * gp)))


def bracket_chart(f, g, pt: ChartPoint, method: str = "contour", rel_step: float = REL_STEP) -> complex:
    """sum_i p_i x_i (df/dp_i dg/dx_i - df/dx_i dg/dp_i)."""
    return bracket_from_gradients(pt, chart_gradient(f, pt, method, rel_step), chart_gradient(g, pt, method, rel_step))


def bracket_scale(pt: ChartPoint, gf, gg) -> float:
    """Sum of the moduli of the terms of bracket_from_gradients: the size
    against which cancellation to zero is judged in floating point."""
    fp, fx = gf
    gp, gx = gg
    w = np.abs(pt.p * pt.x)
    return float(np.sum(w * (np.abs(fp * gx) + np.abs(fx * gp))))


@dataclass(frozen=True)
class InvolutivityRow:
    f: str
    g: str
    value: complex
    scale: float

    @property
    def rel_residual(self) -> float:
        return abs(self.value) / max(1.0, self.scale)


def involutivity_check(pt: ChartPoint, method: str = "contour") -> list[InvolutivityRow]:
    """{h_k, h_l} and {H_k, H_l} for all k < l <= n, each gradient computed once."""
    n = pt.params.n
    grads = {}
    for kind in "hH":
        for k in range(1, n + 1):
            grads[f"{kind}{k}"] = chart_gradient(chart_function(f"{kind}{k}"), pt, method)
    rows = []
    for kind in "hH":
        for k in range(1, n + 1):
            for l in range(k + 1, n + 1):
                a, b = grads[f"{kind}{k}"], grads[f"{kind}{l}"]
                rows.append(InvolutivityRow(f"{kind}{k}", f"{kind}{l}", bracket_from_gradients(pt, a, b), bracket_scale(pt, a, b)))
    return rows


# --------------------------------------------------------------------------
# r-matrix and Fock-Rosly bracket


@dataclass(frozen=True)
class RMatrix:
    N: int
    r: np.ndarray = field(init=False, repr=False)
    r21: np.ndarray = field(init=False, repr=False)
    skew: np.ndarray = field(init=False, repr=False)
    sym: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        N = self.N
        r = np.zeros((N * N, N * N))
        for i in range(N):
            r[i * N + i, i * N + i] = 0.5
            for j in range(i + 1, N):
                # E_ij (x) E_ji: row (i, j), column (j, i)
                r[i * N + j, j * N + i] = 1.0
        r21 = swap_slots(r, N)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "r21", r21)
        object.__setattr__(self, "skew", 0.5 * (r - r21))
        object.__setattr__(self, "sym", 0.5 * (r + r21))


def swap_slots(m: np.ndarray, N: int) -> np.ndarray:
    """Exchange the two tensor factors: P m P with P the flip."""
    return m.reshape(N, N, N, N).transpose(1, 0, 3, 2).reshape(N * N, N * N)


@dataclass(frozen=True)
class GraphConnection:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        shapes = {nm.as_cmatrix(getattr(self, k)).shape for k in LOOPS}
        if len(shapes) != 1 or len(next(iter(shapes))) != 2 or len(set(next(iter(shapes)))) != 1:
            raise PoissonError("loop holonomies must be square of equal size")
        for k in LOOPS:
            object.__setattr__(self, k, nm.as_cmatrix(getattr(self, k)))

    @property
    def N(self) -> int:
        return len(self.A)

    def loop(self, name: str) -> np.ndarray:
        if name not in LOOPS:
            raise PoissonError(f"unknown loop {name!r}")
        return getattr(self, name)

    def replace(self, name: str, m: np.ndarray) -> "GraphConnection":
        d = {k: getattr(self, k) for k in LOOPS}
        d[name] = m
        return GraphConnection(**d)

    def conjugate(self, g: np.ndarray) -> "GraphConnection":
        gi = nm.inv(g)
        return GraphConnection(*(g @ getattr(self, k) @ gi for k in LOOPS))

    def well_conditioned(self, max_cond: float = 1e8) -> "GraphConnection":
        """The same point of the quotient in the eigenbasis of Y = C^-1 A.

        Brackets of conjugation-invariant functions do not depend on the
        representative, but in a strongly non-normal gauge the r-matrix sum
        cancels terms many orders larger than its value.
        """
        try:
            _, vecs = np.linalg.eig(nm.inv(self.C) @ self.A)
        except (np.linalg.LinAlgError, nm.NumericsError):
            return self
        vecs = vecs / np.linalg.norm(vecs, axis=0)
        if not np.all(np.isfinite(vecs)) or np.linalg.cond(vecs) > max_cond:
            return self
        return self.conjugate(np.linalg.inv(vecs))

    @classmethod
    def from_variety(cls, vp: VarietyPoint) -> "GraphConnection":
        """A = A1, B = A1 A2 = X, C = A4^-1, so that C^-1 A = Y."""
        return cls(A=vp.A1, B=vp.X, C=nm.inv(vp.A4))


def _rho(rm: RMatrix, h1: str, h2: str) -> np.ndarray:
    if h1 == h2:
        return rm.skew
    if HALF_EDGE_ORDER.index(h1) < HALF_EDGE_ORDER.index(h2):
        return rm.r
    return -rm.r21


def fr_tensor(conn: GraphConnection, L1: str, L2: str, rm: RMatrix | None = None) -> np.ndarray:
    """{L1 (x) L2} as an N^2 x N^2 array; entry ((a,c),(b,d)) = {L1_ab, L2_cd}.

    Each loop leaves the vertex at its "out" half-edge and returns at its
    "in" half-edge; every pair of half-edges contributes one term.
    """
    N = conn.N
    rm = rm or RMatrix(N)
    U, V = conn.loop(L1), conn.loop(L2)
    one = np.eye(N)
    UV = np.kron(U, V)
    U1 = np.kron(U, one)
    V2 = np.kron(one, V)
    out = np.zeros((N * N, N * N), dtype=complex)
    for e1 in ("in", "out"):
        for e2 in ("in", "out"):
            rho = _rho(rm, e1 + L1, e2 + L2)
            if e1 == "in" and e2 == "in":
                out += rho @ UV
            elif e1 == "out" and e2 == "out":
                out += UV @ rho
            elif e1 == "in":
                out -= V2 @ rho @ U1
            else:
                out -= U1 @ rho @ V2
    return out


def fr_entry_bracket(conn: GraphConnection, which: tuple[str, str], idx: tuple[int, int, int, int]) -> complex:
    """{L1_ab, L2_cd} for which = (L1, L2) and idx = (a, b, c, d), 0-based."""
    N = conn.N
    a, b, c, d = idx
    if not all(0 <= i < N for i in idx):
        raise PoissonError(f"index {idx} out of range for size {N}")
    return complex(fr_tensor(conn, *which)[a * N + c, b * N + d])


def fr_tensors(conn: GraphConnection) -> dict[tuple[str, str], np.ndarray]:
    rm = RMatrix(conn.N)
    N = conn.N
    return {(l1, l2): fr_tensor(conn, l1, l2, rm).reshape(N, N, N, N) for l1 in LOOPS for l2 in LOOPS}


# --------------------------------------------------------------------------
# functions of a graph connection


@dataclass(frozen=True)
class TraceWord:
    """tr of a product of letters (loop, +-1), e.g. tr (C^-1 A)^k."""

    letters: tuple[tuple[str, int], ...]

    def matrices(self, conn: GraphConnection) -> list[np.ndarray]:
        return [conn.loop(l) if e == 1 else nm.inv(conn.loop(l)) for l, e in self.letters]

    def __call__(self, conn: GraphConnection) -> complex:
        out = np.eye(conn.N)
        for m in self.matrices(conn):
            out = out @ m
        return complex(np.trace(out))

    def gradient(self, conn: GraphConnection) -> dict[str, np.ndarray]:
        """Exact partials d tr(W)/dL_ab: each occurrence W = Lft L R adds
        (R Lft)_ba, each occurrence of L^-1 adds -(L^-1 R Lft L^-1)_ba."""
        N = conn.N
        mats = self.matrices(conn)
        grads = {k: np.zeros((N, N), dtype=complex) for k in LOOPS}
        prefix = [np.eye(N)]
        for m in mats:
            prefix.append(prefix[-1] @ m)
        suffix = [np.eye(N)]
        for m in reversed(mats):
            suffix.append(m @ suffix[-1])
        suffix = suffix[::-1]
        for pos, (l, e) in enumerate(self.letters):
            cyc = suffix[pos + 1] @ prefix[pos]
            if e == 1:
                grads[l] += cyc.T
            else:
                mi = mats[pos]
                grads[l] -= (mi @ cyc @ mi).T
        return grads


def trace_word(name: str) -> TraceWord:
    """h<k> -> tr B^k, H<k> -> tr (C^-1 A)^k."""
    kind, k = parse_name(name)
    if kind == "h":
        return TraceWord((("B", 1),) * k)
    return TraceWord((("C", -1), ("A", 1)) * k)


def numeric_gradient(F: Callable[[GraphConnection], complex], conn: GraphConnection, rel_step: float = REL_STEP):
    N = conn.N
    grads = {}
    for l in LOOPS:
        M = conn.loop(l)
        g = np.empty((N, N), dtype=complex)
        for a in range(N):
            for b in range(N):
                h = rel_step * max(1.0, abs(M[a, b]))
                Mp = M.copy()
                Mm = M.copy()
                Mp[a, b] += h
                Mm[a, b] -= h
                g[a, b] = (F(conn.replace(l, Mp)) - F(conn.replace(l, Mm))) / (2 * h)
        grads[l] = g
    return grads


def bracket_fr(F, G, conn: GraphConnection, exact: bool | None = None, rel_step: float = REL_STEP) -> complex:
    """sum over entries dF/dL1_ab {L1_ab, L2_cd} dG/dL2_cd.

    TraceWord arguments use their exact gradient unless ``exact=False``;
    other callables are differentiated numerically.  Terms are summed in a
    fixed loop order.
    """

    def grad(fn):
        if isinstance(fn, TraceWord) and exact is not False:
            return fn.gradient(conn)
        return numeric_gradient(fn, conn, rel_step)

    gF, gG = grad(F), grad(G)
    tens = fr_tensors(conn)
    total = 0j
    for l1 in LOOPS:
        for l2 in LOOPS:
            total += complex(np.einsum("ab,acbd,cd->", gF[l1], tens[(l1, l2)], gG[l2]))
    return total


def matrix_bracket(conn: GraphConnection, L: str, F) -> np.ndarray:
    """The matrix {L_ab, F} for a function F of the connection."""
    gF = F.gradient(conn) if isinstance(F, TraceWord) else numeric_gradient(F, conn)
    tens = fr_tensors(conn)
    return sum(np.einsum("acbd,cd->ab", tens[(L, l2)], gF[l2]) for l2 in LOOPS)


# --------------------------------------------------------------------------
# comparison


@dataclass(frozen=True)
class BracketRow:
    f: str
    g: str
    chart: complex
    fr: complex
    scale: float = 0.0

    @property
    def abs_diff(self) -> float:
        return abs(self.chart - self.fr)

    @property
    def rel_diff(self) -> float:
        return self.abs_diff / max(1.0, abs(self.chart), abs(self.fr))

    @property
    def scaled_diff(self) -> float:
        """Difference relative to the size of the chart-bracket terms; the
        meaningful measure when the bracket cancels to zero among large terms."""
        return self.abs_diff / max(1.0, abs(self.chart), abs(self.fr), self.scale)


def compare_brackets(
    pt: ChartPoint,
    pairs: Sequence[tuple[str, str]] | None = None,
    exact: bool = True,
    method: str = "contour",
) -> list[BracketRow]:
    """Chart bracket and Fock-Rosly bracket of the named trace functions.

    The graph connection is A = A1, B = X, C = A4^-1, moved to a
    well-conditioned gauge before the r-matrix sum.
    """
    pairs = default_pairs(pt.n) if pairs is None else pairs
    conn = GraphConnection.from_variety(build_matrices(pt)).well_conditioned()
    grads = {}
    for name in sorted({name for pair in pairs for name in pair}):
        grads[name] = chart_gradient(chart_function(name), pt, method)
    rows = []
    for f, g in pairs:
        chart = bracket_from_gradients(pt, grads[f], grads[g])
        fr = bracket_fr(trace_word(f), trace_word(g), conn, exact=exact)
        rows.append(BracketRow(f, g, chart, fr, bracket_scale(pt, grads[f], grads[g])))
    return rows


def brackets_agree(rows: Sequence[BracketRow], tol: float = 1e-6) -> bool:
    return all(row.rel_diff < tol for row in rows)


@dataclass(frozen=True)
class AntiPoissonRow:
    a: int
    b: int
    tau: complex
    sigma: complex

    @property
    def abs_diff(self) -> float:
        """|B' + B|: zero when the duality flips the sign of the bracket."""
        return abs(self.sigma + self.tau)

    @property
    def rel_diff(self) -> float:
        return self.abs_diff / max(1.0, abs(self.tau), abs(self.sigma))


def anti_poisson_check(pt: ChartPoint, degrees: Sequence[tuple[int, int]] | None = None) -> list[AntiPoissonRow]:
    """Compare {tr Y^a, tr X^b} in the tau-chart at pt with
    {tr X'^a, tr Y'^b} in the sigma-chart at the dual coordinates."""
    n = pt.n
    degrees = list(itertools.product(range(1, n + 1), repeat=2)) if degrees is None else degrees
    dual_pt = second_chart_coords(build_matrices(pt))
    deg = sorted({d for pair in degrees for d in pair})
    tau_g = {(kind, d): chart_gradient(chart_function(f"{kind}{d}"), pt) for kind in "hH" for d in deg}
    sig_g = {(kind, d): chart_gradient(chart_function(f"{kind}{d}"), dual_pt) for kind in "hH" for d in deg}
    rows = []
    for a, b in degrees:
        tau = bracket_from_gradients(pt, tau_g[("H", a)], tau_g[("h", b)])
        sigma = bracket_from_gradients(dual_pt, sig_g[("h", a)], sig_g[("H", b)])
        rows.append(AntiPoissonRow(a, b, tau, sigma))
    return rows


def _fmt(x: float) -> str:
    return f"{x:.16e}"


BRACKET_CSV_HEADER = ["trial", "f", "g", "chart_value_re", "chart_value_im", "fr_value_re", "fr_value_im", "abs_diff"]


def bracket_csv(rows_by_trial: Sequence[Sequence[BracketRow]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BRACKET_CSV_HEADER)
    for trial, rows in enumerate(rows_by_trial):
        for row in rows:
            w.writerow(
                [trial, row.f, row.g]
                + [_fmt(v) for v in (row.chart.real, row.chart.imag, row.fr.real, row.fr.imag, row.abs_diff)]
            )
    return buf.getvalue()
