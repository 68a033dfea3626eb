"""Membership certification, spectrum extraction and chart inversion."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import matrix_balance

from . import numerics as nm
from .chart import ChartPoint, VarietyPoint, canonical_member, canonical_point, standard_a4
from .params import ParamSet, bar, eigendata
from .ratfuncs import in_chart_locus, ut_fn

MEMBERSHIP_TOL = 1e-9
PAIRING_TOL = 1e-8
CLUSTER_TOL = 1e-6
ENTRY_FLOOR = 1e-10


class SpectrumError(ValueError):
    pass


class InversionError(ValueError):
    pass


@dataclass
class MembershipReport:
    product_residual: float
    hecke_residuals: tuple[float, float, float]
    rank_one_defect: int
    a4_annihilator_residual: float
    class_matches: tuple[bool, bool, bool, bool]
    spectrum: list[complex] = field(default_factory=list)
    in_chart_locus: bool = False
    tol: float = MEMBERSHIP_TOL

    @property
    def passed(self) -> bool:
        """On the variety: product identity, quadratic relations, rank-one
        relation and all four classes within tolerance."""
        return (
            self.product_residual <= self.tol
            and max(self.hecke_residuals) <= self.tol
            and self.rank_one_defect == 1
            and all(self.class_matches)
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["spectrum"] = [[z.real, z.imag] for z in self.spectrum]
        d["hecke_residuals"] = list(self.hecke_residuals)
        d["class_matches"] = list(self.class_matches)
        d["passed"] = self.passed
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _quadratic_residual(a: np.ndarray, c: complex) -> float:
    """A - A^-1 = c written as A^2 - c A - 1 = 0, relative; no inversion."""
    one = np.eye(len(a))
    res = a @ a - c * a - one
    na = nm.opnorm(a)
    return float(nm.opnorm(res) / (na * na + abs(c) * na + 1))


def _count_matches(vals: np.ndarray, spec) -> bool:
    """Eigenvalues within CLUSTER_TOL (relative) of each prescribed value
    must occur with exactly the prescribed multiplicity."""
    used = np.zeros(len(vals), dtype=bool)
    for lam, mu in spec.pairs:
        close = np.abs(vals - lam) <= CLUSTER_TOL * max(1.0, abs(lam))
        if np.sum(close & ~used) != mu:
            return False
        used |= close
    return bool(used.all())


def verify_membership(vp: VarietyPoint, tol: float = MEMBERSHIP_TOL) -> MembershipReport:
    p = vp.params
    mats = vp.mats
    one = np.eye(len(vp.A1))
    prod = mats[0] @ mats[1] @ mats[2] @ mats[3]
    norms = [nm.opnorm(a) for a in mats]
    product_residual = float(nm.opnorm(prod - one) / max(1.0, float(np.prod(norms))))
    consts = (bar(p.k0), bar(p.u0), bar(p.un))
    hecke = tuple(_quadratic_residual(a, c) for a, c in zip(mats[:3], consts))

    # rank of t A4^2 - c A4 - 1/t, which is the deformed A4 relation times A4
    t = p.t
    c = p.kn / t - t / p.kn
    A4 = vp.A4
    n4 = norms[3]
    R = t * A4 @ A4 - c * A4 - one / t
    s = np.linalg.svd(R, compute_uv=False)
    scale = abs(t) * n4 * n4 + abs(c) * n4 + 1 / abs(t)
    rank = int(np.sum(s > tol * scale))

    specs = eigendata(p)
    ann = one.copy()
    ann_scale = 1.0
    for lam, _ in specs[3].pairs:
        ann = ann @ (A4 - lam * one)
        ann_scale *= n4 + abs(lam)
    ann_res = float(nm.opnorm(ann) / ann_scale)

    matches = []
    for i, (a, spec) in enumerate(zip(mats, specs)):
        ok = _count_matches(np.linalg.eigvals(a), spec)
        ok = ok and (hecke[i] <= tol if i < 3 else ann_res <= tol)
        matches.append(bool(ok))

    try:
        spectrum = x_spectrum(vp)
        locus = in_chart_locus(spectrum, p)
    except SpectrumError:
        spectrum, locus = [], False
    return MembershipReport(
        product_residual=product_residual,
        hecke_residuals=hecke,
        rank_one_defect=rank,
        a4_annihilator_residual=ann_res,
        class_matches=tuple(matches),
        spectrum=spectrum,
        in_chart_locus=bool(locus),
        tol=tol,
    )


def _pair_reciprocals(vals: np.ndarray, tol: float = PAIRING_TOL) -> list[tuple[int, int]]:
    """Greedy pairing of eigenvalues into (x, 1/x) couples."""
    left = list(range(len(vals)))
    pairs = []
    while left:
        i = left.pop(0)
        if not left:
            raise SpectrumError(f"eigenvalue {vals[i]:.6g} has no reciprocal partner")
        errs = [abs(vals[i] * vals[j] - 1) for j in left]
        m = int(np.argmin(errs))
        if errs[m] > tol * max(1.0, abs(vals[i]), abs(vals[left[m]])):
            raise SpectrumError(f"eigenvalue {vals[i]:.6g} has no reciprocal partner")
        pairs.append((i, left.pop(m)))
    return pairs


def _spectrum_pairs(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, list[tuple[complex, int, int]]]:
    vals, vecs = np.linalg.eig(X)
    out = []
    for i, j in _pair_reciprocals(vals):
        x, inverted = canonical_member(vals[i])
        if abs(x * x - 1) < PAIRING_TOL:
            raise SpectrumError(f"degenerate eigenvalue pair at {x:.6g}")
        big, small = (j, i) if inverted else (i, j)
        out.append((x, big, small))
    out.sort(key=lambda e: (abs(e[0]), float(np.angle(e[0]))))
    return vals, vecs, out


def x_spectrum(vp: VarietyPoint) -> list[complex]:
    """One representative per reciprocal pair of eig(A1 A2), canonical."""
    return [x for x, _, _ in _spectrum_pairs(vp.X)[2]]


def balance(vp: VarietyPoint) -> VarietyPoint:
    """Diagonal gauge transformation equalising row and column norms of
    |A1| + |A2| + |A3| + |A4|.  Flows produce representatives whose entries
    span many orders of magnitude; balancing removes that before any
    eigen-decomposition."""
    M = sum(np.abs(a) for a in vp.mats)
    if not np.all(np.isfinite(M)):
        raise InversionError("quadruple has non-finite entries")
    _, (scale, _) = matrix_balance(M, permute=False, separate=True)
    return VarietyPoint(*((a / scale[:, None]) * scale[None, :] for a in vp.mats), params=vp.params)


def invert_chart(vp: VarietyPoint, check: bool = True, tol: float = 1e-5) -> ChartPoint:
    """Chart coordinates of a point on the chart locus, as the canonical
    W-representative.

    Diagonalise X = A1 A2 in the order (x, 1/x); the remaining diagonal gauge
    is fixed by matching A4 against its chart form (which depends on x only)
    along a spanning tree of its largest entries; then p_i is read off the
    partner entries of A1.
    """
    p = vp.params
    n = p.n
    vp = balance(vp)
    vals, vecs, pairs = _spectrum_pairs(vp.X)
    x = np.array([e[0] for e in pairs])
    order = [e[1] for e in pairs] + [e[2] for e in pairs]
    V = vecs[:, order]
    Vi = np.linalg.inv(V)
    A1 = Vi @ vp.A1 @ V
    A4 = Vi @ vp.A4 @ V
    std = standard_a4(x, p)

    N = 2 * n
    floor = ENTRY_FLOOR * max(nm.opnorm(A4), nm.opnorm(std))
    usable = (np.abs(A4) > floor) & (np.abs(std) > floor)
    np.fill_diagonal(usable, False)
    # An entry of the transformed A4 carries absolute error ~ eps ||A4||, so
    # large entries fix the gauge best: grow a maximum-weight spanning tree
    # (Prim) on |A4_ij|, using either orientation of each edge.
    weight = np.where(usable, np.abs(A4), 0.0)
    g = np.full(N, np.nan + 0j)
    g[0] = 1.0
    done = np.zeros(N, dtype=bool)
    done[0] = True
    for _ in range(N - 1):
        cand = np.where(done[:, None] & ~done[None, :], np.maximum(weight, weight.T), 0.0)
        i, j = np.unravel_index(int(np.argmax(cand)), cand.shape)
        if cand[i, j] == 0:
            raise InversionError("A4 has vanishing off-diagonal entries; point is off the chart locus")
        # g_i A4_ij / g_j = std_ij, or from the transposed entry g_j A4_ji / g_i = std_ji
        if weight[i, j] >= weight[j, i]:
            g[j] = g[i] * A4[i, j] / std[i, j]
        else:
            g[j] = g[i] * std[j, i] / A4[j, i]
        done[j] = True
    A1g = (g[:, None] * A1) / g[None, :]
    # p_i from (A1)_{i,i+n} = ut(x_i) p_i or (A1)_{i+n,i} = ut(1/x_i) / p_i,
    # whichever entry is larger before the gauge fix (smaller relative error)
    pcoords = np.empty(n, dtype=complex)
    for i in range(n):
        up, low = A1g[i, i + n], A1g[i + n, i]
        use_up = abs(A1[i, i + n]) >= abs(A1[i + n, i])
        val = up / ut_fn(x[i], p) if use_up else ut_fn(1 / x[i], p) / low
        if val == 0 or not np.isfinite(val):
            raise InversionError("vanishing anti-diagonal entry of A1; point is off the chart locus")
        pcoords[i] = val
    pt = ChartPoint(pcoords, x, p)
    if check:
        if not pt.in_domain():
            raise InversionError("recovered coordinates lie on the excluded locus")
        A4g = (g[:, None] * A4) / g[None, :]
        mis = nm.opnorm(A4g - std) / max(1.0, nm.opnorm(std))
        if mis > tol:
            raise InversionError(f"gauge-fixed A4 does not match its chart form (mismatch {mis:.3e})")
    return pt


def chart_distance(a: ChartPoint, b: ChartPoint) -> float:
    """Max coordinate-wise distance between canonical representatives,
    relative to max(1, |coordinate|)."""
    if a.params != b.params:
        raise ValueError("points carry different parameters")
    ca, cb = canonical_point(a), canonical_point(b)
    za, zb = ca.coords(), cb.coords()
    return float(np.max(np.abs(za - zb) / np.maximum(1.0, np.abs(za))))


def gauge_distance(vp1: VarietyPoint, vp2: VarietyPoint) -> float:
    """Distance in the quotient: compare chart coordinates of both points."""
    return chart_distance(invert_chart(vp1), invert_chart(vp2))


def random_conjugator(rng: np.random.Generator, size: int, max_cond: float = 100.0) -> np.ndarray:
    """A random complex matrix with condition number at most ``max_cond``."""
    while True:
        g = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
        g = np.eye(size) + 0.5 * g / np.sqrt(size)
        if np.linalg.cond(g) <= max_cond:
            return g
