"""The explicit coordinate chart: from (P, X) to a quadruple of 2n x 2n
matrices with A1 A2 A3 A4 = 1 in the prescribed conjugacy classes.

Index convention: coordinates are extended to 2n entries with
``x[i + n] = 1 / x[i]`` and ``p[i + n] = 1 / p[i]`` (0-based here), and
index i+n is called the partner of i.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import numerics as nm
from .params import ParamSet, bar, eigendata, gamma
from .ratfuncs import (
    ExtCoords,
    a_fn,
    b_fn,
    delta,
    delta_tau,
    in_chart_locus,
    u_fn,
    ut_fn,
    vt_fn,
)

CHECK_TOL = 1e-9
EIG_MATCH_TOL = 1e-8


class ChartError(ValueError):
    pass


# --------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class ChartPoint:
    p: np.ndarray
    x: np.ndarray
    params: ParamSet

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.p, dtype=complex)).copy()
        x = np.atleast_1d(np.asarray(self.x, dtype=complex)).copy()
        if p.shape != (self.params.n,) or x.shape != (self.params.n,):
            raise ChartError(f"expected {self.params.n} P- and X-coordinates")
        if np.any(p == 0) or np.any(x == 0) or not (np.all(np.isfinite(p)) and np.all(np.isfinite(x))):
            raise ChartError("chart coordinates must be finite and nonzero")
        p.flags.writeable = False
        x.flags.writeable = False
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.params.n

    def in_domain(self) -> bool:
        return in_chart_locus(self.x, self.params)

    def coords(self) -> np.ndarray:
        return np.concatenate([self.p, self.x])

    def replace_coords(self, p=None, x=None) -> "ChartPoint":
        return ChartPoint(self.p if p is None else p, self.x if x is None else x, self.params)

    def to_dict(self) -> dict:
        return {
            "p": [[float(z.real), float(z.imag)] for z in self.p],
            "x": [[float(z.real), float(z.imag)] for z in self.x],
            "params": self.params.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChartPoint":
        params = ParamSet.from_dict(d["params"])
        return cls(
            p=[complex(*z) for z in d["p"]],
            x=[complex(*z) for z in d["x"]],
            params=params,
        )


@dataclass(frozen=True)
class VarietyPoint:
    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray
    A4: np.ndarray
    params: ParamSet

    def __post_init__(self):
        size = 2 * self.params.n
        for name in ("A1", "A2", "A3", "A4"):
            a = nm.as_cmatrix(getattr(self, name)).copy()
            if a.shape != (size, size):
                raise ChartError(f"{name} has shape {a.shape}, expected {(size, size)}")
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    @property
    def mats(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return (self.A1, self.A2, self.A3, self.A4)

    @property
    def X(self) -> np.ndarray:
        return self.A1 @ self.A2

    @property
    def Y(self) -> np.ndarray:
        return self.A4 @ self.A1

    @property
    def T(self) -> np.ndarray:
        return self.A2

    def conjugate(self, g: np.ndarray) -> "VarietyPoint":
        gi = nm.inv(g)
        return VarietyPoint(*(g @ a @ gi for a in self.mats), params=self.params)

    def to_dict(self) -> dict:
        def enc(a):
            return [[[float(f"{z.real:.17g}"), float(f"{z.imag:.17g}")] for z in row] for row in a]

        return {**{f"A{i + 1}": enc(a) for i, a in enumerate(self.mats)}, "params": self.params.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "VarietyPoint":
        def dec(rows):
            return np.array([[complex(re, im) for re, im in row] for row in rows])

        return cls(*(dec(d[f"A{i}"]) for i in range(1, 5)), params=ParamSet.from_dict(d["params"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "VarietyPoint":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class AltForm:
    X: np.ndarray
    Y: np.ndarray
    T: np.ndarray
    v: np.ndarray
    w: np.ndarray
    params: ParamSet

    def residuals(self) -> dict[str, float]:
        """Relative residuals of the five defining relations."""
        p = self.params
        X, Y, T = self.X, self.Y, self.T
        Xi, Yi, Ti = nm.inv(X), nm.inv(Y), nm.inv(T)
        one = np.eye(len(X))
        out = {}
        out["T"] = _rel(T - Ti - bar(p.u0) * one, T, Ti)
        out["XT"] = _rel(X @ Ti - T @ Xi - bar(p.k0) * one, X @ Ti, T @ Xi)
        out["TY"] = _rel(Ti @ Yi - Y @ T - bar(p.un) * one, Ti @ Yi, Y @ T)
        lhs = p.t * Y @ T @ Xi - X @ Ti @ Yi / p.t
        rhs = (p.kn / p.t - p.t / p.kn) * one + (p.t - 1 / p.t) * np.outer(self.v, self.w)
        out["YTX"] = _rel(lhs - rhs, lhs, rhs)
        g = gamma(p)
        out["wv"] = abs(complex(self.w @ self.v) - g) / max(1.0, abs(g))
        return out


def _rel(residual: np.ndarray, *terms: np.ndarray) -> float:
    scale = sum(nm.opnorm(np.atleast_2d(t)) for t in terms)
    return float(nm.opnorm(np.atleast_2d(residual)) / max(scale, 1.0))


# --------------------------------------------------------------------------
# construction


def _ext(pt: ChartPoint) -> ExtCoords:
    return ExtCoords.extend(pt.x, pt.p)


def _col_products(X: np.ndarray, t: complex) -> np.ndarray:
    """prod[i, j] = product over k outside the classes of i and j of a(1/(X_j X_k))."""
    N = len(X)
    n = N // 2
    out = np.ones((N, N), dtype=complex)
    for i in range(N):
        for j in range(N):
            if i == j:
                continue
            ks = [k for k in range(N) if (k - i) % n and (k - j) % n]
            if ks:
                out[i, j] = np.prod(a_fn(1 / (X[j] * X[ks]), t))
    return out


def _a4_pair(X: np.ndarray, p: ParamSet) -> tuple[np.ndarray, np.ndarray]:
    """A4 and its inverse, both from closed-form entries."""
    N = len(X)
    n = N // 2
    t = p.t
    prods = _col_products(X, t)
    A4 = np.zeros((N, N), dtype=complex)
    A4i = np.zeros((N, N), dtype=complex)
    uj = u_fn(1 / X, p)
    for i in range(N):
        for j in range(N):
            if i == j:
                continue
            if (i - j) % n == 0:
                A4[i, j] = A4i[i, j] = uj[j] * prods[i, j]
            else:
                aij = a_fn(X[i] / X[j], t)
                A4[i, j] = uj[j] * b_fn(X[i] * X[j], t) * aij * prods[i, j]
                A4i[i, j] = -uj[j] * b_fn(1 / (X[i] * X[j]), t) * aij * prods[i, j]
    np.fill_diagonal(A4, 0)
    np.fill_diagonal(A4i, 0)
    d4 = p.kn * t ** (2 * n - 2) - A4.sum(axis=1)
    d4i = t ** (2 - 2 * n) / p.kn - A4i.sum(axis=1)
    A4[np.diag_indices(N)] = d4
    A4i[np.diag_indices(N)] = d4i
    return A4, A4i


def standard_a4(x: Sequence[complex], p: ParamSet) -> np.ndarray:
    """A4 in chart gauge; it depends on X only."""
    return _a4_pair(ExtCoords.extend(x).x, p)[0]


def build_matrices(pt: ChartPoint, check: bool = True, tol: float = CHECK_TOL) -> VarietyPoint:
    """Quadruple (A1, A2, A3, A4) at the chart point (P, X).

    A1, A2 are supported on the diagonal and on the partner positions
    (i, i +- n), with (A1)_{i,i+n} = ut(x_i) p_i; A3 = X^-1 A4^-1 with A4 and
    A4^-1 both given entrywise.  Placing p_i (rather than 1/p_i) in A1 makes
    the log-canonical chart bracket agree with the Fock-Rosly bracket and
    makes the matrix flow of tr X^k move p_i by exp(+k s (x_i^k - x_i^-k)).
    The off-diagonal product in A3/A4 runs over the column index j: the
    identities below fail for n >= 2 if it is taken over the row index.
    """
    if not pt.in_domain():
        raise ChartError(
            f"chart point lies on the excluded locus (delta*delta_tau = {delta(pt.x) * delta_tau(pt.x, pt.params):.3e})"
        )
    params = pt.params
    e = _ext(pt)
    X, P = e.x, e.p
    N = len(X)
    n = N // 2
    ut = ut_fn(X, params)
    vt = vt_fn(X, params)
    A1 = np.diag(vt).astype(complex)
    A2 = np.diag((vt - bar(params.k0)) * X).astype(complex)
    for i in range(N):
        j = (i + n) % N
        A1[i, j] = ut[i] * P[i]
        A2[i, j] = ut[i] * P[i] / X[i]
    A4, A4i = _a4_pair(X, params)
    A3 = A4i / X[:, None]
    vp = VarietyPoint(A1, A2, A3, A4, params)
    if check:
        res = identity_residuals(vp)
        bad = {k: v for k, v in res.items() if k != "a4_rank" and v > tol}
        if bad or res["a4_rank"] != 1:
            raise ChartError(f"chart identities failed: {res}")
    return vp


def build_vw(pt: ChartPoint, check: bool = True, tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """The all-ones column v and the row w of the rank-one identity for A4.

    w_i = u(1/x_i) * prod over k outside the class of i of a(1/(x_i x_k)).
    Taking k over the 2n extended indices gives the same factors as taking
    k over 1..n with a(x_k/x_i) a(1/(x_k x_i)), so the two possible readings
    of the product range coincide.
    """
    params = pt.params
    X = _ext(pt).x
    N = len(X)
    n = N // 2
    w = np.empty(N, dtype=complex)
    for i in range(N):
        ks = [k for k in range(N) if (k - i) % n]
        w[i] = u_fn(1 / X[i], params) * (np.prod(a_fn(1 / (X[i] * X[ks]), params.t)) if ks else 1)
    v = np.ones(N, dtype=complex)
    if check:
        vp = build_matrices(pt, check=False)
        res = vw_residuals(vp, v, w)
        if max(res.values()) > tol:
            raise ChartError(f"rank-one pair failed its oracles: {res}")
    return v, w


def vw_residuals(vp: VarietyPoint, v: np.ndarray, w: np.ndarray) -> dict[str, float]:
    """w v = gamma, and the A4 relation with its right-hand side (t - 1/t) v w,
    multiplied through by A4 so that no inverse is formed:
    t A4^2 - c A4 - 1/t = (t - 1/t) v (w A4)."""
    p = vp.params
    t = p.t
    one = np.eye(len(v))
    A4 = vp.A4
    c = p.kn / t - t / p.kn
    lhs = t * A4 @ A4 - c * A4 - one / t
    rhs = (t - 1 / t) * np.outer(v, w @ A4)
    g = gamma(p)
    return {
        "wv": abs(complex(w @ v) - g) / max(1.0, abs(g)),
        "rank_one": _rel(lhs - rhs, t * A4 @ A4, c * A4, one / t),
    }


def identity_residuals(vp: VarietyPoint) -> dict[str, float]:
    """Relative residuals of the product identity and the quadratic
    relations, plus the numerical rank of the deformed A4 relation.

    Every relation is used in its polynomial form (A - A^-1 = c becomes
    A^2 - c A - 1 = 0), so ill-conditioned representatives are measured
    without a numerical inverse.
    """
    p = vp.params
    A1, A2, A3, A4 = vp.mats
    one = np.eye(len(A1))
    prod = A1 @ A2 @ A3 @ A4
    out = {
        "product": float(nm.opnorm(prod - one) / max(1.0, np.prod([nm.opnorm(a) for a in vp.mats]))),
    }
    for name, a, c in (
        ("hecke1", A1, bar(p.k0)),
        ("hecke2", A2, bar(p.u0)),
        ("hecke3", A3, bar(p.un)),
    ):
        out[name] = _rel(a @ a - c * a - one, a @ a, c * a, one)
    t = p.t
    c = p.kn / t - t / p.kn
    R = t * A4 @ A4 - c * A4 - one / t
    scale = nm.opnorm(t * A4 @ A4) + nm.opnorm(c * A4) + 1 / abs(t)
    s = np.linalg.svd(R, compute_uv=False)
    out["a4_rank"] = int(np.sum(s > 1e-9 * max(scale, 1.0)))
    out["a4_second_sv"] = float(s[1] / max(scale, 1.0)) if len(s) > 1 else 0.0
    return out


def eigendata_residual(vp: VarietyPoint) -> float:
    """Largest relative mismatch between each A_i's spectrum and its class,
    matching eigenvalues one-to-one."""
    worst = 0.0
    for a, spec in zip(vp.mats, eigendata(vp.params)):
        got = np.linalg.eigvals(a)
        want = spec.eigenvalues
        cost = np.abs(got[:, None] - want[None, :]) / np.maximum(1.0, np.abs(want))[None, :]
        r, c = linear_sum_assignment(cost)
        worst = max(worst, float(cost[r, c].max()))
    return worst


def to_alt_form(vp: VarietyPoint, vw: tuple[np.ndarray, np.ndarray] | None = None, gap: float = 1e-6) -> AltForm:
    """(X, Y, T, v, w) = (A1 A2, A4 A1, A2, v, w).

    Without ``vw`` the pair is taken from A4: v spans the eigenline of the
    simple eigenvalue kn t^(2n-2) and w is the dual functional scaled to
    w v = gamma.
    """
    p = vp.params
    if vw is None:
        target = p.kn * p.t ** (2 * p.n - 2)
        vals, vecs = np.linalg.eig(vp.A4)
        dist = np.abs(vals - target) / max(1.0, abs(target))
        i0 = int(np.argmin(dist))
        others = np.delete(dist, i0)
        if dist[i0] > 1e-6 or (len(others) and others.min() < gap):
            raise ChartError("simple eigenvalue of A4 is not isolated")
        dual = nm.inv(vecs)[i0]
        v = vecs[:, i0]
        w = gamma(p) * dual / (dual @ v)
    else:
        v, w = (np.asarray(z, dtype=complex) for z in vw)
    af = AltForm(X=vp.X, Y=vp.Y, T=vp.T, v=v, w=w, params=p)
    return af


def from_alt_form(af: AltForm) -> VarietyPoint:
    """(A1, A2, A3, A4) = (X T^-1, T, T^-1 Y^-1, Y T X^-1)."""
    Ti = nm.inv(af.T)
    return VarietyPoint(af.X @ Ti, af.T, Ti @ nm.inv(af.Y), af.Y @ af.T @ nm.inv(af.X), af.params)


# --------------------------------------------------------------------------
# Weyl group action


@dataclass(frozen=True)
class SignedPerm:
    """x'_i = x_{perm[i]}^(-1 if flips[i] else 1), and the same for p."""

    perm: tuple[int, ...]
    flips: tuple[bool, ...]

    def __post_init__(self):
        if sorted(self.perm) != list(range(len(self.perm))) or len(self.flips) != len(self.perm):
            raise ValueError("not a signed permutation")

    @classmethod
    def identity(cls, n: int) -> "SignedPerm":
        return cls(tuple(range(n)), (False,) * n)

    def act(self, pt: ChartPoint) -> ChartPoint:
        s = np.where(self.flips, -1, 1)
        idx = list(self.perm)
        return ChartPoint(pt.p[idx] ** s, pt.x[idx] ** s, pt.params)

    def matrix(self) -> np.ndarray:
        """S with upsilon(w . pt) = S upsilon(pt) S^T."""
        n = len(self.perm)
        S = np.zeros((2 * n, 2 * n))
        for i, (j, f) in enumerate(zip(self.perm, self.flips)):
            old = j + n if f else j
            S[i, old] = 1
            S[i + n, (old + n) % (2 * n)] = 1
        return S


def weyl_generators(n: int) -> list[SignedPerm]:
    gens = [SignedPerm(tuple(range(n)), tuple(i == n - 1 for i in range(n)))]
    for i in range(n - 1):
        perm = list(range(n))
        perm[i], perm[i + 1] = perm[i + 1], perm[i]
        gens.append(SignedPerm(tuple(perm), (False,) * n))
    return gens


def canonical_member(z: complex, tol: float = 1e-12) -> tuple[complex, bool]:
    """Pick z or 1/z: modulus above one, or argument in [0, pi) on the unit
    circle.  Returns the choice and whether it was inverted."""
    z = complex(z)
    lm = np.log(abs(z))
    if lm > tol:
        return z, False
    if lm < -tol:
        return 1 / z, True
    ang = np.angle(z)
    if 0 <= ang < np.pi:
        return z, False
    return 1 / z, True


def _order_key(z: complex) -> tuple[float, float]:
    return (abs(z), float(np.angle(z)))


def canonical_signed_perm(x: Sequence[complex]) -> SignedPerm:
    chosen = [canonical_member(z) for z in x]
    order = sorted(range(len(chosen)), key=lambda i: _order_key(chosen[i][0]))
    return SignedPerm(tuple(order), tuple(chosen[i][1] for i in order))


def canonical_point(pt: ChartPoint) -> ChartPoint:
    """The frozen W-orbit representative used whenever points are compared."""
    return canonical_signed_perm(pt.x).act(pt)


def upsilon(pt: ChartPoint, check: bool = True) -> VarietyPoint:
    """Chart map; W acts on (P, X) by signed permutations, and on the
    quadruple by conjugation with SignedPerm.matrix()."""
    return build_matrices(pt, check=check)
