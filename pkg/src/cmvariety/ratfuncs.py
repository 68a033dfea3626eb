"""Scalar rational functions entering the chart matrices, and the two
discriminants whose nonvanishing cuts out the chart domain."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .params import ParamSet, bar


class PoleError(ZeroDivisionError):
    pass


def _check_pole(den, what: str):
    if np.any(np.abs(den) == 0):
        raise PoleError(f"{what}: pole at the given argument")


def a_fn(z, t):
    z = np.asarray(z, dtype=complex)
    _check_pole(1 - z, "a(z)")
    return (1 / t - t * z) / (1 - z)


def b_fn(z, t):
    z = np.asarray(z, dtype=complex)
    _check_pole(1 - z, "b(z)")
    return (t - 1 / t) / (1 - z)


def u_fn(z, p: ParamSet):
    z = np.asarray(z, dtype=complex)
    _check_pole(1 - z**2, "u(z)")
    kn, un = p.kn, p.un
    return (1 - kn * un * z) * (1 + kn / un * z) / (kn * (1 - z**2))


def v_fn(z, p: ParamSet):
    z = np.asarray(z, dtype=complex)
    _check_pole(1 - z**2, "v(z)")
    return (bar(p.kn) + bar(p.un) * z) / (1 - z**2)


def ut_fn(z, p: ParamSet):
    """The u0/k0 counterpart of u, written in 1/z; q^(1/2) is taken as +1."""
    z = np.asarray(z, dtype=complex)
    _check_pole(1 - z**-2, "utilde(z)")
    k0, u0 = p.k0, p.u0
    return (1 - k0 * u0 / z) * (1 + k0 / u0 / z) / (k0 * (1 - z**-2))


def vt_fn(z, p: ParamSet):
    z = np.asarray(z, dtype=complex)
    _check_pole(1 - z**-2, "vtilde(z)")
    return (bar(p.k0) + bar(p.u0) / z) / (1 - z**-2)


@dataclass(frozen=True)
class ExtCoords:
    """Coordinates extended to 2n indices: entry i+n holds the inverse of entry i."""

    x: np.ndarray
    p: np.ndarray

    @classmethod
    def extend(cls, x, p=None) -> "ExtCoords":
        x = np.asarray(x, dtype=complex)
        p = np.ones_like(x) if p is None else np.asarray(p, dtype=complex)
        return cls(x=np.concatenate([x, 1 / x]), p=np.concatenate([p, 1 / p]))

    @property
    def n(self) -> int:
        return len(self.x) // 2

    def partner(self, i: int) -> int:
        return (i + self.n) % (2 * self.n)


@dataclass(frozen=True)
class PairTable:
    """a(x_i/x_j), a(x_i x_j), a(1/(x_i x_j)) and the same for b, on 2n extended
    indices.  Entries where the argument equals 1 (the diagonal, and the
    partner pairs for the +/- tables) are left as NaN."""

    a: np.ndarray
    a_plus: np.ndarray
    a_minus: np.ndarray
    b: np.ndarray
    b_plus: np.ndarray
    b_minus: np.ndarray


def pair_fns(xs: ExtCoords, t: complex) -> PairTable:
    X = xs.x
    N = len(X)
    ratio = np.outer(X, 1 / X)
    prod = np.outer(X, X)
    tables = {}
    for name, arg, skip in (
        ("", ratio, lambda i, j: i == j),
        ("_plus", prod, lambda i, j: j == xs.partner(i)),
        ("_minus", 1 / prod, lambda i, j: j == xs.partner(i)),
    ):
        mask = np.array([[skip(i, j) for j in range(N)] for i in range(N)])
        off = ~mask & ~np.eye(N, dtype=bool)
        bad = off & (np.abs(1 - arg) == 0)
        if bad.any():
            i, j = map(int, np.argwhere(bad)[0])
            raise PoleError(f"pair ({i + 1}, {j + 1}) hits the pole of a/b")
        ta = np.full((N, N), np.nan + 0j)
        tb = np.full((N, N), np.nan + 0j)
        ta[off] = a_fn(arg[off], t)
        tb[off] = b_fn(arg[off], t)
        tables["a" + name] = ta
        tables["b" + name] = tb
    return PairTable(**tables)


def delta_factors(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    out = [1 - x**2, 1 - x**-2]
    for j, k in itertools.permutations(range(len(x)), 2):
        xj, xk = x[j], x[k]
        out.append(np.array([1 - xj * xk, 1 - xk / xj, 1 - xj / xk, 1 - 1 / (xj * xk)]))
    return np.concatenate([np.atleast_1d(f) for f in out])


def delta(x) -> complex:
    """Product over i of (1-x_i^2)(1-x_i^-2) times, over ordered pairs j != k,
    the four factors (1 - x_j^{+-1} x_k^{+-1})."""
    return complex(np.prod(delta_factors(x)))


def delta_tau_factors(x, p: ParamSet) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    t2 = p.t**2
    out = []
    for i, j in itertools.combinations(range(len(x)), 2):
        xi, xj = x[i], x[j]
        out.append(np.array([1 - t2 * xi * xj, 1 - t2 * xj / xi, 1 - t2 * xi / xj, 1 - t2 / (xi * xj)]))
    for y in (x, 1 / x):
        out += [
            1 - p.k0 * p.u0 * y,
            1 + p.k0 / p.u0 * y,
            1 - p.kn * p.un * y,
            1 + p.kn / p.un * y,
        ]
    return np.concatenate([np.atleast_1d(f) for f in out])


def delta_tau(x, p: ParamSet) -> complex:
    return complex(np.prod(delta_tau_factors(x, p)))


def in_chart_locus(x, p: ParamSet, rel: float = 1e-10) -> bool:
    """delta * delta_tau is nonzero, tested factor by factor: every factor
    must exceed ``rel`` in modulus.  A test on the full product would need a
    scale that grows like a high power of |x| and loses meaning at larger n."""
    m = locus_margin(x, p)
    return bool(np.isfinite(m) and m > rel)


def locus_margin(x, p: ParamSet) -> float:
    """Smallest modulus of any single factor of delta * delta_tau; a distance
    proxy to the excluded hypersurfaces."""
    return float(np.min(np.abs(np.concatenate([delta_factors(x), delta_tau_factors(x, p)]))))
