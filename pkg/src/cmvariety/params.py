"""Coupling parameters, conjugacy-class data and the dimension count."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

PARAM_NAMES = ("k0", "kn", "t", "u0", "un")
RELATION_TOL = 1e-9


class ParameterError(ValueError):
    pass


def bar(z: complex) -> complex:
    """z - 1/z, the shorthand used throughout the chart formulas."""
    return z - 1 / z


@dataclass(frozen=True)
class ParamSet:
    k0: complex
    kn: complex
    t: complex
    u0: complex
    un: complex
    n: int = 1
    # exact preimage under dual_params, so the involution is bit-exact
    _dual_of: "ParamSet | None" = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        for name in PARAM_NAMES:
            z = complex(getattr(self, name))
            if not np.isfinite(z) or z == 0:
                raise ParameterError(f"parameter {name} must be a finite nonzero complex number")
            object.__setattr__(self, name, z)
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError("rank n must be a positive integer")
        object.__setattr__(self, "n", int(self.n))
        if abs(self.t**2 - 1) < 1e-12:
            raise ParameterError("t**2 must differ from 1")

    def values(self) -> tuple[complex, ...]:
        return tuple(getattr(self, k) for k in PARAM_NAMES)

    def with_n(self, n: int) -> "ParamSet":
        return replace(self, n=n, _dual_of=None)

    def to_dict(self) -> dict:
        d = {k: [float(v.real), float(v.imag)] for k, v in zip(PARAM_NAMES, self.values())}
        d["n"] = self.n
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ParamSet":
        try:
            vals = {k: complex(*d[k]) if isinstance(d[k], (list, tuple)) else complex(d[k]) for k in PARAM_NAMES}
            return cls(n=int(d["n"]), **vals)
        except (KeyError, TypeError) as exc:
            raise ParameterError(f"malformed parameter record: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ParamSet":
        return cls.from_dict(json.loads(text))


def random_params(rng: np.random.Generator, n: int, bound: int = 4, max_tries: int = 100) -> ParamSet:
    """Parameters with modulus in [1/2, 2] (log-uniform) and uniform argument,
    redrawn until the bounded genericity certificate passes."""
    for _ in range(max_tries):
        mods = np.exp(rng.uniform(np.log(0.5), np.log(2.0), size=5))
        args = rng.uniform(-np.pi, np.pi, size=5)
        vals = mods * np.exp(1j * args)
        try:
            p = ParamSet(*vals, n=n)
        except ParameterError:
            continue
        if is_generic(p, bound):
            return p
    raise ParameterError("could not draw generic parameters")  # pragma: no cover


def is_generic(p: ParamSet, bound: int = 4) -> bool:
    """Bounded certificate: no monomial k0^a kn^b t^c u0^d un^e with
    0 < max|exponent| <= bound lies within RELATION_TOL of 1."""
    if bound < 1:
        raise ParameterError("bound must be >= 1")
    e = np.arange(-bound, bound + 1)
    powers = [np.asarray(v, dtype=complex) ** e for v in p.values()]
    grid = powers[0]
    for pw in powers[1:]:
        grid = np.multiply.outer(grid, pw)
    hits = np.abs(grid - 1) < RELATION_TOL
    hits[(bound,) * 5] = False
    return not bool(hits.any())


def gamma(p: ParamSet) -> complex:
    t2 = p.t**2
    return (p.t ** (2 * p.n) - 1) / (t2 - 1) * p.kn + (1 - p.t ** (-2 * p.n)) / (1 - 1 / t2) / p.kn


@dataclass(frozen=True)
class ClassSpec:
    pairs: tuple[tuple[complex, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((complex(lam), int(mu)) for lam, mu in self.pairs))
        for _, mu in self.pairs:
            if mu < 1:
                raise ParameterError("multiplicities must be positive")
        lams = [lam for lam, _ in self.pairs]
        for (i, a), (j, b) in itertools.combinations(enumerate(lams), 2):
            if abs(a - b) <= RELATION_TOL * max(1.0, abs(a), abs(b)):
                raise ParameterError(f"eigenvalues {i} and {j} of the class coincide ({a:.6g})")

    @property
    def size(self) -> int:
        return sum(mu for _, mu in self.pairs)

    @property
    def eigenvalues(self) -> np.ndarray:
        """Diagonal entries with multiplicity."""
        return np.array([lam for lam, mu in self.pairs for _ in range(mu)], dtype=complex)

    @property
    def multiplicities(self) -> list[int]:
        return [mu for _, mu in self.pairs]


def eigendata(p: ParamSet) -> tuple[ClassSpec, ClassSpec, ClassSpec, ClassSpec]:
    """Conjugacy classes attached to the four punctures."""
    n = p.n
    specs = []
    for label, pairs in (
        ("A1", [(-1 / p.k0, n), (p.k0, n)]),
        ("A2", [(-1 / p.u0, n), (p.u0, n)]),
        ("A3", [(-1 / p.un, n), (p.un, n)]),
        (
            "A4",
            [(-1 / p.kn, n)]
            + ([(p.kn * p.t**-2, n - 1)] if n > 1 else [])
            + [(p.kn * p.t ** (2 * n - 2), 1)],
        ),
    ):
        try:
            specs.append(ClassSpec(tuple(pairs)))
        except ParameterError as exc:
            raise ParameterError(f"class of {label}: {exc}") from exc
    return tuple(specs)


def _sub_multiplicities(mults: Sequence[int], s: int):
    """All nu with 0 <= nu_j <= mu_j and sum(nu) = s."""
    if not mults:
        if s == 0:
            yield ()
        return
    head, rest = mults[0], mults[1:]
    for v in range(min(head, s) + 1):
        for tail in _sub_multiplicities(rest, s - v):
            yield (v,) + tail


def eigendata_generic(specs: Sequence[ClassSpec]) -> bool:
    """Exhaustive check of the generic-eigendata condition.

    Sub-multiplicity vectors are enumerated for every proper size s of the
    common total N (the matrix size).
    """
    totals = {s.size for s in specs}
    if len(totals) != 1:
        raise ParameterError(f"classes have inconsistent sizes {sorted(totals)}")
    (N,) = totals
    full = np.prod([lam**mu for s in specs for lam, mu in s.pairs])
    if abs(full - 1) > RELATION_TOL:
        return False
    for s in range(1, N):
        per_class = []
        for spec in specs:
            lams = np.array([lam for lam, _ in spec.pairs])
            per_class.append(
                [np.prod(lams ** np.array(nu)) for nu in _sub_multiplicities(spec.multiplicities, s)]
            )
        for combo in itertools.product(*per_class):
            if abs(np.prod(combo) - 1) < RELATION_TOL:
                return False
    return True


@dataclass(frozen=True)
class QuiverData:
    qvec: tuple[complex, ...]
    dimvec: tuple[int, ...]

    def product_check(self) -> complex:
        """q^dimvec, which equals 1 for consistent data."""
        return complex(np.prod([q**d for q, d in zip(self.qvec, self.dimvec)]))


def quiver_data(p: ParamSet) -> QuiverData:
    n = p.n
    qvec = (
        p.k0 * p.u0 * p.un * p.kn,
        -(p.k0**-2),
        -(p.u0**-2),
        -(p.un**-2),
        -(p.kn**-2) * p.t**2,
        p.t ** (-2 * n),
    )
    return QuiverData(qvec=qvec, dimvec=(2 * n, n, n, n, n, 1))


def char_dim(g: int, k: int, mults: Sequence[Sequence[int]]) -> int:
    """Dimension 2 + (2g + k - 2) N^2 - sum mu^2 of a generic character variety."""
    if g < 0 or k < 0:
        raise ParameterError("genus and puncture count must be nonnegative")
    totals = {sum(m) for m in mults}
    if len(totals) != 1:
        raise ParameterError(f"multiplicity lists have inconsistent totals {sorted(totals)}")
    (N,) = totals
    return 2 + (2 * g + k - 2) * N * N - sum(mu * mu for m in mults for mu in m)


def dual_params(p: ParamSet) -> ParamSet:
    """(k0, kn, t, u0, un) -> (1/un, 1/kn, 1/t, 1/u0, 1/k0)."""
    if p._dual_of is not None:
        return p._dual_of
    return ParamSet(k0=1 / p.un, kn=1 / p.kn, t=1 / p.t, u0=1 / p.u0, un=1 / p.k0, n=p.n, _dual_of=p)
