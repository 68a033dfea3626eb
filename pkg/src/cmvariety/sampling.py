"""Seeded sampling of parameters and chart points.

All randomness goes through numpy's Philox counter-based generator so that
streams are reproducible across platforms; per-trial streams use the key
``seed ^ trial``.
"""

from __future__ import annotations

import numpy as np

from .chart import ChartPoint
from .params import ParamSet, random_params
from .ratfuncs import locus_margin

RNG_ALGORITHM = "numpy.random.Philox-4x64-10"
DEFAULT_MARGIN = 1e-3


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1)))


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return make_rng(int(seed) ^ int(trial))


def params_rng(seed: int) -> np.random.Generator:
    """Stream for parameter draws, disjoint from every per-trial stream."""
    return np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1)).jumped())


def _annulus(rng: np.random.Generator, size: int) -> np.ndarray:
    mods = np.exp(rng.uniform(np.log(0.5), np.log(2.0), size=size))
    return mods * np.exp(1j * rng.uniform(-np.pi, np.pi, size=size))


def random_chart_point(
    rng: np.random.Generator,
    params: ParamSet,
    margin: float = DEFAULT_MARGIN,
    max_tries: int = 10_000,
) -> ChartPoint:
    """Coordinates with modulus in [1/2, 2], redrawn while some factor of
    delta * delta_tau is within ``margin`` of zero."""
    n = params.n
    for _ in range(max_tries):
        x = _annulus(rng, n)
        p = _annulus(rng, n)
        if locus_margin(x, params) > margin:
            return ChartPoint(p, x, params)
    raise RuntimeError("could not sample a chart point away from the excluded locus")


def random_setup(rng: np.random.Generator, n: int, margin: float = DEFAULT_MARGIN) -> ChartPoint:
    """Generic parameters and a chart point, both from ``rng``."""
    return random_chart_point(rng, random_params(rng, n), margin)
