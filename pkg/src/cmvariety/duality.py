"""The duality involution between the tau- and sigma-varieties and the
second coordinate chart it induces."""

from __future__ import annotations

import numpy as np

from . import numerics as nm
from .chart import AltForm, ChartPoint, VarietyPoint
from .params import bar, dual_params
from .variety import verify_membership, invert_chart


class DualityError(ValueError):
    pass


def relation_inverses(vp: VarietyPoint) -> tuple[np.ndarray, ...]:
    """Inverses read off the defining relations: A_i^-1 = A_i - c_i for the
    three quadratic relations and A4^-1 = A1 A2 A3.  Exact on the variety and
    free of the conditioning loss of a numerical inverse."""
    p = vp.params
    A1, A2, A3, _ = vp.mats
    one = np.eye(len(A1))
    return (A1 - bar(p.k0) * one, A2 - bar(p.u0) * one, A3 - bar(p.un) * one, A1 @ A2 @ A3)


def dual_point(vp: VarietyPoint, check: bool = True) -> VarietyPoint:
    """(A1, A2, A3, A4) -> (A3^-1, A2^-1, A1^-1, A4^-1) with parameters sigma.

    The input must lie on the variety (inverses come from its relations);
    with ``check`` the output is certified for the dual parameters."""
    i1, i2, i3, i4 = relation_inverses(vp)
    out = VarietyPoint(i3, i2, i1, i4, dual_params(vp.params))
    if check:
        rep = verify_membership(out)
        if not rep.passed:
            raise DualityError(f"dual quadruple fails membership for the dual parameters: {rep.to_dict()}")
    return out


def dual_alt(af: AltForm) -> AltForm:
    """(X, Y, T, v, w) -> (Y, X, T^-1, v, w) with parameters sigma."""
    return AltForm(X=af.Y, Y=af.X, T=nm.inv(af.T), v=af.v, w=af.w, params=dual_params(af.params))


def second_chart_coords(vp: VarietyPoint) -> ChartPoint:
    """Coordinates (p', y) of the dual point in its own chart; y is the
    canonical reciprocal-paired spectrum of Y = A4 A1."""
    dual = dual_point(vp, check=False)
    try:
        return invert_chart(dual)
    except ValueError as exc:
        raise DualityError(f"dual point is off its chart locus: {exc}") from exc
