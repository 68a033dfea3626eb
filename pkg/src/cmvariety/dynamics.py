"""Closed-form flows of h_k = tr X^k and H_k = tr Y^k, conservation audits
and the specialisation where the H-flow is an explicit exponential.

Flow time is called ``s`` throughout; ``t`` is the coupling parameter.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import matrix_balance

from . import numerics as nm
from .chart import VarietyPoint
from .variety import x_spectrum

CONSERVATION_TOL = 1e-10


class FlowError(ValueError):
    pass


def _check_k(k: int) -> int:
    if int(k) != k or k < 1:
        raise FlowError("degree k must be a positive integer")
    return int(k)


def _conjugate_all(m: np.ndarray, k: int, s: float, mats) -> list[np.ndarray]:
    """G a G^-1 for G = exp(k s m^k) and each a in ``mats``.

    In the eigenbasis of m the conjugation is the entrywise scaling
    a'_ij -> exp(e_i - e_j) a'_ij, which keeps every entry to full relative
    precision; forming G and its inverse explicitly would let rounding in the
    large entries of G swamp the small entries of the result.
    """
    mb, (scale, _) = matrix_balance(m, permute=False, separate=True)
    d = nm.eig(mb, tol=1e-8)
    ev = k * s * d.values**k
    if np.max(np.abs(ev.real)) > 300:
        raise FlowError("flow time too large: the conjugator overflows double precision")
    # eigenvectors of m = D mb D^-1 with D = diag(scale)
    V = scale[:, None] * d.vectors
    Vi = np.linalg.inv(d.vectors) / scale[None, :]
    E = np.exp(ev[:, None] - ev[None, :])
    return [V @ ((Vi @ a @ V) * E) @ Vi for a in mats]


def flow_h(vp: VarietyPoint, k: int, s: float) -> VarietyPoint:
    """Flow of h_k: A1, A2 conjugated by G = exp(k s X^k); A3, A4 fixed."""
    k = _check_k(k)
    if s == 0:
        return vp
    A1, A2 = _conjugate_all(vp.X, k, s, (vp.A1, vp.A2))
    return VarietyPoint(A1, A2, vp.A3, vp.A4, vp.params)


def flow_H(vp: VarietyPoint, k: int, s: float) -> VarietyPoint:
    """Flow of H_k: A2, A3 conjugated by G = exp(-k s Y^k); A1, A4 fixed."""
    k = _check_k(k)
    if s == 0:
        return vp
    A2, A3 = _conjugate_all(vp.Y, k, -s, (vp.A2, vp.A3))
    return VarietyPoint(vp.A1, A2, A3, vp.A4, vp.params)


def safe_time(vp: VarietyPoint, hamiltonian: str, k: int, size: float = 1.0) -> float:
    """Flow time s with |k s lambda^k| <= size over the spectrum of X (h) or
    Y (H); keeps the conjugator's condition number below exp(2 size)."""
    m = vp.X if hamiltonian == "h" else vp.Y
    rho = float(np.max(np.abs(np.linalg.eigvals(m))))
    return size / (k * rho**k)


def flow(vp: VarietyPoint, hamiltonian: str, k: int, s: float) -> VarietyPoint:
    if hamiltonian == "h":
        return flow_h(vp, k, s)
    if hamiltonian == "H":
        return flow_H(vp, k, s)
    raise FlowError(f"unknown Hamiltonian tag {hamiltonian!r}; expected 'h' or 'H'")


def positions(vp: VarietyPoint) -> list[complex]:
    """Particle positions: the canonical spectrum of X."""
    return x_spectrum(vp)


def trace_powers(m: np.ndarray, degrees) -> np.ndarray:
    return np.array([np.trace(np.linalg.matrix_power(m, d)) for d in degrees])


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    points: tuple[VarietyPoint, ...]
    hamiltonian: str
    k: int

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if len(times) == 0 or len(times) != len(self.points):
            raise FlowError("trajectory needs one point per time")
        if np.any(np.diff(times) <= 0):
            raise FlowError("times must be increasing")
        object.__setattr__(self, "times", times)


def time_grid(a: float, b: float, steps: int) -> np.ndarray:
    if steps < 1:
        raise FlowError("time grid must contain at least one point")
    if steps == 1:
        return np.array([float(a)])
    if not b > a:
        raise FlowError("time grid needs b > a")
    return np.linspace(a, b, steps)


def trajectory(vp: VarietyPoint, hamiltonian: str, k: int, times) -> Trajectory:
    """Each sample is computed from the start point in closed form."""
    times = np.asarray(times, dtype=float)
    pts = tuple(flow(vp, hamiltonian, k, float(s)) for s in times)
    return Trajectory(times=times, points=pts, hamiltonian=hamiltonian, k=k)


def drift_report(traj: Trajectory) -> dict[str, float]:
    """Max over the trajectory of |tr X^m(s) - tr X^m(s0)| and the same for
    Y, for m = 1..n, relative to max(1, |tr(s0)|).  For an h-flow the X
    columns must stay below CONSERVATION_TOL, for an H-flow the Y columns."""
    n = traj.points[0].params.n
    degrees = range(1, n + 1)
    out = {}
    for name, get in (("X", lambda v: v.X), ("Y", lambda v: v.Y)):
        base = trace_powers(get(traj.points[0]), degrees)
        worst = np.zeros(n)
        for vp in traj.points[1:]:
            cur = trace_powers(get(vp), degrees)
            worst = np.maximum(worst, np.abs(cur - base) / np.maximum(1.0, np.abs(base)))
        for m, val in zip(degrees, worst):
            out[f"tr{name}^{m}"] = float(val)
    return out


def conserved_names(hamiltonian: str, n: int) -> list[str]:
    sym = "X" if hamiltonian == "h" else "Y"
    return [f"tr{sym}^{m}" for m in range(1, n + 1)]


def drift_ok(traj: Trajectory, tol: float = CONSERVATION_TOL) -> bool:
    rep = drift_report(traj)
    return all(rep[name] < tol for name in conserved_names(traj.hamiltonian, traj.points[0].params.n))


def pg_check(vp: VarietyPoint, k: int, s: float) -> float:
    """With k0 = u0 = un = 1 the H-flow moves X by the explicit factor
    exp(k s (Y^k - Y^-k)).  Returns the relative residual of that identity."""
    p = vp.params
    if not all(abs(z - 1) < 1e-14 for z in (p.k0, p.u0, p.un)):
        raise FlowError("requires k0 = u0 = un = 1")
    k = _check_k(k)
    X0, Y = vp.X, vp.Y
    Xs = flow_H(vp, k, s).X
    Yk = np.linalg.matrix_power(Y, k)
    E = nm.mat_fn(Yk - nm.inv(Yk), lambda z: np.exp(k * s * z), tol=1e-8)
    pred = X0 @ E
    return float(nm.opnorm(Xs - pred) / max(1.0, nm.opnorm(X0) * nm.opnorm(E)))


def _fmt(z: float) -> str:
    return f"{z:.16e}"


def trajectory_csv(traj: Trajectory, pg: list[float] | None = None) -> str:
    """Columns: time, re/im of each position, then drift of every trace
    power against the first sample (and pg_residual when given)."""
    n = traj.points[0].params.n
    degrees = range(1, n + 1)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["time"]
    for i in range(1, n + 1):
        header += [f"x{i}_re", f"x{i}_im"]
    header += [f"drift_trX^{m}" for m in degrees] + [f"drift_trY^{m}" for m in degrees]
    if pg is not None:
        header.append("pg_residual")
    w.writerow(header)
    bx = trace_powers(traj.points[0].X, degrees)
    by = trace_powers(traj.points[0].Y, degrees)
    for idx, (s, vp) in enumerate(zip(traj.times, traj.points)):
        row = [_fmt(s)]
        for z in positions(vp):
            row += [_fmt(z.real), _fmt(z.imag)]
        dx = np.abs(trace_powers(vp.X, degrees) - bx) / np.maximum(1.0, np.abs(bx))
        dy = np.abs(trace_powers(vp.Y, degrees) - by) / np.maximum(1.0, np.abs(by))
        row += [_fmt(v) for v in dx] + [_fmt(v) for v in dy]
        if pg is not None:
            row.append(_fmt(pg[idx]))
        w.writerow(row)
    return buf.getvalue()


def trajectory_json(traj: Trajectory, full: bool = False) -> dict:
    out = {
        "hamiltonian": traj.hamiltonian,
        "k": traj.k,
        "times": [float(s) for s in traj.times],
        "positions": [[[z.real, z.imag] for z in positions(vp)] for vp in traj.points],
        "drift": drift_report(traj),
    }
    if full:
        out["points"] = [vp.to_dict() for vp in traj.points]
    return out


def trajectory_json_text(traj: Trajectory, full: bool = False) -> str:
    return json.dumps(trajectory_json(traj, full), sort_keys=True)
