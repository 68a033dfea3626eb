import numpy as np
import pytest

from cmvariety import numerics as nm
from cmvariety.chart import ChartPoint, build_matrices
from cmvariety.duality import dual_point
from cmvariety.dynamics import (
    FlowError,
    conserved_names,
    drift_ok,
    drift_report,
    flow,
    flow_H,
    flow_h,
    pg_check,
    positions,
    safe_time,
    time_grid,
    trajectory,
    trajectory_csv,
    trajectory_json,
)
from cmvariety.params import ParamSet, random_params
from cmvariety.sampling import make_rng, random_chart_point
from cmvariety.variety import chart_distance, gauge_distance, invert_chart, verify_membership, x_spectrum

from conftest import sample_points


def x_fixed_residual(vp0, vp):
    """Change of X = A1 A2 relative to the size of the factors it is formed from."""
    return nm.opnorm(vp.X - vp0.X) / (nm.opnorm(vp.A1) * nm.opnorm(vp.A2))


def test_zero_time_is_identity(chart_pair):
    _, vp = chart_pair
    assert flow_h(vp, 1, 0.0) is vp
    assert flow_H(vp, 1, 0.0) is vp


def test_bad_degree():
    vp = build_matrices(sample_points(1, 1, 1)[0])
    with pytest.raises(FlowError):
        flow_h(vp, 0, 0.1)
    with pytest.raises(FlowError):
        flow(vp, "q", 1, 0.1)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_h_flow_closed_form(n):
    for pt in sample_points(500 + n, n, 5):
        vp = build_matrices(pt)
        for k in range(1, n + 1):
            for s in (0.1, 1.0):
                f = flow_h(vp, k, s)
                assert x_fixed_residual(vp, f) < 1e-12
                expected = np.exp(k * s * (pt.x**k - pt.x**-k)) * pt.p
                assert chart_distance(invert_chart(f), ChartPoint(expected, pt.x, pt.params)) < 1e-7


def test_h_flow_keeps_membership(chart_pair):
    _, vp = chart_pair
    assert verify_membership(flow_h(vp, 1, 0.7)).passed


def test_positions(chart_pair):
    pt, vp = chart_pair
    assert np.allclose(positions(vp), x_spectrum(vp))
    got = positions(flow_h(vp, 1, 0.5))
    for z in positions(vp):
        assert np.min(np.abs(np.array(got) - z)) < 1e-9 * max(1, abs(z))


def test_positions_move_under_H():
    pt = sample_points(8, 2, 1)[0]
    vp = build_matrices(pt)
    a = np.array(positions(vp))
    b = np.array(positions(flow_H(vp, 1, 0.1)))
    assert np.max(np.abs(a - b) / np.abs(a)) > 1e-6


@pytest.mark.parametrize("n", [1, 2, 3])
def test_H_flow_conserves_traces(n):
    for pt in sample_points(600 + n, n, 3):
        vp = build_matrices(pt)
        for k in range(1, n + 1):
            # Y can have eigenvalues far outside the unit annulus; beyond
            # |k s y^k| ~ 20 the conjugator is not representable in doubles
            s_max = min(1.0, safe_time(vp, "H", k, size=20.0))
            traj = trajectory(vp, "H", k, time_grid(0, s_max, 11))
            assert drift_ok(traj)
            rep = drift_report(traj)
            assert all(rep[m] < 1e-10 for m in conserved_names("H", n))


def test_h_flow_drift_report():
    vp = build_matrices(sample_points(9, 2, 1)[0])
    traj = trajectory(vp, "h", 1, time_grid(0, 1, 11))
    rep = drift_report(traj)
    assert all(rep[m] < 1e-10 for m in conserved_names("h", 2))
    # tr Y is not conserved by the h-flow
    assert rep["trY^1"] > 1e-6


def test_like_flows_commute():
    for n in (1, 2, 3):
        for pt in sample_points(700 + n, n, 4):
            vp = build_matrices(pt)
            a = flow_h(flow_h(vp, 1, 0.3), n, 0.2)
            b = flow_h(flow_h(vp, n, 0.2), 1, 0.3)
            assert gauge_distance(a, b) < 1e-7
            s1, s2 = safe_time(vp, "H", 1, 0.5), safe_time(vp, "H", n, 0.5)
            c = flow_H(flow_H(vp, 1, s1), n, s2)
            d = flow_H(flow_H(vp, n, s2), 1, s1)
            assert gauge_distance(c, d) < 1e-7


def test_duality_intertwines_flows():
    # dual(flow_H(s)) = flow_h(-s)(dual): the duality reverses the sign of the bracket
    for n in (1, 2):
        for pt in sample_points(800 + n, n, 4):
            vp = build_matrices(pt)
            for k in range(1, n + 1):
                s = safe_time(vp, "H", k)
                a = dual_point(flow_H(vp, k, s), check=False)
                b = flow_h(dual_point(vp, check=False), k, -s)
                assert gauge_distance(a, b) < 1e-7
                c = flow_h(dual_point(vp, check=False), k, s)
                assert gauge_distance(a, c) > 1e-4


def test_long_flows_keep_membership():
    pt = sample_points(10, 2, 1)[0]
    vp = build_matrices(pt)
    for s in (-10.0, 10.0):
        rep = verify_membership(flow_h(vp, 1, s), tol=1e-6)
        assert rep.product_residual < 1e-6 and max(rep.hecke_residuals) < 1e-6


def test_overflowing_flow_raises():
    vp = build_matrices(sample_points(11, 2, 1)[0])
    with pytest.raises(FlowError):
        flow_h(vp, 2, 1e4)


def _pg_points(n, count, seed):
    rng = make_rng(seed)
    out = []
    for _ in range(count):
        q = random_params(rng, n)
        p = ParamSet(1, q.kn, q.t, 1, 1, n=n)
        out.append(build_matrices(random_chart_point(rng, p)))
    return out


def test_pg_zero_time():
    vp = _pg_points(1, 1, 3)[0]
    assert pg_check(vp, 1, 0.0) < 1e-14


@pytest.mark.parametrize("n", [1, 2])
def test_pg_identity(n):
    for vp in _pg_points(n, 10, 40 + n):
        assert pg_check(vp, 1, 0.2) < 1e-8


def test_pg_precondition():
    vp = build_matrices(sample_points(12, 1, 1)[0])
    with pytest.raises(FlowError):
        pg_check(vp, 1, 0.1)


def test_time_grid():
    assert np.allclose(time_grid(0, 1, 3), [0, 0.5, 1])
    assert np.array_equal(time_grid(0.2, 0.2, 1), [0.2])
    with pytest.raises(FlowError):
        time_grid(0, 1, 0)
    with pytest.raises(FlowError):
        time_grid(1, 0, 4)


def test_trajectory_exports():
    vp = build_matrices(sample_points(13, 2, 1)[0])
    traj = trajectory(vp, "h", 1, time_grid(0, 1, 5))
    text = trajectory_csv(traj)
    lines = text.strip().split("\n")
    assert lines[0].startswith("time,x1_re,x1_im,x2_re,x2_im,drift_trX^1")
    assert len(lines) == 6
    d = trajectory_json(traj, full=True)
    assert len(d["points"]) == 5 and d["hamiltonian"] == "h"
