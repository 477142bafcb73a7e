import csv

import numpy as np
import pytest

from umbilic import geodesics
from umbilic.exprlang import parse
from umbilic.geodesics import ConformalMetric, GeodesicState, integrate, liouville_first_integral, relative_drift
from umbilic.surfaces import catalog

WIDE = (-3.0, 3.0, -3.0, 3.0)


def metric(text, domain=WIDE):
    return ConformalMetric.from_expr(parse(text), domain, text)


def test_flat_geodesic_is_a_line():
    t = integrate(metric("1"), GeodesicState(0, 0, 1, 0), 0.01, 100)
    assert not t.exited and len(t) == 101
    np.testing.assert_allclose(t.states[:, 0], t.times, atol=1e-14)
    np.testing.assert_array_equal(t.states[:, 1], 0)
    np.testing.assert_allclose(t.final.u, 1.0, atol=1e-14)


def test_flat_oblique_line_is_affine():
    t = integrate(metric("2"), GeodesicState(-0.5, 0.25, 0.3, -0.7), 0.05, 40)
    np.testing.assert_allclose(t.states[:, 0], -0.5 + 0.3 * t.times, atol=1e-14)
    np.testing.assert_allclose(t.states[:, 1], 0.25 - 0.7 * t.times, atol=1e-14)
    np.testing.assert_array_equal(t.states[:, 2:], [[0.3, -0.7]] * len(t))


def test_times_uniform():
    t = integrate(metric("2+u"), GeodesicState(0, 0, 0.1, 0.2), 0.02, 50)
    np.testing.assert_allclose(np.diff(t.times), 0.02)
    assert np.all(np.diff(t.times) > 0)


def test_rhs_of_linear_factor():
    u0 = geodesics.eval_jet(parse("2+u"), 0.0, 0.0)
    assert geodesics.geodesic_rhs(u0, GeodesicState(0, 0, 1, 0)) == (1, 0, -0.25, 0.0)


def test_liouville_examples():
    f, g = parse("u^2"), parse("-v^2+3")
    assert liouville_first_integral(f, g, GeodesicState(0, 0, 1, 0)) == 9
    assert liouville_first_integral(f, g, GeodesicState(1, 1, 0, 1)) == -3
    zero, one = parse("0"), parse("1")
    assert liouville_first_integral(zero, one, GeodesicState(0.3, 0.1, 0.6, 0.8)) == pytest.approx(0.36)


def test_domain_exit_truncates():
    t = integrate(metric("2+u", (-1, 1, -1, 1)), GeodesicState(0.9, 0, 1, 0), 0.01, 1000)
    assert t.exited
    assert len(t) < 1001
    assert np.all(np.abs(t.states[:, 0]) <= 1 + 1e-12)


def test_start_outside_domain():
    with pytest.raises(geodesics.OutsideDomainError):
        integrate(metric("1", (-1, 1, -1, 1)), GeodesicState(2, 0, 1, 0), 0.1, 3)


def test_bad_step():
    with pytest.raises(ValueError):
        integrate(metric("1"), GeodesicState(0, 0, 1, 0), 0.0, 3)


def _energy_drift(m, s0, h, T=1.0):
    return relative_drift(integrate(m, s0, h, round(T / h)).energies)


@pytest.mark.parametrize("text, s0", [
    ("4/(1+u^2+v^2)^2", GeodesicState(0.1, -0.2, 0.5, 0.3)),
    ("2+u", GeodesicState(0.0, 0.0, 0.6, 0.4)),
    ("u^2-v^2+3", GeodesicState(0.2, 0.1, 0.5, -0.7)),
])
def test_energy_drift_is_fourth_order(text, s0):
    m = metric(text)
    # steps large enough that the drift sits well above roundoff
    d = [_energy_drift(m, s0, h, T=2.0) for h in (0.2, 0.1, 0.05)]
    ratios = [d[0] / d[1], d[1] / d[2]]
    assert all(12 <= r <= 20 for r in ratios), (d, ratios)
    assert _energy_drift(m, s0, 1e-3) <= 1e-8


def test_immersion_metric_matches_expression():
    a = ConformalMetric.from_surface(catalog("sphere_stereo"), WIDE)
    b = metric("4/(1+u^2+v^2)^2")
    s0 = GeodesicState(0.1, 0.2, 0.3, -0.4)
    ta, tb = integrate(a, s0, 0.01, 50), integrate(b, s0, 0.01, 50)
    np.testing.assert_allclose(ta.states, tb.states, atol=1e-13)


def test_sphere_geodesic_through_origin_stays_on_axis():
    t = integrate(metric("4/(1+u^2+v^2)^2"), GeodesicState(0, 0, 1, 0), 0.01, 100)
    np.testing.assert_array_equal(t.states[:, 1], 0)
    # polar angle 2 atan(u) advances at the constant rate 2, so u = tan(t)
    np.testing.assert_allclose(t.states[:, 0], np.tan(t.times), rtol=1e-7)


def test_csv(tmp_path):
    f, g = parse("u^2"), parse("-v^2+3")
    t = integrate(metric("u^2-v^2+3"), GeodesicState(0, 0, 1, 0), 0.1, 5, (f, g))
    path = tmp_path / "traj.csv"
    geodesics.write_csv(t, path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["t", "u", "v", "du", "dv", "energy", "first_integral"]
    assert len(rows) == len(t) + 1
    back = np.array(rows[1:], dtype=float)
    np.testing.assert_array_equal(back[:, 1:5], t.states)
    np.testing.assert_array_equal(back[:, 6], t.first_integrals)
    assert back[0, 6] == 9
