import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tunnelmpc.aero import (
    AeroConfig,
    CeilingCoeffs,
    SidewallParams,
    TunnelGeometry,
    WALL_NORMALS,
    WindProcess,
    ceiling_effect_ratio,
    ceiling_singular_distance,
    effect_field,
    ground_effect_ratio,
    sidewall_force,
    tunnel_disturbance,
    tunnel_mean_force,
    wind_disturbance,
)
from tunnelmpc.dynamics import UavParams, UavState
from tunnelmpc.exceptions import AeroSingularityError

R = 0.12
P = UavParams()
GEO = TunnelGeometry()
HOVER = P.mass * P.gravity


def at(y, z, x=10.0):
    return UavState(np.array([x, y, z]), np.zeros(3), np.zeros(3), np.zeros(3))


class TestGroundEffect:
    def test_reference_value(self):
        assert ground_effect_ratio(0.24, R) == pytest.approx(1.0 / (1.0 - (0.12 / 0.96) ** 2), abs=1e-6)
        assert ground_effect_ratio(0.24, R) == pytest.approx(1.015873, abs=1e-6)

    def test_far_field(self):
        assert abs(ground_effect_ratio(1e6 * R, R) - 1.0) < 1e-9

    def test_singularity_boundary(self):
        with pytest.raises(AeroSingularityError):
            ground_effect_ratio(R / 4, R)
        assert ground_effect_ratio(R / 4 * (1 + 1e-9), R) > 1e6

    def test_monotone_on_grid(self):
        z = np.linspace(R / 4 * 1.01, 3.0, 100)
        vals = np.array([ground_effect_ratio(v, R) for v in z])
        assert np.all(vals >= 1.0) and np.all(np.diff(vals) < 0)


class TestCeilingEffect:
    def test_reduces_to_ground_form(self):
        assert ceiling_effect_ratio(2 * R, R, CeilingCoeffs(a1=1.0, a2=0.0)) == pytest.approx(4.0 / 3.0, abs=1e-6)

    def test_far_field(self):
        assert abs(ceiling_effect_ratio(1e6 * R, R, CeilingCoeffs()) - 1.0) < 1e-9

    def test_singularity_boundary(self):
        with pytest.raises(AeroSingularityError):
            ceiling_effect_ratio(R, R, CeilingCoeffs(a1=1.0, a2=0.0))
        d = ceiling_singular_distance(R, CeilingCoeffs())
        with pytest.raises(AeroSingularityError):
            ceiling_effect_ratio(d, R, CeilingCoeffs())
        assert ceiling_effect_ratio(d + 1e-9, R, CeilingCoeffs()) > 1e3

    def test_monotone_on_grid(self):
        c = CeilingCoeffs()
        dz = np.linspace(ceiling_singular_distance(R, c) + 1e-3, 3.0, 100)
        vals = np.array([ceiling_effect_ratio(v, R, c) for v in dz])
        assert np.all(vals >= 1.0) and np.all(np.diff(vals) < 0)

    def test_invalid_coeffs(self):
        with pytest.raises(ValueError):
            CeilingCoeffs(a1=0.0)
        with pytest.raises(ValueError):
            CeilingCoeffs(a2=-0.1)


class TestSidewall:
    sw = SidewallParams()

    def test_zero_beyond_cutoff(self):
        rng = np.random.default_rng(0)
        np.testing.assert_array_equal(sidewall_force(10.0, [0, 1, 0], self.sw, R, rng), np.zeros(3))

    def test_mean_pull_at_wall(self):
        rng = np.random.default_rng(1)
        n = np.array([0.0, 1.0, 0.0])
        samples = np.array([sidewall_force(0.0, n, self.sw, R, rng) for _ in range(10_000)])
        assert abs(samples[:, 1].mean() - (-self.sw.mean_xy)) <= 3 * self.sw.std_xy / 100

    def test_normal_component_bounded(self):
        rng = np.random.default_rng(2)
        n = np.array([0.0, -1.0, 0.0])
        for d in np.linspace(0.0, 0.5, 200):
            f = sidewall_force(d, n, self.sw, R, rng)
            assert abs(f @ n) <= 0.052 + 3 * 0.022 + 1e-15
            assert f @ n <= 0.0  # toward the wall

    def test_linear_ramp(self):
        cutoff = self.sw.cutoff(R)
        n = np.array([0.0, 1.0, 0.0])
        half = sidewall_force(cutoff / 2, n, SidewallParams(std_xy=0.0, std_z=0.0), R, np.random.default_rng(0))
        np.testing.assert_allclose(half, [0.0, -0.5 * self.sw.mean_xy, 0.0], atol=1e-15)

    def test_negative_distance_rejected(self):
        with pytest.raises(ValueError):
            sidewall_force(-0.1, [0, 1, 0], self.sw, R, np.random.default_rng(0))


class TestTunnelDisturbance:
    def test_center_is_quiet(self):
        # residual ground/ceiling terms at 1 m stay below the sidewall noise cap
        sw = SidewallParams()
        floor = sw.mean_z + 3 * sw.std_z
        w = tunnel_disturbance(at(1.0, 1.0), GEO, P, AeroConfig(), HOVER, np.random.default_rng(0))
        assert np.linalg.norm(w.force) < floor
        np.testing.assert_array_equal(w.force[:2], 0.0)

    def test_ground_push_matches_ratio(self):
        cfg = AeroConfig(ceiling=False)
        w = tunnel_disturbance(at(1.0, 0.24), GEO, P, cfg, HOVER, np.random.default_rng(0))
        assert w.force[2] == pytest.approx(HOVER * (ground_effect_ratio(0.24, R) - 1.0), rel=1e-12)
        assert w.force[2] > 0
        np.testing.assert_allclose(w.force[:2], 0.0, atol=1e-15)

    def test_corner_exceeds_each_effect(self):
        y, dz = 0.05, 0.2
        rng = lambda: np.random.default_rng(3)  # noqa: E731
        quiet = SidewallParams(std_xy=0.0, std_z=0.0)
        cfg = AeroConfig(ground=False, sidewall_params=quiet)
        corner = tunnel_disturbance(at(y, GEO.height - dz), GEO, P, cfg, HOVER, rng()).force
        ceiling = tunnel_disturbance(at(1.0, GEO.height - dz), GEO, P, cfg, HOVER, rng()).force
        wall = tunnel_disturbance(at(y, 1.0), GEO, P, cfg, HOVER, rng()).force
        assert np.linalg.norm(corner) > max(np.linalg.norm(ceiling), np.linalg.norm(wall))

    def test_zeroed_parameters_give_zero_wrench(self):
        quiet = SidewallParams(mean_xy=0.0, std_xy=0.0, mean_z=0.0, std_z=0.0)
        cfg = AeroConfig(ground=False, ceiling=False, sidewall_params=quiet)
        w = tunnel_disturbance(at(0.05, 0.1), GEO, P, cfg, HOVER, np.random.default_rng(0))
        assert np.all(w.force == 0.0) and np.all(w.torque == 0.0)

    def test_outside_section_raises(self):
        with pytest.raises(AeroSingularityError):
            tunnel_disturbance(at(-0.01, 1.0), GEO, P, AeroConfig(), HOVER, np.random.default_rng(0))

    def test_seeded_streams_repeat(self):
        a = tunnel_disturbance(at(0.1, 0.2), GEO, P, AeroConfig(), HOVER, np.random.default_rng(9))
        b = tunnel_disturbance(at(0.1, 0.2), GEO, P, AeroConfig(), HOVER, np.random.default_rng(9))
        assert np.array_equal(a.force, b.force) and np.array_equal(a.torque, b.torque)

    @given(st.floats(0.02, 1.98), st.floats(0.1, 1.9))
    def test_reflection_symmetry_of_mean(self, y, z):
        f = tunnel_mean_force((10.0, y, z), GEO, P, AeroConfig(), HOVER)
        g = tunnel_mean_force((10.0, GEO.width - y, z), GEO, P, AeroConfig(), HOVER)
        np.testing.assert_allclose(g, f * np.array([1.0, -1.0, 1.0]), atol=1e-12)

    def test_reflection_symmetry_of_samples(self):
        y, z, n = 0.1, 1.0, 4000
        ra, rb = np.random.default_rng(4), np.random.default_rng(5)
        fa = np.array([tunnel_disturbance(at(y, z), GEO, P, AeroConfig(), HOVER, ra).force for _ in range(n)])
        fb = np.array([tunnel_disturbance(at(GEO.width - y, z), GEO, P, AeroConfig(), HOVER, rb).force for _ in range(n)])
        se = np.sqrt(fa.var(axis=0) / n + fb.var(axis=0) / n)
        diff = fa.mean(axis=0) - fb.mean(axis=0) * np.array([1.0, -1.0, 1.0])
        assert np.all(np.abs(diff) <= 5 * se + 1e-12)


class TestWind:
    def test_zero_bound(self):
        np.testing.assert_array_equal(wind_disturbance(0.0, np.random.default_rng(0)), np.zeros(3))

    def test_magnitude_bounds(self):
        rng = np.random.default_rng(0)
        mags = np.array([np.linalg.norm(wind_disturbance(0.8, rng)) for _ in range(10_000)])
        assert mags.max() <= 0.8 and mags.min() >= 0.0

    def test_direction_uniform(self):
        rng = np.random.default_rng(1)
        v = np.array([wind_disturbance(1.0, rng) for _ in range(20_000)])
        u = v / np.linalg.norm(v, axis=1, keepdims=True)
        np.testing.assert_allclose(u.mean(axis=0), 0.0, atol=0.03)

    def test_deterministic(self):
        a = [wind_disturbance(0.8, r) for r in [np.random.default_rng(3)] for _ in range(5)]
        b = [wind_disturbance(0.8, r) for r in [np.random.default_rng(3)] for _ in range(5)]
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_process_holds_for_interval(self):
        w = WindProcess(0.8, np.random.default_rng(0), hold_time=1.0)
        first = w(0.0).copy()
        assert np.array_equal(w(0.5), first) and np.array_equal(w(0.99), first)
        assert not np.array_equal(w(1.0), first)


def test_effect_field_layout():
    rows = effect_field(GEO, P, AeroConfig(), ny=5, nz=5)
    assert len(rows) == 25 and all(len(r) == 5 for r in rows)
    center = [r for r in rows if r[0] == 1.0 and r[1] == 1.0][0]
    assert math.isfinite(center[4])


def test_wall_normals_point_inward():
    p = np.array([10.0, 1.0, 1.0])
    for normal, vec in zip(WALL_NORMALS, GEO.wall_vectors(p)):
        assert normal @ vec > 0
