import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tunnelmpc.dynamics import (
    GRAVITY,
    PidGains,
    PidState,
    UavParams,
    UavState,
    Wrench,
    accel_to_attitude_thrust,
    attitude_thrust_to_accel,
    inner_loop_step,
    mechanical_energy,
    rotation_matrix,
    step_plant,
)

P = UavParams()
NO_WRENCH = Wrench(np.zeros(3), np.zeros(3))
angles = st.floats(-math.pi, math.pi, allow_nan=False)


def state(pos=(0, 0, 1), vel=(0, 0, 0), att=(0, 0, 0), rates=(0, 0, 0)):
    return UavState(np.array(pos, float), np.array(vel, float), np.array(att, float), np.array(rates, float))


def _rot_oracle(roll, pitch, yaw):
    # independent construction: product of elementary rotations Rz(yaw) Ry(pitch) Rx(roll)
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return rz @ ry @ rx


class TestParams:
    @pytest.mark.parametrize(
        "kwargs",
        [dict(mass=0.0), dict(inertia_diag=(0.1, -0.1, 0.2)), dict(prop_radius=0.0), dict(max_tilt=math.pi / 2)],
    )
    def test_invalid_params_rejected(self, kwargs):
        with pytest.raises(ValueError):
            UavParams(**kwargs)

    def test_negative_gain_rejected(self):
        with pytest.raises(ValueError):
            PidGains(kp=(1.0, -1.0, 1.0))
        with pytest.raises(ValueError):
            PidGains(integrator_limit=0.0)


class TestRotation:
    def test_zero_angles_identity(self):
        np.testing.assert_array_equal(rotation_matrix((0, 0, 0)), np.eye(3))

    def test_quarter_yaw_maps_body_x_to_inertial_y(self):
        R = rotation_matrix((0, 0, math.pi / 2))
        np.testing.assert_allclose(R @ [1, 0, 0], [0, 1, 0], atol=1e-15)

    def test_example_orthonormal(self):
        R = rotation_matrix((0.1, 0.2, 0.3))
        np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
        assert abs(np.linalg.det(R) - 1.0) < 1e-12

    def test_thousand_random_attitudes(self):
        rng = np.random.default_rng(7)
        for att in rng.uniform(-math.pi, math.pi, (1000, 3)):
            R = rotation_matrix(att)
            np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-10)
            assert abs(np.linalg.det(R) - 1.0) < 1e-10

    @given(angles, angles, angles)
    def test_matches_elementary_product(self, r, p, y):
        np.testing.assert_allclose(rotation_matrix((r, p, y)), _rot_oracle(r, p, y), atol=1e-12)


class TestPlant:
    def test_hover_is_equilibrium(self):
        s = state()
        nxt = step_plant(s, P.mass * P.gravity, np.zeros(3), NO_WRENCH, P, 0.01)
        np.testing.assert_allclose(nxt.position, s.position, atol=1e-9)
        np.testing.assert_allclose(nxt.velocity, 0.0, atol=1e-9)

    def test_free_fall_velocity(self):
        nxt = step_plant(state(), 0.0, np.zeros(3), NO_WRENCH, P, 0.01)
        assert abs(nxt.velocity[2] - (-GRAVITY * 0.01)) < 1e-6

    def test_symmetric_z_spin_keeps_rates(self):
        s = state(rates=(0, 0, 1))
        nxt = step_plant(s, P.mass * P.gravity, np.zeros(3), NO_WRENCH, P, 0.01)
        np.testing.assert_allclose(nxt.body_rates, [0, 0, 1], atol=1e-12)

    def test_rejects_bad_dt_and_thrust(self):
        with pytest.raises(ValueError):
            step_plant(state(), 1.0, np.zeros(3), NO_WRENCH, P, 0.0)
        with pytest.raises(ValueError):
            step_plant(state(), -1.0, np.zeros(3), NO_WRENCH, P, 0.01)

    def test_external_force_adds_acceleration(self):
        push = Wrench(np.array([P.mass, 0.0, 0.0]), np.zeros(3))
        nxt = step_plant(state(), P.mass * P.gravity, np.zeros(3), push, P, 0.01)
        assert abs(nxt.velocity[0] - 0.01) < 1e-9

    def test_energy_conserved_without_thrust(self):
        s = state(vel=(0.3, -0.2, 1.0))
        e0 = mechanical_energy(s, P)
        for _ in range(1000):
            s = step_plant(s, 0.0, np.zeros(3), NO_WRENCH, P, 1e-3)
        assert abs(mechanical_energy(s, P) - e0) <= 1e-6 * abs(e0)


class TestAttitudeMap:
    def test_hover_command(self):
        roll, pitch, thrust = accel_to_attitude_thrust((0, 0, 0), 0.0, P)
        assert roll == 0 and pitch == 0
        assert thrust == pytest.approx(P.mass * P.gravity, abs=1e-12)

    def test_forward_accel_gives_pitch(self):
        roll, pitch, _ = accel_to_attitude_thrust((GRAVITY * math.tan(0.1), 0, 0), 0.0, P)
        assert pitch == pytest.approx(0.1, abs=1e-6)
        assert roll == pytest.approx(0.0, abs=1e-12)

    def test_saturates_at_max_tilt(self):
        _, pitch, _ = accel_to_attitude_thrust((100, 0, 0), 0.0, P)
        assert pitch == pytest.approx(math.pi / 10, abs=1e-12)

    @given(
        st.floats(-2.5, 2.5), st.floats(-2.5, 2.5), st.floats(-3, 3), st.floats(-math.pi, math.pi)
    )
    def test_round_trip_without_saturation(self, ax, ay, az, yaw):
        roll, pitch, thrust = accel_to_attitude_thrust((ax, ay, az), yaw, P)
        if max(abs(roll), abs(pitch)) >= P.max_tilt - 1e-12 or not 0 < thrust < P.thrust_max:
            return
        np.testing.assert_allclose(attitude_thrust_to_accel(roll, pitch, thrust, yaw, P), [ax, ay, az], atol=1e-6)


class TestInnerLoop:
    def test_zero_error_zero_torque(self):
        _, torque, _ = inner_loop_step(state(), np.zeros(4), PidGains(), P, 0.01)
        np.testing.assert_allclose(torque, 0.0, atol=1e-9)

    def test_p_only_law(self):
        gains = PidGains(kp=(3.0, 5.0, 7.0), ki=(0, 0, 0), kd=(0, 0, 0))
        s = state(att=(0.05, -0.02, 0.1))
        pid = PidState()  # zero references: error = -attitude
        _, torque, _ = inner_loop_step(s, np.zeros(4), gains, P, 0.01, pid)
        np.testing.assert_allclose(torque, np.array([3.0, 5.0, 7.0]) * -s.attitude, rtol=0, atol=1e-15)

    def test_pid_state_is_not_mutated(self):
        pid = PidState().synced(state())
        before = (pid.att_integral.copy(), pid.vz_ref, pid.yaw_ref)
        inner_loop_step(state(att=(0.1, 0, 0)), np.array([1.0, 0, 0, 0.5]), PidGains(), P, 0.01, pid)
        np.testing.assert_array_equal(pid.att_integral, before[0])
        assert (pid.vz_ref, pid.yaw_ref) == before[1:]

    def test_roll_step_settles_within_half_second(self):
        ay = -GRAVITY * math.tan(0.1)
        roll_d, _, _ = accel_to_attitude_thrust((0, ay, 0), 0.0, P)
        if abs(roll_d - 0.1) > 1e-9:
            ay = -ay
            roll_d, _, _ = accel_to_attitude_thrust((0, ay, 0), 0.0, P)
        assert roll_d == pytest.approx(0.1, abs=1e-9)
        s, pid, roll = state(), None, []
        for _ in range(150):
            thrust, torque, pid = inner_loop_step(s, np.array([0, ay, 0, 0]), PidGains(), P, 0.01, pid)
            s = step_plant(s, thrust, torque, NO_WRENCH, P, 0.01)
            roll.append(s.attitude[0])
        outside = np.nonzero(np.abs(np.array(roll) - 0.1) > 0.02 * 0.1)[0]
        settle = (outside[-1] + 1) * 0.01 if outside.size else 0.0
        assert settle <= 0.5
