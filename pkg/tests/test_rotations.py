import math

import numpy as np
import numpy.testing as npt
import pytest

from famsim.rotations import (GimbalLockError, axis_angle_to_rot, cross, euler_rates_from_omega,
                              euler_to_rot, orthonormalize, rot_to_axis_angle, rot_to_euler,
                              rot_x, rot_y, rot_z, rotvec_to_rot, skew, vee)


def random_rotation(rng):
    v = rng.normal(size=3)
    return axis_angle_to_rot(v / np.linalg.norm(v), rng.uniform(0.0, math.pi - 0.05))


class TestSkew:
    def test_zero(self):
        npt.assert_array_equal(skew([0.0, 0.0, 0.0]), np.zeros((3, 3)))

    def test_basis_cross(self):
        npt.assert_allclose(skew([1, 0, 0]) @ [0, 1, 0], [0, 0, 1], atol=1e-15)

    def test_hand_value(self):
        npt.assert_allclose(skew([1, 2, 3]) @ [4, 5, 6], [-3, 6, -3], atol=1e-15)

    def test_matches_cross_product(self, rng):
        for _ in range(50):
            v, w = rng.normal(size=3), rng.normal(size=3)
            npt.assert_allclose(skew(v) @ w, np.cross(v, w), atol=1e-13)
            npt.assert_allclose(cross(v, w), np.cross(v, w), atol=1e-13)
            npt.assert_allclose(skew(v).T, -skew(v), atol=0)

    def test_vee_inverts_skew(self, rng):
        v = rng.normal(size=3)
        npt.assert_allclose(vee(skew(v)), v, atol=1e-15)


class TestEuler:
    def test_identity(self):
        npt.assert_allclose(euler_to_rot([0, 0, 0]), np.eye(3), atol=0)

    def test_x_rotation_maps_y_to_z(self):
        R = euler_to_rot([math.pi / 2, 0, 0])
        npt.assert_allclose(R @ [0, 1, 0], [0, 0, 1], atol=1e-15)

    def test_orthonormal(self, rng):
        for _ in range(30):
            R = euler_to_rot(rng.uniform(-math.pi, math.pi, 3))
            npt.assert_allclose(R.T @ R, np.eye(3), atol=1e-9)
            assert abs(np.linalg.det(R) - 1.0) < 1e-9

    def test_round_trip(self, rng):
        for _ in range(50):
            e = rng.uniform([-3, -1.4, -3], [3, 1.4, 3])
            out, locked = rot_to_euler(euler_to_rot(e))
            assert not locked
            npt.assert_allclose(out, e, atol=1e-8)

    def test_round_trip_specific(self):
        out, locked = rot_to_euler(euler_to_rot([0.3, -0.2, 0.1]))
        assert not locked
        npt.assert_allclose(out, [0.3, -0.2, 0.1], atol=1e-12)

    def test_identity_euler(self):
        out, locked = rot_to_euler(np.eye(3))
        assert not locked
        npt.assert_array_equal(out, [0, 0, 0])

    @pytest.mark.parametrize("psi", [math.pi / 2, -math.pi / 2])
    def test_gimbal_lock_branch(self, psi):
        R = euler_to_rot([0.4, psi, 0.25])
        out, locked = rot_to_euler(R)
        assert locked
        assert out[2] == 0.0
        # the returned angles still reproduce the rotation
        npt.assert_allclose(euler_to_rot(out), R, atol=1e-9)


class TestAxisAngle:
    def test_zero_angle(self):
        npt.assert_allclose(axis_angle_to_rot([0, 0, 1], 0.0), np.eye(3), atol=0)

    def test_z_quarter_turn(self):
        R = axis_angle_to_rot([0, 0, 1], math.pi / 2)
        npt.assert_allclose(R @ [1, 0, 0], [0, 1, 0], atol=1e-15)

    def test_orthonormal(self, rng):
        for _ in range(30):
            v = rng.normal(size=3)
            R = axis_angle_to_rot(v / np.linalg.norm(v), rng.uniform(0, math.pi))
            npt.assert_allclose(R.T @ R, np.eye(3), atol=1e-9)

    def test_identity_convention(self):
        axis, angle = rot_to_axis_angle(np.eye(3))
        assert angle == 0.0
        npt.assert_array_equal(axis, [0, 0, 1])

    def test_half_turn_about_x(self):
        axis, angle = rot_to_axis_angle(rot_x(math.pi))
        npt.assert_allclose(angle, math.pi, atol=1e-12)
        npt.assert_allclose(axis, [1, 0, 0], atol=1e-9)

    def test_half_turn_sign_convention(self):
        # first nonzero component positive
        R = axis_angle_to_rot([0, -1, 0], math.pi)
        axis, angle = rot_to_axis_angle(R)
        npt.assert_allclose(angle, math.pi, atol=1e-12)
        npt.assert_allclose(axis, [0, 1, 0], atol=1e-9)

    def test_z_quarter_turn_extraction(self):
        axis, angle = rot_to_axis_angle(rot_z(math.pi / 2))
        npt.assert_allclose(angle, math.pi / 2, atol=1e-12)
        npt.assert_allclose(axis, [0, 0, 1], atol=1e-12)

    def test_round_trip(self, rng):
        for _ in range(50):
            v = rng.normal(size=3)
            v /= np.linalg.norm(v)
            angle = rng.uniform(1e-3, math.pi - 1e-3)
            axis, ang = rot_to_axis_angle(axis_angle_to_rot(v, angle))
            npt.assert_allclose(ang, angle, atol=1e-9)
            npt.assert_allclose(axis, v, atol=1e-8)
            assert abs(np.linalg.norm(axis) - 1.0) < 1e-9

    def test_rotvec_small_angle(self):
        w = np.array([1e-9, -2e-9, 5e-10])
        npt.assert_allclose(rotvec_to_rot(w), np.eye(3) + skew(w), atol=1e-15)

    def test_error_rotation_composition(self, rng):
        # the axis-angle extracted from Rd Rc^T, applied to Rc, lands on Rd
        for _ in range(20):
            Rc, Rd = random_rotation(rng), random_rotation(rng)
            axis, angle = rot_to_axis_angle(Rd @ Rc.T)
            R_new = axis_angle_to_rot(axis, angle) @ Rc
            npt.assert_allclose(R_new, Rd, atol=1e-8)
            # the angle of a near-identity rotation has an acos noise floor
            # of order sqrt(machine epsilon)
            assert rot_to_axis_angle(Rd @ R_new.T)[1] < 5e-7


class TestEulerRates:
    def test_identity_at_zero_angles(self, rng):
        omega = rng.normal(size=3)
        npt.assert_allclose(euler_rates_from_omega([0, 0, 0], omega), omega, atol=1e-15)

    def test_singularity_raises(self):
        with pytest.raises(GimbalLockError):
            euler_rates_from_omega([0.1, math.pi / 2, 0.0], [1, 0, 0])

    def test_finite_difference_oracle(self, rng):
        # propagate the exact rotation flow under constant omega and compare
        # Euler-angle finite differences against the mapped rates
        dt = 1e-5
        for _ in range(20):
            e = rng.uniform([-1, -0.9, -1], [1, 0.9, 1])
            omega = rng.normal(size=3)
            R = euler_to_rot(e)
            e_plus, _ = rot_to_euler(rotvec_to_rot(omega * dt) @ R)
            e_minus, _ = rot_to_euler(rotvec_to_rot(-omega * dt) @ R)
            fd = (e_plus - e_minus) / (2 * dt)
            rates = euler_rates_from_omega(e, omega)
            npt.assert_allclose(rates, fd, rtol=1e-5, atol=1e-6)


def test_orthonormalize(rng):
    R = random_rotation(rng) + 1e-6 * rng.normal(size=(3, 3))
    out = orthonormalize(R)
    npt.assert_allclose(out.T @ out, np.eye(3), atol=1e-12)
    assert np.linalg.det(out) > 0
    npt.assert_allclose(out, R, atol=1e-5)


@pytest.mark.parametrize("factory,axis", [(rot_x, [1, 0, 0]), (rot_y, [0, 1, 0]), (rot_z, [0, 0, 1])])
def test_elementary_rotations_fix_their_axis(factory, axis):
    npt.assert_allclose(factory(0.7) @ axis, axis, atol=1e-15)
