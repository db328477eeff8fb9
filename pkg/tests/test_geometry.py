import numpy as np
import pytest

from ppmap.geometry import (
    Se3Pose,
    Sim3Transform,
    UnitQuaternion,
    apply_sim3,
    compose_sim3,
    quat_point_jacobian,
    quat_point_jacobian_batch,
    quat_multiply_raw,
    rotation_matrix,
    rotation_matrix_raw,
    rotation_matrix_quat_jacobian,
    rotation_angle,
    skew,
    transform_pose,
)

from conftest import central_diff_vec, random_sim3, random_unit_quaternion


def sandwich_rotate(q: UnitQuaternion, p):
    """Oracle: rotate p via the explicit product q * (0, p) * q~."""
    qa = q.as_array()
    qc = np.array([qa[0], -qa[1], -qa[2], -qa[3]])
    pq = np.concatenate(([0.0], p))
    return quat_multiply_raw(quat_multiply_raw(qa, pq), qc)[1:]


class TestUnitQuaternion:
    def test_normalized_on_construction(self, rng):
        for _ in range(100):
            q = UnitQuaternion.from_array(rng.normal(size=4))
            assert abs(np.linalg.norm(q.as_array()) - 1.0) < 1e-9
            assert q.w >= 0.0

    def test_rotation_matrix_orthogonal(self, rng):
        for _ in range(100):
            r = rotation_matrix(random_unit_quaternion(rng))
            assert np.abs(r @ r.T - np.eye(3)).max() < 1e-9
            assert abs(np.linalg.det(r) - 1.0) < 1e-9

    def test_matrix_round_trip(self, rng):
        for _ in range(50):
            q = random_unit_quaternion(rng)
            q2 = UnitQuaternion.from_rotation_matrix(rotation_matrix(q))
            assert min(np.linalg.norm(q.as_array() - q2.as_array()),
                       np.linalg.norm(q.as_array() + q2.as_array())) < 1e-9

    def test_multiply_matches_matrix_product(self, rng):
        for _ in range(50):
            a = random_unit_quaternion(rng)
            b = random_unit_quaternion(rng)
            assert np.abs(rotation_matrix(a * b)
                          - rotation_matrix(a) @ rotation_matrix(b)).max() < 1e-12


class TestRotationMatrix:
    def test_identity(self):
        assert np.array_equal(rotation_matrix(UnitQuaternion.identity()), np.eye(3))

    def test_90deg_about_z(self):
        q = UnitQuaternion.from_axis_angle([0, 0, 1], np.pi / 2)
        assert np.abs(rotation_matrix(q) @ [1, 0, 0] - [0, 1, 0]).max() < 1e-12

    def test_sandwich_oracle(self, rng):
        for _ in range(100):
            q = random_unit_quaternion(rng)
            p = rng.normal(size=3)
            assert np.abs(rotation_matrix(q) @ p - sandwich_rotate(q, p)).max() < 1e-12


class TestSkew:
    def test_zero(self):
        assert np.array_equal(skew(np.zeros(3)), np.zeros((3, 3)))

    def test_cross_product_example(self):
        assert np.array_equal(skew([1, 2, 3]) @ [1, 0, 0], [0.0, 3.0, -2.0])

    def test_antisymmetric_and_cross(self, rng):
        for _ in range(50):
            p = rng.normal(size=3)
            u = rng.normal(size=3)
            s = skew(p)
            assert np.array_equal(s.T, -s)
            assert np.abs(s @ u - np.cross(p, u)).max() < 1e-12


class TestQuatPointJacobian:
    def test_identity_point(self):
        # At identity the v-columns reduce to -2w[p]x (the w-column to 2p).
        p = np.array([1.0, 2.0, 3.0])
        jac = quat_point_jacobian(UnitQuaternion.identity(), p)
        assert np.abs(jac[:, 0] - 2.0 * p).max() < 1e-12
        assert np.abs(jac[:, 1:] - (-2.0 * skew(p))).max() < 1e-12

    def test_zero_point(self, rng):
        q = random_unit_quaternion(rng)
        assert np.array_equal(quat_point_jacobian(q, np.zeros(3)), np.zeros((3, 4)))

    def test_finite_difference_oracle(self, rng):
        worst = 0.0
        for _ in range(1000):
            q = random_unit_quaternion(rng)
            p = rng.normal(size=3)
            jac = quat_point_jacobian(q, p)
            jac_fd = central_diff_vec(lambda qa: rotation_matrix_raw(qa) @ p,
                                      q.as_array(), h=1e-6)
            scale = max(np.abs(jac_fd).max(), 1e-6)
            worst = max(worst, np.abs(jac - jac_fd).max() / scale)
        assert worst < 1e-6

    def test_batch_matches_single(self, rng):
        q = random_unit_quaternion(rng)
        pts = rng.normal(size=(17, 3))
        batch = quat_point_jacobian_batch(q, pts)
        for i in range(17):
            assert np.abs(batch[i] - quat_point_jacobian(q, pts[i])).max() < 1e-14

    def test_rotation_matrix_jacobian_fd(self, rng):
        for _ in range(50):
            q = random_unit_quaternion(rng)
            dr = rotation_matrix_quat_jacobian(q)
            fd = central_diff_vec(lambda qa: rotation_matrix_raw(qa).ravel(),
                                  q.as_array(), h=1e-6)
            assert np.abs(dr.reshape(4, 9).T - fd).max() < 1e-6


class TestSim3:
    def test_identity_apply(self, rng):
        p = rng.normal(size=3)
        assert np.array_equal(apply_sim3(Sim3Transform.identity(), p), p)

    def test_axis_aligned_example(self):
        theta = Sim3Transform(2.0, UnitQuaternion.identity(), np.array([1.0, 0, 0]))
        assert np.array_equal(apply_sim3(theta, [1.0, 1.0, 1.0]), [3.0, 2.0, 2.0])

    def test_apply_inverse_round_trip(self, rng):
        for _ in range(100):
            theta = random_sim3(rng)
            p = rng.normal(size=3)
            back = apply_sim3(theta.inverse(), apply_sim3(theta, p))
            assert np.abs(back - p).max() < 1e-12 * max(1.0, np.abs(p).max())

    def test_scale_must_be_positive(self):
        with pytest.raises(ValueError):
            Sim3Transform(-1.0, UnitQuaternion.identity(), np.zeros(3))

    def test_compose_identity_and_inverse(self, rng):
        theta = random_sim3(rng)
        ident = compose_sim3(theta, theta.inverse())
        assert abs(ident.scale - 1.0) < 1e-9
        assert rotation_angle(ident.rotation, UnitQuaternion.identity()) < 1e-9
        assert np.linalg.norm(ident.translation) < 1e-9

    def test_compose_pointwise_oracle(self, rng):
        for _ in range(100):
            a, b = random_sim3(rng), random_sim3(rng)
            p = rng.normal(size=3)
            lhs = apply_sim3(compose_sim3(a, b), p)
            rhs = apply_sim3(a, apply_sim3(b, p))
            assert np.abs(lhs - rhs).max() < 1e-10 * max(1.0, np.abs(rhs).max())

    def test_compose_associative(self, rng):
        a, b, c = (random_sim3(rng) for _ in range(3))
        p = rng.normal(size=(20, 3))
        lhs = apply_sim3(compose_sim3(compose_sim3(a, b), c), p)
        rhs = apply_sim3(compose_sim3(a, compose_sim3(b, c)), p)
        assert np.abs(lhs - rhs).max() < 1e-9

    def test_vectorized_apply(self, rng):
        theta = random_sim3(rng)
        pts = rng.normal(size=(40, 3))
        batch = apply_sim3(theta, pts)
        for i in range(40):
            assert np.abs(batch[i] - apply_sim3(theta, pts[i])).max() < 1e-14


class TestSe3Pose:
    def test_compose_inverse_is_identity(self, rng):
        for _ in range(50):
            pose = Se3Pose(random_unit_quaternion(rng), rng.normal(size=3))
            ident = pose.compose(pose.inverse())
            assert rotation_angle(ident.rotation, UnitQuaternion.identity()) < 1e-9
            assert np.linalg.norm(ident.translation) < 1e-9

    def test_center(self, rng):
        pose = Se3Pose(random_unit_quaternion(rng), rng.normal(size=3))
        assert np.linalg.norm(pose.apply(pose.center())) < 1e-12


class TestTransformPose:
    def test_identity(self, rng):
        pose = Se3Pose(random_unit_quaternion(rng), rng.normal(size=3))
        out = transform_pose(Sim3Transform.identity(), pose)
        assert rotation_angle(out.rotation, pose.rotation) < 1e-12
        assert np.abs(out.translation - pose.translation).max() < 1e-12

    def test_pure_translation_shifts_center(self, rng):
        pose = Se3Pose(random_unit_quaternion(rng), rng.normal(size=3))
        shift = np.array([0.5, -1.0, 2.0])
        theta = Sim3Transform(1.0, UnitQuaternion.identity(), shift)
        out = transform_pose(theta, pose)
        assert np.abs(out.center() - (pose.center() + shift)).max() < 1e-12
        assert rotation_angle(out.rotation, pose.rotation) < 1e-12

    def test_projection_consistency_oracle(self, rng):
        # Projecting a theta-mapped point with the theta-mapped pose must give
        # the same pixel as the original pair.
        fx = fy = 120.0
        cx = cy = 32.0

        def project(pose, x):
            xc = pose.apply(x)
            return np.array([fx * xc[0] / xc[2] + cx, fy * xc[1] / xc[2] + cy])

        for _ in range(100):
            pose = Se3Pose(random_unit_quaternion(rng), rng.normal(size=3))
            theta = random_sim3(rng)
            x = rng.normal(size=3)
            if abs(pose.apply(x)[2]) < 0.1:
                continue
            a = project(pose, x)
            b = project(transform_pose(theta, pose), apply_sim3(theta, x))
            assert np.abs(a - b).max() < 1e-9 * max(1.0, np.abs(a).max())
