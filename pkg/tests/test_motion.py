import numpy as np
import pytest

from antmot.motion import CHI2_GATE_4DOF_95, KalmanFilter, KalmanState, motion_gate


class DenseOracle:
    """Textbook Kalman algebra with explicit dense matrices and inverses.

    Deliberately written the slow, obvious way (np.linalg.inv included) so it
    shares nothing with the implementation under test beyond the model
    definition: constant-velocity F, identity-on-position H, and the
    height-relative noise scales.
    """

    def __init__(self, wp=1.0 / 20, wv=1.0 / 160):
        self.wp, self.wv = wp, wv
        self.F = np.eye(8)
        for i in range(4):
            self.F[i, 4 + i] = 1.0
        self.H = np.hstack([np.eye(4), np.zeros((4, 4))])

    def Q(self, h):
        return np.diag([(self.wp * h) ** 2] * 4 + [(self.wv * h) ** 2] * 4)

    def R(self, h):
        return np.diag([(self.wp * h) ** 2] * 4)

    def predict(self, mean, cov):
        return self.F @ mean, self.F @ cov @ self.F.T + self.Q(mean[3])

    def update(self, mean, cov, z):
        S = self.H @ cov @ self.H.T + self.R(mean[3])
        K = cov @ self.H.T @ np.linalg.inv(S)
        new_mean = mean + K @ (z - self.H @ mean)
        new_cov = cov - K @ S @ K.T
        return new_mean, new_cov

    def mahalanobis_sq(self, mean, cov, z):
        S = self.H @ cov @ self.H.T + self.R(mean[3])
        d = z - self.H @ mean
        return float(d @ np.linalg.inv(S) @ d)


def random_state(rng) -> KalmanState:
    kf = KalmanFilter()
    z = np.array(
        [rng.uniform(0, 500), rng.uniform(0, 500), rng.uniform(20, 120), rng.uniform(20, 120)]
    )
    state = kf.initiate(z)
    for _ in range(int(rng.integers(0, 4))):
        state = kf.predict(state)
        z2 = state.mean[:4] + rng.normal(0, 2, 4)
        z2[2:] = np.maximum(z2[2:], 1.0)
        state = kf.update(state, z2)
    return state


class TestInitiate:
    def test_zero_velocity_mean(self):
        state = KalmanFilter().initiate([10, 10, 96, 96])
        assert state.mean == pytest.approx([10, 10, 96, 96, 0, 0, 0, 0])

    def test_diagonal_positive_covariance(self):
        cov = KalmanFilter().initiate([10, 10, 96, 96]).covariance
        assert np.all(np.diag(cov) > 0)
        assert np.count_nonzero(cov - np.diag(np.diag(cov))) == 0

    def test_deterministic(self):
        kf = KalmanFilter()
        a, b = kf.initiate([5, 6, 50, 40]), kf.initiate([5, 6, 50, 40])
        assert np.array_equal(a.mean, b.mean)
        assert np.array_equal(a.covariance, b.covariance)

    def test_invalid_measurement_rejected(self):
        with pytest.raises(ValueError):
            KalmanFilter().initiate([0, 0, -1, 10])
        with pytest.raises(ValueError):
            KalmanFilter().initiate([0, 0, np.nan, 10])


class TestPredict:
    def test_zero_velocity_fixed_point(self):
        kf = KalmanFilter()
        state = kf.initiate([10, 20, 30, 40])
        assert kf.predict(state).mean[:4] == pytest.approx(state.mean[:4])

    def test_velocity_moves_position(self):
        kf = KalmanFilter()
        state = KalmanState(np.array([0, 0, 10, 10, 1, 0, 0, 0.0]), np.eye(8))
        assert kf.predict(state).mean[0] == pytest.approx(1.0)

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(0)
        kf, oracle = KalmanFilter(), DenseOracle()
        for _ in range(200):
            state = random_state(rng)
            got = kf.predict(state)
            want_mean, want_cov = oracle.predict(state.mean, state.covariance)
            assert got.mean == pytest.approx(want_mean, abs=1e-9)
            assert got.covariance == pytest.approx(want_cov, abs=1e-9)

    def test_covariance_trace_grows(self):
        kf = KalmanFilter()
        state = kf.initiate([0, 0, 50, 50])
        assert np.trace(kf.predict(state).covariance) >= np.trace(state.covariance)


class TestUpdate:
    def test_zero_innovation_keeps_position(self):
        kf = KalmanFilter()
        state = kf.predict(kf.initiate([10, 20, 96, 96]))
        updated = kf.update(state, state.mean[:4])
        assert updated.mean[:4] == pytest.approx(state.mean[:4])

    def test_variance_reduction(self):
        kf = KalmanFilter()
        state = kf.predict(kf.initiate([10, 20, 96, 96]))
        updated = kf.update(state, [12, 21, 95, 97])
        for i in range(4):
            assert updated.covariance[i, i] <= state.covariance[i, i]

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(1)
        kf, oracle = KalmanFilter(), DenseOracle()
        for _ in range(200):
            state = random_state(rng)
            z = state.mean[:4] + rng.normal(0, 3, 4)
            z[2:] = np.maximum(z[2:], 1.0)
            got = kf.update(state, z)
            want_mean, want_cov = oracle.update(state.mean, state.covariance, z)
            assert got.mean == pytest.approx(want_mean, abs=1e-9)
            assert got.covariance == pytest.approx(want_cov, abs=1e-9)

    def test_non_finite_measurement_rejected(self):
        kf = KalmanFilter()
        state = kf.initiate([0, 0, 10, 10])
        with pytest.raises(ValueError):
            kf.update(state, [np.inf, 0, 10, 10])


class TestBatchedVariants:
    def test_predict_many_equals_predict(self):
        rng = np.random.default_rng(2)
        kf = KalmanFilter()
        states = [random_state(rng) for _ in range(10)]
        batched = kf.predict_many(states)
        for state, got in zip(states, batched):
            want = kf.predict(state)
            assert np.array_equal(got.mean, want.mean)
            assert np.array_equal(got.covariance, want.covariance)

    def test_update_many_equals_update(self):
        rng = np.random.default_rng(3)
        kf = KalmanFilter()
        states = [random_state(rng) for _ in range(10)]
        zs = [s.mean[:4] + rng.normal(0, 2, 4) for s in states]
        for z in zs:
            z[2:] = np.maximum(z[2:], 1.0)
        batched = kf.update_many(states, zs)
        for state, z, got in zip(states, zs, batched):
            want = kf.update(state, z)
            assert got.mean == pytest.approx(want.mean, abs=1e-12)
            assert got.covariance == pytest.approx(want.covariance, abs=1e-12)

    def test_gating_distances_equals_rows(self):
        rng = np.random.default_rng(4)
        kf = KalmanFilter()
        states = [random_state(rng) for _ in range(8)]
        z = np.array([random_state(rng).mean[:4] for _ in range(6)])
        batch = kf.gating_distances(states, z)
        for i, state in enumerate(states):
            assert batch[i] == pytest.approx(kf.mahalanobis_sq(state, z), abs=1e-12)

    def test_empty_batches(self):
        kf = KalmanFilter()
        assert kf.predict_many([]) == []
        assert kf.update_many([], []) == []


class TestMahalanobis:
    def test_zero_displacement(self):
        kf = KalmanFilter()
        state = kf.predict(kf.initiate([10, 10, 96, 96]))
        assert kf.mahalanobis_sq(state, state.mean[:4]) == pytest.approx(0.0, abs=1e-12)

    def test_identity_innovation_covariance_gives_euclidean(self):
        # zero state covariance and h = 20 make S = R = I at weight 1/20
        kf = KalmanFilter()
        state = KalmanState(np.array([5, 5, 30, 20, 0, 0, 0, 0.0]), np.zeros((8, 8)))
        z = np.array([6.0, 7.0, 30.0, 20.0])
        assert kf.mahalanobis_sq(state, z) == pytest.approx(5.0, abs=1e-12)

    def test_scaled_identity_hand_case(self):
        # h = 40 gives S = 4I; squared displacement 8 scales to 2
        kf = KalmanFilter()
        state = KalmanState(np.array([5, 5, 30, 40, 0, 0, 0, 0.0]), np.zeros((8, 8)))
        z = np.array([7.0, 7.0, 30.0, 40.0])
        assert kf.mahalanobis_sq(state, z) == pytest.approx(2.0, abs=1e-12)

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(5)
        kf, oracle = KalmanFilter(), DenseOracle()
        for _ in range(200):
            state = random_state(rng)
            z = state.mean[:4] + rng.normal(0, 5, 4)
            z[2:] = np.maximum(z[2:], 1.0)
            want = oracle.mahalanobis_sq(state.mean, state.covariance, z)
            assert kf.mahalanobis_sq(state, z) == pytest.approx(want, abs=1e-9)

    def test_translation_invariance(self):
        rng = np.random.default_rng(6)
        kf = KalmanFilter()
        for _ in range(50):
            state = random_state(rng)
            z = state.mean[:4] + rng.normal(0, 3, 4)
            z[2:] = np.maximum(z[2:], 1.0)
            shift = np.array([rng.normal(0, 100), rng.normal(0, 100), 0, 0])
            shifted = KalmanState(
                np.concatenate([state.mean[:4] + shift, state.mean[4:]]), state.covariance
            )
            assert kf.mahalanobis_sq(shifted, z + shift) == pytest.approx(
                kf.mahalanobis_sq(state, z), abs=1e-9
            )

    def test_singular_covariance_raises(self):
        kf = KalmanFilter(std_weight_position=0.0)
        state = KalmanState(np.zeros(8) + [0, 0, 10, 10, 0, 0, 0, 0], np.zeros((8, 8)))
        with pytest.raises(np.linalg.LinAlgError):
            kf.mahalanobis_sq(state, [1.0, 0, 10, 10])


class TestMotionGate:
    def test_zero_distance_passes(self):
        assert motion_gate(0.0, 1.0)

    def test_boundary_excluded(self):
        assert not motion_gate(9.4877, 9.4877)

    def test_chi_square_default(self):
        assert motion_gate(9.0, CHI2_GATE_4DOF_95)
        assert not motion_gate(9.5, CHI2_GATE_4DOF_95)

    def test_elementwise_on_arrays(self):
        out = motion_gate(np.array([0.5, 2.0]), 1.0)
        assert out.tolist() == [True, False]


class TestFilterBehaviour:
    def test_constant_velocity_convergence(self):
        # responsive velocity process noise: the estimation error of the
        # matched model decays geometrically and is below 1e-6 px by step 20
        kf = KalmanFilter(std_weight_position=1 / 20, std_weight_velocity=1 / 20)
        velocity = np.array([2.0, -1.5])
        pos = np.array([100.0, 100.0])
        state = kf.initiate([pos[0], pos[1], 96, 96])
        for step in range(1, 21):
            state = kf.predict(state)
            truth = pos + velocity * step
            state = kf.update(state, [truth[0], truth[1], 96, 96])
        assert abs(state.mean[0] - truth[0]) < 1e-6
        assert abs(state.mean[1] - truth[1]) < 1e-6

    def test_default_scales_still_converge(self):
        # the smoother default velocity noise decays at ~0.89 per step
        kf = KalmanFilter()
        velocity = np.array([2.0, -1.5])
        pos = np.array([100.0, 100.0])
        state = kf.initiate([pos[0], pos[1], 96, 96])
        errors = []
        for step in range(1, 101):
            state = kf.predict(state)
            truth = pos + velocity * step
            state = kf.update(state, [truth[0], truth[1], 96, 96])
            errors.append(abs(state.mean[0] - truth[0]))
        assert errors[-1] < 1e-6
        assert errors[-1] < errors[19] < errors[4]

    def test_covariance_stays_symmetric_psd(self):
        rng = np.random.default_rng(7)
        kf = KalmanFilter()
        state = kf.initiate([50, 50, 96, 96])
        for _ in range(300):
            if rng.random() < 0.5:
                state = kf.predict(state)
            else:
                z = state.mean[:4] + rng.normal(0, 4, 4)
                z[2:] = np.maximum(z[2:], 1.0)
                state = kf.update(state, z)
            cov = state.covariance
            assert np.abs(cov - cov.T).max() < 1e-9
            assert np.linalg.eigvalsh(cov).min() > -1e-9

    def test_gate_calibration_95_percent(self):
        rng = np.random.default_rng(8)
        kf = KalmanFilter()
        state = kf.initiate([200, 200, 96, 96])
        for _ in range(5):
            state = kf.predict(state)
            z = state.mean[:4] + rng.normal(0, 2, 4)
            z[2:] = np.maximum(z[2:], 1.0)
            state = kf.update(state, z)
        state = kf.predict(state)
        mean, cov = state.mean[:4], state.covariance[:4, :4].copy()
        cov[range(4), range(4)] += (state.mean[3] / 20) ** 2
        samples = rng.multivariate_normal(mean, cov, size=10_000)
        d = kf.mahalanobis_sq(state, samples)
        rate = float(np.mean(motion_gate(d, CHI2_GATE_4DOF_95)))
        assert 0.93 <= rate <= 0.97
