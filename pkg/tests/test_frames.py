import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import qrflow as qf
from qrflow.errors import DegenerateProbe, ZeroColumn
from qrflow.frames import (
    GivensFrames,
    HouseholderFrames,
    ReimbedWorkspace,
    form_q,
    frame_health,
    init_givens,
    init_householder,
    reimbed_givens,
    reimbed_householder,
)

import oracles

EPS = np.finfo(float).eps


def random_v_frames(rng, n, p):
    coords = []
    for i in range(p):
        v = rng.standard_normal(n - i)
        coords.append(v / np.linalg.norm(v))
    sigma = rng.choice([-1.0, 1.0], p)
    return HouseholderFrames("v", n, p, coords, sigma)


def random_theta_frames(rng, n, p):
    angles, orders = [], []
    for i in range(p):
        m = n - i
        if m > 1:
            l = 1 + int(rng.integers(0, m - 1))
            order = np.array([0, l] + [j for j in range(1, m) if j != l])
            angles.append(rng.uniform(-np.pi, np.pi, m - 1))
        else:
            order = np.array([0])
            angles.append(np.zeros(0))
        orders.append(order)
    return GivensFrames(n, p, angles, orders)


class TestInitHouseholder:
    def test_identity_start(self):
        fr = init_householder(np.eye(3), "u")
        assert np.allclose(fr.sigma, [-1.0, -1.0, -1.0])
        assert np.allclose(fr.coords[0][:-1], [2.0, 0.0, 0.0])
        assert np.allclose(form_q(fr), np.eye(3))

    def test_single_column_u(self):
        fr = init_householder(np.array([[3.0], [4.0]]), "u")
        assert np.allclose(fr.coords[0], [8.0, 4.0, -5.0])
        assert fr.sigma[0] == -1.0

    def test_single_column_w(self):
        fr = init_householder(np.array([[3.0], [4.0]]), "w")
        assert np.allclose(fr.coords[0], [1.0, 0.5])
        assert fr.coords[0][0] == 1.0
        assert fr.sigma[0] == -1.0

    def test_zero_column(self):
        x = np.eye(3)
        x[:, 1] = 0.0
        with pytest.raises(ZeroColumn):
            init_householder(x, "v")

    @given(st.integers(0, 500))
    @settings(max_examples=40, deadline=None)
    def test_triangularizes_with_positive_diag_factor(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 8))
        p = int(rng.integers(1, n + 1))
        x0 = rng.standard_normal((n, p))
        for variant in ("u", "v", "w"):
            fr = init_householder(x0, variant)
            q = form_q(fr)
            r = q.T @ x0
            assert np.abs(np.tril(r, -1)).max() <= 1e-12 * np.abs(x0).max()
            assert (np.diag(r) > 0).all()
            assert oracles.orthonormality_defect(q) <= 10 * n * EPS


class TestInitGivens:
    def test_order_from_largest_entry(self):
        fr = init_givens(np.array([[1.0], [2.0], [-7.0], [3.0]]))
        assert list(fr.orders[0]) == [0, 2, 1, 3]

    def test_single_rotator(self):
        fr = init_givens(np.array([[3.0], [4.0]]))
        assert np.allclose(fr.angles[0], [np.arctan2(4.0, 3.0)])

    def test_identity_start(self):
        fr = init_givens(np.eye(3))
        for a in fr.angles:
            assert np.allclose(a, 0.0)
        assert np.allclose(form_q(fr), np.eye(3))

    def test_zero_column(self):
        with pytest.raises(ZeroColumn):
            init_givens(np.zeros((3, 1)))

    @given(st.integers(0, 500))
    @settings(max_examples=40, deadline=None)
    def test_triangularizes_positive_diag(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 8))
        p = int(rng.integers(1, n + 1))
        x0 = rng.standard_normal((n, p))
        fr = init_givens(x0)
        q = form_q(fr)
        r = q.T @ x0
        assert np.abs(np.tril(r, -1)).max() <= 1e-12 * np.abs(x0).max()
        diag = np.diag(r)[:min(n - 1, p)]  # a 1x1 trailing block has no rotator
        assert (diag > 0).all()
        for i in range(p):
            assert (np.abs(fr.angles[i]) <= np.pi).all()


class TestFrameHealth:
    def test_v_unhealthy(self):
        fr = HouseholderFrames("v", 2, 1, [np.array([0.6, 0.8])],
                               np.array([-1.0]))
        assert not frame_health(fr)[0]

    def test_w_healthy(self):
        fr = HouseholderFrames("w", 2, 1, [np.array([1.0, 0.5])],
                               np.array([-1.0]))
        assert frame_health(fr)[0]

    def test_theta_all_zero_healthy(self):
        fr = init_givens(np.eye(4))
        assert frame_health(fr).all()

    def test_theta_matches_reconstructed_column_inequality(self):
        # health on angles == the squared-entry inequality on x = G e1
        rng = np.random.default_rng(11)
        mismatches = 0
        for _ in range(1000):
            m = int(rng.integers(2, 9))
            fr = random_theta_frames(rng, m, 1)
            ang, order = fr.angles[0], fr.orders[0]
            x = oracles.dense_g(order, ang, m)[:, 0]
            lead = x[order[0]] ** 2 + x[order[1]] ** 2
            ineq = all(
                lead >= x[order[j]] ** 2 for j in range(2, m)
            )
            if bool(frame_health(fr)[0]) != ineq:
                mismatches += 1
        assert mismatches == 0

    def test_v_health_matches_sign_rule_on_reconstruction(self):
        # health of (v, sigma) == the textbook sign of the reconstructed x
        rng = np.random.default_rng(12)
        mismatches = 0
        for _ in range(1000):
            m = int(rng.integers(1, 9))
            v = rng.standard_normal(m)
            v /= np.linalg.norm(v)
            sigma = float(rng.choice([-1.0, 1.0]))
            fr = HouseholderFrames("v", m, 1, [v], np.array([sigma]))
            x = oracles.dense_reflector(v) @ (sigma * np.eye(m)[:, 0])
            consistent = oracles.textbook_sigma(x) == sigma
            if bool(frame_health(fr)[0]) != consistent:
                mismatches += 1
        assert mismatches == 0

    def test_u_health_is_sign_test(self):
        # healthy iff sigma * (reconstructed first entry of x) < 0
        fr = HouseholderFrames(
            "u", 2, 1, [np.array([8.0, 4.0, -5.0])], np.array([-1.0])
        )
        assert frame_health(fr)[0]
        bad = HouseholderFrames(
            "u", 2, 1, [np.array([2.0, 4.0, -5.0])], np.array([-1.0])
        )
        assert not frame_health(bad)[0]


class TestReimbedHouseholder:
    def test_noop_when_healthy(self):
        rng = np.random.default_rng(0)
        fr = init_householder(rng.standard_normal((4, 2)), "v")
        assert reimbed_householder(fr) is fr

    def test_two_by_two_known_case(self):
        fr = HouseholderFrames("v", 2, 1, [np.array([0.6, 0.8])],
                               np.array([-1.0]))
        fr2 = reimbed_householder(fr)
        assert fr2.coords[0][0] ** 2 >= 0.5
        assert np.abs(form_q(fr) - form_q(fr2)).max() <= 1e-14

    @given(st.integers(0, 2000), st.sampled_from(["u", "v", "w"]))
    @settings(max_examples=120, deadline=None)
    def test_chart_change_preserves_q(self, seed, variant):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 9))
        p = int(rng.integers(1, n + 1))
        fr_v = random_v_frames(rng, n, p)
        if variant == "v":
            fr = fr_v
        else:
            coords = []
            for i, v in enumerate(fr_v.coords):
                if variant == "w":
                    w = v / v[0] if abs(v[0]) > 1e-3 else np.append(
                        1.0, v[1:]
                    )
                    w[0] = 1.0
                    coords.append(w)
                else:
                    rho = fr_v.sigma[i] * float(rng.uniform(0.5, 2.0))
                    u = (-2.0 * fr_v.sigma[i] * abs(rho) * v[0]) * v
                    coords.append(np.append(u, rho))
            fr = HouseholderFrames(variant, n, p, coords, fr_v.sigma)
            if variant == "u" and any(
                abs(c[0]) < 1e-8 for c in fr.coords
            ):
                return
        fr2 = reimbed_householder(fr, force=True)
        assert np.abs(form_q(fr) - form_q(fr2)).max() <= 1e-12
        assert frame_health(fr2).all()

    def test_workspace_orthogonality(self):
        rng = np.random.default_rng(33)
        fr = random_v_frames(rng, 6, 4)
        ws = ReimbedWorkspace()
        reimbed_householder(fr, force=True, workspace=ws)
        for k in ws.ks:
            if k is not None:
                assert oracles.orthonormality_defect(k) <= 10 * 6 * EPS

    def test_sign_rule_follows_previous_leading_component(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            fr = random_v_frames(rng, 5, 3)
            fr2 = reimbed_householder(fr, force=True)
            for i in range(3):
                s_old = 1.0 if fr.coords[i][0] >= 0 else -1.0
                s_new = 1.0 if fr2.coords[i][0] >= 0 else -1.0
                assert s_old == s_new


class TestReimbedGivens:
    def test_noop_when_healthy(self):
        fr = init_givens(np.eye(4))
        assert reimbed_givens(fr) is fr

    def test_zero_angles_probe_is_e1(self):
        fr = init_givens(np.eye(4))
        fr2 = reimbed_givens(fr, force=True)
        for i in range(4):
            assert np.allclose(fr2.angles[i], 0.0)
            assert list(fr2.orders[i]) == list(fr.orders[i])

    def test_health_restored_and_order_moves_large_entry(self):
        # one column, third component dominant after the chart drifts
        x = np.array([[0.1], [0.05], [2.0]])
        fr = init_givens(x)
        ang = fr.angles[0].copy()
        ang[1] += 1.3  # push the trailing cosine small
        bad = GivensFrames(3, 1, [ang], fr.orders)
        if frame_health(bad)[0]:
            pytest.skip("perturbation did not break health")
        fixed = reimbed_givens(bad)
        assert frame_health(fixed)[0]
        assert np.abs(form_q(bad) - form_q(fixed)).max() <= 1e-13

    @given(st.integers(0, 2000))
    @settings(max_examples=120, deadline=None)
    def test_chart_change_preserves_q(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 9))
        p = int(rng.integers(1, n + 1))
        fr = random_theta_frames(rng, n, p)
        fr2 = reimbed_givens(fr, force=True)
        assert np.abs(form_q(fr) - form_q(fr2)).max() <= 1e-12
        assert frame_health(fr2).all()

    def test_degenerate_probe(self):
        fr = random_theta_frames(np.random.default_rng(9), 4, 2)
        ws = ReimbedWorkspace()
        reimbed_givens(fr, force=True, workspace=ws)
        for k in ws.ks:
            if k is not None:
                assert oracles.orthonormality_defect(k) <= 10 * 4 * EPS
        broken = GivensFrames(
            4, 2, [fr.angles[0] * np.nan, fr.angles[1]], fr.orders
        )
        with pytest.raises(DegenerateProbe):
            reimbed_givens(broken, force=True)


class TestChartAgreementLemmas:
    """Init followed by a forced chart change reproduces the init chart."""

    @given(st.integers(0, 1000))
    @settings(max_examples=100, deadline=None)
    def test_householder_sign_recovery(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 7))
        p = int(rng.integers(1, n + 1))
        x0 = rng.standard_normal((n, p))
        fr = init_householder(x0, "v")
        fr2 = reimbed_householder(fr, force=True)
        assert np.array_equal(fr.sigma, fr2.sigma)
        for a, b in zip(fr.coords, fr2.coords):
            assert np.abs(a - b).max() <= 1e-12

    @given(st.integers(0, 1000))
    @settings(max_examples=100, deadline=None)
    def test_givens_order_recovery(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 7))
        p = int(rng.integers(1, n + 1))
        x0 = rng.standard_normal((n, p))
        fr = init_givens(x0)
        fr2 = reimbed_givens(fr, force=True)
        for i in range(p):
            assert np.array_equal(fr.orders[i], fr2.orders[i])
            if fr.angles[i].size:
                assert np.abs(fr.angles[i] - fr2.angles[i]).max() <= 1e-12


class TestFormQ:
    def test_zero_theta_frames(self):
        fr = GivensFrames(
            5, 2,
            [np.zeros(4), np.zeros(3)],
            [np.arange(5), np.arange(4)],
        )
        q = form_q(fr)
        want = np.zeros((5, 2))
        want[:2, :2] = np.eye(2)
        assert np.array_equal(q, want)

    def test_w_frames_single_column(self):
        fr = init_householder(np.array([[3.0], [4.0]]), "w")
        q = form_q(fr)
        assert np.allclose(q[:, 0], [0.6, 0.8])

    def test_partial_columns(self):
        rng = np.random.default_rng(21)
        x0 = rng.standard_normal((6, 4))
        fr = init_householder(x0, "v")
        q = form_q(fr)
        q2 = form_q(fr, cols=2)
        assert np.allclose(q[:, :2], q2)

    @given(st.integers(0, 500))
    @settings(max_examples=60, deadline=None)
    def test_structural_orthonormality(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 9))
        p = int(rng.integers(1, n + 1))
        fr = random_v_frames(rng, n, p)
        assert oracles.orthonormality_defect(form_q(fr)) <= 10 * n * EPS
        fg = random_theta_frames(rng, n, p)
        assert oracles.orthonormality_defect(form_q(fg)) <= 10 * n * EPS
