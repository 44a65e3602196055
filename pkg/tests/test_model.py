"""Model-based solver tests.

The backward pass is cross-checked against an evaluate-and-fit dynamic
programming oracle that never touches the recursion formulas: every stage
value is evaluated pointwise and refit as a generic quadratic, and the
minimization over u is done on the fitted coefficients.
"""

from __future__ import annotations

import numpy as np
import numpy.testing as npt
import pytest

from termlq import (
    NonFiniteState,
    NotReachable,
    ProblemInstance,
    SingularGamma,
    StageOutOfRange,
    check_reachability,
    costate_residual,
    costate_sequence,
    evaluate_augmented_cost,
    make_instance,
    optimal_control,
    optimal_policy,
    riccati_backward,
    rollout,
    solve_lambda,
    solve_schedule,
    validate_instance,
)

from golden import (
    EXACT_COST,
    EXACT_G2,
    EXACT_LAMBDA,
    EXACT_P0,
    PRINTED_K,
    PRINTED_K1,
    PRINTED_LAMBDA,
    PRINTED_P,
)


def scalar_instance(x0=2.0, xi=5.0):
    """n = m = 1, N = 0, A = B = 1, Q = H = 0, R = 1."""
    one = np.eye(1)
    zero = np.zeros((1, 1))
    return make_instance([one], [one], zero, one, zero,
                         np.array([x0]), np.array([xi]))


def drift(inst, upto):
    M = np.eye(inst.n)
    for k in range(upto):
        M = inst.A[k] @ M
    return M


class TestValidation:
    def test_example_instance_passes(self, example):
        report = validate_instance(example)
        assert report.ok
        assert not report.failures()

    def test_zero_r_reports_eigenvalue(self):
        inst = make_instance([np.eye(1)], [np.eye(1)], np.eye(1),
                             np.zeros((1, 1)), np.eye(1),
                             np.array([0.0]), np.array([0.0]))
        report = validate_instance(inst)
        assert not report.ok
        (fail,) = report.failures()
        assert fail.name == "R_pd"
        assert float(fail.detail.split()[-1]) == pytest.approx(0.0, abs=1e-15)

    def test_short_a_sequence_fails_dimension(self, example):
        inst = ProblemInstance(N=2, n=2, m=1, A=example.A[:2], B=example.B,
                               Q=example.Q, R=example.R, H=example.H,
                               x0=example.x0, xi=example.xi)
        report = validate_instance(inst)
        assert not report.ok
        assert any(c.name == "A_length" for c in report.failures())


class TestRiccatiBackward:
    def test_example_kernels_to_four_decimals(self, example):
        P, _, _ = riccati_backward(example)
        npt.assert_array_equal(P[3], np.eye(2))
        for k in (0, 1, 2):
            npt.assert_allclose(P[k], PRINTED_P[k], atol=1e-3)

    def test_full_precision_anchor(self, example):
        P, _, _ = riccati_backward(example)
        npt.assert_allclose(P[0], EXACT_P0, rtol=1e-13)

    def test_zero_weights_force_zero_kernel(self):
        rng = np.random.default_rng(3)
        n, m, N = 2, 1, 3
        inst = make_instance([rng.standard_normal((n, n)) for _ in range(N + 1)],
                             [rng.standard_normal((n, m)) for _ in range(N + 1)],
                             np.zeros((n, n)), np.eye(m), np.zeros((n, n)),
                             rng.standard_normal(n), rng.standard_normal(n))
        P, _, K = riccati_backward(inst)
        for k in range(N + 1):
            npt.assert_allclose(P[k], 0.0, atol=1e-14)
            npt.assert_allclose(K[k], 0.0, atol=1e-14)

    def test_indefinite_gamma_rejected(self):
        # R = -1 slips past nothing: construct the raw instance directly
        inst = ProblemInstance(N=0, n=1, m=1, A=(np.eye(1),), B=(np.eye(1),),
                               Q=np.zeros((1, 1)), R=-np.eye(1),
                               H=np.zeros((1, 1)), x0=np.zeros(1), xi=np.zeros(1))
        with pytest.raises(SingularGamma):
            riccati_backward(inst)


def fit_quadratic(points, values):
    """Least-squares quadratic c + b'w + w'Mw from point evaluations, on the
    plain monomial basis (1, w_i, w_i w_j for i <= j)."""
    pts = np.asarray(points, dtype=float)
    _, d = pts.shape
    cols = [np.ones(len(pts))]
    cols += [pts[:, i] for i in range(d)]
    cols += [pts[:, i] * pts[:, j] for i in range(d) for j in range(i, d)]
    coef, _, _, _ = np.linalg.lstsq(np.column_stack(cols), np.asarray(values),
                                    rcond=None)
    c, b = coef[0], coef[1:1 + d]
    M = np.zeros((d, d))
    idx = 1 + d
    for i in range(d):
        for j in range(i, d):
            # monomial coefficient of w_i w_j is M_ii on the diagonal and
            # 2 M_ij off it
            M[i, j] = coef[idx] if i == j else coef[idx] / 2.0
            M[j, i] = M[i, j]
            idx += 1
    return c, b, M


def dp_oracle(inst, seed):
    """Evaluate-and-fit dynamic programming over the joint (x, lambda)
    argument. Returns per-stage gains and value kernels (P, Phi, G)."""
    rng = np.random.default_rng(seed)
    n, m = inst.n, inst.m

    def terminal(x, lam):
        return x @ inst.H @ x + 2.0 * lam @ x

    value = terminal
    gains, kernels = {}, {}
    for k in range(inst.N, -1, -1):
        A, B = inst.A[k], inst.B[k]

        def stage(x, u, lam, A=A, B=B, value=value):
            return x @ inst.Q @ x + u @ inst.R @ u + value(A @ x + B @ u, lam)

        d = 2 * n + m
        pts = rng.standard_normal((3 * (d + 1) * (d + 2) // 2, d))
        _, b, M = fit_quadratic(pts, [stage(p[:n], p[n:n + m], p[n + m:])
                                      for p in pts])
        Muu = M[n:n + m, n:n + m]
        Kk = -np.linalg.solve(Muu, M[n:n + m, :n])
        K1k = -np.linalg.solve(Muu, M[n:n + m, n + m:])
        u0 = -np.linalg.solve(Muu, b[n:n + m]) / 2.0
        gains[k] = (Kk, K1k)

        def value(x, lam, stage=stage, Kk=Kk, K1k=K1k, u0=u0):
            return stage(x, Kk @ x + K1k @ lam + u0, lam)

        w = rng.standard_normal((3 * (2 * n + 1) * (n + 1), 2 * n))
        _, _, Mv = fit_quadratic(w, [value(p[:n], p[n:]) for p in w])
        kernels[k] = {"P": Mv[:n, :n], "Phi": Mv[:n, n:].T, "G": -Mv[n:, n:]}
    return gains, kernels


class TestDynamicProgrammingOracle:
    def test_backward_pass_matches_dp_fit(self):
        rng = np.random.default_rng(11)
        for trial in range(3):
            n, m, N = 2, 1, 3
            inst = make_instance([rng.standard_normal((n, n)) for _ in range(N + 1)],
                                 [rng.standard_normal((n, m)) for _ in range(N + 1)],
                                 np.eye(n), np.eye(m), np.eye(n),
                                 rng.standard_normal(n), rng.standard_normal(n))
            sched = solve_schedule(inst)
            gains, kernels = dp_oracle(inst, seed=100 + trial)
            scale = max(1.0, float(np.abs(sched.P[0]).max()))
            npt.assert_allclose(kernels[0]["P"], sched.P[0],
                                atol=1e-10 * scale)
            for k in range(N + 1):
                npt.assert_allclose(gains[k][0], sched.K[k],
                                    rtol=1e-8, atol=1e-9)
                npt.assert_allclose(gains[k][1], sched.K1[k],
                                    rtol=1e-8, atol=1e-9)
                npt.assert_allclose(kernels[k]["Phi"], sched.Phi[k],
                                    rtol=1e-8, atol=1e-8)
                npt.assert_allclose(kernels[k]["G"], sched.G[k],
                                    rtol=1e-8, atol=1e-8)


class TestSchedule:
    def test_phi_re_multiplication(self, example, example_schedule):
        sched = example_schedule
        for k in range(example.N + 2):
            M = np.eye(example.n)
            for j in range(example.N, k - 1, -1):
                M = M @ sched.Ac[j]
            npt.assert_allclose(sched.Phi[k], M, rtol=1e-13, atol=1e-13)

    def test_gramian_recursion(self, example, example_schedule):
        sched = example_schedule
        for s in range(example.N, -1, -1):
            Bs = example.B[s]
            Bbar = Bs @ np.linalg.solve(sched.Gamma[s], Bs.T)
            step = sched.Phi[s + 1] @ Bbar @ sched.Phi[s + 1].T
            npt.assert_allclose(sched.G[s], sched.G[s + 1] + step,
                                rtol=1e-12, atol=1e-14)

    def test_example_gains_to_four_decimals(self, example_schedule):
        for k in (0, 1, 2):
            npt.assert_allclose(example_schedule.K[k], PRINTED_K[k], atol=1e-3)
            npt.assert_allclose(example_schedule.K1[k], PRINTED_K1[k], atol=1e-3)

    def test_stage_two_gramian(self, example_schedule):
        npt.assert_allclose(example_schedule.G[2], EXACT_G2, rtol=1e-13)

    def test_scalar_boundary_values(self):
        sched = solve_schedule(scalar_instance())
        assert sched.Phi[0][0, 0] == pytest.approx(1.0)
        assert sched.G[0][0, 0] == pytest.approx(1.0)
        assert sched.K1[0][0, 0] == pytest.approx(-1.0)


class TestReachability:
    def test_example_instance_reachable(self, example):
        assert check_reachability(example).reachable

    def test_zero_b_off_drift_unreachable(self, example):
        B0 = [np.zeros((2, 1))] * 3
        inst = make_instance(example.A, B0, example.Q, example.R, example.H,
                             example.x0, example.xi)
        res = check_reachability(inst)
        assert not res.reachable
        assert res.zeta is None
        npt.assert_array_equal(res.G1, np.zeros((2, 2)))

    def test_zero_b_exact_drift_reachable(self, example):
        B0 = [np.zeros((2, 1))] * 3
        xi = drift(example, 3) @ example.x0
        inst = make_instance(example.A, B0, example.Q, example.R, example.H,
                             example.x0, xi)
        res = check_reachability(inst)
        assert res.reachable
        npt.assert_allclose(res.zeta, 0.0, atol=1e-12)


class TestLambda:
    def test_example_multiplier(self, example_lambda):
        npt.assert_allclose(example_lambda.lambda_star, PRINTED_LAMBDA, atol=1e-3)
        npt.assert_allclose(example_lambda.lambda_star, EXACT_LAMBDA, rtol=1e-12)
        assert example_lambda.in_range
        assert not example_lambda.min_norm

    def test_target_on_closed_loop_drift_gives_zero(self, example):
        sched = solve_schedule(example)
        xi = sched.Phi[0] @ example.x0
        inst = make_instance(example.A, example.B, example.Q, example.R, example.H,
                             example.x0, xi)
        lamsol = solve_lambda(solve_schedule(inst), inst)
        npt.assert_allclose(lamsol.lambda_star, 0.0, atol=1e-12)

    def test_scalar_closed_form(self):
        inst = scalar_instance(x0=2.0, xi=5.0)
        lamsol = solve_lambda(solve_schedule(inst), inst)
        assert lamsol.lambda_star[0] == pytest.approx(2.0 - 5.0)

    def test_unreachable_raises(self, example):
        B0 = [np.zeros((2, 1))] * 3
        inst = make_instance(example.A, B0, example.Q, example.R, example.H,
                             example.x0, example.xi)
        with pytest.raises(NotReachable):
            solve_lambda(solve_schedule(inst), inst)


class TestControlAndRollout:
    def test_scalar_control_reaches_target(self):
        inst = scalar_instance(x0=2.0, xi=5.0)
        sched = solve_schedule(inst)
        lamsol = solve_lambda(sched, inst)
        u0 = optimal_control(sched, lamsol.lambda_star, 0, inst.x0)
        assert u0[0] == pytest.approx(5.0 - 2.0)
        traj = rollout(inst, optimal_policy(sched, lamsol.lambda_star))
        assert traj.states[1][0] == pytest.approx(5.0)

    def test_zero_lambda_is_plain_feedback(self, example, example_schedule):
        x = np.array([0.3, -1.2])
        u = optimal_control(example_schedule, np.zeros(2), 1, x)
        npt.assert_allclose(u, example_schedule.K[1] @ x, rtol=1e-15)

    def test_stage_two_printed_arithmetic(self, example_schedule, example_lambda):
        u = optimal_control(example_schedule, example_lambda.lambda_star, 2,
                            np.array([1.0, 0.0]))
        assert u[0] == pytest.approx(2.5912, abs=5e-4)

    def test_stage_out_of_range(self, example_schedule):
        with pytest.raises(StageOutOfRange):
            optimal_control(example_schedule, np.zeros(2), 3, np.zeros(2))

    def test_example_terminal_exactness(self, example, example_schedule, example_lambda):
        traj = rollout(example, optimal_policy(example_schedule,
                                             example_lambda.lambda_star))
        assert traj.terminal_error <= 1e-6
        assert traj.cost == pytest.approx(EXACT_COST, rel=1e-12)

    def test_zero_policy_is_pure_drift(self, example):
        traj = rollout(example, lambda k, x: np.zeros(1))
        for k in range(example.N + 2):
            npt.assert_allclose(traj.states[k], drift(example, k) @ example.x0,
                                rtol=1e-13, atol=1e-13)

    def test_replay_identity(self, example, example_schedule, example_lambda):
        traj = rollout(example, optimal_policy(example_schedule,
                                             example_lambda.lambda_star))
        for k in range(example.N + 1):
            npt.assert_array_equal(
                traj.states[k + 1],
                example.A[k] @ traj.states[k] + example.B[k] @ traj.inputs[k])

    def test_non_finite_state_detected(self, example):
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(NonFiniteState):
                rollout(example, lambda k, x: np.array([1e308]))


class TestCostate:
    def test_example_stationarity(self, example, example_schedule, example_lambda):
        traj = rollout(example, optimal_policy(example_schedule,
                                             example_lambda.lambda_star))
        assert costate_residual(example, traj, example_lambda.lambda_star) <= 1e-8

    def test_scalar_residual_is_zero(self):
        inst = scalar_instance(x0=2.0, xi=5.0)
        sched = solve_schedule(inst)
        lamsol = solve_lambda(sched, inst)
        traj = rollout(inst, optimal_policy(sched, lamsol.lambda_star))
        assert costate_residual(inst, traj, lamsol.lambda_star) == pytest.approx(0.0, abs=1e-14)

    def test_perturbed_input_residual_is_linear(self):
        inst = scalar_instance(x0=2.0, xi=5.0)
        sched = solve_schedule(inst)
        lamsol = solve_lambda(sched, inst)
        traj = rollout(inst, lambda k, x: optimal_control(
            sched, lamsol.lambda_star, k, x) + 0.1)
        assert costate_residual(inst, traj, lamsol.lambda_star) == pytest.approx(0.1)

    def test_sequence_boundary_and_recursion(self, example, example_schedule, example_lambda):
        lam = example_lambda.lambda_star
        traj = rollout(example, optimal_policy(example_schedule, lam))
        cs = costate_sequence(example, example_schedule, traj, lam)
        npt.assert_allclose(cs.p[2], example.H @ traj.states[3] + lam, rtol=1e-14)
        npt.assert_array_equal(cs.eta[2], lam)
        for k in range(example.N, 0, -1):
            npt.assert_allclose(cs.eta[k - 1],
                                example_schedule.Ac[k].T @ cs.eta[k], rtol=1e-14)
            npt.assert_allclose(cs.eta[k - 1],
                                example_schedule.Phi[k].T @ lam,
                                rtol=1e-12, atol=1e-12)


class TestAugmentedCost:
    def test_zero_lambda_reduces_to_cost(self, example, example_schedule, example_lambda):
        traj = rollout(example, optimal_policy(example_schedule,
                                             example_lambda.lambda_star))
        assert evaluate_augmented_cost(example, traj, np.zeros(2)) == traj.cost

    def test_multiplier_term_added(self, example, example_schedule, example_lambda):
        lam = example_lambda.lambda_star
        traj = rollout(example, optimal_policy(example_schedule, lam))
        expected = traj.cost + 2.0 * lam @ traj.states[3]
        assert evaluate_augmented_cost(example, traj, lam) == pytest.approx(expected, rel=1e-15)

    def test_zero_trajectory_gives_zero(self):
        inst = scalar_instance(x0=0.0, xi=0.0)
        traj = rollout(inst, lambda k, x: np.zeros(1))
        assert evaluate_augmented_cost(inst, traj, np.array([3.0])) == 0.0
