import math

import numpy as np
import pytest

from pgqrestore.admtv import AdmTvBaseline, AdmTvParams, joint_solve
from pgqrestore.grid import identity_kernel, make_pillbox
from pgqrestore.noise import NoiseParams, corrupt, quant_moments
from pgqrestore.solver import (
    GAMMA_MAX,
    SolverConfig,
    beta_from_noise,
    lambda_update,
    restore,
    step_size_map,
    stopping_check,
    tau_update,
    tau_update_array,
)


def tau_cost(tau, x_k, lam, m_q, sigma_eff2, alpha, beta):
    """Per-pixel augmented cost whose minimiser the closed form claims."""
    quad = 0.5 * beta * (tau - x_k) ** 2 - lam * (tau - x_k)
    shift = alpha * sigma_eff2
    return quad + alpha * (tau + shift) - alpha * (m_q + shift) * np.log(tau + shift)


def sample_tau_inputs(rng, n):
    alpha = 10.0 ** rng.uniform(0.5, 3.5, n)
    sigma = rng.uniform(0.0, 0.3, n)
    q = rng.choice([0.0, 1.0 / 256.0], n)
    g = np.where(q > 0, 2.2, 1.0)
    y = rng.uniform(0.0, 1.2, n)
    m_q = np.empty(n)
    s_q2 = np.empty(n)
    for i in range(n):
        qm = quant_moments(y[i], q[i], g[i])
        m_q[i], s_q2[i] = qm.m_q, qm.sigma_q2
    sigma_eff2 = sigma ** 2 + s_q2
    # beta as the solver would choose it, over a wide beta0 range
    beta0 = 10.0 ** rng.uniform(-1.0, 2.0, n)
    beta = beta0 / (np.maximum(m_q, 0.05) / alpha + sigma_eff2 + 1e-8)
    lam = rng.normal(0.0, 0.3, n) * beta / 10.0
    # keep x_k + lam/beta positive as the sweep requires
    x_k = rng.uniform(0.0, 1.5, n)
    x_k = np.maximum(x_k, -lam / beta + 1e-3)
    return x_k, lam, m_q, sigma_eff2, alpha, beta


def tau_cost_diff(c, d, x_k, lam, m_q, sigma_eff2, alpha, beta):
    """f(c) - f(d) for the per-pixel cost, evaluated without the
    catastrophic cancellation of subtracting two large cost values."""
    shift = alpha * sigma_eff2
    quad = 0.5 * beta * (c - d) * (c + d - 2.0 * x_k)
    lin = (alpha - lam) * (c - d)
    logt = -alpha * (m_q + shift) * np.log1p((c - d) / (d + shift))
    return quad + lin + logt


def oracle_tau(x_k, lam, m_q, sigma_eff2, alpha, beta):
    """Independent 1-D minimisation of the per-pixel cost: golden-section
    driven by a numerically stable pairwise cost comparison, polished by
    bisection on the central-difference slope."""
    shift = alpha * sigma_eff2
    lo = np.asarray(-shift + 1e-12 + 1e-14 * shift, dtype=np.float64)
    hi = np.maximum(x_k + lam / beta, 0.0) + m_q + alpha / beta + shift + 2.0
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo.copy(), hi.copy()
    fdiff = lambda c, d: tau_cost_diff(c, d, x_k, lam, m_q, sigma_eff2, alpha, beta)
    for _ in range(60):
        c = b - invphi * (b - a)
        d = a + invphi * (b - a)
        left = fdiff(c, d) < 0
        b = np.where(left, d, b)
        a = np.where(left, a, c)
    # slope-sign bisection on the same stable difference
    for _ in range(80):
        mid = 0.5 * (a + b)
        h = np.maximum(1e-9, 1e-9 * np.abs(mid))
        h = np.minimum(h, 0.25 * (mid - lo) + 1e-300)
        up = fdiff(mid + h, mid - h) > 0
        b = np.where(up, mid, b)
        a = np.where(up, a, mid)
    return 0.5 * (a + b)


class TestTauUpdate:
    def test_analytic_stationary_point(self):
        p = NoiseParams(alpha=1.0)
        tau = tau_update(1.0, 0.0, 1.0, p, 1.0)
        assert abs(tau - 1.0) < 1e-14
        # stationarity: beta*(tau - x_k) - lam + alpha - alpha*m_q/tau = 0
        assert abs(1.0 * (tau - 1.0) - 0.0 + 1.0 - 1.0 * 1.0 / tau) < 1e-12

    def test_golden_ratio_point(self):
        p = NoiseParams(alpha=1.0)
        tau = tau_update(2.0, 0.0, 1.0, p, 1.0)
        assert abs(tau - (1 + math.sqrt(5)) / 2) < 1e-12
        ref = oracle_tau(np.array([2.0]), np.array([0.0]), np.array([1.0]),
                         np.array([0.0]), np.array([1.0]), np.array([1.0]))[0]
        assert abs(tau - ref) < 1e-8

    def test_oracle_sweep(self, rng):
        n = 10 ** 4
        x_k, lam, m_q, sigma_eff2, alpha, beta = sample_tau_inputs(rng, n)
        closed = tau_update_array(x_k, lam, m_q, sigma_eff2, alpha, beta)
        ref = oracle_tau(x_k, lam, m_q, sigma_eff2, alpha, beta)
        err = np.abs(closed - ref) / np.maximum(1.0, np.abs(ref))
        assert err.max() < 1e-6

    def test_domain_floor(self):
        # strongly negative x_k with zero noise: clamped into the valid
        # log domain
        p = NoiseParams(alpha=100.0)
        tau = tau_update(-5.0, 0.0, 0.0, p, 10.0)
        assert tau + 100.0 * 0.0 >= 1e-9 - 1e-18

    def test_beta_validation(self):
        with pytest.raises(ValueError):
            tau_update(1.0, 0.0, 1.0, NoiseParams(alpha=1.0), 0.0)


class TestLambdaUpdate:
    def test_satisfied_constraint(self):
        assert lambda_update(0.0, 1.2, 7.0, 3.0, 3.0) == 0.0

    def test_arithmetic(self):
        assert lambda_update(1.0, 1.0, 2.0, 3.0, 1.0) == -3.0

    def test_stationary_at_convergence(self, rng):
        lam = rng.normal(0, 1, 50)
        tau = rng.random(50)
        new = lambda_update(lam, GAMMA_MAX, 100.0, tau, tau.copy())
        assert np.allclose(new, lam)


class TestStepSizeMap:
    def test_endpoints_and_midpoint(self):
        y = np.array([[0.0, 0.5, 1.0]])
        g = step_size_map(y, SolverConfig())
        assert abs(g[0, 2] - GAMMA_MAX) < 1e-15
        assert abs(g[0, 0] - GAMMA_MAX / 2) < 1e-15
        assert abs(g[0, 1] - 0.75 * GAMMA_MAX) < 1e-15

    def test_constant_image(self):
        g = step_size_map(np.full((4, 4), 0.3), SolverConfig())
        assert np.all(g == GAMMA_MAX)

    def test_custom_fractions(self):
        cfg = SolverConfig(gamma_lo_frac=0.25, gamma_hi_frac=0.75)
        y = np.array([[0.0, 1.0]])
        g = step_size_map(y, cfg)
        assert abs(g[0, 0] - 0.25 * GAMMA_MAX) < 1e-15
        assert abs(g[0, 1] - 0.75 * GAMMA_MAX) < 1e-15


class TestBetaFromNoise:
    def test_arithmetic(self):
        y = np.full((8, 8), 0.5)
        p = NoiseParams(alpha=100.0, sigma=0.1)
        beta = beta_from_noise(y, p, 16.0)
        assert abs(beta - 16.0 / 0.015) < 1e-9

    def test_pure_poisson_reduction(self, rng):
        y = rng.random((16, 16)) + 0.1
        p = NoiseParams(alpha=64.0)
        beta = beta_from_noise(y, p, 8.0)
        assert abs(beta - 8.0 * 64.0 / y.mean()) < 1e-9

    def test_independent_recomputation_with_quantization(self, cameraman):
        p = NoiseParams(alpha=1024.0, sigma=1e-4, q=1 / 256, g=2.2)
        beta = beta_from_noise(cameraman, p, 16.0)
        # plain per-pixel recomputation with scalar arithmetic
        total_m = 0.0
        total_v = 0.0
        ys = cameraman[::8, ::8]  # subsample for speed, same estimator both sides
        beta_sub = beta_from_noise(ys, p, 16.0)
        for y in ys.ravel():
            qm = quant_moments(float(y), p.q, p.g)
            total_m += qm.m_q
            total_v += qm.sigma_q2
        n = ys.size
        s2 = total_m / n / p.alpha + p.sigma ** 2 + total_v / n
        assert abs(beta_sub - 16.0 / s2) / beta_sub < 1e-12

    def test_noiseless_error(self):
        y = np.zeros((4, 4))
        with pytest.raises(ValueError):
            beta_from_noise(y, NoiseParams(alpha=10.0), 16.0)


class TestStoppingCheck:
    def test_identical(self, rng):
        x = rng.random((5, 5)) + 0.5
        assert stopping_check(x, x, 1e-12)

    def test_scaling_arithmetic(self, rng):
        x = rng.random((5, 5)) + 0.5
        assert stopping_check(1.1 * x, x, 0.0100000001)

    def test_reduction_order_oracle(self, rng):
        a = rng.random((32, 32))
        b = a + rng.normal(0, 0.01, a.shape)
        eps = 1e-4
        num = math.fsum(((b - a) ** 2).ravel().tolist())
        den = math.fsum((a ** 2).ravel().tolist())
        assert stopping_check(b, a, eps) == (num / den <= eps)

    def test_zero_old(self):
        z = np.zeros((3, 3))
        assert not stopping_check(np.ones((3, 3)), z, 1e9)
        assert stopping_check(z, z, 1e-20)


class TestRestore:
    def test_noiseless_fixed_point(self):
        x = np.full((32, 32), 0.5)
        p = NoiseParams(alpha=1e8, sigma=1e-6)
        y = corrupt(x, identity_kernel(), p, seed=1)
        out, iters = restore(y, identity_kernel(), p, AdmTvBaseline())
        assert iters <= 3
        assert np.max(np.abs(out - x)) < 1e-3

    def test_degenerate_awgn_one_iteration(self, rng):
        # with the quadratic likelihood hook, the first outer iterate is
        # exactly the baseline output
        x = rng.random((24, 24))
        k = make_pillbox(1.5)
        p = NoiseParams(alpha=256.0, sigma=0.01)
        y = corrupt(x, k, p, seed=2)
        cfg = SolverConfig(max_iters=1)
        baseline = AdmTvBaseline()
        out, iters = restore(y, k, p, baseline, cfg, likelihood="quadratic")
        beta = beta_from_noise(y, p, cfg.beta0)
        direct = AdmTvBaseline().solve(y, k, float(np.sqrt(1.0 / beta)))
        assert iters == 1
        assert np.array_equal(out, direct)

    def test_deterministic(self, rng):
        x = rng.random((24, 24))
        k = make_pillbox(1.5)
        p = NoiseParams(alpha=100.0, sigma=0.01)
        y = corrupt(x, k, p, seed=3)
        cfg = SolverConfig(max_iters=12)
        a, _ = restore(y, k, p, AdmTvBaseline(), cfg)
        b, _ = restore(y, k, p, AdmTvBaseline(), cfg)
        assert np.array_equal(a, b)

    def test_negative_observation_rejected(self):
        with pytest.raises(ValueError):
            restore(np.full((8, 8), -1.0), identity_kernel(),
                    NoiseParams(alpha=10.0), AdmTvBaseline())

    def test_baseline_failure_propagates(self, rng):
        class Broken:
            def solve(self, y, k, sigma):
                raise RuntimeError("boom")

        y = rng.random((8, 8))
        with pytest.raises(RuntimeError):
            restore(y, identity_kernel(), NoiseParams(alpha=10.0), Broken())

    def test_nonfinite_iterate_aborts(self, rng):
        class Nan:
            def solve(self, y, k, sigma):
                out = y.copy()
                out[0, 0] = np.nan
                return out

        y = rng.random((8, 8))
        with pytest.raises(RuntimeError):
            restore(y, identity_kernel(), NoiseParams(alpha=10.0), Nan())


class TestConstraintResidual:
    def test_residual_decreases_late(self, rng):
        x = np.clip(rng.random((64, 64)) * 0.8 + 0.1, 0, 1)
        k = make_pillbox(2.0)
        p = NoiseParams(alpha=64.0, sigma=0.01)
        y = corrupt(x, k, p, seed=4)
        trace = {}
        joint_solve(y, k, p, AdmTvParams(), SolverConfig(max_iters=60), trace=trace)
        resid = trace["resid"]
        tail = resid[len(resid) // 2:]
        diffs = np.diff(tail)
        violations = np.sum(diffs > 0)
        assert violations <= max(1, int(0.05 * len(diffs)))


class TestSolverConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(beta0=0.0)
        with pytest.raises(ValueError):
            SolverConfig(gamma_lo_frac=0.8, gamma_hi_frac=0.5)
        with pytest.raises(ValueError):
            SolverConfig(warmup_iters=-1)
