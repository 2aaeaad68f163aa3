import warnings

import numpy as np
import pytest

from stars_tir.astf import (
    AstfConfig, AstfState, FilterBank, SpatialRegParams, TemporalRegParams, adaptive_smoothness, admm_astf,
    apply_data_operator, eval_objective, ridge_filter, solve_f, solve_g, solve_w, spatial_reg, temporal_reg,
    update_p, update_q,
)
from stars_tir.errors import ConvergenceWarning, InvalidConfig, NegativeRatio, ShapeMismatch, ZeroBeta1, ZeroBeta2
from stars_tir.numerics import grad_forward, grad_n, laplacian

OFF = dict(alpha1=0.0, alpha2=0.0, beta1=0.0, beta2=0.0, delta1=0.0, lambda1_g=0.0, eta_w=0.0)


def instance(rng, h=8, w=8, d=2):
    x = rng.standard_normal((h, w, d))
    y = rng.standard_normal((h, w))
    return x, y


def state_for(x, y, f=None, f_prev=None, **kw):
    f = np.zeros_like(x) if f is None else f
    return AstfState(f=FilterBank(weights=f, prev=f_prev), sample=x, label=y, **kw)


def test_config_validation():
    with pytest.raises(InvalidConfig):
        AstfConfig(alpha1=-1)
    with pytest.raises(InvalidConfig):
        AstfConfig(eps_sparse=0)
    with pytest.raises(InvalidConfig):
        SpatialRegParams(p_norm=0.5)
    with pytest.raises(InvalidConfig):
        TemporalRegParams(delta_t=0)


def test_data_operator_matches_circular_convolution(rng):
    x, _ = instance(rng, 5, 4, 2)
    f = rng.standard_normal((5, 4, 2))
    out = np.zeros((5, 4))
    for i in range(5):
        for j in range(4):
            for a in range(5):
                for b in range(4):
                    out[i, j] += np.sum(x[a, b] * f[(i - a) % 5, (j - b) % 4])
    np.testing.assert_allclose(apply_data_operator(x, f), out, atol=1e-12)


def test_objective_zero_instance():
    z = np.zeros((8, 8, 1))
    assert eval_objective(state_for(z, np.zeros((8, 8))), AstfConfig()) == 0.0


def test_objective_weight_gating(rng):
    x, y = instance(rng)
    f = rng.standard_normal(x.shape)
    s = state_for(x, y, f, f_prev=rng.standard_normal(x.shape))
    cfg = AstfConfig(**OFF, gamma_ridge=0.0)
    assert np.isclose(eval_objective(s, cfg), 0.5 * np.sum((apply_data_operator(x, f) - y) ** 2))


def test_objective_matches_term_oracle(rng):
    x, y = instance(rng, 8, 8, 1)
    f, fp = rng.standard_normal((2, 8, 8, 1))
    xp, yp = instance(rng, 8, 8, 1)
    cfg = AstfConfig(alpha1=0.3, alpha2=0.2, beta1=0.5, beta2=0.7, gamma_ridge=0.01)
    s = state_for(x, y, f, f_prev=fp, prev_sample=xp, prev_label=yp)
    resp = np.zeros((8, 8))
    resp_p = np.zeros((8, 8))
    for i in range(8):
        for j in range(8):
            for a in range(8):
                for b in range(8):
                    resp[i, j] += x[a, b, 0] * f[(i - a) % 8, (j - b) % 8, 0]
                    resp_p[i, j] += xp[a, b, 0] * fp[(i - a) % 8, (j - b) % 8, 0]
    grad = 0.0
    for i in range(8):
        for j in range(8):
            if i < 7:
                grad += (f[i + 1, j, 0] - f[i, j, 0]) ** 2
            if j < 7:
                grad += (f[i, j + 1, 0] - f[i, j, 0]) ** 2
    want = (
        0.5 * np.sum((resp - y) ** 2) + 0.3 * np.abs(f).sum() + 0.2 * grad + 0.5 * np.sum((f - fp) ** 2)
        + 0.7 * np.sum((resp_p - yp) ** 2) + 0.01 * np.sum(f**2)
    )
    assert abs(eval_objective(s, cfg) - want) < 1e-8


def test_solve_f_single_channel_wiener(rng):
    x, y = instance(rng, 16, 16, 1)
    cfg = AstfConfig(**OFF, gamma_ridge=0.05)
    f = solve_f(state_for(x, y), cfg).weights
    xf, yf = np.fft.fft2(x[:, :, 0]), np.fft.fft2(y)
    want = np.fft.ifft2(np.conj(xf) * yf / (np.abs(xf) ** 2 + 0.05)).real
    assert np.max(np.abs(f[:, :, 0] - want)) < 1e-8


def test_solve_f_impulse_identity(rng):
    x = np.zeros((8, 8, 1))
    x[0, 0, 0] = 1
    y = rng.standard_normal((8, 8))
    f = solve_f(state_for(x, y), AstfConfig(**OFF, gamma_ridge=0.0)).weights
    np.testing.assert_allclose(f[:, :, 0], y, atol=1e-12)


def test_solve_f_multichannel_matches_ridge(rng):
    x, y = instance(rng, 16, 16, 3)
    cfg = AstfConfig(**OFF, gamma_ridge=2e-3)
    f = solve_f(state_for(x, y), cfg).weights
    # ridge_filter solves 1/2||Af - y||^2 + gamma/2 ||f||^2 through the same Sherman-Morrison form
    assert np.max(np.abs(f - ridge_filter(x, y, 2e-3))) < 1e-8


def test_solve_f_lowers_objective(rng):
    cfg = AstfConfig(alpha1=0.01, alpha2=0.0, beta1=0.1, delta1=0.0)
    for _ in range(5):
        x, y = instance(rng)
        fp = 0.1 * rng.standard_normal(x.shape)
        s = state_for(x, y, fp.copy(), f_prev=fp)
        f = solve_f(s, cfg)
        assert eval_objective(AstfState(f=f, sample=x, label=y), cfg) <= eval_objective(s, cfg) + 1e-12


def test_solve_g_limits(rng):
    x, y = instance(rng)
    fp = rng.standard_normal(x.shape)
    base = dict(f_prev=fp, prev_sample=x, prev_label=y)
    g = solve_g(state_for(x, y, **base), AstfConfig(lambda1_g=0.0, beta2=1e9)).weights
    assert np.max(np.abs(g - fp)) < 1e-6
    g = solve_g(state_for(x, y, **base), AstfConfig(lambda1_g=1e9)).weights
    assert np.max(np.abs(g)) < 1e-9
    with pytest.raises(ShapeMismatch):
        solve_g(state_for(x, y, f_prev=fp), AstfConfig())


def test_solve_g_equals_solve_f_on_identical_data(rng):
    x, y = instance(rng)
    fp = rng.standard_normal(x.shape)
    cfg = AstfConfig(**{**OFF, "beta1": 0.4, "beta2": 0.4})
    s = state_for(x, y, f_prev=fp, prev_sample=x, prev_label=y)
    assert np.max(np.abs(solve_g(s, cfg).weights - solve_f(s, cfg).weights)) < 1e-8


def test_spatial_reg_examples(rng):
    sp = SpatialRegParams()
    assert spatial_reg(np.full((8, 8, 1), 2.0), sp) == 0.0
    i, j = np.mgrid[0:8, 0:8].astype(float)
    lin = (2 * i + 3 * j)[:, :, None]
    iso = SpatialRegParams(a2=1.5, lam1_s=0.4, gam1=0, mu1=0, lam2_s=0, gam2=0, mu2=0)
    gx, gy = grad_forward(lin)
    assert np.isclose(spatial_reg(lin, iso), 1.5 * 0.4**2 * (np.sum(gx**2) + np.sum(gy**2)))
    f = rng.standard_normal((8, 8, 2))
    sp = SpatialRegParams(a2=0.7, lam1_s=0.2, gam1=0.3, mu1=0.1, lam2_s=0.5, gam2=0.05, mu2=0.02)
    lap = laplacian(f)
    gx, gy = grad_forward(f)
    first = sum(np.sum((lap + 0.2 * g + 0.3 * g**2 + 0.1 * grad_n(f, 3)) ** 2) for g in (gx, gy))
    second = np.sum((lap + 0.05 * lap**2 + 0.02 * grad_n(f, 4)) ** 2)
    assert abs(spatial_reg(f, sp) - 0.7 * (first + 0.5 * second)) < 1e-8


def test_adaptive_smoothness(rng):
    sp = SpatialRegParams(p_norm=1.0)
    assert adaptive_smoothness(np.zeros((6, 6, 1)), sp) == 0.0
    f = rng.standard_normal((6, 6, 1))
    gx, gy = grad_forward(f)
    g3 = grad_n(f, 3)
    inner = [(f + sp.lam1_s * g + sp.gam1 * g**2 + sp.mu1 * g3) ** 2 for g in (gx, gy)]
    assert np.isclose(adaptive_smoothness(f, sp), sum(a.sum() for a in inner))
    sp2 = SpatialRegParams(p_norm=2.0, gam1=0.2)
    inner = [(f + sp2.lam1_s * g + sp2.gam1 * g**2 + sp2.mu1 * g3) ** 2 for g in (gx, gy)]
    assert np.isclose(adaptive_smoothness(f, sp2), np.sqrt(sum((a**2).sum() for a in inner)))


def test_temporal_reg_examples(rng):
    f = rng.standard_normal((4, 4, 2))
    assert temporal_reg(f, f, TemporalRegParams(eps_off=0, gamma_off=0)) == 0.0
    tp = TemporalRegParams(beta1=0.3, beta2=0.0, delta_t=1.0, eps_off=0.2, gamma_off=5.0)
    assert np.isclose(temporal_reg(f, np.zeros_like(f), tp), 0.3 * np.sum((f + 0.2 * np.sign(f)) ** 2))
    fp = rng.standard_normal(f.shape)
    tp = TemporalRegParams(beta1=0.3, beta2=0.6, delta_t=1.3, eps_off=0.2, gamma_off=0.1)
    want = 0.0
    for idx in np.ndindex(f.shape):
        a, b = f[idx], fp[idx]
        want += 0.3 * (1.3 * (a - b + 0.2 * np.sign(a))) ** 2
        want += 0.6 * (1.3**2 * (a - b + 0.1 * np.sign(b))) ** 2
    assert abs(temporal_reg(f, fp, tp) - want) < 1e-10
    with pytest.raises(ShapeMismatch):
        temporal_reg(f, fp[:2], tp)


def test_update_p_examples(rng):
    fp = rng.standard_normal((4, 4, 2))
    f = rng.standard_normal(fp.shape)
    assert np.array_equal(update_p(f, fp, TemporalRegParams(eps_off=0.0)), fp)
    out = update_p(np.array([1.0]), np.array([0.5]), TemporalRegParams(eps_off=0.2, beta1=2.0))
    assert np.isclose(out[0], 0.6)
    out = update_p(f, fp, TemporalRegParams(eps_off=0.2, beta1=1e6))
    assert np.max(np.abs(out - fp)) <= 0.2 / 1e6 + 1e-15
    with pytest.raises(ZeroBeta1):
        update_p(f, fp, TemporalRegParams(beta1=0.0))


def test_update_q_examples(rng):
    fp = rng.standard_normal((4, 4, 2))
    assert np.array_equal(update_q(fp, TemporalRegParams(gamma_off=0.0)), fp)
    np.testing.assert_allclose(update_q(fp, TemporalRegParams(gamma_off=0.3, beta2=0.3)), fp + 1)
    assert np.all(update_q(np.zeros(3), TemporalRegParams(gamma_off=4.0, beta2=1.0)) == 2.0)
    with pytest.raises(ZeroBeta2):
        update_q(fp, TemporalRegParams(beta2=0.0))
    with pytest.raises(NegativeRatio):
        update_q(fp, TemporalRegParams(gamma_off=-1.0))


def test_solve_w_examples(rng):
    x, y = instance(rng)
    f, fp = rng.standard_normal((2,) + x.shape)
    s = state_for(x, y, f, f_prev=fp)
    tp0 = TemporalRegParams(eps_off=0, gamma_off=0)
    np.testing.assert_allclose(solve_w(s, AstfConfig(eta_w=0.0), tp0), fp)
    assert not solve_w(s, AstfConfig(eta_w=1e9), TemporalRegParams()).any()
    tp = TemporalRegParams(eps_off=0.05, gamma_off=0.02)
    cfg = AstfConfig(eta_w=0.3, lambda2_w=2.0)
    avg = 0.5 * (update_p(f, fp, tp) + update_q(fp, tp))
    lam = 0.3 * 2.0 / 3.0
    assert np.array_equal(solve_w(s, cfg, tp), np.sign(avg) * np.maximum(np.abs(avg) - lam, 0))


def test_admm_single_sweep_when_tol_infinite(rng):
    x, y = instance(rng)
    s = admm_astf(x, y, None, AstfConfig(tol=np.inf, max_admm_iters=10))
    assert s.iter == 1 and s.converged and len(s.trace) == 2


def test_admm_warns_when_budget_exhausted(rng):
    x, y = instance(rng)
    with pytest.warns(ConvergenceWarning):
        admm_astf(x, y, None, AstfConfig(tol=1e-300, max_admm_iters=2))


def test_admm_stationary_input_filter_change_decreases(rng):
    x, y = instance(rng, 16, 16, 2)
    cfg = AstfConfig()
    prev, diffs = None, []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        for _ in range(6):
            s = admm_astf(x, y, prev, cfg)
            if prev is not None:
                diffs.append(np.linalg.norm(s.f.weights - prev.f.weights))
            prev = s
    assert all(b < a for a, b in zip(diffs, diffs[1:])), diffs


def test_admm_objective_trace_non_increasing(rng):
    cfg = AstfConfig(max_admm_iters=8)
    x, y = instance(rng)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        t = admm_astf(x, y, None, cfg).trace
    assert all(b <= a * (1 + 1e-6) for a, b in zip(t, t[1:])), t


def test_admm_deterministic(rng):
    x, y = instance(rng)
    a = admm_astf(x, y, None, AstfConfig(), warn=False)
    b = admm_astf(x, y, a, AstfConfig(), warn=False)
    a2 = admm_astf(x, y, None, AstfConfig(), warn=False)
    b2 = admm_astf(x, y, a2, AstfConfig(), warn=False)
    assert np.array_equal(b.f.weights, b2.f.weights)


def test_admm_with_history_blends_g(rng):
    x, y = instance(rng)
    a = admm_astf(x, y, None, AstfConfig(), warn=False)
    x2, y2 = instance(rng)
    b = admm_astf(x2, y2, a, AstfConfig(), warn=False)
    assert b.g is not None and b.prev_sample is x
    assert np.array_equal(b.f.prev, a.f.weights)


def test_state_shape_checks(rng):
    x, y = instance(rng)
    with pytest.raises(ShapeMismatch):
        state_for(x, y[:4]).check()
    with pytest.raises(ShapeMismatch):
        FilterBank(weights=np.zeros((4, 4, 1)), prev=np.zeros((4, 4, 2)))
