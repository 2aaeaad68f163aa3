import numpy as np
import pytest
from dataclasses import replace

from stars_tir.epsr import (
    EpsrConfig, EpsrState, epsr_init, epsr_run, epsr_sweep, lagrangian_value, update_F, update_multipliers,
    update_R, update_W, update_Z,
)
from stars_tir.errors import ConvergenceWarning, InvalidConfig, ShapeMismatch
from stars_tir.numerics import nuclear_norm_slices

PRINTED = EpsrConfig(printed_updates=True)


def random_state(rng, shape=(6, 6, 2), mu=1.3):
    t = lambda: rng.standard_normal(shape)
    return EpsrState(F=t(), Z=t(), R=t(), W=t(), Y1=t(), Y2=t(), Y3=t(), mu=mu, iter=0, F_prev=t())


def svd_shrink(a, tau):
    out = np.zeros_like(a)
    for d in range(a.shape[2]):
        u, s, vt = np.linalg.svd(a[:, :, d], full_matrices=False)
        out[:, :, d] = (u * np.maximum(s - tau, 0)) @ vt
    return out


def test_config_validation():
    for bad in (dict(mu0=0), dict(rho=1.0), dict(lambda1=-1), dict(max_iters=0)):
        with pytest.raises(InvalidConfig):
            EpsrConfig(**bad)


def test_init(rng):
    s = epsr_init(np.zeros((4, 4, 2)), EpsrConfig(mu0=2.5))
    assert s.mu == 2.5 and s.iter == 0
    assert not any(getattr(s, n).any() for n in ("F", "Z", "R", "W", "Y1", "Y2", "Y3"))
    s = epsr_init(rng.standard_normal((4, 4, 2)), EpsrConfig())
    assert not s.Y1.any() and not s.Y2.any() and not s.Y3.any()


def test_update_F_examples(rng):
    s = random_state(rng)
    s = replace(s, R=s.Z.copy(), Y1=np.zeros_like(s.F), Y3=np.zeros_like(s.F), mu=1e12)
    np.testing.assert_allclose(update_F(s), s.Z, atol=1e-9)
    s = random_state(rng)
    arg = (s.Z + s.R + (s.Y1 + s.Y3) / s.mu) / 2
    assert np.max(np.abs(update_F(s, EpsrConfig()) - svd_shrink(arg, 1 / s.mu))) < 1e-8
    verbatim = update_F(s, EpsrConfig(verbatim_eq19=True))
    assert np.max(np.abs(verbatim - svd_shrink(2 * arg, 1 / s.mu))) < 1e-8


def test_update_F_full_shrinkage(rng):
    s = random_state(rng, mu=1.0)
    # scale the argument so that 1/mu exceeds every singular value
    s = replace(s, Z=s.Z * 1e-3, R=s.R * 1e-3, Y1=s.Y1 * 1e-3, Y3=s.Y3 * 1e-3)
    assert not update_F(s).any()


def test_update_R_printed(rng):
    s = replace(random_state(rng), Y2=np.zeros((6, 6, 2)))
    np.testing.assert_allclose(update_R(s, replace(PRINTED, lambda3=0.0)), s.F + s.W, atol=1e-15)
    assert np.max(np.abs(update_R(s, replace(PRINTED, lambda3=1e15)))) < 1e-12
    s = random_state(rng)
    cfg = replace(PRINTED, lambda3=0.37)
    want = np.empty_like(s.F)
    for idx in np.ndindex(s.F.shape):
        want[idx] = (s.mu / (0.37 + s.mu)) * (s.F[idx] + s.W[idx] + s.Y2[idx] / s.mu)
    assert np.array_equal(update_R(s, cfg), want)


def test_update_R_default_minimizes_its_subproblem(rng):
    s = random_state(rng)
    cfg = EpsrConfig(lambda3=0.37)
    r = update_R(s, cfg)

    def sub(R):
        return (
            cfg.lambda3 * np.sum((R - s.F_prev) ** 2) + np.sum(s.Y2 * (s.W - R)) + np.sum(s.Y3 * (R - s.F))
            + 0.5 * s.mu * (np.sum((s.W - R) ** 2) + np.sum((R - s.F) ** 2))
        )

    base = sub(r)
    for _ in range(20):
        assert sub(r + 1e-4 * rng.standard_normal(r.shape)) >= base


def test_update_Z_printed(rng):
    s = random_state(rng, mu=2.0)
    small = replace(s, F=np.full((6, 6, 2), 0.01), Y1=np.zeros((6, 6, 2)))
    assert not update_Z(small, replace(PRINTED, lambda1=1.0)).any()
    np.testing.assert_array_equal(update_Z(s, replace(PRINTED, lambda1=0.0)), s.F + s.Y1 / s.mu)
    v = s.F + s.Y1 / s.mu
    lam, mu = 0.8, s.mu
    # two-candidate argmin of lam|z| + mu (z - v)^2 over z in {0, v}
    keep = lam * np.abs(v) + 0.0 < mu * v**2
    assert np.array_equal(update_Z(s, replace(PRINTED, lambda1=lam)), np.where(keep, v, 0.0))


def test_update_W_printed(rng):
    s = random_state(rng, mu=2.0)
    np.testing.assert_array_equal(update_W(s, replace(PRINTED, lambda2=0.0)), s.R + s.Y2 / s.mu)
    small = replace(s, R=np.full((6, 6, 2), 0.01), Y2=np.zeros((6, 6, 2)))
    assert not update_W(small, replace(PRINTED, lambda2=1.0)).any()
    v = s.R + s.Y2 / s.mu
    t = 0.3 / s.mu
    assert np.array_equal(update_W(s, replace(PRINTED, lambda2=0.3)), np.sign(v) * np.maximum(np.abs(v) - t, 0))


def test_update_multipliers(rng):
    f = rng.standard_normal((4, 4, 2))
    y = rng.standard_normal((3, 4, 4, 2))
    s = EpsrState(F=f, Z=f.copy(), R=f.copy(), W=f.copy(), Y1=y[0], Y2=y[1], Y3=y[2], mu=1.0, iter=0, F_prev=f)
    out = update_multipliers(s, EpsrConfig(mu0=1.0, rho=1.1))
    assert out.mu == 1.1 and out.iter == 1
    assert np.array_equal(out.Y1, y[0]) and np.array_equal(out.Y2, y[1]) and np.array_equal(out.Y3, y[2])
    s = random_state(rng)
    out = update_multipliers(s, EpsrConfig(mu0=1.0, rho=1.1))
    for idx in np.ndindex(s.F.shape):
        assert out.Y1[idx] == s.Y1[idx] + s.mu * (s.Z[idx] - s.F[idx])
        assert out.Y2[idx] == s.Y2[idx] + s.mu * (s.W[idx] - s.R[idx])
        assert out.Y3[idx] == s.Y3[idx] + s.mu * (s.R[idx] - s.F[idx])
    assert out.mu == 1.1 * 1.3


def test_lagrangian(rng):
    z = np.zeros((4, 4, 2))
    s = EpsrState(F=z, Z=z, R=z, W=z, Y1=z, Y2=z, Y3=z, mu=1.0, iter=0, F_prev=z)
    assert lagrangian_value(s, EpsrConfig()) == 0.0
    Z = rng.standard_normal(z.shape)
    Y1 = rng.standard_normal(z.shape)
    cfg = EpsrConfig(lambda1=0.4)
    s1 = replace(s, Z=Z, Y1=Y1, mu=1.7)
    want = 0.4 * np.abs(Z).sum() + np.sum(Y1 * Z) + 1.7 * np.sum(Z**2)
    assert np.isclose(lagrangian_value(s1, cfg), want)
    s = random_state(rng)
    cfg = EpsrConfig(lambda1=0.2, lambda2=0.3, lambda3=0.4)
    total = nuclear_norm_slices(s.F)
    for idx in np.ndindex(s.F.shape):
        total += 0.2 * abs(s.Z[idx]) + 0.3 * abs(s.W[idx]) + 0.4 * s.R[idx] ** 2
        total += s.Y1[idx] * (s.Z[idx] - s.F[idx]) + s.Y2[idx] * (s.W[idx] - s.R[idx]) + s.Y3[idx] * (s.R[idx] - s.F[idx])
        total += s.mu * (s.Z[idx] - s.F[idx]) ** 2 + (s.W[idx] - s.R[idx]) ** 2 + (s.R[idx] - s.F[idx]) ** 2
    assert abs(lagrangian_value(s, cfg) - total) < 1e-8


def test_run_zero_fixed_point():
    res = epsr_run(np.zeros((8, 8, 2)), EpsrConfig())
    assert res.converged and res.iters == 1 and not res.F.any()


def test_run_converges_and_records_trace(rng):
    seen = []
    res = epsr_run(rng.standard_normal((8, 8, 2)), EpsrConfig(), callback=seen.append)
    assert res.converged and res.iters <= 100
    last = res.trace[-1]
    assert max(last["res_zf"], last["res_wr"], last["res_rf"]) < 1e-3
    assert len(seen) == res.iters and "lagrangian" in seen[0]
    assert "lagrangian" not in epsr_run(rng.standard_normal((8, 8, 2))).trace[0]


def test_run_large_lambda1_zeroes_Z(rng):
    zs = []
    cfg = EpsrConfig(lambda1=1e9, max_iters=10)
    s = epsr_init(rng.standard_normal((6, 6, 2)), cfg)
    for _ in range(10):
        s = epsr_sweep(s, cfg)
        zs.append(np.abs(s.Z).max())
    assert max(zs) == 0.0


def test_run_warns_at_cap(rng):
    with pytest.warns(ConvergenceWarning):
        res = epsr_run(rng.standard_normal((8, 8, 2)), EpsrConfig(max_iters=2))
    assert not res.converged and res.iters == 2


def test_printed_family_diverges(rng):
    res = epsr_run(rng.standard_normal((8, 8, 2)), PRINTED, warn=False)
    assert not res.converged


def test_shape_check(rng):
    s = random_state(rng)
    with pytest.raises(ShapeMismatch):
        update_F(replace(s, Z=np.zeros((3, 3, 2))))
