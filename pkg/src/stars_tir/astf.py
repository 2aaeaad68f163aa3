"""Adaptive sparse and temporal filter (ASTF) training.

The correlation filter ``f`` (H x W x D) is trained against a feature stack
``x`` and a desired response ``y`` with the data operator
``A(x) f = sum_d x_d (*) f_d`` (circular convolution, element-wise in the
Fourier domain).  Each ADMM sweep alternates three blocks:

* ``f``: sparse + temporal + smoothness regularized fit to the current frame,
* ``g``: l1-regularized fit to the previous frame, anchored at ``f_{t-1}``,
* ``w``: the temporal offset pair ``p``/``q`` recombined and shrunk.

Quadratic terms are solved exactly per frequency bin; the l1 terms are
split off into a spatial soft-threshold step coupled by an inner ADMM.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import ConvergenceWarning, InvalidConfig, NegativeRatio, ShapeMismatch, ZeroBeta1, ZeroBeta2
from .numerics import dft2, grad_adjoint, grad_forward, grad_n, idft2, laplacian, soft_threshold


@dataclass(frozen=True)
class AstfConfig:
    alpha1: float = 0.01  # l1 weight of the full objective / ratio sparsity of the f block
    alpha2: float = 0.001  # spatial gradient weight
    beta1: float = 0.1
    beta2: float = 0.1
    gamma_ridge: float = 1e-4
    delta1: float = 0.001  # gradient weight inside the f block
    lambda1_g: float = 0.01
    lambda2_w: float = 1.0
    eta_w: float = 0.01
    eps_sparse: float = 0.01
    max_admm_iters: int = 5
    tol: float = 1e-3
    inner_iters: int = 300
    # initial inner ADMM penalty, relative to the mean spectral energy of the sample
    inner_penalty: float = 0.003
    # relative primal/dual residual at which the inner ADMM stops
    inner_tol: float = 1e-7

    def __post_init__(self):
        weights = (
            self.alpha1, self.alpha2, self.beta1, self.beta2, self.gamma_ridge,
            self.delta1, self.lambda1_g, self.lambda2_w, self.eta_w,
        )
        if any(not np.isfinite(v) or v < 0 for v in weights):
            raise InvalidConfig("ASTF weights must be finite and >= 0")
        if self.eps_sparse <= 0:
            raise InvalidConfig("eps_sparse must be > 0")
        if self.max_admm_iters < 1 or self.inner_iters < 1:
            raise InvalidConfig("iteration counts must be >= 1")
        if self.tol <= 0 or self.inner_penalty <= 0 or self.inner_tol <= 0:
            raise InvalidConfig("tol, inner_penalty and inner_tol must be > 0")


@dataclass(frozen=True)
class SpatialRegParams:
    a2: float = 1.0
    lam1_s: float = 0.1
    gam1: float = 0.0
    mu1: float = 0.01
    lam2_s: float = 0.1
    gam2: float = 0.0
    mu2: float = 0.01
    p_norm: float = 2.0

    def __post_init__(self):
        if self.p_norm < 1:
            raise InvalidConfig("p_norm must be >= 1")
        if min(self.a2, self.lam1_s, self.gam1, self.mu1, self.lam2_s, self.gam2, self.mu2) < 0:
            raise InvalidConfig("spatial regularization coefficients must be >= 0")


@dataclass(frozen=True)
class TemporalRegParams:
    beta1: float = 0.1
    beta2: float = 0.1
    delta_t: float = 1.0
    eps_off: float = 0.01
    gamma_off: float = 0.01
    # stored for completeness; the closed-form q update does not use it
    k_weight: float = 1.0

    def __post_init__(self):
        if self.beta1 < 0 or self.beta2 < 0 or self.eps_off < 0:
            raise InvalidConfig("temporal weights must be >= 0")
        if self.delta_t <= 0 or self.k_weight <= 0:
            raise InvalidConfig("delta_t and k_weight must be > 0")


@dataclass
class FilterBank:
    weights: np.ndarray
    prev: Optional[np.ndarray] = None
    converged: bool = True
    # scaled dual and penalty of the inner l1 split, used to resume it
    dual: Optional[np.ndarray] = field(default=None, repr=False)
    penalty: Optional[float] = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim == 2:
            self.weights = self.weights[:, :, None]
        if self.prev is not None and np.shape(self.prev) != self.weights.shape:
            raise ShapeMismatch(f"prev filter shape {np.shape(self.prev)} != {self.weights.shape}")

    @cached_property
    def spectrum(self) -> np.ndarray:
        return dft2(self.weights)

    @property
    def shape(self):
        return self.weights.shape


@dataclass
class AstfState:
    f: FilterBank
    sample: np.ndarray
    label: np.ndarray
    g: Optional[FilterBank] = None
    w_ref: Optional[np.ndarray] = None
    prev_sample: Optional[np.ndarray] = None
    prev_label: Optional[np.ndarray] = None
    iter: int = 0
    converged: bool = True
    trace: list = field(default_factory=list)

    def check(self) -> None:
        hw = self.f.weights.shape[:2]
        if self.sample.shape[:2] != hw or self.label.shape != hw:
            raise ShapeMismatch(f"sample {self.sample.shape} / label {self.label.shape} vs filter {self.f.shape}")
        if self.sample.shape[2] != self.f.weights.shape[2]:
            raise ShapeMismatch("sample and filter channel counts differ")
        if self.prev_sample is not None:
            if self.prev_sample.shape != self.sample.shape or self.prev_label is None or self.prev_label.shape != hw:
                raise ShapeMismatch("previous sample/label do not match the current ones")

    @property
    def f_prev(self) -> np.ndarray:
        return self.f.prev if self.f.prev is not None else np.zeros_like(self.f.weights)


def _as3(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[:, :, None] if x.ndim == 2 else x


def apply_data_operator(x: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Response ``sum_d x_d (*) f_d`` of filter ``f`` on features ``x``."""
    return idft2(np.sum(dft2(_as3(x)) * dft2(_as3(f)), axis=2))


def _sgn(v: np.ndarray) -> np.ndarray:
    return np.sign(v)  # sign(0) == 0


def eval_objective(state: AstfState, cfg: AstfConfig) -> float:
    """Six-term training objective of the filter.

    ``1/2 ||A(x) f - y||^2 + a1 ||f||_1 + a2 ||grad f||^2 + b1 ||f - f_prev||^2
    + b2 ||A(x_prev) f_prev - y_prev||^2 + gamma ||f||^2``
    """
    state.check()
    f = state.f.weights
    fp = state.f_prev
    gx, gy = grad_forward(f)
    val = 0.5 * np.sum((apply_data_operator(state.sample, f) - state.label) ** 2)
    val += cfg.alpha1 * np.abs(f).sum()
    val += cfg.alpha2 * (np.sum(gx**2) + np.sum(gy**2))
    val += cfg.beta1 * np.sum((f - fp) ** 2)
    if state.prev_sample is not None:
        val += cfg.beta2 * np.sum((apply_data_operator(state.prev_sample, fp) - state.prev_label) ** 2)
    val += cfg.gamma_ridge * np.sum(f**2)
    return float(val)


def _circ_grad_energy(h: int, w: int) -> np.ndarray:
    # |transfer|^2 of circular forward differences along both axes
    ky = 4.0 * np.sin(np.pi * np.arange(h) / h) ** 2
    kx = 4.0 * np.sin(np.pi * np.arange(w) / w) ** 2
    return ky[:, None] + kx[None, :]


def _circ_grad_normal(f: np.ndarray) -> np.ndarray:
    out = np.zeros_like(f)
    for axis in (0, 1):
        d = np.roll(f, -1, axis=axis) - f
        out += np.roll(d, 1, axis=axis) - d
    return out


def _wrap_correction(f: np.ndarray) -> np.ndarray:
    """Gradient of ``||grad_c f||^2 - ||grad f||^2`` divided by 2.

    The zero-boundary gradient energy equals the circular one minus the
    wrap-around differences; linearizing that concave part keeps every
    solve diagonal in frequency.
    """
    gx, gy = grad_forward(f)
    return _circ_grad_normal(f) - grad_adjoint(gx, gy)


class _BinSolver:
    """Minimizes ``1/2||A f - y||^2 + 1/2 f'Kf - <b, f>`` bin by bin.

    ``K = kappa0 I + 2 smooth G'G`` with circular ``G``, so ``K`` is scalar
    per bin and the D x D normal equations reduce to Sherman-Morrison.
    """

    def __init__(self, x: np.ndarray, y: np.ndarray, kappa0: float, smooth: float):
        self.xf = dft2(_as3(x))
        self.yf = dft2(y)
        h, w, _ = self.xf.shape
        self.kappa = kappa0 + 2.0 * smooth * _circ_grad_energy(h, w)
        self.energy = np.sum(np.abs(self.xf) ** 2, axis=2)
        denom = self.kappa + self.energy
        self.inv_denom = np.divide(1.0, denom, out=np.zeros_like(denom), where=denom > 0)
        self.inv_kappa = np.divide(1.0, self.kappa, out=np.zeros_like(self.kappa), where=self.kappa > 0)
        self.base = np.conj(self.xf) * (self.yf * self.inv_denom)[:, :, None]

    def solve(self, b: Optional[np.ndarray] = None) -> np.ndarray:
        ff = self.base
        if b is not None:
            bf = dft2(b)
            proj = np.sum(self.xf * bf, axis=2) * self.inv_denom
            ff = ff + (bf - np.conj(self.xf) * proj[:, :, None]) * self.inv_kappa[:, :, None]
        return idft2(ff)


def _regularized_fit(
    x: np.ndarray,
    y: np.ndarray,
    *,
    ridge: float,
    anchor: np.ndarray,
    anchor_w: float,
    smooth_w: float,
    l1_w: float,
    ratio_eps: Optional[float],
    f0: np.ndarray,
    dual0: Optional[np.ndarray],
    penalty0: Optional[float],
    inner_iters: int,
    penalty_scale: float,
    rtol: float = 1e-7,
) -> tuple[np.ndarray, bool, Optional[np.ndarray], Optional[float]]:
    """Shared solver of the f and g blocks.

    Objective: ``1/2||A f - y||^2 + ridge/2 ||f||^2 + anchor_w ||f - anchor||^2
    + smooth_w ||grad f||^2 + l1_w * S(f)`` with ``S(f) = ||f||_1`` or, when
    ``ratio_eps`` is given, ``||f||_1 / (||f||_2 + ratio_eps)``; the ratio's
    denominator is refreshed from the current iterate every inner step.

    Returns the solution, a convergence flag and the scaled dual / penalty
    so that a later call can resume the same ADMM run.
    """
    x = _as3(x)
    kappa_q = ridge + 2.0 * anchor_w

    def linear_term(f_lin, mu=0.0, v=None):
        b = 2.0 * anchor_w * anchor
        if smooth_w > 0:
            b = b + 2.0 * smooth_w * _wrap_correction(f_lin)
        if v is not None:
            b = b + mu * v
        return b

    if l1_w <= 0:
        solver = _BinSolver(x, y, kappa_q, smooth_w)
        f = solver.solve(linear_term(f0))
        if smooth_w > 0:
            # fixed-point refinement of the boundary linearization
            for _ in range(inner_iters):
                f_new = solver.solve(linear_term(f))
                done = np.linalg.norm(f_new - f) <= 1e-13 * max(np.linalg.norm(f_new), 1e-300)
                f = f_new
                if done:
                    break
        return f, True, None, None

    if penalty0 is None:
        mean_energy = np.sum(np.abs(dft2(x)) ** 2) / (x.shape[0] * x.shape[1])
        penalty0 = penalty_scale * max(mean_energy, 1e-8)
    mu = penalty0
    solver = _BinSolver(x, y, kappa_q + mu, smooth_w)
    h = np.array(f0, dtype=float)
    u = np.zeros_like(h) if dual0 is None else np.array(dual0, dtype=float)
    f = h
    converged = False
    for it in range(inner_iters):
        f = solver.solve(linear_term(f, mu, h - u))
        weight = l1_w
        if ratio_eps is not None:
            weight = l1_w / (np.linalg.norm(f + u) + ratio_eps)
        h_old = h
        h = soft_threshold(f + u, weight / mu)
        u = u + f - h
        r_primal = np.linalg.norm(f - h)
        r_dual = mu * np.linalg.norm(h - h_old)
        scale = max(np.linalg.norm(h), np.linalg.norm(f), 1e-12)
        if r_primal <= rtol * scale and r_dual <= rtol * mu * scale:
            converged = True
            break
        # residual balancing; the scaled dual is rescaled with the penalty
        if r_primal > 10.0 * r_dual:
            mu, u = mu * 2.0, u / 2.0
            solver = _BinSolver(x, y, kappa_q + mu, smooth_w)
        elif r_dual > 10.0 * r_primal:
            mu, u = mu / 2.0, u * 2.0
            solver = _BinSolver(x, y, kappa_q + mu, smooth_w)
    return h, converged, u, mu


def solve_f(state: AstfState, cfg: AstfConfig) -> FilterBank:
    """f block: current-frame fit with ratio sparsity, temporal proximity and smoothness."""
    state.check()
    f, ok, dual, mu = _regularized_fit(
        state.sample, state.label,
        ridge=cfg.gamma_ridge,
        anchor=state.f_prev, anchor_w=cfg.beta1,
        smooth_w=cfg.delta1,
        l1_w=cfg.alpha1, ratio_eps=cfg.eps_sparse,
        f0=state.f.weights, dual0=state.f.dual, penalty0=state.f.penalty,
        inner_iters=cfg.inner_iters, penalty_scale=cfg.inner_penalty, rtol=cfg.inner_tol,
    )
    return FilterBank(weights=f, prev=state.f.prev, converged=ok, dual=dual, penalty=mu)


def solve_g(state: AstfState, cfg: AstfConfig) -> FilterBank:
    """g block: previous-frame fit anchored at ``f_{t-1}`` with an l1 penalty."""
    state.check()
    if state.prev_sample is None or state.prev_label is None:
        raise ShapeMismatch("solve_g needs the previous sample and label")
    g0 = state.g if state.g is not None else FilterBank(weights=state.f_prev)
    g, ok, dual, mu = _regularized_fit(
        state.prev_sample, state.prev_label,
        ridge=cfg.gamma_ridge,
        anchor=state.f_prev, anchor_w=cfg.beta2,
        smooth_w=0.0,
        l1_w=cfg.lambda1_g, ratio_eps=None,
        f0=g0.weights, dual0=g0.dual, penalty0=g0.penalty,
        inner_iters=cfg.inner_iters, penalty_scale=cfg.inner_penalty, rtol=cfg.inner_tol,
    )
    return FilterBank(weights=g, prev=state.f.prev, converged=ok, dual=dual, penalty=mu)


def _field(f) -> np.ndarray:
    return _as3(f.weights if isinstance(f, FilterBank) else f)


def spatial_reg(f, sp: SpatialRegParams) -> float:
    """Curvature / gradient smoothness penalty of a filter.

    Both the second-order symbol and the Laplacian symbol are evaluated with
    the 5-point Laplacian; the first bracket is summed over both gradient
    components.
    """
    f = _field(f)
    lap = laplacian(f)
    gx, gy = grad_forward(f)
    g3 = grad_n(f, 3)
    g4 = grad_n(f, 4)
    first = sum(np.sum((lap + sp.lam1_s * g + sp.gam1 * g**2 + sp.mu1 * g3) ** 2) for g in (gx, gy))
    second = np.sum((lap + sp.gam2 * lap**2 + sp.mu2 * g4) ** 2)
    return float(sp.a2 * (first + sp.lam2_s * second))


def adaptive_smoothness(f, sp: SpatialRegParams, include_identity: bool = True) -> float:
    """Entry-wise p-norm of ``(f + lam1 grad f + gam1 (grad f)^2 + mu1 grad^3 f)^2``."""
    f = _field(f)
    gx, gy = grad_forward(f)
    g3 = grad_n(f, 3)
    base = f if include_identity else 0.0
    inner = np.stack([(base + sp.lam1_s * g + sp.gam1 * g**2 + sp.mu1 * g3) ** 2 for g in (gx, gy)])
    if sp.p_norm == 1:
        return float(inner.sum())
    return float(np.sum(inner**sp.p_norm) ** (1.0 / sp.p_norm))


def temporal_reg(f_t: np.ndarray, f_prev: np.ndarray, tp: TemporalRegParams) -> float:
    f_t = np.asarray(f_t, dtype=float)
    f_prev = np.asarray(f_prev, dtype=float)
    if f_t.shape != f_prev.shape:
        raise ShapeMismatch(f"{f_t.shape} != {f_prev.shape}")
    d = f_t - f_prev
    first = np.sum((tp.delta_t * (d + tp.eps_off * _sgn(f_t))) ** 2)
    second = np.sum((tp.delta_t**2 * (d + tp.gamma_off * _sgn(f_prev))) ** 2)
    return float(tp.beta1 * first + tp.beta2 * second)


def update_p(f_t: np.ndarray, f_prev: np.ndarray, tp: TemporalRegParams) -> np.ndarray:
    """``(eps / beta1) * sgn(f_t) + f_prev``."""
    if tp.beta1 == 0:
        raise ZeroBeta1("update_p needs beta1 > 0")
    f_t = np.asarray(f_t, dtype=float)
    f_prev = np.asarray(f_prev, dtype=float)
    if f_t.shape != f_prev.shape:
        raise ShapeMismatch(f"{f_t.shape} != {f_prev.shape}")
    return (tp.eps_off / tp.beta1) * _sgn(f_t) + f_prev


def update_q(f_prev: np.ndarray, tp: TemporalRegParams) -> np.ndarray:
    """``sqrt(gamma / beta2) + f_prev``."""
    if tp.beta2 == 0:
        raise ZeroBeta2("update_q needs beta2 > 0")
    ratio = tp.gamma_off / tp.beta2
    if ratio < 0:
        raise NegativeRatio(f"gamma/beta2 = {ratio} < 0")
    return np.sqrt(ratio) + np.asarray(f_prev, dtype=float)


def solve_w(state: AstfState, cfg: AstfConfig, tp: TemporalRegParams) -> np.ndarray:
    """w block: average of the p and q updates, shrunk by ``eta * lambda2 / (1 + lambda2)``."""
    f = state.f.weights
    fp = state.f_prev
    if fp.shape != f.shape:
        raise ShapeMismatch(f"{fp.shape} != {f.shape}")
    avg = 0.5 * (update_p(f, fp, tp) + update_q(fp, tp))
    return soft_threshold(avg, cfg.eta_w * cfg.lambda2_w / (1.0 + cfg.lambda2_w))


def admm_astf(
    x: np.ndarray,
    y: np.ndarray,
    prev: Optional[AstfState],
    cfg: AstfConfig = AstfConfig(),
    tp: TemporalRegParams = TemporalRegParams(),
    warn: bool = True,
) -> AstfState:
    """Train the filter on sample ``x`` / label ``y`` starting from ``prev``.

    ``prev`` carries ``f_{t-1}`` (its filter) and the previous sample and
    label; ``None`` starts from a zero filter with no history.  Sweeps stop
    when the relative filter change drops below ``cfg.tol``.  When history
    exists the g block is blended into the result as ``(f + g) / 2``.
    The returned state's ``trace`` holds the objective after every sweep.
    """
    x = _as3(x)
    y = np.asarray(y, dtype=float)
    g0 = None
    if prev is None:
        f_prev = np.zeros_like(x)
        prev_sample = prev_label = None
        w_ref = np.zeros_like(x)
        f0 = FilterBank(weights=f_prev.copy(), prev=f_prev)
    else:
        f_prev = prev.f.weights
        prev_sample, prev_label = prev.sample, prev.label
        w_ref = prev.w_ref if prev.w_ref is not None else f_prev
        # the inner splits resume from the previous call (warm start)
        f0 = FilterBank(weights=f_prev.copy(), prev=f_prev, dual=prev.f.dual, penalty=prev.f.penalty)
        if prev.g is not None and prev.g.shape == f_prev.shape:
            g0 = FilterBank(weights=f_prev.copy(), dual=prev.g.dual, penalty=prev.g.penalty)
    state = AstfState(
        f=f0, sample=x, label=y, g=g0,
        w_ref=w_ref, prev_sample=prev_sample, prev_label=prev_label,
    )
    state.check()
    trace = [eval_objective(state, cfg)]
    converged = False
    for k in range(cfg.max_admm_iters):
        f_new = solve_f(state, cfg)
        g = solve_g(state, cfg) if prev_sample is not None else None
        w = solve_w(replace(state, f=f_new), cfg, tp)
        change = np.linalg.norm(f_new.weights - state.f.weights) / max(np.linalg.norm(state.f.weights), 1e-12)
        state = replace(state, f=f_new, g=g, w_ref=w, iter=k + 1)
        trace.append(eval_objective(state, cfg))
        if change < cfg.tol:
            converged = True
            break
    if not converged and warn:
        warnings.warn(f"ASTF stopped after {cfg.max_admm_iters} sweeps", ConvergenceWarning, stacklevel=2)
    out = state.f.weights
    if state.g is not None:
        out = 0.5 * (out + state.g.weights)
    out_f = FilterBank(weights=out, prev=f_prev, dual=state.f.dual, penalty=state.f.penalty)
    return replace(state, f=out_f, converged=converged, trace=trace)


def ridge_filter(x: np.ndarray, y: np.ndarray, gamma: float) -> np.ndarray:
    """Per-bin ridge solution ``conj(X_d) Y / (sum_d |X_d|^2 + gamma)`` (KCF-style linear baseline)."""
    xf = dft2(_as3(x))
    denom = np.sum(np.abs(xf) ** 2, axis=2) + gamma
    return idft2(np.conj(xf) * (dft2(np.asarray(y, dtype=float)) / denom)[:, :, None])
