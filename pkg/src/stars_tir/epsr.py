"""Edge-preserving sparse regularization of a filter tensor.

Four-block ADMM over a low-rank copy ``F``, a sparse copy ``Z``, a temporal
copy ``R`` and a structured-sparse copy ``W`` of the incoming filter, coupled
through the constraints ``Z = F``, ``W = R`` and ``R = F``.  One sweep updates
F, R, Z, W, then the multipliers and the penalty.

Two update families are provided.  The default one is derived from the
Lagrangian ``+<Y1, Z-F> + <Y2, W-R> + <Y3, R-F>`` whose dual step is
``Y += mu * residual``; with it the Z and W proximal steps see ``-Y/mu`` and
the R step keeps the ``lambda3 * ||R - F_prev||^2`` anchor.  With
``printed_updates=True`` the R, Z and W steps use the commonly printed
closed forms instead (``+Y/mu`` and an unaveraged ``F + W``); that family
does not converge and is kept for reference and comparison only.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import ConvergenceWarning, InvalidConfig, ShapeMismatch
from .numerics import hard_threshold, nuclear_norm_slices, soft_threshold, tsvt


@dataclass(frozen=True)
class EpsrConfig:
    lambda1: float = 0.1
    lambda2: float = 0.1
    lambda3: float = 0.1
    mu0: float = 1.0
    rho: float = 1.1
    max_iters: int = 100
    tol: float = 1e-3
    # divide the T-SVT argument by 2 (exact minimizer); False applies the update as printed
    verbatim_eq19: bool = False
    printed_updates: bool = False

    def __post_init__(self):
        if min(self.lambda1, self.lambda2, self.lambda3) < 0:
            raise InvalidConfig("EPSR weights must be >= 0")
        if self.mu0 <= 0:
            raise InvalidConfig("mu0 must be > 0")
        if self.rho <= 1:
            raise InvalidConfig("rho must be > 1")
        if self.max_iters < 1 or self.tol <= 0:
            raise InvalidConfig("max_iters must be >= 1 and tol > 0")


@dataclass
class EpsrState:
    F: np.ndarray
    Z: np.ndarray
    R: np.ndarray
    W: np.ndarray
    Y1: np.ndarray
    Y2: np.ndarray
    Y3: np.ndarray
    mu: float
    iter: int
    F_prev: np.ndarray

    def check(self) -> None:
        shape = self.F.shape
        for name in ("Z", "R", "W", "Y1", "Y2", "Y3", "F_prev"):
            if getattr(self, name).shape != shape:
                raise ShapeMismatch(f"EPSR tensor {name} has shape {getattr(self, name).shape}, expected {shape}")

    def residuals(self) -> tuple[float, float, float]:
        return (
            float(np.linalg.norm(self.Z - self.F)),
            float(np.linalg.norm(self.W - self.R)),
            float(np.linalg.norm(self.R - self.F)),
        )


@dataclass
class EpsrResult:
    F: np.ndarray
    Z: np.ndarray
    R: np.ndarray
    W: np.ndarray
    iters: int
    converged: bool
    mu: float
    trace: list = field(default_factory=list)


def epsr_init(F_prev: np.ndarray, cfg: EpsrConfig) -> EpsrState:
    F_prev = np.asarray(F_prev, dtype=float)
    zeros = np.zeros_like(F_prev)
    return EpsrState(
        F=F_prev.copy(), Z=F_prev.copy(), R=F_prev.copy(), W=F_prev.copy(),
        Y1=zeros.copy(), Y2=zeros.copy(), Y3=zeros.copy(),
        mu=cfg.mu0, iter=0, F_prev=F_prev.copy(),
    )


def update_F(s: EpsrState, cfg: Optional[EpsrConfig] = None) -> np.ndarray:
    s.check()
    arg = s.Z + s.R + (s.Y1 + s.Y3) / s.mu
    if cfg is None or not cfg.verbatim_eq19:
        # the two quadratic couplings share the weight mu/2 each
        arg = arg / 2.0
    return tsvt(arg, 1.0 / s.mu)


def update_R(s: EpsrState, cfg: EpsrConfig) -> np.ndarray:
    s.check()
    if cfg.printed_updates:
        return (s.mu / (cfg.lambda3 + s.mu)) * (s.F + s.W + s.Y2 / s.mu)
    num = 2.0 * cfg.lambda3 * s.F_prev + s.mu * (s.F + s.W) + s.Y2 - s.Y3
    return num / (2.0 * cfg.lambda3 + 2.0 * s.mu)


def update_Z(s: EpsrState, cfg: EpsrConfig) -> np.ndarray:
    s.check()
    if cfg.printed_updates:
        return hard_threshold(s.F + s.Y1 / s.mu, cfg.lambda1 / s.mu)
    return hard_threshold(s.F - s.Y1 / s.mu, cfg.lambda1 / s.mu)


def update_W(s: EpsrState, cfg: EpsrConfig) -> np.ndarray:
    s.check()
    if cfg.printed_updates:
        return soft_threshold(s.R + s.Y2 / s.mu, cfg.lambda2 / s.mu)
    return soft_threshold(s.R - s.Y2 / s.mu, cfg.lambda2 / s.mu)


def update_multipliers(s: EpsrState, cfg: EpsrConfig) -> EpsrState:
    """Dual ascent on the three couplings, then geometric penalty growth."""
    if s.mu == cfg.mu0 * cfg.rho**s.iter:
        # closed form of the geometric schedule: no accumulated rounding
        mu = cfg.mu0 * cfg.rho ** (s.iter + 1)
    else:
        mu = cfg.rho * s.mu
    return replace(
        s,
        Y1=s.Y1 + s.mu * (s.Z - s.F),
        Y2=s.Y2 + s.mu * (s.W - s.R),
        Y3=s.Y3 + s.mu * (s.R - s.F),
        mu=mu,
        iter=s.iter + 1,
    )


def lagrangian_value(s: EpsrState, cfg: EpsrConfig) -> float:
    """Augmented Lagrangian, term for term as usually printed.

    Only the Z-F coupling carries the factor ``mu`` and the temporal term is
    ``lambda3 * ||R||^2``.

    The structured-sparse norm of ``W`` is evaluated as the entrywise l1 norm,
    the norm whose proximal map :func:`update_W` applies.
    """
    s.check()
    inner = lambda a, b: float(np.sum(a * b))
    return (
        nuclear_norm_slices(s.F)
        + cfg.lambda1 * float(np.abs(s.Z).sum())
        + cfg.lambda2 * float(np.abs(s.W).sum())
        + cfg.lambda3 * float(np.sum(s.R**2))
        + inner(s.Y1, s.Z - s.F)
        + inner(s.Y2, s.W - s.R)
        + inner(s.Y3, s.R - s.F)
        + s.mu * float(np.sum((s.Z - s.F) ** 2))
        + float(np.sum((s.W - s.R) ** 2))
        + float(np.sum((s.R - s.F) ** 2))
    )


def epsr_sweep(s: EpsrState, cfg: EpsrConfig) -> EpsrState:
    s = replace(s, F=update_F(s, cfg))
    s = replace(s, R=update_R(s, cfg))
    s = replace(s, Z=update_Z(s, cfg))
    s = replace(s, W=update_W(s, cfg))
    return update_multipliers(s, cfg)


def epsr_run(
    F_prev: np.ndarray,
    cfg: EpsrConfig = EpsrConfig(),
    callback: Optional[Callable[[dict], None]] = None,
    warn: bool = True,
) -> EpsrResult:
    """Run sweeps until every coupling residual is below ``cfg.tol``.

    Every sweep appends ``{iter, res_zf, res_wr, res_rf, mu}`` to the trace.
    When ``callback`` is given the record also carries the Lagrangian value
    and is passed to it (diagnostics; the extra SVD is skipped otherwise).
    Hitting ``cfg.max_iters`` returns the last iterate with ``converged=False``.
    """
    s = epsr_init(F_prev, cfg)
    trace = []
    converged = False
    while s.iter < cfg.max_iters:
        s = epsr_sweep(s, cfg)
        r1, r2, r3 = s.residuals()
        rec = {"iter": s.iter, "res_zf": r1, "res_wr": r2, "res_rf": r3, "mu": s.mu}
        if callback is not None:
            rec["lagrangian"] = lagrangian_value(s, cfg)
            callback(rec)
        trace.append(rec)
        if max(r1, r2, r3) < cfg.tol:
            converged = True
            break
    if not converged and warn:
        warnings.warn(
            f"EPSR stopped at max_iters={cfg.max_iters} with residual {max(s.residuals()):.3g}",
            ConvergenceWarning,
            stacklevel=2,
        )
    return EpsrResult(F=s.F, Z=s.Z, R=s.R, W=s.W, iters=s.iter, converged=converged, mu=s.mu, trace=trace)
