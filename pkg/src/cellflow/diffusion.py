"""Variance-schedule algebra and the forward/reverse noising processes.

A schedule holds, for iterations t = 0..T, the signal scale ``alpha[t]``,
the noise scale ``sigma[t]`` and the log signal-to-noise ratio
``log_snr[t] = log(alpha[t]^2 / sigma[t]^2)``, which strictly decreases in t.
Schedules here are variance preserving (alpha^2 + sigma^2 = 1): alpha and
sigma are derived from the log-SNR curve through the sigmoid, which makes
the identity hold by construction.

The forward process scales the latent by ``alpha[t+1]/alpha[t]`` and adds
Gaussian noise of variance ``(1 - exp(log_snr[t+1] - log_snr[t])) *
sigma[t+1]^2``; the reverse process samples the Gaussian posterior implied
by that kernel and the marginal form, with the predicted clean signal
supplied by a pluggable denoiser.  No denoiser is trained here: provided
implementations are deterministic stand-ins (zero, constant, fixed tensor,
or an adapter around a noise predictor).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import NumericError

__all__ = [
    "LOG_SNR_MAX",
    "LOG_SNR_MIN",
    "SCHEDULE_KINDS",
    "DiffusionSchedule",
    "Latent",
    "Denoiser",
    "ZeroDenoiser",
    "ConstantDenoiser",
    "FixedTensorDenoiser",
    "NoisePredictionAdapter",
    "TrainingConfig",
    "make_schedule",
    "cond_variance",
    "forward_step",
    "forward_marginal",
    "reverse_step",
    "sample",
    "schedule_csv",
]

LOG_SNR_MAX = 20.0
LOG_SNR_MIN = -20.0
SCHEDULE_KINDS = ("cosine", "linear-log-snr")


@dataclass(frozen=True)
class DiffusionSchedule:
    """Arrays alpha, sigma, log_snr over t = 0..T (length T+1)."""

    alpha: np.ndarray
    sigma: np.ndarray
    log_snr: np.ndarray
    kind: str = "cosine"

    def __post_init__(self):
        n = len(self.alpha)
        if len(self.sigma) != n or len(self.log_snr) != n or n < 2:
            raise ValueError("schedule arrays must share a length of at least 2")
        if not np.all(np.diff(self.log_snr) < 0):
            raise ValueError("log-SNR must be strictly decreasing")
        if not (np.all(self.alpha > 0) and np.all(self.alpha <= 1)):
            raise ValueError("alpha values must lie in (0, 1]")
        if not (np.all(self.sigma >= 0) and np.all(self.sigma < 1)):
            raise ValueError("sigma values must lie in [0, 1)")

    @property
    def steps(self) -> int:
        return len(self.alpha) - 1


class Denoiser(Protocol):
    """Deterministic predictor of the clean signal from a noisy latent."""

    def predict_x0(self, latent: "Latent", schedule: DiffusionSchedule) -> np.ndarray:
        ...


@dataclass(frozen=True)
class Latent:
    """State of the noising chain: iteration index plus data tensor."""

    t: int
    data: np.ndarray

    def __post_init__(self):
        if self.t < 0:
            raise ValueError(f"iteration index must be >= 0, got {self.t}")


@dataclass(frozen=True)
class TrainingConfig:
    """Optimizer constants recorded for provenance; never executed here."""

    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    loss: str = "l1"  # alternative: "weighted-l2"


def _from_log_snr(log_snr: np.ndarray, kind: str) -> DiffusionSchedule:
    # sigmoid(x) + sigmoid(-x) == 1, so alpha^2 + sigma^2 == 1 by construction
    alpha = np.sqrt(1.0 / (1.0 + np.exp(-log_snr)))
    sigma = np.sqrt(1.0 / (1.0 + np.exp(log_snr)))
    return DiffusionSchedule(alpha=alpha, sigma=sigma, log_snr=log_snr, kind=kind)


def make_schedule(steps: int, kind: str = "cosine") -> DiffusionSchedule:
    """Build a variance-preserving schedule over ``steps`` iterations.

    ``cosine`` maps t to log-SNR -2*log(tan(pi/2 * t/T)); ``linear-log-snr``
    spaces the log-SNR linearly.  Both are clamped to [-20, 20] at the
    endpoints so every scalar stays finite.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if kind not in SCHEDULE_KINDS:
        raise ValueError(f"unknown schedule kind {kind!r}, expected one of {SCHEDULE_KINDS}")
    t = np.arange(steps + 1, dtype=np.float64)
    if kind == "cosine":
        with np.errstate(divide="ignore"):
            raw = -2.0 * np.log(np.tan(0.5 * math.pi * t / steps))
        log_snr = np.clip(raw, LOG_SNR_MIN, LOG_SNR_MAX)
    else:
        log_snr = LOG_SNR_MAX + (LOG_SNR_MIN - LOG_SNR_MAX) * t / steps
    return _from_log_snr(log_snr, kind)


def cond_variance(schedule: DiffusionSchedule, t: int) -> float:
    """Variance of the forward kernel taking the latent from t-1 to t."""
    if not 1 <= t <= schedule.steps:
        raise ValueError(f"t must be in 1..{schedule.steps}, got {t}")
    ratio = math.exp(schedule.log_snr[t] - schedule.log_snr[t - 1])
    return float((1.0 - ratio) * schedule.sigma[t] ** 2)


def forward_step(x_prev: Latent, schedule: DiffusionSchedule,
                 rng: np.random.Generator) -> Latent:
    """One forward noising step from iteration t to t+1."""
    t = x_prev.t
    if t >= schedule.steps:
        raise ValueError(f"cannot step forward from t={t} on a {schedule.steps}-step schedule")
    scale = schedule.alpha[t + 1] / schedule.alpha[t]
    noise_sd = math.sqrt(cond_variance(schedule, t + 1))
    data = scale * x_prev.data + noise_sd * rng.standard_normal(np.shape(x_prev.data))
    return Latent(t=t + 1, data=data)


def forward_marginal(x0: np.ndarray, t: int, schedule: DiffusionSchedule,
                     rng: np.random.Generator) -> Latent:
    """Noise clean data directly to iteration t: alpha[t]*x0 + sigma[t]*eps."""
    if not 0 <= t <= schedule.steps:
        raise ValueError(f"t must be in 0..{schedule.steps}, got {t}")
    x0 = np.asarray(x0, dtype=np.float64)
    data = schedule.alpha[t] * x0 + schedule.sigma[t] * rng.standard_normal(x0.shape)
    return Latent(t=t, data=data)


def _posterior_coefficients(schedule: DiffusionSchedule, t: int) -> tuple[float, float, float]:
    """Mean coefficients (on x_t and on x0) and variance of the reverse kernel."""
    ratio = math.exp(schedule.log_snr[t] - schedule.log_snr[t - 1])
    coef_xt = ratio * schedule.alpha[t - 1] / schedule.alpha[t]
    coef_x0 = (1.0 - ratio) * schedule.alpha[t - 1]
    var = (1.0 - ratio) * schedule.sigma[t - 1] ** 2
    return coef_xt, coef_x0, var


def reverse_step(x_t: Latent, x0_hat: np.ndarray, schedule: DiffusionSchedule,
                 rng: np.random.Generator) -> Latent:
    """Sample the latent at t-1 given the latent at t and a clean estimate.

    The kernel is the Gaussian posterior consistent with the forward step
    and the variance-preserving marginals:

        mean = e^(dl) * (alpha[t-1]/alpha[t]) * x_t + (1 - e^(dl)) * alpha[t-1] * x0_hat
        var  = (1 - e^(dl)) * sigma[t-1]^2,    dl = log_snr[t] - log_snr[t-1]
    """
    t = x_t.t
    if t < 1:
        raise ValueError("cannot step in reverse from t=0")
    if t > schedule.steps:
        raise ValueError(f"t={t} out of range for a {schedule.steps}-step schedule")
    x0_hat = np.asarray(x0_hat, dtype=np.float64)
    if np.shape(x0_hat) != np.shape(x_t.data):
        raise ValueError(
            f"clean estimate shape {np.shape(x0_hat)} != latent shape {np.shape(x_t.data)}"
        )
    coef_xt, coef_x0, var = _posterior_coefficients(schedule, t)
    mean = coef_xt * x_t.data + coef_x0 * x0_hat
    data = mean + math.sqrt(var) * rng.standard_normal(np.shape(mean))
    return Latent(t=t - 1, data=data)


def sample(denoiser: Denoiser, schedule: DiffusionSchedule, shape,
           rng: np.random.Generator) -> np.ndarray:
    """Ancestral sampling: start from standard normal noise at t=T and walk
    the reverse kernel down to t=0, denoising at every iteration."""
    latent = Latent(t=schedule.steps, data=rng.standard_normal(shape))
    for t in range(schedule.steps, 0, -1):
        x0_hat = np.asarray(denoiser.predict_x0(latent, schedule), dtype=np.float64)
        if not np.all(np.isfinite(x0_hat)):
            raise NumericError(f"denoiser produced non-finite values at iteration t={t}")
        latent = reverse_step(latent, x0_hat, schedule, rng)
    return latent.data


@dataclass(frozen=True)
class ZeroDenoiser:
    """Predicts an all-zero clean signal."""

    def predict_x0(self, latent: Latent, schedule: DiffusionSchedule) -> np.ndarray:
        return np.zeros_like(latent.data)


@dataclass(frozen=True)
class ConstantDenoiser:
    """Predicts a constant clean signal everywhere."""

    value: float

    def predict_x0(self, latent: Latent, schedule: DiffusionSchedule) -> np.ndarray:
        return np.full_like(latent.data, self.value)


@dataclass(frozen=True)
class FixedTensorDenoiser:
    """Always predicts one fixed tensor (sampling then reconstructs it)."""

    tensor: np.ndarray

    def predict_x0(self, latent: Latent, schedule: DiffusionSchedule) -> np.ndarray:
        if np.shape(self.tensor) != np.shape(latent.data):
            raise ValueError(
                f"fixed tensor shape {np.shape(self.tensor)} != latent shape "
                f"{np.shape(latent.data)}"
            )
        return np.asarray(self.tensor, dtype=np.float64)


@dataclass(frozen=True)
class NoisePredictionAdapter:
    """Wraps a noise predictor eps(latent) as a clean-signal predictor:
    x0_hat = (x_t - sigma[t] * eps) / alpha[t]."""

    eps_model: object  # callable(latent, schedule) -> noise estimate

    def predict_x0(self, latent: Latent, schedule: DiffusionSchedule) -> np.ndarray:
        eps = np.asarray(self.eps_model(latent, schedule), dtype=np.float64)
        t = latent.t
        return (latent.data - schedule.sigma[t] * eps) / schedule.alpha[t]


def schedule_csv(schedule: DiffusionSchedule) -> str:
    """Audit dump: header ``t,alpha,sigma,lambda`` plus one row per iteration."""
    lines = ["t,alpha,sigma,lambda"]
    for t in range(schedule.steps + 1):
        lines.append(
            f"{t},{float(schedule.alpha[t])!r},{float(schedule.sigma[t])!r},"
            f"{float(schedule.log_snr[t])!r}"
        )
    return "\n".join(lines) + "\n"
