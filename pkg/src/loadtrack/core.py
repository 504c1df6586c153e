"""Numerical kernels for online setpoint tracking.

Losses, gradients, the closed-form composite proximal update, sphere
sampling for gradient estimation, box projections, and step-size
schedules. Every operation is a pure function of its inputs; random
draws take an explicit generator, so everything here is safe to call
concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Box",
    "ConfigError",
    "EnvBounds",
    "LossParams",
    "RunningMean",
    "StepSchedule",
    "UnsupportedBoxError",
    "conservative_bounds",
    "full_gradient",
    "gradient_estimate",
    "project_shrunk_box",
    "prox_step",
    "running_mean_candidate",
    "running_mean_update",
    "sample_unit_sphere",
    "smooth_loss",
    "soft_threshold",
    "step_schedule",
    "tracking_loss",
]

SCHEDULE_KINDS = ("full", "bandit", "partial", "bernoulli")

# Numerical tolerances; tests may monkeypatch these.
UNIT_NORM_TOL = 1e-9
BOX_MEMBERSHIP_TOL = 1e-12
DEGENERATE_NORM_FLOOR = 1e-12


class ConfigError(ValueError):
    """Invalid parameter or parameter combination."""


class UnsupportedBoxError(ValueError):
    """Box incompatible with the closed-form proximal update."""


def _vector(x, name: str = "vector") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return arr


def _same_length(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"length mismatch in {what}: {a.shape[0]} vs {b.shape[0]}")


@dataclass(frozen=True)
class Box:
    """Per-coordinate decision box [lo, hi]."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = _vector(self.lo, "lo")
        hi = _vector(self.hi, "hi")
        _same_length(lo, hi, "box bounds")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite")
        if np.any(lo > hi):
            raise ValueError("box requires lo <= hi coordinate-wise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def symmetric(cls, dim: int, half_width: float = 1.0) -> "Box":
        if dim < 1:
            raise ValueError("dim must be positive")
        w = float(half_width)
        return cls(np.full(dim, -w), np.full(dim, w))

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def clip(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lo, self.hi)

    def contains(self, x, tol: float = BOX_MEMBERSHIP_TOL) -> bool:
        arr = np.asarray(x, dtype=float)
        return bool(np.all(arr >= self.lo - tol) and np.all(arr <= self.hi + tol))

    def shrunk(self, delta: float) -> "Box":
        """The set scaled by (1 - delta), so a delta-ball perturbation stays inside."""
        if not 0.0 < delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        return Box((1.0 - delta) * self.lo, (1.0 - delta) * self.hi)

    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))


@dataclass(frozen=True)
class RunningMean:
    """Exact running average of the signals played in rounds 1..t."""

    mean: np.ndarray
    rounds: int

    def __post_init__(self):
        object.__setattr__(self, "mean", _vector(self.mean, "mean"))
        if self.rounds < 0:
            raise ValueError("rounds must be nonnegative")

    @classmethod
    def zero(cls, dim: int) -> "RunningMean":
        return cls(np.zeros(dim), 0)

    def norm(self) -> float:
        return float(np.linalg.norm(self.mean))


def running_mean_update(mean_prev: RunningMean, mu_t) -> RunningMean:
    """Append one signal: mean_t = ((t-1)*mean_{t-1} + mu_t) / t."""
    mu = _vector(mu_t, "mu_t")
    _same_length(mean_prev.mean, mu, "running mean update")
    t = mean_prev.rounds + 1
    return RunningMean((mean_prev.rounds * mean_prev.mean + mu) / t, t)


def running_mean_candidate(mean_prev: RunningMean, mu) -> np.ndarray:
    """The running average as it would stand after appending ``mu``."""
    mu = _vector(mu, "mu")
    _same_length(mean_prev.mean, mu, "running mean candidate")
    t = mean_prev.rounds + 1
    return (mean_prev.rounds * mean_prev.mean + mu) / t


@dataclass(frozen=True)
class LossParams:
    """Regularization weights: rho scales the mean penalty, lam the l1 penalty."""

    rho: float = 0.0
    lam: float = 0.0

    def __post_init__(self):
        if self.rho < 0 or self.lam < 0:
            raise ValueError("regularization weights must be nonnegative")


def tracking_loss(s_eff: float, c, mu) -> float:
    """Squared tracking error (s_eff - c.mu)^2."""
    c = _vector(c, "c")
    mu = _vector(mu, "mu")
    _same_length(c, mu, "tracking loss")
    err = float(s_eff) - float(c @ mu)
    return err * err


def smooth_loss(s_eff: float, c, mu, params: LossParams, mean_prev: RunningMean) -> float:
    """Tracking loss plus the mean penalty evaluated with ``mu`` appended.

    ``mean_prev`` must hold the running mean over rounds 1..t-1.
    """
    base = tracking_loss(s_eff, c, mu)
    if params.rho == 0.0:
        return base
    cand = running_mean_candidate(mean_prev, mu)
    return base + params.rho * float(cand @ cand)


def full_gradient(s_eff: float, c, mu, params: LossParams, mean_prev: RunningMean, t: int) -> np.ndarray:
    """Exact gradient of the smooth loss at ``mu``.

    -2c(s_eff - c.mu) + (2 rho / t) * ((t-1)*mean_{t-1} + mu) / t
    """
    c = _vector(c, "c")
    mu = _vector(mu, "mu")
    _same_length(c, mu, "gradient")
    if t < 1:
        raise ValueError("t must be >= 1")
    if mean_prev.rounds != t - 1:
        raise ValueError(f"mean_prev holds {mean_prev.rounds} rounds, expected {t - 1}")
    grad = -2.0 * c * (float(s_eff) - float(c @ mu))
    if params.rho != 0.0:
        cand = ((t - 1) * mean_prev.mean + mu) / t
        grad = grad + (2.0 * params.rho / t) * cand
    return grad


def gradient_estimate(loss_value: float, v, dim: int, delta: float) -> np.ndarray:
    """One-point gradient estimate (dim/delta) * loss * v from a perturbed play."""
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    v = _vector(v, "v")
    if v.shape[0] != dim:
        raise ValueError(f"direction has length {v.shape[0]}, expected {dim}")
    nrm = float(np.linalg.norm(v))
    if abs(nrm - 1.0) > UNIT_NORM_TOL:
        raise ValueError(f"direction must be unit norm, got {nrm!r}")
    return (dim / delta) * float(loss_value) * v


def sample_unit_sphere(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from the unit sphere; normalized standard Gaussians."""
    if dim < 1:
        raise ValueError("dim must be positive")
    if dim == 1:
        return np.array([1.0 if rng.random() < 0.5 else -1.0])
    while True:
        g = rng.standard_normal(dim)
        nrm = float(np.linalg.norm(g))
        if nrm > DEGENERATE_NORM_FLOOR:
            return g / nrm


def soft_threshold(y, threshold: float) -> np.ndarray:
    """Shrink toward zero: sign(y) * max(|y| - threshold, 0)."""
    y = np.asarray(y, dtype=float)
    return np.sign(y) * np.maximum(np.abs(y) - threshold, 0.0)


def prox_step(mu_t, grad, eta: float, lam: float, box: Box) -> np.ndarray:
    """Closed-form composite update: gradient step, soft threshold, clip.

    Exact minimizer of eta*g.mu + 0.5*||mu_t - mu||^2 + eta*lam*||mu||_1
    over the box. Requires lo <= 0 <= hi on every coordinate, which all
    decision boxes used here satisfy.
    """
    mu_t = _vector(mu_t, "mu_t")
    grad = _vector(grad, "grad")
    _same_length(mu_t, grad, "prox step")
    if box.dim != mu_t.shape[0]:
        raise ValueError("box dimension mismatch")
    if eta <= 0.0:
        raise ValueError("eta must be positive")
    if lam < 0.0:
        raise ValueError("lam must be nonnegative")
    if np.any(box.lo > 0.0) or np.any(box.hi < 0.0):
        raise UnsupportedBoxError("prox_step requires a box containing 0 coordinate-wise")
    y = mu_t - eta * grad
    return box.clip(soft_threshold(y, eta * lam))


def project_shrunk_box(mu, delta: float, box: Box) -> np.ndarray:
    """Euclidean projection onto the box scaled by (1 - delta)."""
    if delta >= 1.0 or delta <= 0.0:
        raise ValueError("delta must lie in (0, 1)")
    return box.shrunk(delta).clip(mu)


@dataclass(frozen=True)
class EnvBounds:
    """Conservative problem constants used by the step-size schedules.

    gradient_bound caps the gradient norm of the smooth loss, loss_bound
    caps the smooth loss itself, diameter is the decision-box diameter,
    and lipschitz caps the loss variation per unit signal change.
    """

    gradient_bound: float
    loss_bound: float
    diameter: float
    lipschitz: float

    def __post_init__(self):
        if min(self.gradient_bound, self.loss_bound, self.diameter, self.lipschitz) <= 0:
            raise ValueError("bounds must be positive")


def conservative_bounds(box: Box, setpoint_max: float, response_max: float, rho: float = 0.0) -> EnvBounds:
    """Worst-case loss and gradient bounds derived from the configuration.

    Uses |s| <= setpoint_max, per-coordinate responses <= response_max and
    signals confined to the box; nothing here is estimated online.
    """
    if setpoint_max < 0 or response_max <= 0:
        raise ValueError("setpoint_max must be nonnegative, response_max positive")
    n = box.dim
    signal_norm_max = float(np.linalg.norm(np.maximum(np.abs(box.lo), np.abs(box.hi))))
    response_norm_max = response_max * math.sqrt(n)
    worst_err = setpoint_max + response_norm_max * signal_norm_max
    loss_bound = worst_err ** 2 + rho * signal_norm_max ** 2
    gradient_bound = 2.0 * response_norm_max * worst_err + 2.0 * rho * signal_norm_max
    return EnvBounds(gradient_bound, loss_bound, box.diameter(), gradient_bound)


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes for one feedback regime.

    full:      eta
    bandit:    eta, delta
    partial:   eta (bandit block), eta2 (observed block), delta
    bernoulli: eta (full rounds), eta2 (bandit rounds), delta
    """

    kind: str
    eta: float
    eta2: float | None = None
    delta: float | None = None

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.eta <= 0.0:
            raise ValueError("eta must be positive")
        if self.eta2 is not None and self.eta2 <= 0.0:
            raise ValueError("eta2 must be positive")
        if self.delta is not None and not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")


def step_schedule(
    kind: str,
    horizon: int,
    n_loads: int,
    bounds: EnvBounds,
    *,
    observed: int | None = None,
    chi: float = 1.0,
    chi_full: float | None = None,
    chi_bandit: float | None = None,
    bernoulli_a: float | None = None,
    bandit_rounds: int | None = None,
) -> StepSchedule:
    """Tuned step sizes for the given feedback regime and horizon.

    ``observed`` is the number of individually monitored loads (partial
    kind); ``bandit_rounds`` is the realized count of aggregate-feedback
    rounds (bernoulli kind). ``chi_full``/``chi_bandit`` default to ``chi``.
    """
    if kind not in SCHEDULE_KINDS:
        raise ConfigError(f"unknown schedule kind {kind!r}")
    if horizon < 1:
        raise ConfigError("horizon must be >= 1")
    if n_loads < 1:
        raise ConfigError("n_loads must be >= 1")
    if chi <= 0:
        raise ConfigError("chi must be positive")
    T = float(horizon)
    G, B, D = bounds.gradient_bound, bounds.loss_bound, bounds.diameter
    cf = chi if chi_full is None else float(chi_full)
    cb = chi if chi_bandit is None else float(chi_bandit)

    if kind == "full":
        eta = chi * math.sqrt(4.0 * n_loads / (G * G * T))
        return StepSchedule("full", eta)

    if kind == "bandit":
        eta = D * chi / (B * n_loads * T ** 0.75)
        return StepSchedule("bandit", eta, delta=T ** -0.25)

    if kind == "partial":
        if observed is None or not 1 <= observed <= n_loads - 1:
            raise ConfigError("partial kind needs 1 <= observed <= n_loads - 1")
        nb = n_loads - observed
        diam_b = D * math.sqrt(nb / n_loads)
        diam_f = D * math.sqrt(observed / n_loads)
        eta = diam_b * cb / (B * nb * T ** 0.75)
        eta2 = cf * diam_f / (G * math.sqrt(T))
        return StepSchedule("partial", eta, eta2=eta2, delta=T ** -0.25)

    # bernoulli
    if bernoulli_a is None or bandit_rounds is None:
        raise ConfigError("bernoulli kind needs bernoulli_a and the realized bandit_rounds")
    if bernoulli_a < 0:
        raise ConfigError("bernoulli_a must be nonnegative")
    p = bernoulli_a / T ** (1.0 / 3.0)
    if p > 1.0:
        raise ConfigError(f"bandit probability a/T^(1/3) = {p:.4f} exceeds 1")
    if not 0 <= bandit_rounds <= horizon:
        raise ConfigError("bandit_rounds must lie in [0, horizon]")
    eta = D * cf / (G * math.sqrt(T - bandit_rounds + 1))
    eta2 = D * cb / (B * n_loads * (bandit_rounds + 1) ** 0.75)
    # T_B = 0 would give delta = 1 and an empty shrunk box; cap it.
    delta = min((bandit_rounds + 1) ** -0.25, 0.5)
    return StepSchedule("bernoulli", eta, eta2=eta2, delta=delta)
