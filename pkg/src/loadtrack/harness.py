"""Closed-loop experiments: setpoints, feedback mediation, trials, metrics.

``run_trial`` wires one fleet to one tracker for a full horizon;
``run_experiment`` repeats that over seeded trials and aggregates the
ledger series and summaries. The hindsight oracle solves the offline
comparator problem the empirical regret is measured against.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .algorithms import (
    AggregateFeedback,
    BanditTracker,
    BernoulliFeedbackTracker,
    FullFeedback,
    FullInformationTracker,
    PartialBanditTracker,
    PartialFeedback,
    QuadraticTrackingObjective,
)
from .core import (
    Box,
    ConfigError,
    EnvBounds,
    LossParams,
    RunningMean,
    conservative_bounds,
    running_mean_update,
    soft_threshold,
    step_schedule,
)
from .loads import (
    EV_NOISE,
    EvFleet,
    EvParams,
    NoiseSpec,
    TclRanges,
    WeightedChargeObjective,
    tcl_fleet_init,
)

__all__ = [
    "DEFAULT_CHI",
    "FEEDBACK_REGIMES",
    "SCENARIOS",
    "ExperimentResult",
    "HindsightResult",
    "MetricsLedger",
    "RegretReport",
    "ScenarioConfig",
    "SetpointSpec",
    "TrialResult",
    "TrialSummary",
    "compute_metrics",
    "empirical_regret",
    "feedback_channel",
    "full_info_regret_bound",
    "hindsight_optimum",
    "improvement_pct",
    "make_setpoint",
    "per_round_reduction_pct",
    "run_experiment",
    "run_trial",
    "simultaneity_pct",
]

SCENARIOS = ("tcl", "ev")
FEEDBACK_REGIMES = ("full", "bandit", "partial", "bernoulli")

SIMULTANEITY_TOL = 1e-2

# Step-size tuning constants per (scenario, feedback). These compensate the
# deliberately conservative loss/gradient bounds and were calibrated on the
# default fleets; override any of them through ScenarioConfig.
DEFAULT_CHI = {
    ("tcl", "full"): {"chi": 60.0},
    ("tcl", "bandit"): {"chi": 8000.0},
    ("tcl", "partial"): {"chi_full": 45.0, "chi_bandit": 8000.0},
    ("tcl", "bernoulli"): {"chi_full": 35.0, "chi_bandit": 8000.0},
    ("ev", "full"): {"chi": 35.0},
}


@dataclass(frozen=True)
class SetpointSpec:
    """Sinusoidal reference: offset + amplitude * sin(frequency * t)."""

    amplitude: float
    frequency: float
    offset: float

    @classmethod
    def for_scenario(cls, scenario: str) -> "SetpointSpec":
        if scenario == "tcl":
            return cls(amplitude=15.0, frequency=0.1, offset=155.0)
        if scenario == "ev":
            return cls(amplitude=25.0, frequency=0.1, offset=0.0)
        raise ConfigError(f"unknown scenario {scenario!r}")


def make_setpoint(spec: SetpointSpec, t) -> float | np.ndarray:
    """Reference power at round t (vectorized over t)."""
    t = np.asarray(t, dtype=float)
    value = spec.offset + spec.amplitude * np.sin(spec.frequency * t)
    return float(value) if value.ndim == 0 else value


@dataclass
class ScenarioConfig:
    """Everything one experiment needs; unset fields resolve to scenario defaults."""

    scenario: str = "tcl"
    feedback: str = "full"
    n_loads: int = 100
    observed: int = 10
    rounds: int = 600
    trials: int = 1
    rho: float = 0.0
    lam: float = 0.0
    chi: float | None = None
    chi_full: float | None = None
    chi_bandit: float | None = None
    bernoulli_a: float = 7.6
    bernoulli_warmup: bool = True
    bernoulli_mean_penalty: bool = False
    seed: int = 0
    setpoint: SetpointSpec | None = None
    noise: NoiseSpec | None = None
    tcl_ranges: TclRanges = field(default_factory=TclRanges)
    ev_params: EvParams = field(default_factory=EvParams)
    ambient: float = 30.0
    step_hours: float | None = None
    compute_regret: bool = False
    hindsight_iters: int = 10_000
    track_loads: int = 5

    def resolved(self) -> "ScenarioConfig":
        cfg = dataclasses.replace(self)
        if cfg.setpoint is None:
            cfg.setpoint = SetpointSpec.for_scenario(cfg.scenario)
        if cfg.noise is None:
            cfg.noise = NoiseSpec() if cfg.scenario == "tcl" else EV_NOISE
        if cfg.step_hours is None:
            cfg.step_hours = 1.0 / 12.0 if cfg.scenario == "tcl" else 1.0 / 60.0
        tuning = DEFAULT_CHI.get((cfg.scenario, cfg.feedback), {})
        if cfg.chi is None:
            cfg.chi = tuning.get("chi", 1.0)
        if cfg.chi_full is None:
            cfg.chi_full = tuning.get("chi_full", cfg.chi)
        if cfg.chi_bandit is None:
            cfg.chi_bandit = tuning.get("chi_bandit", cfg.chi)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.feedback not in FEEDBACK_REGIMES:
            raise ConfigError(f"feedback must be one of {FEEDBACK_REGIMES}, got {self.feedback!r}")
        if self.scenario == "ev" and self.feedback != "full":
            raise ConfigError("the EV scenario supports full feedback only")
        if self.n_loads < 1:
            raise ConfigError("n_loads must be >= 1")
        if self.rounds < 4:
            raise ConfigError("rounds must be >= 4")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.feedback == "partial" and not 1 <= self.observed <= self.n_loads - 1:
            raise ConfigError(
                f"partial feedback needs 1 <= observed <= n_loads - 1, got {self.observed}"
            )
        if self.feedback == "partial" and self.rho != 0.0:
            raise ConfigError("partial feedback drops the mean penalty; set rho = 0")
        if self.rho < 0 or self.lam < 0:
            raise ConfigError("rho and lambda must be nonnegative")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.feedback == "bernoulli":
            p = self.bernoulli_a / self.rounds ** (1.0 / 3.0)
            if self.bernoulli_a < 0 or p > 1.0:
                raise ConfigError(f"bandit probability a/T^(1/3) = {p:.4f} must lie in [0, 1]")
        for name in ("chi", "chi_full", "chi_bandit"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.track_loads < 0:
            raise ConfigError("track_loads must be nonnegative")
        if self.hindsight_iters < 1:
            raise ConfigError("hindsight_iters must be >= 1")

    def effective_rho(self) -> float:
        """The mean-penalty weight the tracker actually optimizes."""
        if self.feedback == "partial":
            return 0.0
        if self.feedback == "bernoulli" and not self.bernoulli_mean_penalty:
            return 0.0
        return self.rho

    def decision_box(self) -> Box:
        if self.scenario == "tcl":
            return Box.symmetric(self.n_loads)
        n = self.n_loads
        return Box(
            np.concatenate([np.zeros(n), -np.ones(n)]),
            np.concatenate([np.ones(n), np.zeros(n)]),
        )


@dataclass
class MetricsLedger:
    """Per-round record of one trial over the scored window."""

    setpoint_eff: np.ndarray
    aggregate: np.ndarray
    tracking: np.ndarray
    objective: np.ndarray
    mean_norm: np.ndarray
    l1: np.ndarray
    simultaneous: np.ndarray
    baseline_tracking: np.ndarray
    responses: np.ndarray
    played: np.ndarray
    rho_eff: float
    lam: float
    mean_weights: np.ndarray | None = None

    @property
    def rounds(self) -> int:
        return self.tracking.shape[0]

    def cumulative_tracking(self) -> np.ndarray:
        return np.cumsum(self.tracking)


@dataclass
class TrialResult:
    ledger: MetricsLedger
    trajectories: np.ndarray
    saturation_events: int
    schedule: object
    bounds: EnvBounds
    box: Box
    baseline_power: float
    infos: list = field(default_factory=list)


def feedback_channel(kind: str, responses, setpoint_eff: float, played, observed: int | None = None):
    """Package exactly the information the regime reveals, and nothing more."""
    responses = np.asarray(responses, dtype=float)
    if kind == "full":
        return FullFeedback(responses.copy(), float(setpoint_eff))
    if kind == "aggregate":
        return AggregateFeedback(float(responses @ played), float(setpoint_eff))
    if kind == "partial":
        if observed is None or not 1 <= observed <= responses.shape[0] - 1:
            raise ConfigError("partial channel needs a valid observed count")
        return PartialFeedback(
            responses[-observed:].copy(), float(responses @ played), float(setpoint_eff)
        )
    raise ConfigError(f"unknown feedback channel kind {kind!r}")


def _build_tracker(cfg: ScenarioConfig, box: Box, bounds: EnvBounds, rng: np.random.Generator):
    rho_eff = cfg.effective_rho()
    params = LossParams(rho=rho_eff, lam=cfg.lam)
    dim = box.dim
    if cfg.feedback == "full":
        schedule = step_schedule("full", cfg.rounds, dim, bounds, chi=cfg.chi)
        if cfg.scenario == "ev":
            objective = WeightedChargeObjective(cfg.n_loads, rho_eff, cfg.ev_params)
        else:
            objective = QuadraticTrackingObjective(dim, rho_eff)
        return FullInformationTracker(schedule, box, params, objective)
    if cfg.feedback == "bandit":
        schedule = step_schedule("bandit", cfg.rounds, dim, bounds, chi=cfg.chi)
        return BanditTracker(schedule, box, params, rng)
    if cfg.feedback == "partial":
        schedule = step_schedule(
            "partial", cfg.rounds, dim, bounds,
            observed=cfg.observed, chi=cfg.chi, chi_full=cfg.chi_full, chi_bandit=cfg.chi_bandit,
        )
        return PartialBanditTracker(schedule, box, params, cfg.observed, rng)
    return BernoulliFeedbackTracker(
        cfg.rounds, box, params, bounds, rng,
        a=cfg.bernoulli_a, chi_full=cfg.chi_full, chi_bandit=cfg.chi_bandit,
        warmup=cfg.bernoulli_warmup, include_mean_penalty=cfg.bernoulli_mean_penalty,
    )


def run_trial(config: ScenarioConfig, trial_index: int = 0) -> TrialResult:
    """One closed-loop trial: setpoint, play, respond, feed back, evolve, record.

    The noise stream is independent of the played signals, so a paired
    no-control baseline is simply the squared effective setpoint.
    """
    cfg = config.resolved()
    seed_seq = np.random.SeedSequence([int(cfg.seed), int(trial_index)])
    fleet_rng, response_rng, algo_rng = (np.random.default_rng(s) for s in seed_seq.spawn(3))

    if cfg.scenario == "tcl":
        fleet = tcl_fleet_init(cfg.n_loads, fleet_rng, cfg.tcl_ranges, cfg.ambient, cfg.step_hours)
        baseline_power = fleet.baseline_power()
        response_max = float(fleet.response_base.max()) + cfg.noise.hi
    else:
        fleet = EvFleet(cfg.ev_params, cfg.n_loads, cfg.step_hours, noise=cfg.noise)
        baseline_power = 0.0
        response_max = max(cfg.ev_params.charge_rate_kw, cfg.ev_params.discharge_rate_kw) + cfg.noise.hi

    box = cfg.decision_box()
    dim = box.dim
    warmup = 2 if (cfg.feedback == "bernoulli" and cfg.bernoulli_warmup) else 0
    total_rounds = cfg.rounds + warmup
    t_values = np.arange(1 - warmup, cfg.rounds + 1)
    setpoints_eff = make_setpoint(cfg.setpoint, t_values) - baseline_power

    if cfg.scenario == "tcl":
        responses = fleet.response_base + cfg.noise.sample(response_rng, size=(total_rounds, dim))
    else:
        n = cfg.n_loads
        responses = np.empty((total_rounds, dim))
        responses[:, :n] = cfg.ev_params.charge_rate_kw + cfg.noise.sample(response_rng, size=(total_rounds, n))
        responses[:, n:] = cfg.ev_params.discharge_rate_kw + cfg.noise.sample(response_rng, size=(total_rounds, n))

    rho_eff = cfg.effective_rho()
    setpoint_max = float(np.max(np.abs(setpoints_eff)))
    bounds = conservative_bounds(box, setpoint_max, response_max, rho_eff)
    tracker = _build_tracker(cfg, box, bounds, algo_rng)

    T = cfg.rounds
    tracking = np.empty(T)
    objective = np.empty(T)
    aggregate = np.empty(T)
    mean_norm = np.empty(T)
    l1 = np.empty(T)
    simultaneous = np.zeros(T, dtype=bool)
    played_hist = np.empty((T, dim))
    k_track = min(cfg.track_loads, cfg.n_loads)
    trajectories = np.empty((T, k_track))
    mean_weights = np.empty((T, dim)) if cfg.scenario == "ev" else None
    window_mean = RunningMean.zero(dim)
    weight_sum = np.zeros(dim) if cfg.scenario == "ev" else None

    infos = []
    n = cfg.n_loads
    for i in range(total_rounds):
        s_eff = float(setpoints_eff[i])
        resp = responses[i]
        try:
            kind = tracker.next_feedback() if hasattr(tracker, "next_feedback") else tracker.feedback_kind
            played = tracker.begin_round()
            obs = feedback_channel(kind, resp, s_eff, played, observed=cfg.observed)
            info = tracker.update(obs)
            if cfg.scenario == "tcl":
                fleet.step(played)
            else:
                fleet.step(resp[:n], resp[n:], played[:n], played[n:])
        except Exception as exc:
            head = f"round {i - warmup + 1}: {exc.args[0]}" if exc.args else f"round {i - warmup + 1}"
            exc.args = (head,) + exc.args[1:]
            raise
        j = i - warmup
        if j < 0:
            continue
        infos.append(info)
        achieved = float(resp @ played)
        aggregate[j] = achieved
        err = s_eff - achieved
        tracking[j] = err * err
        played_hist[j] = played
        l1[j] = float(np.abs(played).sum())
        if cfg.scenario == "tcl":
            window_mean = running_mean_update(window_mean, played)
            mean_norm[j] = window_mean.norm()
            trajectories[j] = fleet.theta[:k_track]
        else:
            mean_norm[j] = fleet.weighted_mean.norm()
            trajectories[j] = fleet.soc[:k_track]
            weights = np.concatenate(
                [cfg.ev_params.inj_eff * resp[:n], resp[n:] / cfg.ev_params.ext_eff]
            )
            weight_sum += weights
            mean_weights[j] = weight_sum / (j + 1)
            simultaneous[j] = bool(
                np.any(np.minimum(np.abs(played[:n]), np.abs(played[n:])) > SIMULTANEITY_TOL)
            )
        objective[j] = tracking[j] + rho_eff * mean_norm[j] ** 2 + cfg.lam * l1[j]

    ledger = MetricsLedger(
        setpoint_eff=setpoints_eff[warmup:].copy(),
        aggregate=aggregate,
        tracking=tracking,
        objective=objective,
        mean_norm=mean_norm,
        l1=l1,
        simultaneous=simultaneous,
        baseline_tracking=setpoints_eff[warmup:] ** 2,
        responses=responses[warmup:],
        played=played_hist,
        rho_eff=rho_eff,
        lam=cfg.lam,
        mean_weights=mean_weights,
    )
    saturation = fleet.saturation_events if cfg.scenario == "ev" else 0
    return TrialResult(
        ledger=ledger,
        trajectories=trajectories,
        saturation_events=saturation,
        schedule=tracker.schedule,
        bounds=bounds,
        box=box,
        baseline_power=baseline_power,
        infos=infos,
    )


# --- Hindsight comparator and regret --------------------------------------


@dataclass
class HindsightResult:
    signal: np.ndarray
    value: float
    converged: bool
    iterations: int


def hindsight_optimum(
    responses,
    setpoints,
    rho: float,
    lam: float,
    box: Box,
    mean_weights=None,
    max_iters: int = 10_000,
    tol: float = 1e-6,
) -> HindsightResult:
    """Best fixed signal in hindsight for the summed composite objective.

    Minimizes sum_t (s_t - r_t.mu)^2 + rho * sum_t ||m_t(mu)||^2
    + T * lam * ||mu||_1 over the box, where m_t is the identity for the
    plain mean penalty or the per-round diagonal weight map when
    ``mean_weights`` rows are given. Solved by proximal gradient descent
    with a 1/L step; the l1 kink goes through the prox, the box through
    clipping. Returns the best iterate with a convergence flag.
    """
    R = np.asarray(responses, dtype=float)
    s = np.asarray(setpoints, dtype=float)
    T, dim = R.shape
    if s.shape != (T,):
        raise ValueError("setpoints must match the response rows")
    A = R.T @ R
    if rho:
        if mean_weights is None:
            A = A + rho * T * np.eye(dim)
        else:
            W = np.asarray(mean_weights, dtype=float)
            if W.shape != (T, dim):
                raise ValueError("mean_weights must be (rounds, dim)")
            A = A + rho * np.diag((W * W).sum(axis=0))
    b = R.T @ s
    const = float(s @ s)
    l1_weight = T * lam

    eig_max = float(np.linalg.eigvalsh(A)[-1]) if dim > 1 else float(A[0, 0])
    step = 1.0 / max(2.0 * eig_max, 1e-12)

    def value(mu):
        return float(mu @ A @ mu - 2.0 * b @ mu + const + l1_weight * np.abs(mu).sum())

    mu = np.zeros(dim)
    best_mu, best_val = mu.copy(), value(mu)
    prev_val = best_val
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        grad = 2.0 * (A @ mu - b)
        mu = box.clip(soft_threshold(mu - step * grad, step * l1_weight))
        val = value(mu)
        if val < best_val:
            best_val, best_mu = val, mu.copy()
        if abs(prev_val - val) <= tol * max(1.0, abs(val)):
            converged = True
            break
        prev_val = val
    return HindsightResult(best_mu, best_val, converged, iterations)


def comparator_round_losses(
    responses, setpoints, signal, rho: float, lam: float, mean_weights=None
) -> np.ndarray:
    """Per-round composite loss of a fixed signal (its running mean is itself)."""
    R = np.asarray(responses, dtype=float)
    s = np.asarray(setpoints, dtype=float)
    errs = s - R @ signal
    losses = errs ** 2 + lam * float(np.abs(signal).sum())
    if rho:
        if mean_weights is None:
            losses = losses + rho * float(signal @ signal)
        else:
            W = np.asarray(mean_weights, dtype=float)
            losses = losses + rho * ((W * signal) ** 2).sum(axis=1)
    return losses


@dataclass
class RegretReport:
    series: np.ndarray
    total: float
    hindsight: HindsightResult


def empirical_regret(
    ledger: MetricsLedger,
    box: Box,
    upto: int | None = None,
    max_iters: int = 10_000,
    tol: float = 1e-6,
) -> RegretReport:
    """Cumulative loss gap to the prefix-optimal fixed signal.

    Uses the loss definition the tracker actually minimized (its
    effective rho and lam), evaluated on the played signals.
    """
    T = ledger.rounds if upto is None else int(upto)
    if not 1 <= T <= ledger.rounds:
        raise ValueError("upto must lie in [1, rounds]")
    weights = None if ledger.mean_weights is None else ledger.mean_weights[:T]
    opt = hindsight_optimum(
        ledger.responses[:T], ledger.setpoint_eff[:T], ledger.rho_eff, ledger.lam,
        box, mean_weights=weights, max_iters=max_iters, tol=tol,
    )
    comp = comparator_round_losses(
        ledger.responses[:T], ledger.setpoint_eff[:T], opt.signal,
        ledger.rho_eff, ledger.lam, mean_weights=weights,
    )
    series = np.cumsum(ledger.objective[:T]) - np.cumsum(comp)
    return RegretReport(series=series, total=float(series[-1]), hindsight=opt)


def full_info_regret_bound(chi: float, ledger: MetricsLedger, loss_bound: float) -> float:
    """Upper bound 4*chi*sqrt(T*K*B) with K = max(rho^2, max_t ||c_t||^2).

    ``loss_bound`` is the per-round bound B the step-size schedule was
    built with (see ``conservative_bounds``).
    """
    T = ledger.rounds
    K = max(ledger.rho_eff ** 2, float((ledger.responses ** 2).sum(axis=1).max()))
    return 4.0 * chi * math.sqrt(T * K * loss_bound)


# --- Metrics ----------------------------------------------------------------


def improvement_pct(ledger: MetricsLedger) -> float:
    """Total tracking-loss reduction relative to playing no signal at all."""
    base = float(ledger.baseline_tracking.sum())
    return 100.0 * (1.0 - float(ledger.tracking.sum()) / base)


def per_round_reduction_pct(series, reference, floor: float = 1e-12) -> float:
    """Relative reduction of the per-round average of ``series`` vs ``reference``.

    Comparing the averages (rather than averaging per-round ratios) keeps
    the metric finite when the reference series passes through zero, as
    the running mean of a sinusoid-following dispatch regularly does.
    """
    series = np.asarray(series, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if series.shape != reference.shape:
        raise ValueError(f"series length {series.shape} does not match reference {reference.shape}")
    ref_mean = float(reference.mean())
    if ref_mean <= floor:
        return 0.0
    return float(100.0 * (1.0 - float(series.mean()) / ref_mean))


def simultaneity_pct(ledger: MetricsLedger) -> float:
    return float(100.0 * np.mean(ledger.simultaneous))


@dataclass
class TrialSummary:
    improvement_pct: float
    total_tracking: float
    total_baseline: float
    mean_norm_avg: float
    l1_avg: float
    simultaneity_pct: float
    regret_total: float | None = None


@dataclass
class ExperimentResult:
    config: ScenarioConfig
    summaries: list
    rounds: dict
    first_trial: TrialResult
    trials: list | None = None

    def mean_summary(self) -> dict:
        keys = ("improvement_pct", "total_tracking", "total_baseline",
                "mean_norm_avg", "l1_avg", "simultaneity_pct")
        out = {k: float(np.mean([getattr(s, k) for s in self.summaries])) for k in keys}
        regrets = [s.regret_total for s in self.summaries if s.regret_total is not None]
        out["regret_total"] = float(np.mean(regrets)) if regrets else None
        return out


def run_experiment(config: ScenarioConfig, keep_trials: bool = False) -> ExperimentResult:
    """Run all trials of one scenario/feedback case and average the series."""
    cfg = config.resolved()
    T = cfg.rounds
    sums = {
        name: np.zeros(T)
        for name in ("setpoint_eff", "aggregate", "tracking", "mean_norm", "l1", "regret")
    }
    summaries = []
    first_trial = None
    kept = [] if keep_trials else None
    for k in range(cfg.trials):
        trial = run_trial(cfg, k)
        ledger = trial.ledger
        regret_total = None
        if cfg.compute_regret:
            report = empirical_regret(ledger, trial.box, max_iters=cfg.hindsight_iters)
            sums["regret"] += report.series
            regret_total = report.total
        sums["setpoint_eff"] += ledger.setpoint_eff
        sums["aggregate"] += ledger.aggregate
        sums["tracking"] += ledger.tracking
        sums["mean_norm"] += ledger.mean_norm
        sums["l1"] += ledger.l1
        summaries.append(
            TrialSummary(
                improvement_pct=improvement_pct(ledger),
                total_tracking=float(ledger.tracking.sum()),
                total_baseline=float(ledger.baseline_tracking.sum()),
                mean_norm_avg=float(ledger.mean_norm.mean()),
                l1_avg=float(ledger.l1.mean()),
                simultaneity_pct=simultaneity_pct(ledger),
                regret_total=regret_total,
            )
        )
        if first_trial is None:
            first_trial = trial
        if keep_trials:
            kept.append(trial)
    rounds = {name: series / cfg.trials for name, series in sums.items()}
    rounds["cum_tracking"] = np.cumsum(rounds["tracking"])
    return ExperimentResult(cfg, summaries, rounds, first_trial, kept)


def compute_metrics(result: ExperimentResult, unregularized: ExperimentResult | None = None) -> dict:
    """Case summary: improvement over no control plus regularizer effects.

    The mean-norm and sparsity improvements compare the trial-averaged
    series against a paired unregularized run; without one they are zero.
    """
    cfg = result.config
    summary = {
        "scenario": cfg.scenario,
        "feedback": cfg.feedback,
        "rho": cfg.rho,
        "lambda": cfg.lam,
        "improvement_pct": result.mean_summary()["improvement_pct"],
        "mean_improvement_pct": 0.0,
        "sparsity_improvement_pct": 0.0,
        "simultaneity_pct": result.mean_summary()["simultaneity_pct"],
    }
    if unregularized is not None:
        summary["mean_improvement_pct"] = per_round_reduction_pct(
            result.rounds["mean_norm"], unregularized.rounds["mean_norm"]
        )
        summary["sparsity_improvement_pct"] = per_round_reduction_pct(
            result.rounds["l1"], unregularized.rounds["l1"]
        )
    return summary
