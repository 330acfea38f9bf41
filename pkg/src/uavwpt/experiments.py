"""Monte-Carlo experiment harness: randomized mission realizations,
proposed-scheme and hover-and-fly baseline solves, sweeps, CSV output.

Each trial draws leg lengths and the flight-row offset, scatters group
members behind their hover points along the corridor, and solves the
selected problem twice: once for the proposed grouped full-duplex
scheme and once for a hover-and-fly baseline that visits every sensor
individually with a single receive antenna.  Trials are independent
and seeded from (master seed, trial index), so results do not depend
on scheduling or worker count.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .channel import (ChannelParams, group_coefficients,
                      leg_average_inverse_sq, point_inverse_sq)
from .config import ScenarioConfig
from .errors import ConfigError, NumericDomainError, UavWptError
from .geometry import ArrayConfig, GroupPlan, SensorField, singleton_plan
from .stm import StmProblem, solve_stm
from .ttm import TtmProblem, solve_ttm

# Group members sit behind their hover point along the inbound leg, at
# this fraction of the leg length, with a little cross-row jitter.  The
# band keeps every member's flight-phase harvesting coefficient above
# its hover-phase one (the UAV flies almost directly overhead on the
# way in) while leaving the hover-phase uplink lively enough that the
# last group's SNR-times-flight-gain product stays above one down to
# 0 dB transmit power.
SCATTER_SPAN = (0.58, 1.08)
Y_JITTER_M = 2.0
REDRAW_CAP = 25

SWEEP_HEADER = ("param,value,trials,mean_ours,se_ours,"
                "mean_baseline,se_baseline,improvement")
_SWEEP_PARAMS = ("pt_db", "N", "v_max", "I_nats")


@dataclass(frozen=True)
class TrialGeometry:
    """One realization: shared field, proposed plan, baseline plan."""

    field: SensorField
    plan: GroupPlan
    baseline_plan: GroupPlan
    ytilde: float


@dataclass(frozen=True)
class TrialResult:
    ours: float
    baseline: float | None


@dataclass(frozen=True)
class SweepSpec:
    """A one-parameter sweep: which knob, which values, how many trials
    per point, and which objective ("stm" throughput or "ttm" time)."""

    param: str
    values: tuple
    trials: int
    objective: str

    def __post_init__(self):
        if self.param not in _SWEEP_PARAMS:
            raise ConfigError(
                f"sweep parameter must be one of {_SWEEP_PARAMS}, "
                f"got {self.param!r}")
        if len(self.values) < 1:
            raise ConfigError("sweep needs at least one value")
        for lo, hi in zip(self.values, self.values[1:]):
            if not hi > lo:
                raise ConfigError("sweep values must be strictly increasing")
        if self.trials < 1:
            raise ConfigError("per-point trial count must be at least 1")
        if self.objective not in ("stm", "ttm"):
            raise ConfigError(f"unknown objective {self.objective!r}")


@dataclass(frozen=True)
class AggregateResult:
    """One sweep point: means and standard errors over successful
    trials, plus how many trials were excluded by solver errors."""

    param: str
    value: float
    trials: int
    mean_ours: float
    se_ours: float
    mean_baseline: float
    se_baseline: float
    improvement: float
    exclusions: int


def array_config(config: ScenarioConfig) -> ArrayConfig:
    return ArrayConfig(M=config.M, delta=config.delta_m,
                       altitude=config.A_m, d_max=config.d_max_m)


def channel_params(config: ScenarioConfig) -> ChannelParams:
    return ChannelParams.from_db(config.k0_db, config.sigma2_dbm,
                                 config.pt_db, config.eta, config.A_m)


def hf_eh_baseline(config: ScenarioConfig) -> ScenarioConfig:
    """Baseline scenario: every sensor is its own group, hovered over
    directly, with a single receive antenna."""
    return replace(config, N=config.K, M=2).validate()


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([master_seed, trial_index]))


def _group_sizes(K: int, N: int):
    base, extra = divmod(K, N)
    return [base + (1 if g < extra else 0) for g in range(N)]


def generate_trial(config: ScenarioConfig, rng) -> TrialGeometry:
    """Draw one mission realization.

    Hover points are spaced by the drawn leg lengths along one row at
    offset ytilde; each group's members are scattered behind its hover
    point.  Members are redrawn (rarely) if the flight-phase coefficient
    fails to dominate the hover-phase one.
    """
    N, K = config.N, config.K
    A = config.A_m
    D = [float(d) for d in rng.uniform(*config.D_range_m, size=N)]
    ytilde = float(rng.uniform(*config.ytilde_range_m))
    anchors = np.cumsum(D)
    sizes = _group_sizes(K, N)

    sensors = []
    groups = []
    next_id = 1
    for g in range(N):
        hover = (float(anchors[g]), ytilde)
        leg_start = (float(anchors[g - 1]) if g > 0 else 0.0, ytilde)
        ids = []
        for _ in range(sizes[g]):
            for attempt in range(REDRAW_CAP + 1):
                u = float(rng.uniform(*SCATTER_SPAN))
                yj = float(rng.uniform(-Y_JITTER_M, Y_JITTER_M))
                w = (hover[0] - u * D[g], ytilde + yj)
                a_i = point_inverse_sq(hover, w, A)
                b_i = leg_average_inverse_sq(leg_start, hover, w, A)
                if b_i > a_i:
                    break
            else:
                raise NumericDomainError(
                    f"group {g + 1}: could not place a member with "
                    f"flight-dominant harvesting in {REDRAW_CAP} redraws")
            sensors.append(w)
            ids.append(next_id)
            next_id += 1
        groups.append(tuple(ids))

    xs = [s[0] for s in sensors]
    ys = [s[1] for s in sensors]
    region = ((min(xs + [0.0]), min(ys)), (max(xs + [anchors[-1]]), max(ys)))
    field = SensorField(sensors=tuple(sensors), region=region)

    hover_gaps = D[1:]
    violations = tuple(
        n for n in range(2, N)
        if hover_gaps[n - 2] + hover_gaps[n - 1] <= config.d_max_m)
    plan = GroupPlan(
        field=field,
        groups=tuple(groups),
        hover_points=tuple((float(x), ytilde) for x in anchors),
        D=tuple(D),
        row_of_group=(1,) * N,
        rows=(ytilde,),
        start_point=(0.0, ytilde),
        spacing_violations=violations,
    )
    baseline_plan = singleton_plan(
        field, array_config(hf_eh_baseline(config)),
        start_point=(0.0, ytilde))
    return TrialGeometry(field=field, plan=plan,
                         baseline_plan=baseline_plan, ytilde=ytilde)


def _solve_for(config: ScenarioConfig, plan: GroupPlan, cfg: ArrayConfig,
               params: ChannelParams, objective: str, credit: bool) -> float:
    coeffs = group_coefficients(plan, cfg, params)
    if objective == "stm":
        problem = StmProblem(coeffs=coeffs, D=plan.D, T=config.T_s,
                             v_max=config.v_max_mps)
        _, diag = solve_stm(problem)
        return diag.objective
    demands = tuple(config.I_nats * len(plan.members(n))
                    for n in range(1, plan.N + 1))
    problem = TtmProblem(coeffs=coeffs, D=plan.D, v_max=config.v_max_mps,
                         I=demands)
    _, total = solve_ttm(problem, credit=credit)
    return total


def run_trial(config: ScenarioConfig, trial_index: int,
              objective: str = "stm",
              include_baseline: bool = True) -> TrialResult:
    """Solve one realization for the proposed scheme and the baseline."""
    if objective not in ("stm", "ttm"):
        raise ConfigError(f"unknown objective {objective!r}")
    geo = generate_trial(config, trial_rng(config.seed, trial_index))
    params = channel_params(config)
    ours = _solve_for(config, geo.plan, array_config(config), params,
                      objective, credit=True)
    base = None
    if include_baseline:
        bscen = hf_eh_baseline(config)
        base = _solve_for(bscen, geo.baseline_plan, array_config(bscen),
                          params, objective, credit=False)
    return TrialResult(ours=ours, baseline=base)


def _trial_task(args):
    config, trial_index, objective, include_baseline = args
    try:
        r = run_trial(config, trial_index, objective, include_baseline)
        return ("ok", r.ours, r.baseline)
    except UavWptError as exc:
        return ("err", f"{type(exc).__name__}: {exc}", None)


def apply_sweep_value(config: ScenarioConfig, param: str,
                      value) -> ScenarioConfig:
    """Derive the config for one sweep point.

    Sweeping N keeps the per-group sensor count of the base config, so
    K scales with N.
    """
    if param == "pt_db":
        return replace(config, pt_db=float(value)).validate()
    if param == "N":
        per_group = max(1, config.K // config.N)
        return replace(config, N=int(value),
                       K=int(value) * per_group).validate()
    if param == "v_max":
        return replace(config, v_max_mps=float(value)).validate()
    if param == "I_nats":
        return replace(config, I_nats=float(value)).validate()
    raise ConfigError(f"unknown sweep parameter {param!r}")


def run_sweep(config: ScenarioConfig, sweep: SweepSpec, workers: int = 1,
              baseline: str = "hf-eh"):
    """Run every sweep point and aggregate.

    Returns (list of AggregateResult, list of failure messages).  A
    point where every trial fails raises; isolated failures are
    excluded and counted.
    """
    if baseline not in ("hf-eh", "none"):
        raise ConfigError(f"unknown baseline mode {baseline!r}")
    include_baseline = baseline == "hf-eh"
    point_configs = [apply_sweep_value(config, sweep.param, v)
                     for v in sweep.values]
    tasks = [(pc, t, sweep.objective, include_baseline)
             for pc in point_configs
             for t in range(sweep.trials)]
    if workers > 1:
        chunk = max(1, len(tasks) // (8 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_trial_task, tasks, chunksize=chunk))
    else:
        outcomes = [_trial_task(t) for t in tasks]

    results = []
    failures = []
    for p, value in enumerate(sweep.values):
        chunk = outcomes[p * sweep.trials:(p + 1) * sweep.trials]
        ours = [o[1] for o in chunk if o[0] == "ok"]
        bases = [o[2] for o in chunk if o[0] == "ok"]
        failures.extend(
            f"{sweep.param}={value}: {o[1]}" for o in chunk if o[0] != "ok")
        if not ours:
            raise NumericDomainError(
                f"sweep point {sweep.param}={value}: all "
                f"{sweep.trials} trials failed")
        n = len(ours)
        mean_ours, se_ours = _mean_se(ours)
        if include_baseline:
            mean_base, se_base = _mean_se(bases)
            improvement = (mean_ours - mean_base) / mean_base
        else:
            mean_base = se_base = improvement = math.nan
        results.append(AggregateResult(
            param=sweep.param, value=float(value), trials=n,
            mean_ours=mean_ours, se_ours=se_ours,
            mean_baseline=mean_base, se_baseline=se_base,
            improvement=improvement, exclusions=sweep.trials - n))
    return results, failures


def _mean_se(values):
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, 0.0
    return mean, float(arr.std(ddof=1) / math.sqrt(arr.size))


def write_sweep_csv(path, results, metadata=()):
    """Sweep CSV: '#'-prefixed metadata lines, a fixed header, then one
    row per sweep point.  Data rows are deterministic for a seed."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in metadata:
            fh.write(f"# {line}\n")
        fh.write(SWEEP_HEADER + "\n")
        for r in results:
            fh.write(",".join((
                r.param,
                f"{r.value:.12g}",
                str(r.trials),
                f"{r.mean_ours:.12g}",
                f"{r.se_ours:.12g}",
                f"{r.mean_baseline:.12g}",
                f"{r.se_baseline:.12g}",
                f"{r.improvement:.12g}",
            )) + "\n")
