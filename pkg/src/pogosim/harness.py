"""Trial runner and batch study harness.

Seeding: each trial runs from its own numpy Generator seeded with a single
integer. compare_modes gives trial i of both modes the seed seed0 + i
(common random numbers), and sweeps reuse the same seed block at every
factor value, so arms that the swept factor cannot influence are
bit-identical across values.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import metrics as _metrics
from .control import BhcPhase
from .dynamics import STATUS_NONFINITE, STATUS_FLOOR_COLLAPSE
from .engine import run_trial_kernel, STATUS_BHC_IMPOSSIBLE
from .params import Mode, SimulationFault, SweepSpec, TrialConfig
from .rotations import rot_z

_FAULT_TEXT = {
    STATUS_NONFINITE: "state diverged (non-finite values)",
    STATUS_FLOOR_COLLAPSE: "contact geometry collapsed (l <= 0)",
    STATUS_BHC_IMPOSSIBLE: "impossible supervisor phase/contact combination",
}


@dataclass
class TrialSeries:
    """Aligned per-sample series; row i is the sample at t[i]."""

    t: np.ndarray
    position: np.ndarray      # (n+1, 3)
    phase: np.ndarray         # (n+1,) int8, BhcPhase values
    spring_len: np.ndarray
    spring_force: np.ndarray
    rotor_forces: np.ndarray  # (n+1, 4); final row never applied
    fq_tau: np.ndarray        # (n+1, 4): recombined f_q, tau_x, tau_y, tau_z


@dataclass
class TrialResult:
    metrics: _metrics.TrialMetrics
    seed: int
    config: TrialConfig
    series: TrialSeries = None


def _draw_noise(cfg: TrialConfig, seed):
    """All randomness for one trial, in consumption order."""
    rng = np.random.default_rng(int(seed))
    n = cfg.n_steps
    rotor = rng.standard_normal((n + 1, 4))
    tilt = 5.0 * cfg.noise.sigma * rng.standard_normal(n + 1)
    np.clip(tilt, -cfg.noise.max_ground_tilt, cfg.noise.max_ground_tilt,
            out=tilt)
    return rotor, tilt


def run_trial(cfg: TrialConfig, seed=None) -> TrialResult:
    """Run one closed-loop trial from rest at the setpoint.

    Raises SimulationFault with the failing step index on divergence.
    """
    if seed is None:
        seed = cfg.noise.seed
    seed = int(seed)
    p = cfg.params
    I = p.inertia()
    rotor_noise, ground_angles = _draw_noise(cfg, seed)
    r0 = cfg.bhc.r_d_array()
    R0 = rot_z(cfg.bhc.psi_d)

    (status, fault_step, saturations, _touchdowns, _r, _v, _R, _w,
     r_series, phase_series, spring_len, spring_f, forces, fq_tau) = \
        run_trial_kernel(
            cfg.n_steps, cfg.dt, cfg.mode is Mode.BOUNCE,
            p.m, p.g, p.k, p.b, p.l0, p.l_min, p.k_stop, p.c_stop, p.arm, p.k_yaw,
            p.f_rotor_max, p.freeze_contact_inertia, I, np.linalg.inv(I),
            cfg.gains.kx, cfg.gains.kv, cfg.gains.kR, cfg.gains.kw,
            r0, cfg.bhc.psi_d, cfg.bhc.sphere_radius, cfg.bhc.w_thresh,
            cfg.bhc.epsilon, cfg.bhc.dwell_time,
            cfg.noise.sigma * p.f_hover, rotor_noise, ground_angles,
            r0, np.zeros(3), R0, np.zeros(3))

    if status != 0:
        raise SimulationFault(
            f"{_FAULT_TEXT[status]} at step {fault_step}", step=fault_step)

    n = cfg.n_steps
    t = np.arange(n + 1) * cfg.dt
    rec_times, unmatched = _metrics.recovery_times(
        phase_series, r_series, t, cfg.bhc)

    # settled: re-entered the acceptance sphere within the last quarter of
    # the trial (a healthy bounce cycle returns at least once per period)
    tail = max(1, n // 4)
    dist_tail = np.linalg.norm(
        r_series[-tail:] - r0[None, :], axis=1)
    settled = bool(np.min(dist_tail) <= cfg.bhc.sphere_radius)

    m = _metrics.TrialMetrics(
        energy=_metrics.energy(forces[:n], cfg.dt),
        bounce_count=_metrics.count_bounces(phase_series),
        mean_recovery_time=(float(np.mean(rec_times)) if rec_times
                            else float("nan")),
        recovery_times=rec_times,
        saturation_events=int(saturations),
        settled=settled,
        unmatched_rebound=unmatched,
    )
    series = None
    if cfg.record_trajectory:
        series = TrialSeries(t, r_series, phase_series, spring_len,
                             spring_f, forces, fq_tau)
    return TrialResult(metrics=m, seed=seed, config=cfg, series=series)


@dataclass
class ModeComparison:
    hover_mean: float
    hover_std: float
    bounce_mean: float
    bounce_std: float
    savings: float                       # 1 - bounce_mean / hover_mean
    hover_energies: np.ndarray
    bounce_energies: np.ndarray
    mean_bounces: float
    mean_recovery_time: float
    hover_results: list = field(default_factory=list, repr=False)
    bounce_results: list = field(default_factory=list, repr=False)


def _sample_std(x):
    x = np.asarray(x, dtype=float)
    return float(np.std(x, ddof=1)) if x.size > 1 else 0.0


def compare_modes(cfg: TrialConfig, n, seed0) -> ModeComparison:
    """n hover and n bounce trials on seeds seed0..seed0+n-1 per mode."""
    if n < 1:
        raise ValueError("compare_modes needs n >= 1")
    results = {}
    for mode in (Mode.HOVER, Mode.BOUNCE):
        mode_cfg = replace(cfg, mode=mode)
        runs = []
        for i in range(n):
            try:
                runs.append(run_trial(mode_cfg, int(seed0) + i))
            except SimulationFault as exc:
                raise SimulationFault(
                    f"{mode.value} trial {i} (seed {int(seed0) + i}): {exc}",
                    step=exc.step) from exc
        results[mode] = runs

    hover_e = np.array([r.metrics.energy for r in results[Mode.HOVER]])
    bounce_e = np.array([r.metrics.energy for r in results[Mode.BOUNCE]])
    hover_mean = float(np.mean(hover_e))
    if hover_mean == 0.0:
        raise SimulationFault("hover mean energy is zero; savings undefined")
    rec = [t for r in results[Mode.BOUNCE] for t in r.metrics.recovery_times]
    return ModeComparison(
        hover_mean=hover_mean,
        hover_std=_sample_std(hover_e),
        bounce_mean=float(np.mean(bounce_e)),
        bounce_std=_sample_std(bounce_e),
        savings=1.0 - float(np.mean(bounce_e)) / hover_mean,
        hover_energies=hover_e,
        bounce_energies=bounce_e,
        mean_bounces=float(np.mean(
            [r.metrics.bounce_count for r in results[Mode.BOUNCE]])),
        mean_recovery_time=(float(np.mean(rec)) if rec else float("nan")),
        hover_results=results[Mode.HOVER],
        bounce_results=results[Mode.BOUNCE],
    )


@dataclass
class SweepTrialRow:
    """One trial of a sweep, as written to the sweep CSV."""

    factor: str
    value: float
    mode: str
    trial: int
    seed: int
    energy: float
    bounces: int
    mean_recovery_s: float
    saturations: int


@dataclass
class SweepValueSummary:
    value: float
    mode: str
    mean_energy: float
    std_energy: float
    energies: np.ndarray
    mean_bounces: float
    mean_recovery_s: float


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list                 # SweepTrialRow, factorial order
    summaries: list            # SweepValueSummary per (value, mode)
    faults: list               # (value, message) for values that failed

    def summary(self, value, mode):
        mode = Mode(mode).value
        for s in self.summaries:
            if s.value == value and s.mode == mode:
                return s
        raise KeyError((value, mode))

    def mean_energies(self, mode):
        mode = Mode(mode).value
        return np.array([s.mean_energy for s in self.summaries
                         if s.mode == mode])


def _run_one_sweep_trial(args):
    spec, value, mode, trial, seed = args
    cfg = replace(spec.config_for(value), mode=mode,
                  record_trajectory=False)
    res = run_trial(cfg, seed)
    return SweepTrialRow(
        factor=spec.factor.value, value=value, mode=mode.value, trial=trial,
        seed=seed, energy=res.metrics.energy,
        bounces=res.metrics.bounce_count,
        mean_recovery_s=res.metrics.mean_recovery_time,
        saturations=res.metrics.saturation_events)


def sweep(spec: SweepSpec, seed0, jobs=1) -> SweepResult:
    """Run the full factorial (value x mode x trial) study.

    Trial seeds depend only on the trial index, never on the factor value
    or mode, so matched seeds line up across the whole sweep. Values that
    fault are recorded and skipped; the sweep continues.
    """
    tasks = []
    for value in spec.values:
        for mode in (Mode.HOVER, Mode.BOUNCE):
            for trial in range(spec.trials_per_value):
                tasks.append((spec, value, mode, trial, int(seed0) + trial))

    rows = {}
    faults = {}
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for task, outcome in zip(tasks, pool.map(_run_one_sweep_trial_safe,
                                                     tasks, chunksize=4)):
                _collect(task, outcome, rows, faults)
    else:
        for task in tasks:
            _collect(task, _run_one_sweep_trial_safe(task), rows, faults)

    ordered = [rows[(t[1], t[2].value, t[3])] for t in tasks
               if (t[1], t[2].value, t[3]) in rows]
    summaries = []
    for value in spec.values:
        if value in faults:
            continue
        for mode in (Mode.HOVER, Mode.BOUNCE):
            sub = [r for r in ordered
                   if r.value == value and r.mode == mode.value]
            e = np.array([r.energy for r in sub])
            rec = [r.mean_recovery_s for r in sub
                   if not np.isnan(r.mean_recovery_s)]
            summaries.append(SweepValueSummary(
                value=value, mode=mode.value,
                mean_energy=float(np.mean(e)), std_energy=_sample_std(e),
                energies=e,
                mean_bounces=float(np.mean([r.bounces for r in sub])),
                mean_recovery_s=(float(np.mean(rec)) if rec
                                 else float("nan"))))
    ordered = [r for r in ordered if r.value not in faults]
    return SweepResult(spec=spec, rows=ordered, summaries=summaries,
                       faults=sorted(faults.items()))


def _run_one_sweep_trial_safe(args):
    try:
        return _run_one_sweep_trial(args)
    except SimulationFault as exc:
        return exc


def _collect(task, outcome, rows, faults):
    _, value, mode, trial, seed = task
    if isinstance(outcome, SimulationFault):
        faults.setdefault(
            value, f"{mode.value} trial {trial} (seed {seed}): {outcome}")
    else:
        rows[(value, mode.value, trial)] = outcome
