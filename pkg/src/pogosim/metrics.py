"""Scalar metrics over a completed trial: the rotor-force time integral,
bounce counting and recovery statistics."""

from dataclasses import dataclass, field

import numpy as np

from .control import BhcPhase


@dataclass
class TrialMetrics:
    energy: float = 0.0            # N*s, integral of the summed rotor forces
    bounce_count: int = 0
    mean_recovery_time: float = float("nan")  # s, NaN when no full cycle
    recovery_times: list = field(default_factory=list)
    saturation_events: int = 0
    settled: bool = False
    unmatched_rebound: bool = False  # trial ended mid-cycle


def energy(rotor_force_series, dt):
    """Left-Riemann integral of the summed rotor forces.

    The series must contain only applied commands (one row per step),
    uniformly sampled at dt.
    """
    forces = np.asarray(rotor_force_series, dtype=float)
    return float(np.sum(forces)) * dt


def count_bounces(phase_series):
    """Number of entries into the Compression phase."""
    p = np.asarray(phase_series)
    comp = p == int(BhcPhase.COMPRESSION)
    return int(np.sum(comp[1:] & ~comp[:-1]) + (1 if comp.size and comp[0] else 0))


def recovery_times(phase_series, position_series, t_series, cfg):
    """Per-bounce recovery durations and an unmatched-rebound flag.

    A recovery runs from a Rebound entry to the first subsequent return of
    the position into the acceptance sphere. A rebound still open when the
    trial ends is excluded and flagged.
    """
    p = np.asarray(phase_series)
    pos = np.asarray(position_series, dtype=float)
    t = np.asarray(t_series, dtype=float)
    r_d = cfg.r_d_array()
    dist = np.linalg.norm(pos - r_d[None, :], axis=1)
    in_sphere = dist <= cfg.sphere_radius

    reb = p == int(BhcPhase.REBOUND)
    entries = np.flatnonzero(reb[1:] & ~reb[:-1]) + 1
    if reb.size and reb[0]:
        entries = np.concatenate(([0], entries))

    times = []
    unmatched = False
    for i in entries:
        later = np.flatnonzero(in_sphere[i + 1:])
        if later.size:
            times.append(float(t[i + 1 + later[0]] - t[i]))
        else:
            unmatched = True
    return times, unmatched
