"""Time evolution of a population on the circle.

Two engines are provided.  The exact engine exploits the fact that the
vector field is piecewise constant between boundary crossings: each cell
moves at a fixed speed until some cell reaches s, r, or 1, so the flow can
be integrated event to event without discretization error.  The stochastic
engine is a plain Euler-Maruyama discretization with wrapped additive
noise, used for the cluster-count experiments.

A cell that reaches 1 wraps to exactly 0 and is in S from that instant.
Simultaneous boundary hits (within TIE_TOL of the earliest) are processed
as one batch and the signaling fraction is recomputed once afterwards.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, NamedTuple, Optional, Sequence, Union

import numpy as np

from .model import (
    TIE_TOL,
    FeedbackSpec,
    Population,
    RegionParams,
    ValidationError,
    signaling_fraction,
)


class SimulationError(RuntimeError):
    """The engine detected an impossible state (a bug or runaway run)."""


class EventKind(str, Enum):
    HIT_S_END = "HitS_end"
    HIT_R_START = "HitR_start"
    HIT_CYCLE_END = "HitCycleEnd"


class EventRecord(NamedTuple):
    time: float
    kind: EventKind
    cell: int


@dataclass(frozen=True)
class NoiseSpec:
    """Euler-Maruyama step size and per-step displacement std."""

    sigma: float
    dt: float

    def __post_init__(self):
        if self.sigma < 0.0:
            raise ValidationError("sigma must be >= 0")
        if not (0.0 < self.dt <= 0.1):
            raise ValidationError("dt must lie in (0, 0.1] (at least 10 steps per cycle)")


@dataclass
class Trajectory:
    """Sampled states of a run: times[i] pairs with states[i] (one row of
    phases per sample).  events is empty for the stochastic engine."""

    times: np.ndarray
    states: np.ndarray
    weights: np.ndarray
    events: List[EventRecord] = field(default_factory=list)
    seed: Optional[int] = None

    def final_population(self) -> Population:
        return Population(self.states[-1] % 1.0, self.weights.copy())


def cell_speeds(pop: Population, rp: RegionParams, fs: FeedbackSpec) -> np.ndarray:
    """Instantaneous speed of every cell: 1 + f(I) inside R when someone is
    signaling, 1 everywhere else."""
    I = signaling_fraction(pop, rp)
    speeds = np.ones(len(pop))
    if I > 0.0:
        speeds[pop.phases >= rp.r] = 1.0 + fs(I)
    return speeds


def _boundary_distances(pos: np.ndarray, rp: RegionParams):
    """Distance to the next boundary ahead of each cell plus its kind code
    (0: reaches s, 1: reaches r, 2: reaches 1 and wraps)."""
    in_s = pos < rp.s
    mid = (pos >= rp.s) & (pos < rp.r)
    dist = np.where(in_s, rp.s - pos, np.where(mid, rp.r - pos, 1.0 - pos))
    code = np.where(in_s, 0, np.where(mid, 1, 2))
    return dist, code


_KIND_OF_CODE = {0: EventKind.HIT_S_END, 1: EventKind.HIT_R_START, 2: EventKind.HIT_CYCLE_END}


def next_event(pop: Population, rp: RegionParams, fs: FeedbackSpec):
    """Time to the next boundary crossing and the cells that share it.

    Returns (dt_star, hits) where hits is a list of (cell_index, EventKind)
    covering every cell whose crossing time is within TIE_TOL of the
    earliest one.
    """
    speeds = cell_speeds(pop, rp, fs)
    dist, code = _boundary_distances(pop.phases, rp)
    tt = dist / speeds
    dt_star = float(tt.min())
    if dt_star <= 0.0:
        raise SimulationError(
            "non-positive time to next boundary; a cell sits past its boundary"
        )
    members = np.nonzero(tt <= dt_star + TIE_TOL)[0]
    return dt_star, [(int(i), _KIND_OF_CODE[int(code[i])]) for i in members]


def _snap(pos: np.ndarray, batch: np.ndarray, code: np.ndarray, rp: RegionParams):
    """Place every batch member exactly on its boundary (1 wraps to 0)."""
    pos[batch & (code == 0)] = rp.s
    pos[batch & (code == 1)] = rp.r
    pos[batch & (code == 2)] = 0.0


def simulate_exact(
    pop: Population,
    rp: RegionParams,
    fs: FeedbackSpec,
    duration: float,
    sample: Union[str, Sequence[float]] = "events",
    max_events: int = 10_000_000,
) -> Trajectory:
    """Integrate the piecewise-constant flow exactly for the given duration.

    sample may be "events" (snapshot after every processed batch),
    "endpoints" (initial and final state only), or an ascending sequence of
    times within [0, duration].

    Raises SimulationError if the event count exceeds max_events, which
    flags parameter sets whose event cadence explodes.
    """
    if duration <= 0.0:
        raise ValidationError("duration must be > 0")
    pos = pop.phases.copy()
    w = pop.weights.copy()
    total = w.sum()
    n = pos.size

    # unwrapped coordinate, used to assert that cells never overtake
    lift = pos.copy()
    order = np.argsort(pos, kind="stable")

    if isinstance(sample, str):
        if sample == "events":
            sample_times = None
        elif sample == "endpoints":
            sample_times = np.array([duration])
        else:
            raise ValidationError(f"unknown sample mode {sample!r}")
    else:
        sample_times = np.asarray(sample, dtype=float)
        if sample_times.size == 0:
            raise ValidationError("sample times must be nonempty")
        if np.any(np.diff(sample_times) < 0) or np.any(sample_times < 0) or np.any(
            sample_times > duration + TIE_TOL
        ):
            raise ValidationError("sample times must ascend within [0, duration]")

    if sample_times is None:
        times = [0.0]
        states = [pos.copy()]
    else:
        # explicit sample times are honored verbatim (including t = 0, if
        # requested); record_until emits every snapshot
        times = []
        states = []
    events: List[EventRecord] = []
    t = 0.0
    next_sample = 0  # index into sample_times

    def record_until(t_stop, speeds):
        """Emit interpolated snapshots at requested times up to t_stop."""
        nonlocal next_sample
        if sample_times is None:
            return
        while next_sample < sample_times.size and sample_times[next_sample] <= t_stop + TIE_TOL:
            ts = sample_times[next_sample]
            states.append(pos + speeds * max(ts - t, 0.0))
            times.append(float(ts))
            next_sample += 1

    while t < duration * (1.0 - 1e-15):
        I = float(w[pos < rp.s].sum() / total)
        fI = fs(I) if I > 0.0 else 0.0
        speeds = np.where(pos >= rp.r, 1.0 + fI, 1.0)
        dist, code = _boundary_distances(pos, rp)
        tt = dist / speeds
        dt_star = float(tt.min())
        if dt_star <= 0.0:
            raise SimulationError("boundary processing left a cell past its boundary")

        if t + dt_star > duration:
            # horizon reached before the next crossing; partial advance
            record_until(duration, speeds)
            frac = duration - t
            pos += speeds * frac
            lift += speeds * frac
            t = duration
            break

        record_until(t + dt_star, speeds)
        batch = tt <= dt_star + TIE_TOL
        lift = np.where(batch, lift + dist, lift + speeds * dt_star)
        pos = pos + speeds * dt_star
        _snap(pos, batch, code, rp)
        t += dt_star

        for i in np.nonzero(batch)[0]:
            events.append(EventRecord(t, _KIND_OF_CODE[int(code[i])], int(i)))
        if len(events) > max_events:
            raise SimulationError(
                f"event count exceeded {max_events} (s={rp.s}, r={rp.r}, "
                f"feedback={fs.kind}, n={n}); aborting runaway run"
            )

        sorted_lift = lift[order]
        if np.any(np.diff(sorted_lift) < -1e-9):
            raise SimulationError("cyclic order violated; integration bug")

        if sample_times is None:
            times.append(t)
            states.append(pos.copy())

    if sample_times is None and times[-1] < duration:
        times.append(duration)
        states.append(pos.copy())
    elif sample_times is not None:
        # flush any samples at exactly the horizon
        record_until(duration, np.zeros(n))

    return Trajectory(
        times=np.array(times),
        states=np.vstack(states),
        weights=w,
        events=events,
    )


def simulate_sde(
    pop: Population,
    rp: RegionParams,
    fs: FeedbackSpec,
    noise: NoiseSpec,
    duration: float,
    seed: Optional[int] = None,
    sample_every: int = 1,
) -> Trajectory:
    """Euler-Maruyama run with wrapped additive noise.

    Each step the speeds are frozen at the current signaling fraction, the
    cells advance by speed*dt plus sigma-scaled standard normals, and the
    result is wrapped mod 1.  Reproducible for a fixed seed.
    """
    if duration <= 0.0:
        raise ValidationError("duration must be > 0")
    if sample_every < 1:
        raise ValidationError("sample_every must be >= 1")
    rng = np.random.default_rng(seed)
    pos = pop.phases.copy()
    w = pop.weights.copy()
    total = w.sum()
    n = pos.size
    steps = int(round(duration / noise.dt))

    times = [0.0]
    states = [pos.copy()]
    for k in range(1, steps + 1):
        I = float(w[pos < rp.s].sum() / total)
        fI = fs(I) if I > 0.0 else 0.0
        speeds = np.where(pos >= rp.r, 1.0 + fI, 1.0)
        pos = (pos + speeds * noise.dt + noise.sigma * rng.standard_normal(n)) % 1.0
        if k % sample_every == 0 or k == steps:
            times.append(k * noise.dt)
            states.append(pos.copy())

    return Trajectory(
        times=np.array(times),
        states=np.vstack(states),
        weights=w,
        events=[],
        seed=seed,
    )


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """CSV export, one row per sample: t,phase_0,...,phase_{n-1}."""
    n = traj.states.shape[1]
    header = "t," + ",".join(f"phase_{i}" for i in range(n))
    data = np.column_stack([traj.times, traj.states])
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")


def write_events_csv(traj: Trajectory, path) -> None:
    """CSV export of boundary crossings: t,kind,cell."""
    with open(path, "w") as fh:
        fh.write("t,kind,cell\n")
        for ev in traj.events:
            fh.write(f"{ev.time:.17g},{ev.kind.value},{ev.cell}\n")
