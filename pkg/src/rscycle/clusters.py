"""Grouping diagnostics: gaps, delta-chains, histogram cluster counts, and
width tracking for a named group of cells."""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .model import Population, RegionParams, ValidationError
from .simulate import Trajectory


@dataclass
class GapReport:
    """Cyclic gaps between consecutive cells, sorted by phase.

    Each entry is (from_index, to_index, width): the arc from cell
    from_index forward to cell to_index.  Indices refer to the population's
    own ordering; widths sum to 1 around the circle.
    """

    gaps: List[Tuple[int, int, float]]


def gap_report(pop: Population) -> GapReport:
    order = np.argsort(pop.phases, kind="stable")
    x = pop.phases[order]
    nxt = np.roll(order, -1)
    widths = (np.roll(x, -1) - x) % 1.0
    if len(pop) == 1:
        widths = np.array([1.0])
    else:
        # the wrap-around gap closes the circle
        widths[-1] = (x[0] - x[-1]) % 1.0
        if widths[-1] == 0.0 and np.all(pop.phases == pop.phases[0]):
            widths[-1] = 1.0
    return GapReport([(int(order[i]), int(nxt[i]), float(widths[i])) for i in range(len(pop))])


@dataclass
class Group:
    indices: List[int]          # member cells in cyclic order
    width: float                # arc from first to last member
    weight: float
    isolated: bool              # both adjacent gaps >= |R|+|S|
    strictly_isolated: bool     # both adjacent gaps > |R|+|S|


@dataclass
class ClusterDecomposition:
    groups: List[Group]
    separating_gaps: List[float]
    delta: float


def default_merge_delta(rp: RegionParams) -> float:
    return min(0.5 * rp.interaction_length, 0.02)


def decompose(pop: Population, rp: RegionParams, delta: Optional[float] = None) -> ClusterDecomposition:
    """Split the population into maximal chains whose consecutive gaps stay
    below delta.

    Groups are reported in cyclic order together with the gaps separating
    them; group widths plus separating gaps add up to 1.  If every gap is
    below delta the whole population is one group, broken at the largest
    gap so the width stays well defined.
    """
    if delta is None:
        delta = default_merge_delta(rp)
    if not (0.0 < delta < rp.interaction_length):
        raise ValidationError(
            f"merge delta must lie in (0, |R|+|S|) = (0, {rp.interaction_length:.6g})"
        )
    order = np.argsort(pop.phases, kind="stable")
    x = pop.phases[order]
    m = x.size
    widths = (np.roll(x, -1) - x) % 1.0
    widths[-1] = (x[0] - x[-1]) % 1.0
    if m == 1:
        widths = np.array([1.0])
    elif np.all(pop.phases == pop.phases[0]):
        widths[-1] = 1.0

    breaks = np.nonzero(widths >= delta)[0]
    if breaks.size == 0:
        breaks = np.array([int(np.argmax(widths))])

    bound = rp.interaction_length
    groups: List[Group] = []
    seps: List[float] = []
    k = breaks.size
    for j in range(k):
        start = (breaks[j] + 1) % m
        stop = breaks[(j + 1) % k]          # inclusive; the next break gap follows it
        if start <= stop:
            members = list(range(start, stop + 1))
        else:
            members = list(range(start, m)) + list(range(0, stop + 1))
        width = float(sum(widths[i] for i in members[:-1]))
        gap_before = float(widths[breaks[j]])
        gap_after = float(widths[stop])
        groups.append(
            Group(
                indices=[int(order[i]) for i in members],
                width=width,
                weight=float(pop.weights[order[members]].sum()),
                isolated=gap_before >= bound and gap_after >= bound,
                strictly_isolated=gap_before > bound and gap_after > bound,
            )
        )
        seps.append(gap_after)
    return ClusterDecomposition(groups=groups, separating_gaps=seps, delta=delta)


def count_clusters_histogram(pop: Population, bins: int = 120,
                             occupancy_threshold: float = 2.0) -> int:
    """Histogram-based cluster count.

    Bins the phases, marks bins whose weighted count exceeds
    occupancy_threshold times the uniform expectation, and returns the
    number of cyclic runs of marked bins.  Returns 0 if nothing is marked
    or if more than half of all bins are marked (no discernible clusters).
    """
    if bins < 2:
        raise ValidationError("need at least 2 bins")
    if occupancy_threshold <= 0:
        raise ValidationError("occupancy threshold must be positive")
    idx = np.minimum((pop.phases * bins).astype(int), bins - 1)
    counts = np.bincount(idx, weights=pop.weights, minlength=bins)
    marked = counts > occupancy_threshold * (pop.total_weight / bins)
    n_marked = int(marked.sum())
    if n_marked == 0 or n_marked > bins // 2:
        return 0
    # cyclic runs of marked bins
    transitions = np.sum(marked & ~np.roll(marked, 1))
    return int(transitions)


@dataclass
class WidthSegment:
    indices: List[int]
    times: List[float]
    widths: List[float]


@dataclass
class WidthsSeriesReport:
    segments: List[WidthSegment]
    split_time: Optional[float]      # first time a tracked group lost identity


def widths_series(traj: Trajectory, members, rp: RegionParams) -> WidthsSeriesReport:
    """Lead-to-tail width of a group of cells at every sample of a
    trajectory.

    The group is the given member indices in cyclic order at the first
    sample.  If an internal gap reaches |R|+|S| the group has lost its
    identity: the series is flagged, split at that gap, and the parts are
    tracked separately from then on.
    """
    members = [int(i) for i in members]
    if len(members) == 0:
        raise ValidationError("empty member list")
    bound = rp.interaction_length

    first = traj.states[0]
    start = sorted(members, key=lambda i: first[i])
    # rotate so the largest internal gap is the outside of the group
    xs = np.array([first[i] % 1.0 for i in start])
    gaps = (np.roll(xs, -1) - xs) % 1.0
    cut = int(np.argmax(gaps))
    start = start[cut + 1:] + start[:cut + 1]

    live = [WidthSegment(indices=start, times=[], widths=[])]
    done: List[WidthSegment] = []
    split_time: Optional[float] = None

    for t, state in zip(traj.times, traj.states):
        nxt_live: List[WidthSegment] = []
        for seg in live:
            xs = np.array([state[i] % 1.0 for i in seg.indices])
            internal = (xs[1:] - xs[:-1]) % 1.0 if len(xs) > 1 else np.array([])
            if internal.size and internal.max() >= bound:
                if split_time is None:
                    split_time = float(t)
                j = int(np.argmax(internal))
                left = WidthSegment(indices=seg.indices[: j + 1], times=[], widths=[])
                right = WidthSegment(indices=seg.indices[j + 1:], times=[], widths=[])
                done.append(seg)
                for part in (left, right):
                    w = _group_width(state, part.indices)
                    part.times.append(float(t))
                    part.widths.append(w)
                    nxt_live.append(part)
            else:
                seg.times.append(float(t))
                seg.widths.append(_group_width(state, seg.indices))
                nxt_live.append(seg)
        live = nxt_live

    return WidthsSeriesReport(segments=done + live, split_time=split_time)


def _group_width(state, indices) -> float:
    if len(indices) == 1:
        return 0.0
    tail = state[indices[0]] % 1.0
    lead = state[indices[-1]] % 1.0
    return float((lead - tail) % 1.0)


def write_sweep_csv(rows, path) -> None:
    """Sweep export, one row per point: sweep_value,M,N,verdict."""
    with open(path, "w") as fh:
        fh.write("sweep_value,M,N,verdict\n")
        for value, m, n, verdict in rows:
            fh.write(f"{value:.17g},{m},{n},{verdict}\n")
