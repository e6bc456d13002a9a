"""Prequential error tracking, centroid convergence (c_conv) and spike-time
versus distance (RBF) profiling.

Centroid-space conventions: a pattern is the column's local-time input
volley with no-spike entries mapped to ``tau_max``; centroids are
element-wise means of a cluster's member patterns; distance is the sum of
absolute differences. All of it is computed exactly in integers.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import INF
from .decode import NO_PREDICTION, tally_counts

DEFAULT_INTERVAL = 1000
NO_SPIKE = 255


# ---------------------------------------------------------------------------
# prequential error tracking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntervalRecord:
    interval_end: int
    n: int
    errors: int
    cumulative_errors: int
    ties: int
    no_predictions: int
    decoder_errors: dict = field(default_factory=dict)

    @property
    def error_rate(self) -> Fraction:
        return Fraction(self.errors, self.n)

    @property
    def cumulative_rate(self) -> Fraction:
        return Fraction(self.cumulative_errors, self.interval_end)


class IntervalTracker:
    """Counts prediction errors and emits a record every ``interval`` inputs.

    When a step carries more than one voter bank, single-bank predictions
    are scored alongside (``decoder_errors``).
    """

    def __init__(self, interval: int = DEFAULT_INTERVAL):
        if interval < 1:
            raise ValueError("interval must be >= 1")
        self.interval = interval
        self.position = 0
        self.cumulative_errors = 0
        self.records: list[IntervalRecord] = []
        self._reset()

    def _reset(self):
        self._n = 0
        self._errors = 0
        self._ties = 0
        self._none = 0
        self._dec: dict[str, int] = {}

    def record(self, result, label: int) -> IntervalRecord | None:
        wrong = result.prediction == NO_PREDICTION or result.prediction != label
        self._n += 1
        self._errors += int(wrong)
        self._ties += int(result.tie)
        self._none += int(result.prediction == NO_PREDICTION)
        self.cumulative_errors += int(wrong)
        self.position += 1
        if len(result.bank_counts) > 1:
            for bank, counts in result.bank_counts.items():
                pred = tally_counts(counts).prediction
                self._dec[bank] = self._dec.get(bank, 0) + int(pred != label)
        if self._n == self.interval:
            return self._emit()
        return None

    def _emit(self) -> IntervalRecord:
        rec = IntervalRecord(self.position, self._n, self._errors, self.cumulative_errors,
                             self._ties, self._none, dict(sorted(self._dec.items())))
        self.records.append(rec)
        self._reset()
        return rec

    def flush(self) -> IntervalRecord | None:
        """Emit the trailing partial interval, if any."""
        return self._emit() if self._n else None

    def state(self) -> dict:
        return {
            "interval": self.interval, "position": self.position,
            "cumulative_errors": self.cumulative_errors,
            "partial": [self._n, self._errors, self._ties, self._none, self._dec],
            "records": [[r.interval_end, r.n, r.errors, r.cumulative_errors, r.ties,
                         r.no_predictions, r.decoder_errors] for r in self.records],
        }

    @classmethod
    def from_state(cls, st: dict) -> "IntervalTracker":
        tr = cls(st["interval"])
        tr.position = st["position"]
        tr.cumulative_errors = st["cumulative_errors"]
        tr._n, tr._errors, tr._ties, tr._none, tr._dec = st["partial"]
        tr._dec = dict(tr._dec)
        tr.records = [IntervalRecord(*r[:6], dict(r[6])) for r in st["records"]]
        return tr


def decimal6(x: Fraction) -> str:
    return f"{float(x):.6f}"


def frac_str(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


INTERVAL_HEADER = ["interval_end", "errors", "error_rate", "cumulative_rate", "ties",
                   "no_predictions", "error_rate_exact", "cumulative_rate_exact"]


def interval_row(r: IntervalRecord) -> list:
    return [r.interval_end, r.errors, decimal6(r.error_rate), decimal6(r.cumulative_rate),
            r.ties, r.no_predictions, frac_str(r.error_rate), frac_str(r.cumulative_rate)]


def write_intervals_csv(path, records: Sequence[IntervalRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(INTERVAL_HEADER)
        w.writerows(interval_row(r) for r in records)


def read_intervals_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k in ("interval_end", "errors", "ties", "no_predictions"):
            r[k] = int(r[k])
        r["error_rate_exact"] = Fraction(r["error_rate_exact"])
    return rows


def windowed_rate(records: Sequence[IntervalRecord], start: int, end: int, decoder: str | None = None) -> Fraction:
    """Pooled error rate over the intervals ending in ``(start, end]``."""
    sel = [r for r in records if start < r.interval_end <= end]
    if not sel:
        raise ValueError(f"no intervals in ({start}, {end}]")
    errs = sum(r.decoder_errors[decoder] if decoder else r.errors for r in sel)
    return Fraction(errs, sum(r.n for r in sel))


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------

def sad(a: Sequence, b: Sequence) -> Fraction:
    """Sum of absolute differences between two equal-length vectors."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    return sum((abs(Fraction(x) - Fraction(y)) for x, y in zip(a, b)), Fraction(0))


def as_pattern(x: Sequence[int], tau_max: int) -> np.ndarray:
    """Centroid-space form of a volley: no-spike lines become ``tau_max``."""
    x = np.asarray(x, dtype=np.int64)
    return np.where(x == INF, tau_max, x)


# ---------------------------------------------------------------------------
# cluster snapshots
# ---------------------------------------------------------------------------

class SnapshotRecorder:
    """Captures the cluster ids of every column for inputs in
    ``[start, end)`` so patterns and memberships can be rebuilt offline."""

    def __init__(self, net, start: int, end: int):
        self.start, self.end = start, end
        self.tau_max = net.cfg.tau_max
        self.sources = net.sources
        self.qs = [l.params.q for l in net.layers]
        self.ps = [l.params.p for l in net.layers]
        self._lines, self._win, self._time, self._idx = [], [[] for _ in net.layers], [[] for _ in net.layers], []

    def __call__(self, result, frame) -> None:
        if not self.start <= frame.index < self.end:
            return
        self._idx.append(frame.index)
        self._lines.append(frame.lines.astype(np.uint8))
        for n, (w, t) in enumerate(result.cids):
            self._win[n].append(w.astype(np.int16))
            self._time[n].append(np.where(t == INF, NO_SPIKE, t).astype(np.uint8))

    def __len__(self):
        return len(self._idx)

    def snapshot(self) -> "ClusterSnapshot":
        L = len(self.qs)
        empty = lambda shape, dt: np.zeros(shape, dt)
        return ClusterSnapshot(
            tau_max=self.tau_max,
            indices=np.asarray(self._idx, dtype=np.int64),
            lines1=np.stack(self._lines) if self._lines else empty((0, 676, 4), np.uint8),
            winners=[np.stack(w) if w else empty((0, 0), np.int16) for w in self._win],
            times=[np.stack(t) if t else empty((0, 0), np.uint8) for t in self._time],
            sources=[np.zeros((0, 4), np.int64) if s is None else s for s in self.sources],
            qs=list(self.qs), ps=list(self.ps),
        )

    def save(self, path) -> None:
        self.snapshot().save(path)


@dataclass
class ClusterSnapshot:
    tau_max: int
    indices: np.ndarray
    lines1: np.ndarray
    winners: list[np.ndarray]
    times: list[np.ndarray]
    sources: list[np.ndarray]
    qs: list[int]
    ps: list[int]

    @property
    def n_layers(self) -> int:
        return len(self.qs)

    def __len__(self):
        return len(self.indices)

    def save(self, path) -> None:
        arrays = {"tau_max": np.array(self.tau_max), "indices": self.indices, "lines1": self.lines1,
                  "qs": np.array(self.qs), "ps": np.array(self.ps)}
        for n in range(self.n_layers):
            arrays[f"winners{n}"] = self.winners[n]
            arrays[f"times{n}"] = self.times[n]
            arrays[f"sources{n}"] = self.sources[n]
        np.savez_compressed(path, **arrays)

    @classmethod
    def load(cls, path) -> "ClusterSnapshot":
        with np.load(path) as z:
            L = len(z["qs"])
            return cls(int(z["tau_max"]), z["indices"], z["lines1"],
                       [z[f"winners{n}"] for n in range(L)], [z[f"times{n}"] for n in range(L)],
                       [z[f"sources{n}"] for n in range(L)], [int(v) for v in z["qs"]],
                       [int(v) for v in z["ps"]])

    def n_columns(self, layer: int) -> int:
        return self.winners[layer].shape[1]

    def sparse_patterns(self, layer: int, cols) -> tuple[np.ndarray, np.ndarray]:
        """Spiking lines and local times of the inputs to ``cols`` of
        ``layer``: arrays ``(N, len(cols), 4)``; ``times`` is ``-1`` where a
        slot carries no spike."""
        cols = np.asarray(cols)
        if layer == 0:
            lines = self.lines1[:, cols, :].astype(np.int64)
            return lines, np.zeros(lines.shape, dtype=np.int64)
        src = self.sources[layer][cols]                                       # (Cc, 4)
        w = self.winners[layer - 1][:, src].astype(np.int64)                  # (N, Cc, 4)
        t = self.times[layer - 1][:, src].astype(np.int64)
        lines = np.arange(4)[None, None, :] * self.qs[layer - 1] + np.maximum(w, 0)
        spiking = w >= 0
        mn = np.where(spiking, t, NO_SPIKE).min(axis=2, keepdims=True)
        times = np.where(spiking, t - mn, -1)
        return lines, times

    def dense_patterns(self, layer: int, col: int) -> np.ndarray:
        """``(N, p)`` centroid-space patterns of one column."""
        lines, times = self.sparse_patterns(layer, [col])
        lines, times = lines[:, 0], times[:, 0]
        N = len(lines)
        X = np.full((N, self.ps[layer]), self.tau_max, dtype=np.int64)
        r, k = np.nonzero(times >= 0)
        X[r, lines[r, k]] = times[r, k]
        return X

    def members(self, layer: int, cols) -> tuple[np.ndarray, np.ndarray]:
        """Winning neuron (``-1`` for none) and its spike time per input."""
        w = self.winners[layer][:, cols].astype(np.int64)
        t = self.times[layer][:, cols].astype(np.int64)
        return w, np.where(w >= 0, t, INF)


# ---------------------------------------------------------------------------
# c_conv
# ---------------------------------------------------------------------------

@dataclass
class ClusterDistances:
    """For every member input of a chunk of columns: scaled distance to
    each cluster centroid of its column.

    The distance to cluster ``k`` is ``D[m, k] / n[col, k]`` (sad) or
    ``D[m, k] / n[col, k]**2`` (squared Euclidean).
    """

    col: np.ndarray      # (M,) chunk-local column of each member
    own: np.ndarray      # (M,) its cluster
    time: np.ndarray     # (M,) its output spike time
    D: np.ndarray        # (M, q)
    n: np.ndarray        # (Cc, q) cluster sizes


def cluster_distances(snap: ClusterSnapshot, layer: int, cols, metric: str = "sad") -> ClusterDistances:
    cols = np.asarray(cols)
    q, p, tau = snap.qs[layer], snap.ps[layer], snap.tau_max
    lines, times = snap.sparse_patterns(layer, cols)                          # (N, Cc, K)
    win, wtime = snap.members(layer, cols)                                    # (N, Cc)
    N, Cc, K = lines.shape
    is_mem = win >= 0
    n = np.zeros((Cc, q), dtype=np.int64)
    cc = np.broadcast_to(np.arange(Cc)[None, :], (N, Cc))
    np.add.at(n, (cc[is_mem], win[is_mem]), 1)

    # A = S - tau * n: only spiking lines move a member away from tau
    spk = is_mem[:, :, None] & (times >= 0)
    ci = np.broadcast_to(cc[:, :, None], lines.shape)[spk]
    ki = np.broadcast_to(win[:, :, None], lines.shape)[spk]
    A = np.zeros((Cc, q, p), dtype=np.int64)
    np.add.at(A, (ci, ki, lines[spk]), times[spk] - tau)

    mr, mc = np.nonzero(is_mem)
    ml, mt = lines[mr, mc], times[mr, mc]                                     # (M, K)
    nk = n[mc][:, :, None]                                                    # (M, q, 1)
    Ag = A[mc[:, None], :, ml].transpose(0, 2, 1)                             # (M, q, K)
    d = nk * (mt - tau)[:, None, :] - Ag
    live = (mt >= 0)[:, None, :]
    if metric == "sad":
        base = np.abs(A).sum(axis=2)
        corr = np.where(live, np.abs(d) - np.abs(Ag), 0).sum(axis=2)
    elif metric == "euclid":
        base = (A * A).sum(axis=2)
        corr = np.where(live, d * d - Ag * Ag, 0).sum(axis=2)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    D = base[mc] + corr
    return ClusterDistances(mc, win[mr, mc], wtime[mr, mc], D, n)


def nearest_is_own(cd: ClusterDistances, metric: str = "sad") -> np.ndarray:
    """Whether each member's own centroid attains the minimum distance."""
    n = cd.n[cd.col]                                                          # (M, q)
    own = cd.own
    rows = np.arange(len(own))
    D_own = cd.D[rows, own]
    n_own = n[rows, own]
    has = n > 0
    if metric == "sad":
        ok = (D_own[:, None] * n <= cd.D * n_own[:, None]) | ~has
    else:
        # squared distances overflow int64 once cross-multiplied; compare as floats
        dist = np.where(has, cd.D / np.maximum(n, 1) ** 2, np.inf)
        ok = dist[rows, own][:, None] <= dist
    return ok.all(axis=1)


@dataclass
class LayerConvergence:
    layer: int
    columns: np.ndarray      # column ids
    members: np.ndarray      # member inputs per column
    matches: np.ndarray      # members whose nearest centroid is their own

    @property
    def c_conv(self) -> Fraction | None:
        total = int(self.members.sum())
        return Fraction(int(self.matches.sum()), total) if total else None

    def column_c_conv(self, i: int) -> Fraction | None:
        m = int(self.members[i])
        return Fraction(int(self.matches[i]), m) if m else None


def centroid_convergence(snap: ClusterSnapshot, layer: int, metric: str = "sad",
                         chunk_elems: int = 8_000_000) -> LayerConvergence:
    C = snap.n_columns(layer)
    q = snap.qs[layer]
    step = max(1, chunk_elems // max(1, len(snap) * q * 4))
    members = np.zeros(C, dtype=np.int64)
    matches = np.zeros(C, dtype=np.int64)
    for a in range(0, C, step):
        cols = np.arange(a, min(C, a + step))
        cd = cluster_distances(snap, layer, cols, metric)
        ok = nearest_is_own(cd, metric)
        members[cols] = np.bincount(cd.col, minlength=len(cols))
        matches[cols] = np.bincount(cd.col, weights=ok, minlength=len(cols)).astype(np.int64)
    return LayerConvergence(layer, np.arange(C), members, matches)


def write_cconv_csv(path, results: Sequence[LayerConvergence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["layer", "column_id", "members", "c_conv", "c_conv_exact"])
        for res in results:
            for i, c in enumerate(res.columns):
                v = res.column_c_conv(i)
                w.writerow([res.layer + 1, int(c), int(res.members[i]),
                            "" if v is None else decimal6(v), "" if v is None else frac_str(v)])
        for res in results:
            v = res.c_conv
            w.writerow([res.layer + 1, "all", int(res.members.sum()),
                        "" if v is None else decimal6(v), "" if v is None else frac_str(v)])


# ---------------------------------------------------------------------------
# RBF profile
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RBFBucket:
    spike_time: int
    count: int
    mean_sad: Fraction
    coverage: Fraction


@dataclass
class RBFProfile:
    probe_id: str
    total: int
    buckets: list[RBFBucket]

    @property
    def no_spike(self) -> Fraction:
        return 1 - sum((b.coverage for b in self.buckets), Fraction(0))

    def monotone(self, min_coverage: Fraction = Fraction(1, 100)) -> bool:
        """Mean sad is non-decreasing in spike time over well-covered buckets."""
        sads = [b.mean_sad for b in self.buckets if b.coverage >= min_coverage]
        return all(a <= b for a, b in zip(sads, sads[1:]))

    def earliest_is_closest(self) -> bool:
        if not self.buckets:
            return False
        return self.buckets[0].mean_sad == min(b.mean_sad for b in self.buckets)


def profile_from_distances(probe_id: str, total: int, times: np.ndarray, sads: Sequence[Fraction]) -> RBFProfile:
    """Bucket members by output spike time."""
    buckets = []
    for t in sorted(set(int(v) for v in times)):
        idx = np.flatnonzero(times == t)
        s = sum((sads[i] for i in idx), Fraction(0))
        buckets.append(RBFBucket(t, len(idx), s / len(idx), Fraction(len(idx), total)))
    return RBFProfile(probe_id, total, buckets)


def rbf_profile(snap: ClusterSnapshot, layer: int, column: int, probe_id: str | None = None) -> RBFProfile:
    """Spike time versus sad to the winning centroid for one probe column."""
    cd = cluster_distances(snap, layer, [column], "sad")
    n_own = cd.n[0, cd.own]
    D_own = cd.D[np.arange(len(cd.own)), cd.own]
    sads = [Fraction(int(d), int(m)) for d, m in zip(D_own, n_own)]
    return profile_from_distances(probe_id or f"L{layer + 1}C{column}", len(snap), cd.time, sads)


def rbf_profile_patterns(probe_id: str, patterns: np.ndarray, winners: np.ndarray, times: np.ndarray) -> RBFProfile:
    """Dense-pattern variant for a standalone probe column: ``patterns`` are
    centroid-space ``(N, p)``, ``winners`` the firing neuron (-1 for none)."""
    patterns = np.asarray(patterns, dtype=np.int64)
    mem = winners >= 0
    cents = {}
    for k in np.unique(winners[mem]):
        sel = patterns[winners == k]
        cents[int(k)] = (sel.sum(axis=0), len(sel))
    sads, ts = [], []
    for x, k, t in zip(patterns[mem], winners[mem], times[mem]):
        S, n = cents[int(k)]
        sads.append(Fraction(int(np.abs(n * x - S).sum()), n))
        ts.append(int(t))
    return profile_from_distances(probe_id, len(patterns), np.asarray(ts, dtype=np.int64), sads)


def write_rbf_csv(path, profiles: Sequence[RBFProfile]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["probe_id", "spike_time", "mean_sad", "coverage", "mean_sad_exact", "coverage_exact"])
        for prof in profiles:
            for b in prof.buckets:
                w.writerow([prof.probe_id, b.spike_time, decimal6(b.mean_sad), decimal6(b.coverage),
                            frac_str(b.mean_sad), frac_str(b.coverage)])
