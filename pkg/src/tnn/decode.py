"""Supervised back end: voters that map temporal one-hot cluster ids to class
votes through saturating counters, and the tally that sums votes."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .core import DEFAULT_FRAC_BITS, DEFAULT_W_MAX, INF, TIME_DTYPE, to_raw

NO_PREDICTION = -1

COUNTER_DTYPE = np.int32


class LabelError(ValueError):
    """A supervisory label volley is not one-hot; the stream is corrupt."""


@dataclass(frozen=True)
class VoterParams:
    q: int
    r: int
    tau_eff: int
    theta_v: Fraction
    w_max: int = DEFAULT_W_MAX
    frac_bits: int = DEFAULT_FRAC_BITS
    raw_max: int = field(init=False, repr=False)
    raw_half: int = field(init=False, repr=False)
    raw_up: int = field(init=False, repr=False)
    raw_down: int = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "theta_v", Fraction(self.theta_v))
        if self.tau_eff < 1:
            raise ValueError("tau_eff must be >= 1")
        if not 0 < self.theta_v < 1:
            raise ValueError("theta_v must lie strictly between 0 and 1")
        object.__setattr__(self, "raw_max", self.w_max << self.frac_bits)
        object.__setattr__(self, "raw_half", self.raw_max // 2)
        object.__setattr__(self, "raw_up", to_raw(1 - self.theta_v, self.frac_bits))
        object.__setattr__(self, "raw_down", to_raw(self.theta_v, self.frac_bits))


def label_volley(label: int, r: int = 10) -> np.ndarray:
    if not 0 <= label < r:
        raise LabelError(f"label {label} outside 0..{r - 1}")
    v = np.full(r, INF, dtype=TIME_DTYPE)
    v[label] = 0
    return v


def label_index(l: Sequence[int]) -> int:
    """Class index carried by a one-hot label volley."""
    l = np.asarray(l)
    hot = np.flatnonzero(l != INF)
    if len(hot) != 1 or l[hot[0]] != 0:
        raise LabelError(f"label volley must be binary one-hot, got {l.tolist()}")
    return int(hot[0])


def clamp_cid(z, tau_eff: int) -> np.ndarray:
    """Fold late spike times into the top counter index ``tau_eff - 1``."""
    z = np.asarray(z, dtype=TIME_DTYPE)
    return np.where(z == INF, INF, np.minimum(z, tau_eff - 1)).astype(TIME_DTYPE)


def _cid(z) -> tuple[int, int] | None:
    z = np.asarray(z)
    hot = np.flatnonzero(z != INF)
    if len(hot) == 0:
        return None
    if len(hot) > 1:
        raise ValueError("cluster id must be temporal one-hot")
    return int(hot[0]), int(z[hot[0]])


@dataclass
class VoterBank:
    """Counters for one column's voter, shape ``(q, r, tau_eff)``."""

    params: VoterParams
    counters: np.ndarray = field(default=None)

    def __post_init__(self):
        prm = self.params
        shape = (prm.q, prm.r, prm.tau_eff)
        if self.counters is None:
            self.counters = np.full(shape, prm.raw_half, dtype=COUNTER_DTYPE)
        elif self.counters.shape != shape:
            raise ValueError(f"counters must be {shape}")

    def copy(self) -> "VoterBank":
        return VoterBank(self.params, self.counters.copy())


def voter_infer(bank: VoterBank, z) -> np.ndarray:
    """Binarized votes: class j gets a spike at 0 iff the addressed counter is
    at least ``w_max / 2``."""
    r = bank.params.r
    cid = _cid(z)
    if cid is None:
        return np.full(r, INF, dtype=TIME_DTYPE)
    i, k = cid
    if k >= bank.params.tau_eff:
        raise ValueError("cluster id must be clamped to tau_eff first")
    hit = bank.counters[i, :, k] >= bank.params.raw_half
    return np.where(hit, 0, INF).astype(TIME_DTYPE)


def voter_update(bank: VoterBank, z, l) -> VoterBank:
    """Return a copy with the label-driven counter update applied."""
    j_true = label_index(l)
    new = bank.copy()
    cid = _cid(z)
    if cid is None:
        return new
    i, k = cid
    prm = bank.params
    delta = np.full(prm.r, -prm.raw_down)
    delta[j_true] = prm.raw_up
    new.counters[i, :, k] = np.clip(new.counters[i, :, k] + delta, 0, prm.raw_max)
    return new


@dataclass(frozen=True)
class TallyResult:
    counts: np.ndarray
    winners: tuple[int, ...]
    prediction: int
    tie: bool


def tally_counts(counts) -> TallyResult:
    counts = np.asarray(counts, dtype=np.int64)
    top = counts.max() if counts.size else 0
    if top == 0:
        return TallyResult(counts, (), NO_PREDICTION, False)
    winners = tuple(int(i) for i in np.flatnonzero(counts == top))
    return TallyResult(counts, winners, winners[0], len(winners) > 1)


def tally(votes: Iterable[Sequence[int]], r: int | None = None) -> TallyResult:
    """Count votes per class across vote volleys and pick the winner (lowest
    index on ties)."""
    votes = [np.asarray(v) for v in votes]
    if not votes:
        if r is None:
            raise ValueError("r is required when there are no votes")
        return tally_counts(np.zeros(r, dtype=np.int64))
    counts = np.sum([v == 0 for v in votes], axis=0)
    return tally_counts(counts)


class VoterLayer:
    """Voters for a whole grid of columns: counters ``(C, q, r, tau_eff)``."""

    def __init__(self, params: VoterParams, n_columns: int, counters: np.ndarray | None = None):
        self.params = params
        self.n_columns = n_columns
        shape = (n_columns, params.q, params.r, params.tau_eff)
        if counters is None:
            self.counters = np.full(shape, params.raw_half, dtype=COUNTER_DTYPE)
        else:
            if counters.shape != shape:
                raise ValueError(f"counters must be {shape}, got {counters.shape}")
            self.counters = np.ascontiguousarray(counters, dtype=COUNTER_DTYPE)

    @property
    def n_synapses(self) -> int:
        return self.counters.size

    def bank(self, c: int) -> VoterBank:
        return VoterBank(self.params, self.counters[c].copy())

    def clamp(self, time: np.ndarray) -> np.ndarray:
        return np.where(time == INF, INF, np.minimum(time, self.params.tau_eff - 1))

    def votes(self, winner: np.ndarray, time: np.ndarray) -> np.ndarray:
        """Per-class vote counts summed over all fired voters."""
        fired = winner >= 0
        k = self.clamp(time)[fired]
        sel = self.counters[np.flatnonzero(fired), winner[fired], :, k]       # (F, r)
        return (sel >= self.params.raw_half).sum(axis=0)

    def update(self, winner: np.ndarray, time: np.ndarray, label: int) -> None:
        fired = winner >= 0
        if not fired.any():
            return
        prm = self.params
        cf = np.flatnonzero(fired)
        jf = winner[fired]
        kf = self.clamp(time)[fired]
        delta = np.full(prm.r, -prm.raw_down, dtype=np.int64)
        delta[label] = prm.raw_up
        cur = self.counters[cf, jf, :, kf]
        self.counters[cf, jf, :, kf] = np.clip(cur + delta, 0, prm.raw_max)
