"""Clustering columns: synaptic crossbar, excitatory neurons, WTA inhibition
and the STDP learner.

Two routes are provided. :class:`Column` evaluates one column neuron by
neuron through :func:`tnn.core.fire_time` and is the readable reference.
:class:`ColumnLayer` holds a whole grid of same-shaped columns as one
``(C, p, q)`` array and is what the network runs on; tests hold the two
bit-identical.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np
from numba import njit

from .core import (
    DEFAULT_FRAC_BITS,
    DEFAULT_TAU_MAX,
    DEFAULT_W_MAX,
    INF,
    TIME_DTYPE,
    NeuronModel,
    fire_time,
    normalize_local_time,
    to_raw,
)

WEIGHT_DTYPE = np.int32


class StdpGate(str, enum.Enum):
    """Which output time drives STDP: the WTA output ``z`` or the raw
    neuron output ``y``."""

    POST_WTA = "post_wta"
    PRE_WTA = "pre_wta"


@dataclass(frozen=True)
class ColumnParams:
    p: int
    q: int
    theta: int
    mu_plus: Fraction
    mu_minus: Fraction
    mu_search: Fraction
    stdp_gate: StdpGate = StdpGate.POST_WTA
    w_max: int = DEFAULT_W_MAX
    frac_bits: int = DEFAULT_FRAC_BITS
    tau_max: int = DEFAULT_TAU_MAX
    neuron_model: NeuronModel = NeuronModel.RIF

    def __post_init__(self):
        if self.p < 1 or self.q < 1 or self.theta < 1:
            raise ValueError("p, q and theta must all be >= 1")
        for name in ("mu_plus", "mu_minus", "mu_search"):
            v = Fraction(getattr(self, name))
            if v < 0:
                raise ValueError(f"{name} must be >= 0")
            object.__setattr__(self, name, v)
        # half increments must be representable too
        to_raw(self.mu_plus / 2, self.frac_bits)
        to_raw(self.mu_minus / 2, self.frac_bits)
        to_raw(self.mu_search, self.frac_bits)
        object.__setattr__(self, "stdp_gate", StdpGate(self.stdp_gate))
        object.__setattr__(self, "neuron_model", NeuronModel(self.neuron_model))

    @property
    def raw_max(self) -> int:
        return self.w_max << self.frac_bits

    @property
    def raw_half(self) -> int:
        return self.raw_max // 2

    def increments(self) -> "RawIncrements":
        f = self.frac_bits
        return RawIncrements(
            plus=to_raw(self.mu_plus, f),
            plus_half=to_raw(self.mu_plus / 2, f),
            minus=to_raw(self.mu_minus, f),
            minus_half=to_raw(self.mu_minus / 2, f),
            search=to_raw(self.mu_search, f),
            half=self.raw_half,
            raw_max=self.raw_max,
        )


@dataclass(frozen=True)
class RawIncrements:
    plus: int
    plus_half: int
    minus: int
    minus_half: int
    search: int
    half: int
    raw_max: int

    def f_plus(self, w):
        return np.where(w >= self.half, self.plus, self.plus_half)

    def f_minus(self, w):
        return np.where(w < self.half, self.minus, self.minus_half)


# ---------------------------------------------------------------------------
# WTA and STDP, shared by both routes
# ---------------------------------------------------------------------------

def wta(y) -> np.ndarray:
    """Pass only the earliest spike; ties go to the lowest index."""
    y = np.asarray(y, dtype=TIME_DTYPE)
    z = np.full_like(y, INF)
    if y.size and y.min() != INF:
        i = int(np.argmin(y))
        z[i] = y[i]
    return z


def stdp_delta(s_in: int, s_out: int, w_raw: int, inc: RawIncrements) -> int:
    """Raw weight change for one synapse, before saturation."""
    if s_in != INF and s_out != INF:
        if s_in <= s_out:
            return int(inc.f_plus(w_raw))
        return -int(inc.f_minus(w_raw))
    if s_in != INF:
        return inc.search
    if s_out != INF:
        return -int(inc.f_minus(w_raw))
    return 0


def stdp_dense(W: np.ndarray, x: np.ndarray, out: np.ndarray, inc: RawIncrements) -> np.ndarray:
    """Apply the STDP table to every synapse at once.

    ``W`` is ``(..., p, q)`` raw weights, ``x`` is ``(..., p)`` and ``out`` is
    ``(..., q)``. Returns the new weights.
    """
    xin = x[..., :, None]
    sout = out[..., None, :]
    fin_in = xin != INF
    fin_out = sout != INF
    both = fin_in & fin_out
    fp = inc.f_plus(W)
    fm = inc.f_minus(W)
    delta = np.zeros(W.shape, dtype=np.int64)
    delta = np.where(both & (xin <= sout), fp, delta)
    delta = np.where(both & (xin > sout), -fm, delta)
    delta = np.where(fin_in & ~fin_out, inc.search, delta)
    delta = np.where(~fin_in & fin_out, -fm, delta)
    return np.clip(W + delta, 0, inc.raw_max).astype(W.dtype)


# ---------------------------------------------------------------------------
# single column reference
# ---------------------------------------------------------------------------

@dataclass
class Column:
    params: ColumnParams
    W: np.ndarray = field(default=None)

    def __post_init__(self):
        p, q = self.params.p, self.params.q
        if self.W is None:
            self.W = np.full((p, q), self.params.raw_half, dtype=WEIGHT_DTYPE)
        else:
            self.W = np.asarray(self.W, dtype=WEIGHT_DTYPE)
            if self.W.shape != (p, q):
                raise ValueError(f"weight matrix must be {(p, q)}, got {self.W.shape}")
            if self.W.min() < 0 or self.W.max() > self.params.raw_max:
                raise ValueError("weights outside [0, w_max]")

    def copy(self) -> "Column":
        return Column(self.params, self.W.copy())

    @property
    def integer_weights(self) -> np.ndarray:
        return self.W >> self.params.frac_bits

    def excite(self, x) -> np.ndarray:
        prm = self.params
        x = np.asarray(x, dtype=TIME_DTYPE)
        if x.shape != (prm.p,):
            raise ValueError(f"expected volley of width {prm.p}")
        wi = self.integer_weights
        return np.array(
            [fire_time(wi[:, j], x, prm.theta, prm.neuron_model, t_limit=prm.tau_max)
             for j in range(prm.q)],
            dtype=TIME_DTYPE,
        )

    def learn(self, x, out) -> None:
        self.W = stdp_dense(self.W, np.asarray(x, TIME_DTYPE), np.asarray(out, TIME_DTYPE),
                            self.params.increments())

    def infer_and_learn(self, x, learning: bool = True) -> np.ndarray:
        x = normalize_local_time(x)
        y = self.excite(x)
        z = wta(y)
        if learning:
            self.learn(x, z if self.params.stdp_gate is StdpGate.POST_WTA else y)
        return z


def excite(col: Column, x) -> np.ndarray:
    return col.excite(x)


def stdp_update(col: Column, x, out) -> Column:
    """Return a copy of ``col`` with one STDP step applied."""
    new = col.copy()
    new.learn(x, out)
    return new


def infer_and_learn(col: Column, x, learning: bool = True) -> np.ndarray:
    return col.infer_and_learn(x, learning)


# ---------------------------------------------------------------------------
# batched layer engine
# ---------------------------------------------------------------------------

@dataclass
class LayerOutput:
    winner: np.ndarray   # (C,) neuron index, -1 when the column is silent
    time: np.ndarray     # (C,) winner spike time, INF when silent
    y: np.ndarray | None = None  # (C, q) pre-WTA times, kept for PRE_WTA


class ColumnLayer:
    """A grid of ``n_columns`` columns sharing one :class:`ColumnParams`.

    Inputs arrive in sparse form: for each column, ``K`` candidate lines
    (``lines``, shape ``(C, K)``) with their spike times (``times``; ``INF``
    marks an unused slot). Lines within a column must be distinct.
    """

    def __init__(self, params: ColumnParams, n_columns: int, W: np.ndarray | None = None):
        self.params = params
        self.n_columns = n_columns
        self.inc = params.increments()
        shape = (n_columns, params.p, params.q)
        if W is None:
            self.W = np.full(shape, params.raw_half, dtype=WEIGHT_DTYPE)
        else:
            if W.shape != shape:
                raise ValueError(f"weights must be {shape}, got {W.shape}")
            self.W = np.ascontiguousarray(W, dtype=WEIGHT_DTYPE)

    @property
    def n_synapses(self) -> int:
        return self.W.size

    def column(self, c: int) -> Column:
        return Column(self.params, self.W[c].copy())

    # -- inference ----------------------------------------------------------

    @staticmethod
    def normalize(times: np.ndarray) -> np.ndarray:
        finite = times != INF
        mn = np.where(finite, times, INF).min(axis=1, keepdims=True)
        return np.where(finite, times - np.where(mn == INF, 0, mn), INF).astype(TIME_DTYPE)

    def excite(self, lines: np.ndarray, times: np.ndarray, sl: slice = slice(None)) -> np.ndarray:
        """Pre-WTA output times ``(C, q)``; inputs are normalized here."""
        prm = self.params
        W = self.W[sl]
        y = np.empty((W.shape[0], prm.q), dtype=TIME_DTYPE)
        _excite_kernel(W, np.ascontiguousarray(lines, dtype=np.int64),
                       np.ascontiguousarray(times, dtype=TIME_DTYPE), prm.frac_bits, prm.theta,
                       prm.tau_max, prm.neuron_model is NeuronModel.RIF, y)
        return y

    @staticmethod
    def wta(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        winner = np.argmin(y, axis=1)
        tz = y[np.arange(y.shape[0]), winner]
        silent = tz == INF
        return np.where(silent, -1, winner), tz

    def infer(self, lines, times, sl: slice = slice(None)) -> LayerOutput:
        y = self.excite(lines, times, sl)
        winner, tz = self.wta(y)
        return LayerOutput(winner, tz, y)

    # -- learning -----------------------------------------------------------

    def learn(self, lines, times, out: LayerOutput, sl: slice = slice(None)) -> None:
        if self.params.stdp_gate is StdpGate.POST_WTA:
            self._learn_post_wta(lines, times, out.winner, out.time, sl)
        else:
            self._learn_dense(lines, self.normalize(times), out.y, sl)

    def dense_inputs(self, lines, times) -> np.ndarray:
        C = lines.shape[0]
        X = np.full((C, self.params.p), INF, dtype=TIME_DTYPE)
        valid = times != INF
        r, k = np.nonzero(valid)
        X[r, lines[r, k]] = times[r, k]
        return X

    def _learn_dense(self, lines, times, out_times, sl):
        X = self.dense_inputs(lines, times)
        W = self.W[sl]
        W[...] = stdp_dense(W, X, out_times, self.inc)

    def _learn_post_wta(self, lines, times, winner, tz, sl):
        inc = self.inc
        _learn_post_wta_kernel(self.W[sl], np.ascontiguousarray(lines, dtype=np.int64),
                               np.ascontiguousarray(times, dtype=TIME_DTYPE),
                               np.ascontiguousarray(winner, dtype=np.int64),
                               np.ascontiguousarray(tz, dtype=TIME_DTYPE),
                               inc.plus, inc.plus_half, inc.minus, inc.minus_half,
                               inc.search, inc.half, inc.raw_max)


# ---------------------------------------------------------------------------
# compiled kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _local_origin(times, c):
    mn = INF
    for k in range(times.shape[1]):
        if times[c, k] < mn:
            mn = times[c, k]
    return 0 if mn == INF else mn


@njit(cache=True)
def _excite_kernel(W, lines, times, shift, theta, tau_max, rif, y):
    C, K = lines.shape
    q = W.shape[2]
    xs = np.empty(K, dtype=np.int64)
    ws = np.empty(K, dtype=np.int64)
    for c in range(C):
        t0 = _local_origin(times, c)
        n = 0
        for k in range(K):
            if times[c, k] != INF:
                xs[n] = times[c, k] - t0
                n += 1
        for j in range(q):
            y[c, j] = INF
            ceiling = 0
            m = 0
            for k in range(K):
                if times[c, k] != INF:
                    ws[m] = W[c, lines[c, k], j] >> shift
                    ceiling += ws[m]
                    m += 1
            if ceiling < theta:
                continue
            for t in range(tau_max):
                pot = 0
                for k in range(n):
                    dt = t - xs[k]
                    if dt < 0:
                        continue
                    if rif and dt + 1 < ws[k]:
                        pot += dt + 1
                    else:
                        pot += ws[k]
                if pot >= theta:
                    y[c, j] = t
                    break


@njit(cache=True)
def _learn_post_wta_kernel(W, lines, times, winner, tz, plus, plus_half, minus, minus_half,
                           search, half, raw_max):
    C, K = lines.shape
    p = W.shape[1]
    q = W.shape[2]
    for c in range(C):
        t0 = _local_origin(times, c)
        j0 = winner[c]
        # search mode: spiking lines of every neuron without an output spike
        if search > 0:
            for k in range(K):
                if times[c, k] == INF:
                    continue
                i = lines[c, k]
                for j in range(q):
                    if j != j0:
                        v = W[c, i, j] + search
                        W[c, i, j] = v if v < raw_max else raw_max
        if j0 < 0:
            continue
        zt = tz[c]
        for i in range(p):
            w = W[c, i, j0]
            spike = INF
            for k in range(K):
                if lines[c, k] == i and times[c, k] != INF:
                    spike = times[c, k] - t0
            if spike != INF and spike <= zt:
                v = w + (plus if w >= half else plus_half)
            else:
                v = w - (minus if w < half else minus_half)
            if v < 0:
                v = 0
            elif v > raw_max:
                v = raw_max
            W[c, i, j0] = v
