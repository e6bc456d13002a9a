"""Temporal primitives: spike times, volleys, fixed-point weights, response
functions and neuron firing-time computation.

Spike times are plain integers. ``INF`` is a sentinel strictly greater than
every finite time and stands for "no spike in this gamma cycle". A volley is a
1-D ``int32`` numpy array of spike times.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

INF: int = int(np.iinfo(np.int32).max)

TIME_DTYPE = np.int32

DEFAULT_FRAC_BITS = 10
DEFAULT_W_MAX = 8
DEFAULT_TAU_MAX = 8


class NeuronModel(str, enum.Enum):
    """Response function selector: ramp (RIF / rnl) or step (IF / snl)."""

    RIF = "rif"
    IF = "if"


@dataclass(frozen=True)
class GammaParams:
    tau_max: int = DEFAULT_TAU_MAX
    neuron_model: NeuronModel = NeuronModel.RIF

    def __post_init__(self):
        if self.tau_max < 2:
            raise ValueError(f"tau_max must be >= 2, got {self.tau_max}")


def is_inf(t) -> bool:
    return int(t) == INF


def volley(times: Iterable) -> np.ndarray:
    """Build a volley from an iterable of ints; ``None``, ``INF`` and
    ``float('inf')`` all mean no spike."""
    out = []
    for t in times:
        if t is None or t == INF or t == float("inf"):
            out.append(INF)
        else:
            t = int(t)
            if t < 0:
                raise ValueError(f"spike times are non-negative, got {t}")
            out.append(t)
    return np.asarray(out, dtype=TIME_DTYPE)


def all_inf(n: int) -> np.ndarray:
    return np.full(n, INF, dtype=TIME_DTYPE)


# ---------------------------------------------------------------------------
# response functions
# ---------------------------------------------------------------------------

def rnl_response(w: int, t: int) -> int:
    """Ramp-no-leak response: 0 before the spike, then rises by one per time
    unit until it saturates at ``w``."""
    if t < 0:
        return 0
    return t + 1 if t < w else w


def snl_response(w: int, t: int) -> int:
    """Step-no-leak response: jumps to ``w`` at the spike and stays there."""
    return 0 if t < 0 else w


def response_fn(model: NeuronModel):
    return rnl_response if NeuronModel(model) is NeuronModel.RIF else snl_response


def body_potential(weights: Sequence[int], x: Sequence[int], t: int,
                   model: NeuronModel = NeuronModel.RIF) -> int:
    """Sum of time-shifted responses at local time ``t``.

    ``weights`` are the integer parts of the synaptic weights. Lines without
    a spike contribute nothing.
    """
    if len(weights) != len(x):
        raise ValueError("weights and volley differ in length")
    rho = response_fn(model)
    total = 0
    for w, xi in zip(weights, x):
        if xi == INF:
            continue
        total += rho(int(w), t - int(xi))
    return total


def fire_time(weights: Sequence[int], x: Sequence[int], theta: int,
              model: NeuronModel = NeuronModel.RIF, t_limit: int | None = None) -> int:
    """Smallest local time at which the body potential reaches ``theta``.

    Returns ``INF`` when the potential never gets there. No-leak potentials
    are non-decreasing and saturate once every response has, so the search
    stops at ``max finite x + max w``. With ``t_limit`` set (the gamma cycle
    length), a spike at or after ``t_limit`` is reported as ``INF``.
    """
    if theta < 1:
        raise ValueError("theta must be >= 1")
    finite = [int(xi) for xi in x if xi != INF]
    if not finite:
        return INF
    ceiling = sum(int(w) for w, xi in zip(weights, x) if xi != INF)
    if ceiling < theta:
        return INF
    horizon = max(finite) + max(int(w) for w in weights)
    if t_limit is not None:
        horizon = min(horizon, t_limit - 1)
    for t in range(horizon + 1):
        if body_potential(weights, x, t, model) >= theta:
            return t
    return INF


# ---------------------------------------------------------------------------
# volley transforms
# ---------------------------------------------------------------------------

def normalize_local_time(x: Sequence[int]) -> np.ndarray:
    """Shift so the first spike lands at t = 0. All-INF volleys pass through."""
    x = np.asarray(x, dtype=TIME_DTYPE)
    finite = x != INF
    if not finite.any():
        return x.copy()
    out = x.copy()
    out[finite] -= x[finite].min()
    return out


def binarize(x: Sequence[int]) -> np.ndarray:
    x = np.asarray(x, dtype=TIME_DTYPE)
    return np.where(x == INF, INF, 0).astype(TIME_DTYPE)


# ---------------------------------------------------------------------------
# fixed point
# ---------------------------------------------------------------------------

def to_raw(value, frac_bits: int = DEFAULT_FRAC_BITS) -> int:
    """Exact conversion of a rational to a count of ``2**-frac_bits`` units.

    Raises ``ValueError`` if ``value`` is not representable.
    """
    v = Fraction(value) * (1 << frac_bits)
    if v.denominator != 1:
        raise ValueError(f"{Fraction(value)} is not representable with {frac_bits} fractional bits")
    return int(v)


@dataclass(frozen=True)
class FixedWeight:
    """Saturating weight in ``[0, w_max]`` held as ``raw`` units of
    ``2**-frac_bits``."""

    raw: int
    frac_bits: int = DEFAULT_FRAC_BITS
    w_max: int = DEFAULT_W_MAX

    def __post_init__(self):
        if not 0 <= self.raw <= self.raw_max:
            raise ValueError(f"raw weight {self.raw} outside [0, {self.raw_max}]")

    @classmethod
    def from_value(cls, value, frac_bits: int = DEFAULT_FRAC_BITS, w_max: int = DEFAULT_W_MAX):
        return cls(to_raw(value, frac_bits), frac_bits, w_max)

    @property
    def raw_max(self) -> int:
        return self.w_max << self.frac_bits

    @property
    def integer(self) -> int:
        return self.raw >> self.frac_bits

    @property
    def value(self) -> Fraction:
        return Fraction(self.raw, 1 << self.frac_bits)

    def __int__(self):
        return self.integer


def saturating_add(w: FixedWeight, delta) -> FixedWeight:
    """Add a signed increment, given in weight units (``Fraction`` or int),
    and clamp to ``[0, w_max]``."""
    d = to_raw(delta, w.frac_bits)
    raw = min(max(w.raw + d, 0), w.raw_max)
    return FixedWeight(raw, w.frac_bits, w.w_max)


def saturating_add_raw(raw, delta_raw, raw_max: int):
    """Array form of :func:`saturating_add` on raw counts."""
    return np.clip(raw + delta_raw, 0, raw_max)
