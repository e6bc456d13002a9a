"""Topology construction and gamma-cycle execution of an EC..CVT network.

Layer 1 has one column per 3x3 pixel field. A column at ``(i, j)`` of any
later layer reads the cluster-id bundles of the previous layer's columns at
the four corners of the 3x3 window ``(i, j)``, ``(i, j+2)``, ``(i+2, j)``,
``(i+2, j+2)``, so it sees ``4 * q_prev`` lines.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .column import ColumnLayer, LayerOutput
from .config import NetworkConfig
from .core import INF, TIME_DTYPE
from .decode import NO_PREDICTION, VoterLayer, tally_counts
from .encode import CORNERS, Frame

log = logging.getLogger(__name__)


def corner_sources(grid: int) -> np.ndarray:
    """Source columns of every column in the next layer, shape
    ``((grid-2)**2, 4)``, corners row-major."""
    g = grid - 2
    if g < 1:
        raise ValueError(f"grid {grid} is too small for another layer")
    i, j = np.meshgrid(np.arange(g), np.arange(g), indexing="ij")
    return np.stack([(i + dr) * grid + (j + dc) for dr, dc in CORNERS], axis=-1).reshape(-1, 4)


@dataclass
class StepResult:
    prediction: int
    winners: tuple[int, ...]
    counts: np.ndarray
    tie: bool
    bank_counts: dict[str, np.ndarray]
    cids: list[tuple[np.ndarray, np.ndarray]]   # per layer: (winner, time)

    @property
    def no_prediction(self) -> bool:
        return self.prediction == NO_PREDICTION


class Network:
    def __init__(self, cfg: NetworkConfig, workers: int = 1):
        self.cfg = cfg
        self.workers = max(1, int(workers))
        self.layers: list[ColumnLayer] = []
        self.sources: list[np.ndarray | None] = []
        for n, ls in enumerate(cfg.layers):
            self.layers.append(ColumnLayer(cfg.column_params(n), ls.grid * ls.grid))
            self.sources.append(None if n == 0 else corner_sources(cfg.layers[n - 1].grid))
        last = self.layers[-1]
        self.voters: dict[str, VoterLayer] = {
            b: VoterLayer(cfg.voter_params(b), last.n_columns) for b in cfg.voter.banks
        }
        self._pool: ThreadPoolExecutor | None = None

    # -- bookkeeping ----------------------------------------------------------

    def synapse_counts(self) -> dict[str, int]:
        out = {f"layer{n + 1}": l.n_synapses for n, l in enumerate(self.layers)}
        for b, v in self.voters.items():
            out[f"voter_{b}"] = v.n_synapses
        out["total"] = sum(out.values())
        return out

    def state_arrays(self) -> list[tuple[str, np.ndarray]]:
        arrays = [(f"layer{n + 1}", l.W) for n, l in enumerate(self.layers)]
        arrays += [(f"voter_{b}", v.counters) for b, v in self.voters.items()]
        return arrays

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def _chunks(self, n: int) -> list[slice]:
        k = min(self.workers, n)
        bounds = np.linspace(0, n, k + 1).astype(int)
        return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]

    def _map(self, fn: Callable[[slice], object], n: int) -> list:
        if self.workers == 1:
            return [fn(slice(None))]
        if self._pool is None:
            self._pool = ThreadPoolExecutor(self.workers)
        return list(self._pool.map(fn, self._chunks(n)))

    # -- execution ------------------------------------------------------------

    def layer_inputs(self, n: int, frame_lines: np.ndarray, prev: LayerOutput | None):
        """Sparse ``(lines, times)`` for every column of layer ``n``."""
        if n == 0:
            return frame_lines.astype(np.int64), np.zeros(frame_lines.shape, dtype=TIME_DTYPE)
        src = self.sources[n]
        q_prev = self.layers[n - 1].params.q
        w = prev.winner[src]                                    # (C, 4)
        lines = np.arange(4)[None, :] * q_prev + np.maximum(w, 0)
        times = np.where(w >= 0, prev.time[src], INF).astype(TIME_DTYPE)
        return lines, times

    def _infer_layer(self, layer: ColumnLayer, lines, times) -> LayerOutput:
        parts = self._map(lambda sl: layer.infer(lines[sl], times[sl], sl), layer.n_columns)
        if len(parts) == 1:
            return parts[0]
        return LayerOutput(np.concatenate([p.winner for p in parts]),
                           np.concatenate([p.time for p in parts]),
                           np.concatenate([p.y for p in parts]))

    def _learn_layer(self, layer: ColumnLayer, lines, times, out: LayerOutput) -> None:
        def job(sl):
            sub = LayerOutput(out.winner[sl], out.time[sl], None if out.y is None else out.y[sl])
            layer.learn(lines[sl], times[sl], sub, sl)
        self._map(job, layer.n_columns)

    def forward(self, frame_lines: np.ndarray):
        inputs, outs = [], []
        prev = None
        for n, layer in enumerate(self.layers):
            lines, times = self.layer_inputs(n, frame_lines, prev)
            prev = self._infer_layer(layer, lines, times)
            inputs.append((lines, times))
            outs.append(prev)
        return inputs, outs

    def step(self, frame: Frame | np.ndarray, label: int | None = None, learning: bool = True) -> StepResult:
        """Infer, tally, then (if ``learning``) train columns and voters.

        The prediction is fixed before the label is looked at.
        """
        frame_lines = frame.lines if isinstance(frame, Frame) else np.asarray(frame)
        if label is None and isinstance(frame, Frame):
            label = frame.label
        inputs, outs = self.forward(frame_lines)
        last = outs[-1]
        bank_counts = {b: v.votes(last.winner, last.time) for b, v in self.voters.items()}
        counts = sum(bank_counts.values())
        t = tally_counts(counts)
        result = StepResult(t.prediction, t.winners, t.counts, t.tie, bank_counts,
                            [(o.winner, o.time) for o in outs])
        if learning:
            if label is None:
                raise ValueError("learning needs a label")
            for layer, (lines, times), out in zip(self.layers, inputs, outs):
                self._learn_layer(layer, lines, times, out)
            for v in self.voters.values():
                v.update(last.winner, last.time, label)
        return result


def build_topology(cfg: NetworkConfig, workers: int = 1) -> Network:
    return Network(cfg, workers=workers)


def run(net: Network, frames: Iterable[Frame], sink: Callable[[StepResult, Frame], None] | None = None,
        learning: bool = True, checkpoint_every: int | None = None,
        on_checkpoint: Callable[[int], None] | None = None, position: int = 0) -> int:
    """Stream frames through ``net`` in order. ``sink`` receives every result.

    Returns the stream position after the last frame. ``on_checkpoint`` is
    called with the position every ``checkpoint_every`` frames.
    """
    for frame in frames:
        result = net.step(frame, frame.label, learning=learning)
        position = frame.index + 1
        if sink is not None:
            sink(result, frame)
        if checkpoint_every and on_checkpoint and position % checkpoint_every == 0:
            on_checkpoint(position)
    return position
