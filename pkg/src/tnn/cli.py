"""Command-line driver.

Subcommands::

    tnn run      stream MNIST through a network, write intervals.csv,
                 manifest.json, checkpoint.bin and (optionally) snapshot.npz
    tnn ablate   paired runs over one dimension (neuron | voters)
    tnn analyze  c_conv or RBF profiles from a run's snapshot
    tnn replay   re-run a manifest and check every artifact byte-for-byte

Exit codes: 0 success, 1 usage, 2 data error, 3 config error, 4 replay
mismatch.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import yaml

from . import __version__, checkpoint
from .checkpoint import CheckpointError
from .config import ConfigError, NetworkConfig, preset
from .encode import STREAMS, DataError, StreamSpec, build_stream, file_sha256, load_many
from .metrics import (ClusterSnapshot, IntervalTracker, SnapshotRecorder, centroid_convergence,
                      decimal6, frac_str, rbf_profile, windowed_rate, write_cconv_csv,
                      write_intervals_csv, write_rbf_csv)
from .network import Network, run

log = logging.getLogger("tnn")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CONFIG, EXIT_MISMATCH = 0, 1, 2, 3, 4

INTERVALS = "intervals.csv"
MANIFEST = "manifest.json"
CHECKPOINT = "checkpoint.bin"
SNAPSHOT = "snapshot.npz"

DEFAULT_SNAPSHOT_WINDOW = (60_000, 70_000)
# layer-2 columns see 5x5 pixel fields; these three sit on the vertical
# midline near the top, centre and bottom of the image
DEFAULT_PROBES = ((2, 131), (2, 275), (2, 419))
DEFAULT_FINAL_WINDOW = 10_000

MNIST_FILES = (("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
               ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"))


class UsageError(Exception):
    pass


class ReplayMismatch(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# experiment plumbing (also used by the test suite)
# ---------------------------------------------------------------------------

@dataclass
class RunOutcome:
    tracker: IntervalTracker
    position: int
    manifest: dict
    snapshot: ClusterSnapshot | None


def parse_window(text: str | None) -> tuple[int, int] | None:
    if text is None or text.lower() == "none":
        return None
    try:
        a, b = (int(v) for v in text.replace("-", ":").split(":"))
    except ValueError:
        raise UsageError(f"window must look like START:END, got {text!r}") from None
    if not 0 <= a < b:
        raise UsageError(f"empty window {text!r}")
    return a, b


def parse_probes(text: str) -> list[tuple[int, int]]:
    probes = []
    for tok in text.split(","):
        try:
            layer, col = tok.strip().split(":")
            probes.append((int(layer), int(col)))
        except ValueError:
            raise UsageError(f"probe must look like LAYER:COLUMN, got {tok!r}") from None
    return probes


def parse_overrides(items: Sequence[str]) -> dict:
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = yaml.safe_load(val)
    return out


def resolve_config(config_path=None, preset_name=None, overrides: dict | None = None) -> NetworkConfig:
    if config_path and preset_name:
        raise UsageError("give --config or --preset, not both")
    if config_path:
        try:
            cfg = NetworkConfig.load(config_path)
        except OSError as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
    else:
        cfg = preset(preset_name or "ecvt")
    if overrides:
        try:
            cfg = cfg.with_overrides(**overrides)
        except TypeError as exc:
            raise ConfigError(f"bad override: {exc}") from exc
    return cfg


def resolve_data_paths(images: Sequence[str] | None, labels: Sequence[str] | None) -> tuple[list, list]:
    images, labels = list(images or []), list(labels or [])
    if not images and not labels and os.environ.get("MNIST_DIR"):
        root = Path(os.environ["MNIST_DIR"])
        images = [str(root / i) for i, _ in MNIST_FILES]
        labels = [str(root / l) for _, l in MNIST_FILES]
    if not images or len(images) != len(labels):
        raise UsageError("give matching --images/--labels pairs (or set MNIST_DIR)")
    return images, labels


def load_data(images, labels):
    try:
        return load_many(images, labels)
    except FileNotFoundError as exc:
        raise DataError(str(exc)) from exc


def build_manifest(cfg: NetworkConfig, stream_name: str, spec: StreamSpec, images, labels,
                   end: int, interval: int, snapshot_window, overrides: dict,
                   checkpoint_every: int | None, artifacts: dict[str, str], out: Path) -> dict:
    return {
        "tool": "tnn",
        "version": __version__,
        "config": cfg.to_dict(),
        "overrides": overrides,
        "stream": {"name": stream_name, **spec.to_dict()},
        "data": [{"images": str(i), "labels": str(l),
                  "images_sha256": file_sha256(i), "labels_sha256": file_sha256(l)}
                 for i, l in zip(images, labels)],
        "start": 0,
        "end": end,
        "interval": interval,
        "checkpoint_every": checkpoint_every,
        "snapshot_window": list(snapshot_window) if snapshot_window else None,
        "artifacts": {k: {"path": v, "sha256": file_sha256(out / v)} for k, v in sorted(artifacts.items())},
    }


def run_experiment(cfg: NetworkConfig, data, out, stream: str = "1phase", images=(), labels=(),
                   workers: int = 1, interval: int = 1000, limit: int | None = None,
                   checkpoint_every: int | None = None, snapshot_window=DEFAULT_SNAPSHOT_WINDOW,
                   overrides: dict | None = None, resume=None) -> RunOutcome:
    """Run ``cfg`` over a stream and write all artifacts into ``out``."""
    spec = STREAMS[stream]
    end = spec.total if limit is None else min(limit, spec.total)
    if len(data) < end:
        raise DataError(f"stream needs {end} images, dataset has {len(data)}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    net = Network(cfg, workers=workers)
    tracker = IntervalTracker(interval)
    start = 0
    if resume is not None:
        ck = checkpoint.load(resume)
        start = checkpoint.restore(net, ck)
        tracker = IntervalTracker.from_state(ck.extra["tracker"])
        if tracker.interval != interval:
            raise ConfigError(f"checkpoint used interval {tracker.interval}, not {interval}")
    window = None
    if snapshot_window and snapshot_window[0] < end:
        window = (snapshot_window[0], min(snapshot_window[1], end))
    recorder = SnapshotRecorder(net, *window) if window else None

    def sink(result, frame):
        rec = tracker.record(result, frame.label)
        if rec is not None:
            log.info("%s %d: interval error %s, cumulative %s", cfg.name, rec.interval_end,
                     decimal6(rec.error_rate), decimal6(rec.cumulative_rate))
        if recorder is not None:
            recorder(result, frame)

    def save_ckpt(pos):
        checkpoint.save(out / CHECKPOINT, net, pos, {"tracker": tracker.state()})

    frames = build_stream(spec, data, cfg.binarize_threshold, start, end)
    try:
        pos = run(net, frames, sink, checkpoint_every=checkpoint_every, on_checkpoint=save_ckpt,
                  position=start)
    finally:
        net.close()
    tracker.flush()
    write_intervals_csv(out / INTERVALS, tracker.records)
    save_ckpt(pos)
    artifacts = {"intervals": INTERVALS, "checkpoint": CHECKPOINT}
    snap = None
    if recorder is not None and len(recorder):
        snap = recorder.snapshot()
        snap.save(out / SNAPSHOT)
        artifacts["snapshot"] = SNAPSHOT
    manifest = build_manifest(cfg, stream, spec, images, labels, pos, interval, snapshot_window,
                              overrides or {}, checkpoint_every, artifacts, out)
    if resume is not None:
        manifest["resumed_from"] = start
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return RunOutcome(tracker, pos, manifest, snap)


def final_window(tracker: IntervalTracker, window: int, decoder: str | None = None) -> Fraction:
    end = tracker.position
    return windowed_rate(tracker.records, max(0, end - window), end, decoder)


def write_comparison_csv(path, rows: list[tuple[str, Fraction, int]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variant", "inputs", "final_error_rate", "final_error_rate_exact"])
        for name, rate, n in rows:
            w.writerow([name, n, decimal6(rate), frac_str(rate)])


def analyze(kind: str, run_dir, out=None, probes=DEFAULT_PROBES, metric: str = "sad") -> Path:
    run_dir = Path(run_dir)
    snap_path = run_dir / SNAPSHOT
    if not snap_path.is_file():
        raise DataError(f"{run_dir} has no {SNAPSHOT}; rerun `tnn run` with a --snapshot-window "
                        "that overlaps the stream")
    snap = ClusterSnapshot.load(snap_path)
    out = Path(out) if out else run_dir
    out.mkdir(parents=True, exist_ok=True)
    if kind == "cconv":
        results = [centroid_convergence(snap, n, metric) for n in range(snap.n_layers)]
        path = out / "cconv.csv"
        write_cconv_csv(path, results)
    else:
        profiles = []
        for layer, col in probes:
            if not 1 <= layer <= snap.n_layers or not 0 <= col < snap.n_columns(layer - 1):
                raise UsageError(f"probe {layer}:{col} is outside the network")
            profiles.append(rbf_profile(snap, layer - 1, col, f"L{layer}C{col}"))
        path = out / "rbf.csv"
        write_rbf_csv(path, profiles)
    return path


def replay(manifest_path, out, images=None, labels=None, workers: int = 1) -> RunOutcome:
    """Re-run a manifest into ``out`` and compare artifacts byte-for-byte."""
    manifest_path = Path(manifest_path)
    try:
        m = json.loads(manifest_path.read_text())
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read manifest {manifest_path}: {exc}") from exc
    cfg = NetworkConfig.from_dict(m["config"])
    images = images or [d["images"] for d in m["data"]]
    labels = labels or [d["labels"] for d in m["data"]]
    for d, i, l in zip(m["data"], images, labels):
        if file_sha256(i) != d["images_sha256"] or file_sha256(l) != d["labels_sha256"]:
            raise DataError(f"dataset checksum differs from manifest for {i} / {l}")
    data = load_data(images, labels)
    window = tuple(m["snapshot_window"]) if m["snapshot_window"] else None
    res = run_experiment(cfg, data, out, m["stream"]["name"], images, labels, workers,
                         m["interval"], m["end"], m["checkpoint_every"], window, m["overrides"])
    bad = [k for k, a in m["artifacts"].items()
           if res.manifest["artifacts"].get(k, {}).get("sha256") != a["sha256"]]
    if bad:
        raise ReplayMismatch(f"replayed artifacts differ: {', '.join(sorted(bad))}")
    return res


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML network config")
    p.add_argument("--preset", choices=["ecvt", "eccvt", "ecccvt"], help="built-in network (default ecvt)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field, e.g. neuron_model=if or voter_mode=lo")
    p.add_argument("--stream", choices=sorted(STREAMS), default="1phase")
    p.add_argument("--images", action="append", help="IDX images file (repeat; order defines the stream)")
    p.add_argument("--labels", action="append", help="IDX labels file (repeat, paired with --images)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=1, help="column-parallel threads (outputs do not change)")
    p.add_argument("--checkpoint-every", type=int, default=None, metavar="N")
    p.add_argument("--snapshot-window", default="60000:70000", metavar="START:END",
                   help="inputs whose cluster ids are captured for analysis ('none' to disable)")
    p.add_argument("--interval", type=int, default=1000, help="inputs per error-rate interval")
    p.add_argument("--limit", type=int, default=None, help="stop after this many inputs")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="tnn", description="Temporal neural network simulator")
    ap.add_argument("--version", action="version", version=f"tnn {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log each interval")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="stream a dataset through a network")
    _run_flags(p)
    p.add_argument("--resume", help="continue from a checkpoint written by an earlier run")

    p = sub.add_parser("ablate", help="paired runs over one dimension")
    p.add_argument("dimension", choices=["neuron", "voters"])
    _run_flags(p)
    p.add_argument("--final-window", type=int, default=DEFAULT_FINAL_WINDOW,
                   help="inputs at the end of the stream used for the comparison")

    p = sub.add_parser("analyze", help="c_conv or RBF profiles from a run directory")
    p.add_argument("kind", choices=["cconv", "rbf"])
    p.add_argument("run_dir")
    p.add_argument("--out", help="output directory (default: the run directory)")
    p.add_argument("--probes", default=",".join(f"{l}:{c}" for l, c in DEFAULT_PROBES),
                   help="LAYER:COLUMN list for rbf (layers counted from 1)")
    p.add_argument("--metric", choices=["sad", "euclid"], default="sad")

    p = sub.add_parser("replay", help="re-run a manifest and verify its artifacts")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--images", action="append")
    p.add_argument("--labels", action="append")
    p.add_argument("--workers", type=int, default=1)
    return ap


def _cmd_run(args) -> None:
    overrides = parse_overrides(args.set)
    cfg = resolve_config(args.config, args.preset, overrides)
    window = parse_window(args.snapshot_window)
    images, labels = resolve_data_paths(args.images, args.labels)
    data = load_data(images, labels)
    res = run_experiment(cfg, data, args.out, args.stream, images, labels, args.workers, args.interval,
                         args.limit, args.checkpoint_every, window, overrides,
                         resume=getattr(args, "resume", None))
    print(f"{cfg.name}: {res.position} inputs, {len(res.tracker.records)} intervals -> {args.out}")


def _cmd_ablate(args) -> None:
    overrides = parse_overrides(args.set)
    base = resolve_config(args.config, args.preset, overrides)
    window = parse_window(args.snapshot_window)
    images, labels = resolve_data_paths(args.images, args.labels)
    data = load_data(images, labels)
    out = Path(args.out)
    rows = []

    def one(name, cfg, extra):
        res = run_experiment(cfg, data, out / name, args.stream, images, labels, args.workers,
                             args.interval, args.limit, args.checkpoint_every, window,
                             {**overrides, **extra})
        return res

    if args.dimension == "neuron":
        for model in ("rif", "if"):
            res = one(model, base.with_overrides(neuron_model=model), {"neuron_model": model})
            rows.append((model, final_window(res.tracker, args.final_window), res.position))
    else:
        # voters never feed back into the columns, so single-bank predictions
        # come from the same run as the combined tally
        res = one("both", base.with_overrides(voter_mode="both"), {"voter_mode": "both"})
        rows.append(("hi+lo", final_window(res.tracker, args.final_window), res.position))
        for bank in ("lo", "hi"):
            rows.append((f"{bank}-only", final_window(res.tracker, args.final_window, bank), res.position))
    write_comparison_csv(out / "comparison.csv", rows)
    for name, rate, _ in rows:
        print(f"{name}: final {args.final_window} error {decimal6(rate)}")


def _cmd_analyze(args) -> None:
    path = analyze(args.kind, args.run_dir, args.out, parse_probes(args.probes), args.metric)
    print(f"wrote {path}")


def _cmd_replay(args) -> None:
    res = replay(args.manifest, args.out, args.images, args.labels, args.workers)
    print(f"replay matched {len(res.manifest['artifacts'])} artifacts")


COMMANDS = {"run": _cmd_run, "ablate": _cmd_ablate, "analyze": _cmd_analyze, "replay": _cmd_replay}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"tnn: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CheckpointError) as exc:
        print(f"tnn: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConfigError as exc:
        print(f"tnn: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ReplayMismatch as exc:
        print(f"tnn: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
