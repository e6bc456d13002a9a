import csv
import json

import pytest

from tnn.cli import main
from tnn.config import preset


@pytest.fixture
def data_args(synth_idx):
    img, lab = synth_idx
    return ["--images", img, "--labels", lab]


def run_cli(*argv):
    return main([str(a) for a in argv])


def test_run_writes_artifacts(tmp_path, data_args):
    out = tmp_path / "r"
    assert run_cli("run", "--preset", "ecvt", *data_args, "--out", out, "--limit", 400,
                   "--interval", 100, "--snapshot-window", "200:400") == 0
    rows = list(csv.DictReader(open(out / "intervals.csv")))
    assert [int(r["interval_end"]) for r in rows] == [100, 200, 300, 400]
    m = json.loads((out / "manifest.json").read_text())
    assert m["end"] == 400 and m["config"] == preset("ecvt").to_dict()
    assert {a["path"] for a in m["artifacts"].values()} == {"intervals.csv", "checkpoint.bin", "snapshot.npz"}
    assert "time" not in json.dumps(m).replace("binarize_threshold", "")


def test_missing_data_leaves_no_output(tmp_path):
    out = tmp_path / "r"
    rc = run_cli("run", "--images", tmp_path / "nope", "--labels", tmp_path / "nope2", "--out", out)
    assert rc == 2 and not out.exists()


def test_exit_codes(tmp_path, data_args):
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: x\nlayers: []\n")
    assert run_cli("run", "--config", bad, *data_args, "--out", tmp_path / "o") == 3
    assert run_cli("run", "--preset", "ecvt", "--set", "voter_mode=seven", *data_args, "--out", tmp_path / "o") == 3
    assert run_cli("run", "--config", bad, "--preset", "ecvt", *data_args, "--out", tmp_path / "o") == 1
    with pytest.raises(SystemExit) as exc:
        run_cli("ablate", "colour", *data_args, "--out", tmp_path / "o")
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        run_cli("frobnicate")
    assert exc.value.code == 1
    assert run_cli("analyze", "cconv", tmp_path) == 2


def test_config_file_and_overrides(tmp_path, data_args):
    cfg = tmp_path / "c.yaml"
    preset("ecvt").save(cfg)
    out = tmp_path / "r"
    assert run_cli("run", "--config", cfg, "--set", "neuron_model=if", *data_args, "--out", out,
                   "--limit", 50, "--snapshot-window", "none") == 0
    m = json.loads((out / "manifest.json").read_text())
    assert m["config"]["neuron_model"] == "if" and m["overrides"] == {"neuron_model": "if"}


def test_workers_and_resume_are_byte_identical(tmp_path, data_args):
    common = ["--preset", "eccvt", *data_args, "--limit", 300, "--interval", 50, "--snapshot-window", "none"]
    assert run_cli("run", *common, "--out", tmp_path / "w1") == 0
    assert run_cli("run", *common, "--out", tmp_path / "w3", "--workers", 3) == 0
    half = ["--preset", "eccvt", *data_args, "--limit", 150, "--interval", 50, "--snapshot-window", "none"]
    assert run_cli("run", *half, "--out", tmp_path / "a") == 0
    assert run_cli("run", *common, "--out", tmp_path / "b", "--resume", tmp_path / "a" / "checkpoint.bin") == 0
    for name in ("intervals.csv", "checkpoint.bin"):
        ref = (tmp_path / "w1" / name).read_bytes()
        assert (tmp_path / "w3" / name).read_bytes() == ref
        assert (tmp_path / "b" / name).read_bytes() == ref


def test_replay_reproduces_and_detects_drift(tmp_path, data_args):
    out = tmp_path / "r"
    assert run_cli("run", "--preset", "ecvt", *data_args, "--out", out, "--limit", 120,
                   "--snapshot-window", "60:120", "--checkpoint-every", 40) == 0
    assert run_cli("replay", out / "manifest.json", "--out", tmp_path / "again") == 0
    for name in ("intervals.csv", "checkpoint.bin", "snapshot.npz", "manifest.json"):
        assert (out / name).read_bytes() == (tmp_path / "again" / name).read_bytes()
    m = json.loads((out / "manifest.json").read_text())
    m["artifacts"]["intervals"]["sha256"] = "0" * 64
    (tmp_path / "tampered.json").write_text(json.dumps(m))
    assert run_cli("replay", tmp_path / "tampered.json", "--out", tmp_path / "t") == 4


def test_analyze_outputs(tmp_path, data_args):
    out = tmp_path / "r"
    assert run_cli("run", "--preset", "eccvt", *data_args, "--out", out, "--limit", 100,
                   "--snapshot-window", "50:100") == 0
    assert run_cli("analyze", "cconv", out) == 0
    rows = list(csv.DictReader(open(out / "cconv.csv")))
    agg = [r for r in rows if r["column_id"] == "all"]
    assert [r["layer"] for r in agg] == ["1", "2"]
    assert run_cli("analyze", "rbf", out, "--probes", "2:131,2:275,1:5") == 0
    rows = list(csv.DictReader(open(out / "rbf.csv")))
    assert {r["probe_id"] for r in rows} <= {"L2C131", "L2C275", "L1C5"}
    assert all(0 <= int(r["spike_time"]) < 8 for r in rows)
    assert run_cli("analyze", "rbf", out, "--probes", "3:1") == 1


@pytest.mark.parametrize("dim,variants", [("voters", ["hi+lo", "lo-only", "hi-only"]), ("neuron", ["rif", "if"])])
def test_ablate(tmp_path, data_args, dim, variants):
    out = tmp_path / dim
    assert run_cli("ablate", dim, "--preset", "ecvt", *data_args, "--out", out, "--limit", 200,
                   "--interval", 50, "--final-window", 100, "--snapshot-window", "none") == 0
    rows = list(csv.DictReader(open(out / "comparison.csv")))
    assert [r["variant"] for r in rows] == variants
