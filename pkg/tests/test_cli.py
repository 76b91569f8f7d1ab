import json
import subprocess
import sys

import pytest

from cli_runs import digests, make_inputs, run_all
from synapsekit.cli import main
from synapsekit.volcore import PointSet, read_points, read_volume, write_points


@pytest.fixture(scope="module")
def inputs(tmp_path_factory):
    return make_inputs(tmp_path_factory.mktemp("inputs"))


@pytest.fixture(scope="module")
def outputs(inputs, tmp_path_factory):
    return run_all(inputs, tmp_path_factory.mktemp("run1"), 1)


def test_every_subcommand_writes_manifest(outputs):
    for prefix in ("synth", "targets", "det", "eval", "sim", "sweep/sweep"):
        doc = json.loads((outputs / f"{prefix}_manifest.json").read_text())
        assert doc["tool"] == "synapsekit"
        assert set(doc) >= {"config", "inputs", "outputs", "counts", "volatile"}


def test_make_targets_outputs(outputs):
    tgt = read_volume(outputs / "targets_pre_target")
    assert tgt.kind == "label" and tgt.shape == (48, 48, 48)
    w = read_volume(outputs / "targets_post_weights")
    assert w.data.min() > 0


def test_detect_recovers_synth(inputs, outputs):
    truth = read_points(str(inputs) + "_pre.csv", "pre")
    det = read_points(outputs / "det_pre.csv", "pre")
    assert len(det) == len(truth)
    doc = json.loads((outputs / "det_manifest.json").read_text())
    assert set(doc["thresholds"]) == {"pre", "post"}
    assert doc["config"]["detection"]["threshold"]["mode"] == "relative"


def test_evaluate_self_is_perfect(outputs):
    rep = json.loads((outputs / "eval_report.json").read_text())
    assert rep["f1_pre"] == rep["f1_post"] == rep["pairwise_f1"] == 1.0
    rows = (outputs / "eval_report.csv").read_text().splitlines()
    assert rows[0].startswith("volume,channel,tp") and len(rows) == 4


def test_similarity_outputs(outputs):
    lines = (outputs / "sim_matrix.csv").read_text().splitlines()
    assert lines[0] == "group,a,b"
    meta = json.loads((outputs / "sim_meta.json").read_text())
    assert meta["seed"] == 0 and meta["budget"] == 4 and meta["metric"] == "ssim"


def test_sweep_cells(outputs):
    summary = (outputs / "sweep" / "summary.csv").read_text().splitlines()
    assert len(summary) == 5
    assert len(list((outputs / "sweep").glob("cell_*_manifest.json"))) == 4


def test_threads_do_not_change_outputs(inputs, outputs, tmp_path):
    other = run_all(inputs, tmp_path / "run8", 8)
    assert digests(other) == digests(outputs)


def test_rerun_from_manifest(inputs, outputs, tmp_path):
    out = tmp_path / "again"
    assert main(["detect", str(inputs) + "_pre_prob", str(inputs) + "_post_prob",
                 "--config", str(outputs / "det_manifest.json"), "--out", str(out)]) == 0
    for suffix in ("_pre.csv", "_post.csv", "_pairs.json"):
        assert (tmp_path / f"again{suffix}").read_bytes() == (outputs / f"det{suffix}").read_bytes()
    assert main(["synth", "--config", str(outputs / "synth_manifest.json"),
                 "--out", str(tmp_path / "s2")]) == 0
    assert (tmp_path / "s2_pre_prob.raw").read_bytes() == (outputs / "synth_pre_prob.raw").read_bytes()


def test_tau_out_of_range(inputs, tmp_path, capsys):
    code = main(["detect", str(inputs) + "_pre_prob", str(inputs) + "_post_prob",
                 "--threshold-mode", "manual", "--tau", "1.1", "--out", str(tmp_path / "x")])
    assert code == 2
    assert "threshold.tau" in capsys.readouterr().err


def test_config_schema_error_paths(inputs, tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"peak": {"min_distance": -1}, "filter": {"mode": "nope"}}))
    code = main(["detect", str(inputs) + "_pre_prob", str(inputs) + "_post_prob",
                 "--config", str(cfg), "--out", str(tmp_path / "x")])
    err = capsys.readouterr().err
    assert code == 2 and "peak.min_distance" in err and "filter.mode" in err


def test_point_outside_shape(tmp_path, capsys):
    pre = tmp_path / "pre.csv"
    write_points(PointSet("pre", [4, 5], [[1, 1, 1], [30, 1, 1]]), pre)
    write_points(PointSet("post"), tmp_path / "post.csv")
    code = main(["make-targets", str(pre), str(tmp_path / "post.csv"), "--shape", "10", "10", "10",
                 "--out", str(tmp_path / "t")])
    assert code == 2 and "[5]" in capsys.readouterr().err


def test_synth_packing_error(tmp_path, capsys):
    code = main(["synth", "--shape", "30", "30", "30", "--n-synapses", "300",
                 "--out", str(tmp_path / "s")])
    assert code == 2 and "placed only" in capsys.readouterr().err


def test_evaluate_parse_failure(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("id,z,y\n1,2,3\n")
    code = main(["evaluate", "--detected-pre", str(bad), "--detected-post", str(bad),
                 "--truth-pre", str(bad), "--truth-post", str(bad), "--out", str(tmp_path / "e")])
    assert code == 2


def test_missing_file(tmp_path):
    assert main(["detect", str(tmp_path / "nope"), str(tmp_path / "nope"),
                 "--out", str(tmp_path / "x")]) == 2


def test_argparse_error_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["detect"])
    assert exc.value.code == 2


def test_threshold_nm(inputs, tmp_path):
    data = str(inputs)
    assert main(["evaluate", "--detected-pre", data + "_pre.csv", "--detected-post", data + "_post.csv",
                 "--truth-pre", data + "_pre.csv", "--truth-post", data + "_post.csv",
                 "--threshold-nm", "80", "--voxel-size-nm", "8", "--out", str(tmp_path / "e")]) == 0
    doc = json.loads((tmp_path / "e_manifest.json").read_text())
    assert doc["config"]["evaluate"]["threshold_voxels"] == 10.0


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "synapsekit", "--version"], capture_output=True,
                          text=True)
    assert proc.returncode == 0 and proc.stdout.strip()
