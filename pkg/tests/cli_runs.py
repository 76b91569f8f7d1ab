"""Shared helpers that drive every subcommand and compare run outputs."""

import hashlib
import json
from pathlib import Path

from synapsekit.cli import main

SMALL_SYNTH = {"shape": [48, 48, 48], "n_synapses": 5, "seed": 3}


def make_inputs(root):
    """Synthetic dataset used as shared input for the other subcommands."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    cfg = root / "synth.json"
    cfg.write_text(json.dumps(SMALL_SYNTH))
    assert main(["synth", "--config", str(cfg), "--out", str(root / "data")]) == 0
    (root / "grid.json").write_text(json.dumps({"peak.min_distance": [3, 5],
                                                "threshold.rho": [0.3, 0.5]}))
    return root / "data"


def run_all(inputs, out, threads):
    """Run all six subcommands into ``out``; returns the directory."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    data = str(inputs)
    t = ["--threads", str(threads)]
    assert main(["synth", "--config", str(Path(inputs).parent / "synth.json"),
                 "--out", str(out / "synth")] + t) == 0
    assert main(["make-targets", data + "_pre.csv", data + "_post.csv", "--shape", "48", "48", "48",
                 "--out", str(out / "targets")] + t) == 0
    assert main(["detect", data + "_pre_prob", data + "_post_prob", "--out", str(out / "det")] + t) == 0
    assert main(["evaluate", "--detected-pre", data + "_pre.csv", "--detected-post", data + "_post.csv",
                 "--truth-pre", data + "_pre.csv", "--truth-post", data + "_post.csv",
                 "--detected-pairs", data + "_pairs.json", "--truth-pairs", data + "_pairs.json",
                 "--out", str(out / "eval")] + t) == 0
    assert main(["similarity", "--group", "a", data + "_pre_prob", data + "_pre.csv",
                 "--group", "b", data + "_post_prob", data + "_post.csv", "--size", "16",
                 "--budget", "4", "--out", str(out / "sim")] + t) == 0
    assert main(["sweep", data + "_pre_prob", data + "_post_prob",
                 "--grid", str(Path(inputs).parent / "grid.json"),
                 "--truth-pre", data + "_pre.csv", "--truth-post", data + "_post.csv",
                 "--truth-pairs", data + "_pairs.json", "--out", str(out / "sweep")] + t) == 0
    return out


def digests(out):
    """sha256 per relative path; manifests are hashed without their volatile section."""
    out = Path(out)
    result = {}
    for f in sorted(p for p in out.rglob("*") if p.is_file()):
        data = f.read_bytes()
        if f.name.endswith("_manifest.json"):
            doc = json.loads(data)
            doc.pop("volatile", None)
            data = json.dumps(doc, sort_keys=True).encode()
        result[str(f.relative_to(out))] = hashlib.sha256(data).hexdigest()
    return result
