import json
import os

import numpy as np
import pytest

from segqa import cli, synth
from segqa.errors import ManifestError

from conftest import write_png


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    scene = synth.SceneSpec(seed=101, width=96, height=96, max_objects=2, noise_sigma=4.0)
    manifest = synth.build_corpus(10, scene, None, out)
    return manifest


def run(argv):
    return cli.main([str(a) for a in argv])


def test_score_then_evaluate(corpus, tmp_path):
    scores = tmp_path / "scores.json"
    assert run(["score", "--manifest", corpus, "--output", scores]) == 0
    doc = json.loads(scores.read_text())
    assert len(doc["samples"]) == 10
    assert doc["errors"] == []
    assert doc["config"]["backend"]["kind"] == "reference"
    for rec in doc["samples"]:
        assert 0.0 <= rec["sqa_score"] <= 2.0
        assert rec["confidence_baseline"] is not None

    report_dir = tmp_path / "report"
    assert run(["evaluate", "--manifest", corpus, "--scores", scores, "--output-dir", report_dir]) == 0
    report = json.loads((report_dir / "report.json").read_text())
    assert report["n"] == 10
    assert set(report["detection"].keys()) == {"25.0", "50.0"}
    assert "model_confidence" in report["correlation"]
    assert (report_dir / "report.txt").exists()


def test_scores_are_deterministic_across_runs_and_workers(corpus, tmp_path):
    outs = []
    for i, workers in enumerate((1, 3)):
        scores = tmp_path / f"scores{i}.json"
        rd = tmp_path / f"rep{i}"
        assert run(["score", "--manifest", corpus, "--output", scores, "--workers", workers]) == 0
        assert run(["evaluate", "--manifest", corpus, "--scores", scores, "--output-dir", rd]) == 0
        outs.append((scores.read_bytes(), (rd / "report.json").read_bytes(), (rd / "report.txt").read_bytes()))
    assert outs[0] == outs[1]


def test_oracle_injection_gives_perfect_metrics(corpus, tmp_path):
    stats = json.loads((corpus.parent / "corpus_stats.json").read_text())
    samples = [
        {
            "sample_id": s["sample_id"],
            "sqa_score": s["true_dice"],
            "num_objects": 1,
            "no_objects": False,
            "confidence_baseline": None,
            "objects": [],
        }
        for s in stats["samples"]
    ]
    scores = tmp_path / "oracle_scores.json"
    scores.write_text(json.dumps({"version": 1, "config": {}, "samples": samples, "errors": []}))
    rd = tmp_path / "oracle_report"
    assert run(["evaluate", "--manifest", corpus, "--scores", scores, "--output-dir", rd]) == 0
    report = json.loads((rd / "report.json").read_text())
    assert report["correlation"]["sqa"]["pearson"] == 1.0
    assert report["correlation"]["sqa"]["spearman"] == 1.0
    assert report["detection"]["25.0"]["sqa"] == 1.0
    assert report["detection"]["50.0"]["sqa"] == 1.0


def test_constant_scores_surface_undefined_correlation(corpus, tmp_path):
    stats = json.loads((corpus.parent / "corpus_stats.json").read_text())
    samples = [
        {"sample_id": s["sample_id"], "sqa_score": 0.5, "num_objects": 1, "no_objects": False,
         "confidence_baseline": None, "objects": []}
        for s in stats["samples"]
    ]
    scores = tmp_path / "const.json"
    scores.write_text(json.dumps({"version": 1, "samples": samples}))
    rd = tmp_path / "const_report"
    assert run(["evaluate", "--manifest", corpus, "--scores", scores, "--output-dir", rd]) == 1
    report = json.loads((rd / "report.json").read_text())
    assert "undefined correlation" in report["error"]


def test_missing_file_in_manifest_exits_1(tmp_path):
    man = tmp_path / "manifest.json"
    man.write_text(json.dumps({"version": 1, "samples": [
        {"sample_id": "a", "image": "missing.png", "prediction": ["also_missing.png"]}
    ]}))
    assert run(["score", "--manifest", man, "--output", tmp_path / "s.json"]) == 1
    with pytest.raises(ManifestError, match="missing file"):
        cli.load_manifest(man)


def test_manifest_rejects_duplicates_and_bad_records(tmp_path):
    img = write_png(tmp_path / "i.png", np.zeros((4, 4), np.uint8))
    pred = write_png(tmp_path / "p.png", np.zeros((4, 4), np.uint8))
    man = tmp_path / "m.json"
    man.write_text(json.dumps({"samples": [
        {"sample_id": "a", "image": "i.png", "prediction": ["p.png"]},
        {"sample_id": "a", "image": "i.png", "prediction": ["p.png"]},
    ]}))
    with pytest.raises(ManifestError, match="duplicate"):
        cli.load_manifest(man)
    man.write_text(json.dumps({"samples": [{"sample_id": "b", "image": "i.png"}]}))
    with pytest.raises(ManifestError, match="prediction"):
        cli.load_manifest(man)


def test_labelmap_manifest_path(tmp_path):
    img = write_png(tmp_path / "img.png", np.full((6, 6), 10, np.uint8))
    lab = np.zeros((6, 6), np.uint8)
    lab[1:3, 1:3] = 1
    lab[4:6, 4:6] = 2
    write_png(tmp_path / "lab.png", lab)
    man = tmp_path / "manifest.json"
    man.write_text(json.dumps({"samples": [
        {"sample_id": "a", "image": "img.png", "labelmap": "lab.png", "num_classes": 2}
    ]}))
    scores = tmp_path / "scores.json"
    assert run(["score", "--manifest", man, "--output", scores]) == 0
    doc = json.loads(scores.read_text())
    assert doc["samples"][0]["num_objects"] == 2


def test_remote_backend_down_exits_2(corpus, tmp_path):
    code = run([
        "score", "--manifest", corpus, "--output", tmp_path / "s.json",
        "--backend", "remote", "--endpoint", "http://127.0.0.1:9",
        "--timeout", "0.2", "--retries", "0",
    ])
    assert code == 2
    doc = json.loads((tmp_path / "s.json").read_text())
    assert len(doc["errors"]) > 0
    assert doc["samples"] == []


def test_missing_truth_exits_1(corpus, tmp_path):
    doc = json.loads(corpus.read_text())
    for rec in doc["samples"]:
        rec.pop("truth")
    man2 = corpus.parent / "no_truth.json"
    man2.write_text(json.dumps(doc))
    scores = tmp_path / "sc.json"
    assert run(["score", "--manifest", man2, "--output", scores]) == 0
    assert run(["evaluate", "--manifest", man2, "--scores", scores, "--output-dir", tmp_path]) == 1


def test_backend_check_reference(capsys):
    assert run(["backend-check"]) == 0
    out = capsys.readouterr().out
    assert "ok" in out and "4x4" in out


def test_backend_check_unreachable_remote():
    assert run(["backend-check", "--backend", "remote", "--endpoint", "http://127.0.0.1:9",
                "--timeout", "0.2", "--retries", "0"]) == 2


def test_endpoint_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.ENDPOINT_ENV, "http://127.0.0.1:9")
    code = run(["backend-check", "--backend", "remote", "--endpoint", "http://example.invalid",
                "--timeout", "0.2", "--retries", "0"])
    assert code == 2  # the env endpoint (closed port) is what actually gets used


def test_synth_command(tmp_path):
    out = tmp_path / "c"
    assert run(["synth", "--out", out, "--n", 4, "--seed", 9]) == 0
    assert (out / "manifest.json").exists()
    assert len(list(out.glob("s*"))) == 4
    out2 = tmp_path / "c2"
    assert run(["synth", "--out", out2, "--n", 4, "--seed", 9]) == 0
    assert (out / "manifest.json").read_text() == (out2 / "manifest.json").read_text()


def test_synth_unwritable_out_exits_1(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run(["synth", "--out", blocker / "sub", "--n", 1]) == 1


def test_config_file_and_flag_precedence(corpus, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"backend": {"kind": "reference", "tolerance": 30}, "min_area": 2}))
    scores = tmp_path / "s.json"
    assert run(["score", "--manifest", corpus, "--output", scores, "--config", cfg]) == 0
    doc = json.loads(scores.read_text())
    assert doc["config"]["backend"]["tolerance"] == 30
    assert doc["config"]["min_area"] == 2
    # flags win over the config file
    assert run(["score", "--manifest", corpus, "--output", scores, "--config", cfg,
                "--tolerance", "12"]) == 0
    doc = json.loads(scores.read_text())
    assert doc["config"]["backend"]["tolerance"] == 12
