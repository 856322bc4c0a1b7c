from __future__ import annotations

import json
import shutil

import numpy as np
import pytest

from topicnovelty import cli
from topicnovelty.pipeline import STAGES, artifact_digests, make_config, read_config_file, read_manifest


@pytest.fixture(scope="session")
def demo_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("demo") / "run"
    rc = cli.main(["pipeline", "--demo", "--out", str(out), "--seed", "42", "--workers", "1"])
    assert rc == 0
    return out


def copy_run(src, tmp_path):
    dst = tmp_path / "run"
    shutil.copytree(src, dst)
    return dst


def test_pipeline_outputs(demo_run):
    for stage in STAGES:
        man = read_manifest(demo_run, stage)
        assert man is not None and man["stage"] == stage
        assert man["outputs"] and man["seconds"] >= 0
        for rel in man["outputs"]:
            assert (demo_run / rel).is_file()
    res = json.loads((demo_run / "panel" / "results.json").read_text())
    assert set(res["models"]) == {"pooled", "fixed", "random"}
    assert set(res["tests"]) == {"f_test", "lm_test", "hausman"}
    assert res["preferred_model"] in res["models"]
    report = json.loads((demo_run / "report.json").read_text())
    assert [r["stage"] for r in report] == list(STAGES)
    assert list((demo_run / "viz").glob("*_semantic_map.svg"))


def test_rerun_skips_and_preserves_digests(demo_run, tmp_path, capsys):
    out = copy_run(demo_run, tmp_path)
    before = artifact_digests(out)
    assert cli.main(["pipeline", "--demo", "--out", str(out), "--seed", "42", "--workers", "1"]) == 0
    assert capsys.readouterr().out.count("up to date") == len(STAGES)
    assert artifact_digests(out) == before


def test_deleted_artifact_regenerated(demo_run, tmp_path):
    out = copy_run(demo_run, tmp_path)
    before = artifact_digests(out)
    victim = sorted((out / "align").glob("aligned_*.temb"))[1]
    victim.unlink()
    (out / "novelty" / "novelty.csv").unlink()
    assert cli.main(["pipeline", "--demo", "--out", str(out), "--seed", "42", "--workers", "1"]) == 0
    assert artifact_digests(out) == before
    report = json.loads((out / "report.json").read_text())
    skipped = {r["stage"]: r["skipped"] for r in report}
    assert skipped["preprocess"] and skipped["train"]
    assert not skipped["align"]


def test_changed_param_reruns_stage(demo_run, tmp_path):
    out = copy_run(demo_run, tmp_path)
    rc = cli.main(["pipeline", "--demo", "--out", str(out), "--seed", "42", "--workers", "1",
                   "--stages", "preprocess,train,align,novelty,topics,panel", "--win", "5"])
    assert rc == 0
    report = {r["stage"]: r for r in json.loads((out / "report.json").read_text())}
    assert report["novelty"]["skipped"] and not report["panel"]["skipped"]
    assert read_manifest(out, "panel")["params"]["win"] == 5


def test_train_without_preprocess(tmp_path, capsys):
    rc = cli.main(["train", "--demo", "--out", str(tmp_path / "x")])
    assert rc == cli.EXIT_PREREQ
    assert "preprocess/manifest.json" in capsys.readouterr().err


@pytest.mark.parametrize("argv,field", [
    (["--years", "2005..2001"], None),
    (["--win", "0"], "win"),
    (["--workers", "0"], "workers"),
    (["--set", "dim=-3"], "dim"),
    (["--set", "nonsense=1"], None),
    (["--documents", "/nonexistent/docs.jsonl"], "documents"),
])
def test_config_errors(tmp_path, capsys, argv, field):
    rc = cli.main(["preprocess", "--demo", "--out", str(tmp_path / "x")] + argv)
    assert rc == cli.EXIT_CONFIG
    if field:
        assert f"[{field}]" in capsys.readouterr().err


def test_bad_flag_and_stage(tmp_path):
    assert cli.main(["pipeline", "--no-such-flag"]) == cli.EXIT_CONFIG
    assert cli.main(["pipeline", "--demo", "--out", str(tmp_path), "--stages", "train,bogus"]) == cli.EXIT_CONFIG


def test_numeric_failure_exit_code(tmp_path, monkeypatch):
    def boom(cfg, stage):
        raise np.linalg.LinAlgError("singular")
    monkeypatch.setattr(cli, "run_stage", boom)
    assert cli.main(["panel", "--demo", "--out", str(tmp_path)]) == cli.EXIT_NUMERIC


def test_config_file_and_flag_precedence(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# comment\nyears = 2002..2004\nseed = 5\nwin = 3\ndocuments = docs.jsonl\n")
    args = cli._parser().parse_args(["novelty", "--config", str(conf), "--seed", "9",
                                     "--set", "epochs=2"])
    cfg = cli.build_config(args)
    assert cfg.years == (2002, 2004)
    assert cfg.seed == 9 and cfg.win == 3 and cfg.epochs == 2
    assert cfg.documents == tmp_path / "docs.jsonl"


def test_demo_config_parses():
    values = read_config_file(cli.demo_config_path())
    cfg = make_config(values)
    cfg.validate()
    assert cfg.years == (2001, 2005)
