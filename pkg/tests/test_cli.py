from __future__ import annotations

import dataclasses
import json
import shutil
from pathlib import Path

import pytest
import yaml

from hatefl.cli import EXIT_CONFIG, EXIT_INVALID, EXIT_OK, EXIT_RUNTIME, main
from hatefl.config import load_config, parse_config
from hatefl.data import read_splits, write_corpus
from hatefl.evaluation.mock_api import MockToxicityServer
from hatefl.runreport import RunReport
from hatefl.synthetic import DialectTask, make_clients

import oracles
from helpers import record, write_jsonl

TASK = DialectTask(n_clients=2, test_per_client=10)
BASE_CONFIG = {
    "output_dir": "out",
    "seeds": [0, 1],
    "rounds": 2,
    "shots": [0, 3],
    "model": {"hash_dim": 256, "embed_dim": 8, "block_count": 2, "adapter_dim": 0},
    "featurizer": {"ngram_min": 2, "ngram_max": 3},
    "optimizer": {"learning_rate": 0.03, "batch_size": 1},
    "split_policy": {"dev_size": 3, "dev_max_ratio": 0.9, "train_max_ratio": 0.9},
}


def write_experiment(root: Path, **overrides) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    clients = []
    for cid, (train, test) in make_clients(TASK, seed=0).items():
        write_corpus(root / f"{cid}.jsonl", train + test)
        (root / f"{cid}.test.txt").write_text("".join(ex.id + "\n" for ex in test))
        clients.append({"id": cid, "corpus": f"{cid}.jsonl", "test_ids": f"{cid}.test.txt"})
    cfg = {**BASE_CONFIG, "clients": clients, **overrides}
    path = root / "exp.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


@pytest.fixture(scope="module")
def built(tmp_path_factory) -> Path:
    cfg = write_experiment(tmp_path_factory.mktemp("exp"))
    assert main(["build-splits", "--config", str(cfg), "--quiet"]) == EXIT_OK
    return cfg


@pytest.fixture(scope="module")
def ran(built: Path) -> Path:
    assert main(["run", "--config", str(built), "--mode", "fl", "--quiet"]) == EXIT_OK
    assert main(["run", "--config", str(built), "--mode", "baseline", "--quiet"]) == EXIT_OK
    return built.parent / "out" / "reports"


class TestValidateData:
    def test_pass(self, tmp_path, capsys):
        path = write_jsonl(tmp_path / "ok.jsonl", [record(i, f"t{i}") for i in range(3)])
        assert main(["validate-data", str(path)]) == EXIT_OK
        assert "PASS (0 errors)" in capsys.readouterr().out

    def test_bad_line_reported(self, tmp_path, capsys):
        recs = [record(i, f"t{i}") for i in range(10)]
        recs[6]["polarity"] = "angry"
        good = write_jsonl(tmp_path / "good.jsonl", recs[:5])
        bad = write_jsonl(tmp_path / "bad.jsonl", recs)
        assert main(["validate-data", str(good), str(bad)]) == EXIT_INVALID
        out = capsys.readouterr().out
        assert f"{good}: PASS" in out and f"{bad}: FAIL (1 errors)" in out
        assert "line 7" in out

    def test_empty_and_missing(self, tmp_path, capsys):
        (tmp_path / "e.jsonl").write_text("")
        assert main(["validate-data", str(tmp_path / "e.jsonl"), str(tmp_path / "nope.jsonl")]) == EXIT_INVALID
        assert capsys.readouterr().out.count("FAIL") == 2


class TestBuildSplits:
    def test_rerun_is_byte_identical(self, built, tmp_path):
        first = {p.name: p.read_bytes() for p in (built.parent / "out" / "splits").glob("*.json")}
        assert set(first) == {"client0.json", "client1.json"}
        copy = tmp_path / "again"
        shutil.copytree(built.parent, copy, ignore=shutil.ignore_patterns("out"))
        assert main(["build-splits", "--config", str(copy / "exp.yaml"), "--quiet"]) == EXIT_OK
        assert {p.name: p.read_bytes() for p in (copy / "out" / "splits").glob("*.json")} == first

    def test_manifest(self, built):
        manifest = json.loads((built.parent / "out" / "manifest.json").read_text())
        assert manifest["config_digest"] == load_config(built).digest
        assert manifest["seeds"] == [0, 1] and "build-splits" in manifest["outputs"]

    def test_per_client_override_honoured(self, tmp_path):
        test = record("t", "abcdefghij")
        near = record("n", "abcdefwxyz")  # ratio 0.6 against the test sentence
        write_jsonl(tmp_path / "c.jsonl", [test, near, record("f", "qqqqqqqqqq")])
        (tmp_path / "ids.txt").write_text("t\n")
        assert oracles.lev_ratio("abcdefghij", "abcdefwxyz") == pytest.approx(0.6)
        client = {"id": "c", "corpus": "c.jsonl", "test_ids": "ids.txt"}
        base = {"model": BASE_CONFIG["model"], "split_policy": {"dev_size": 2}}
        (tmp_path / "strict.yaml").write_text(yaml.safe_dump({**base, "clients": [client]}))
        assert main(["build-splits", "--config", str(tmp_path / "strict.yaml"), "--quiet"]) == EXIT_RUNTIME
        loose = {**client, "split_policy": {"dev_max_ratio": 0.7}}
        (tmp_path / "loose.yaml").write_text(yaml.safe_dump({**base, "clients": [loose]}))
        assert main(["build-splits", "--config", str(tmp_path / "loose.yaml"), "--quiet"]) == EXIT_OK
        splits = read_splits(tmp_path / "hatefl-out" / "splits" / "c.json")
        assert sorted(splits.dev) == ["f", "n"]

    def test_missing_test_ids_names_field(self, tmp_path, capsys):
        cfg = write_experiment(tmp_path)
        (tmp_path / "client0.test.txt").unlink()
        assert main(["build-splits", "--config", str(cfg)]) == EXIT_CONFIG
        assert "clients[0].test_ids" in capsys.readouterr().err


class TestRun:
    def test_sweep_writes_one_report_per_shot(self, ran):
        names = sorted(p.name for p in ran.iterdir())
        for n in (0, 3):
            assert f"fl_standard_shots{n}.json" in names and f"baseline_shots{n}.json" in names
        rep = RunReport.load(ran / "fl_standard_shots3.json")
        assert rep.seeds == [0, 1] and set(rep.per_client) == {"client0", "client1"}
        rows = (ran / "fl_runs.csv").read_text().splitlines()
        assert rows[0] == "mode,strategy,setting,shots,target,seed,f1"
        assert len(rows) == 1 + 2 * 3 * 2  # shots x (clients + server) x seeds

    def test_reruns_are_byte_identical(self, built, tmp_path):
        raw = yaml.safe_load(built.read_text())
        for c in raw["clients"]:
            c["splits"] = str(built.parent / "out" / "splits" / f"{c['id']}.json")
        (built.parent / "pinned.yaml").write_text(yaml.safe_dump(raw))
        outputs = []
        for name in ("first", "second"):
            args = ["run", "--config", str(built.parent / "pinned.yaml"), "--out", str(tmp_path / name), "--quiet"]
            assert main(args) == EXIT_OK
            outputs.append({p.name: p.read_bytes() for p in (tmp_path / name / "reports").iterdir()})
        assert outputs[0] == outputs[1] and len(outputs[0]) == 3

    def test_seed_override(self, ran, built, tmp_path):
        raw = yaml.safe_load(built.read_text())
        for c in raw["clients"]:
            c["splits"] = str(built.parent / "out" / "splits" / f"{c['id']}.json")
        (built.parent / "seeds.yaml").write_text(yaml.safe_dump({**raw, "shots": [3]}))
        args = ["run", "--config", str(built.parent / "seeds.yaml"), "--seed-override", "7",
                "--out", str(tmp_path), "--quiet"]
        assert main(args) == EXIT_OK
        assert RunReport.load(tmp_path / "reports" / "fl_standard_shots3.json").seeds == [7]

    def test_missing_splits_is_config_error(self, tmp_path, capsys):
        cfg = write_experiment(tmp_path)
        assert main(["run", "--config", str(cfg), "--quiet"]) == EXIT_CONFIG
        assert "build-splits" in capsys.readouterr().err

    def test_api_mode_against_mock(self, built, tmp_path):
        texts = {}
        for cid in ("client0", "client1"):
            texts.update({json.loads(line)["text"]: 0.8 for line in (built.parent / f"{cid}.jsonl").open()})
        with MockToxicityServer(texts) as server:
            raw = yaml.safe_load(built.read_text())
            for c in raw["clients"]:
                c["splits"] = str(built.parent / "out" / "splits" / f"{c['id']}.json")
            raw["toxicity"] = {"endpoint": server.url, "backoff": 0}
            (built.parent / "api.yaml").write_text(yaml.safe_dump(raw))
            args = ["run", "--config", str(built.parent / "api.yaml"), "--mode", "api", "--out", str(tmp_path), "--quiet"]
            assert main(args) == EXIT_OK
        reports = tmp_path / "reports"
        assert {p.name for p in reports.iterdir()} >= {"api_t0.7.json", "api_t0.9.json", "threshold_table.csv"}
        # every sentence scores 0.8: hateful at 0.7, nothing flagged at 0.9
        assert RunReport.load(reports / "api_t0.7.json").threshold == 0.7
        table = (reports / "threshold_table.csv").read_text().splitlines()
        assert table[0].startswith(",API 0.7 P+")

    def test_api_mode_without_toxicity_section(self, built):
        assert main(["run", "--config", str(built), "--mode", "api", "--quiet"]) == EXIT_CONFIG


class TestReport:
    def test_outputs(self, ran, tmp_path):
        out = tmp_path / "rep"
        assert main(["report", str(ran), "--out", str(out), "--quiet"]) == EXIT_OK
        names = {p.name for p in out.iterdir()}
        assert {"deltas.csv", "overview.png", "manifest.json"} <= names
        for target in ("client0", "client1", "server"):
            assert f"series_{target}.csv" in names and f"series_{target}.png" in names
        assert (out / "overview.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
        header = (out / "deltas.csv").read_text().splitlines()[0]
        assert "delta" in header
        series = (out / "series_client0.csv").read_text().splitlines()
        assert series[0] == "shots,fl:standard_mean,fl:standard_std,baseline_mean,baseline_std"
        assert [line.split(",")[0] for line in series[1:]] == ["0", "3"]

    def test_no_figures(self, ran, tmp_path):
        assert main(["report", str(ran), "--out", str(tmp_path), "--no-figures", "--quiet"]) == EXIT_OK
        assert not list(tmp_path.glob("*.png"))

    def test_missing_path(self, tmp_path):
        assert main(["report", str(tmp_path / "nothing"), "--quiet"]) == EXIT_CONFIG


class TestAgreementAndStats:
    def test_identical_files(self, tmp_path, capsys):
        path = write_jsonl(tmp_path / "a.jsonl", [record(i, "x", p) for i, p in
                                                  enumerate(["hateful", "neutral", "positive"])])
        assert main(["agreement", str(path), str(path), "--out", str(tmp_path / "o")]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines == ["scheme,kappa,alpha,n_units", "three_class,1.0000,1.0000,3", "two_class,1.0000,1.0000,3"]
        assert json.loads((tmp_path / "o" / "agreement.json").read_text())[0]["kappa"] == 1.0

    def test_disjoint_ids(self, tmp_path):
        a = write_jsonl(tmp_path / "a.jsonl", [record("a", "x")])
        b = write_jsonl(tmp_path / "b.jsonl", [record("b", "x")])
        assert main(["agreement", str(a), str(b)]) == EXIT_RUNTIME

    def test_stats(self, tmp_path, capsys):
        one = write_jsonl(tmp_path / "one.jsonl", [record(1, "a b a")])
        two = write_jsonl(tmp_path / "two.jsonl", [record(1, "x"), record(2, "y z")])
        assert main(["stats", str(one), str(two), "--out", str(tmp_path)]) == EXIT_OK
        out = capsys.readouterr().out.splitlines()
        assert len(out) == 3 and out[0].startswith("file,")
        assert (tmp_path / "stats.csv").read_text().splitlines() == out

    def test_stats_error_row(self, tmp_path, capsys):
        (tmp_path / "empty.jsonl").write_text("")
        one = write_jsonl(tmp_path / "one.jsonl", [record(1, "a b a")])
        assert main(["stats", str(one), str(tmp_path / "empty.jsonl")]) == EXIT_RUNTIME
        last = capsys.readouterr().out.splitlines()[-1]
        assert last.startswith(f"{tmp_path / 'empty.jsonl'},ERROR")


class TestConfig:
    def test_digest_ignores_key_order_and_output(self, built):
        raw = yaml.safe_load(built.read_text())
        reordered = dict(reversed(list(raw.items())))
        reordered["output_dir"] = "elsewhere"
        a = parse_config(raw, built.parent)
        b = parse_config(reordered, built.parent)
        assert a.digest == b.digest
        assert parse_config({**raw, "rounds": 3}, built.parent).digest != a.digest

    @pytest.mark.parametrize("patch, field", [
        ({"bogus": 1}, "bogus"),
        ({"seeds": []}, "seeds"),
        ({"shots": [4]}, "shots"),
        ({"strategy": "fedper", "k_p": 9}, "k_p"),
        ({"featurizer": {"hash_dim": 99}}, "hash_dim"),
        ({"optimizer": {"learning_rate": "fast"}}, "optimizer"),
        ({"toxicity": {"endpoint": "http://x", "thresholds": [0.9, 0.7]}}, "toxicity"),
    ])
    def test_invalid_configs_exit_2(self, built, tmp_path, capsys, patch, field):
        raw = {**yaml.safe_load(built.read_text()), **patch}
        for c in raw["clients"]:
            for key in ("corpus", "test_ids"):
                c[key] = str(built.parent / c[key])
        (tmp_path / "bad.yaml").write_text(yaml.safe_dump(raw))
        assert main(["run", "--config", str(tmp_path / "bad.yaml"), "--quiet"]) == EXIT_CONFIG
        assert field in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "none.yaml")]) == EXIT_CONFIG
        assert main(["build-splits"]) == EXIT_CONFIG

    def test_token_only_from_environment(self, built):
        raw = yaml.safe_load(built.read_text())
        cfg = parse_config({**raw, "toxicity": {"endpoint": "http://x", "token_env": "MY_TOKEN"}}, built.parent)
        assert cfg.toxicity.token_env == "MY_TOKEN" and cfg.api_baseline
        fields = {f.name for f in dataclasses.fields(cfg.toxicity)}
        assert "token" not in fields
