import csv
import filecmp
import json
from pathlib import Path

import pytest

from crashnet.cli import main
from crashnet.config import RunConfig, dump_config, load_config, parse_config
from crashnet.errors import ContractError, ParseError, ValidationError

FAST = "n_perm = 30\nnull_n = 40\n"


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out", str(root), "--n-assets", "15", "--seed", "1"]) == 0
    (root / "fast.cfg").write_text(FAST)
    return root


def run_args(data, out, *extra):
    return ["--config", str(data / "fast.cfg"), "--prices", str(data / "prices.csv"),
            "--market-index", str(data / "index.csv"), "--out", str(out), *extra]


@pytest.fixture(scope="module")
def full_run(data, tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "o"
    assert main(["run-all", *run_args(data, out)]) == 0
    return out


def test_dump_config_roundtrip(capsys):
    assert main(["dump-config"]) == 0
    text = capsys.readouterr().out
    assert parse_config(text) == RunConfig()
    cfg = RunConfig(alpha=0.01, stages=("hellinger", "gr"), drop_missing=False, alpha_sweep=(0.02,))
    assert parse_config(dump_config(cfg)) == cfg


def test_config_parsing_errors(tmp_path):
    with pytest.raises(ParseError):
        parse_config("bogus = 1\n")
    with pytest.raises(ParseError):
        parse_config("window = sixty\n")
    with pytest.raises(ContractError):
        parse_config("stages = hellinger, nope\n")
    p = tmp_path / "c.cfg"
    p.write_text("alpha = 0.1  # looser\nseed = 9\n")
    cfg = load_config(p)
    assert cfg.alpha == 0.1 and cfg.seed == 9


def test_validate_inputs(tmp_path):
    with pytest.raises(ValidationError):
        RunConfig(prices=str(tmp_path / "none.csv"), market_index="INDEX").validate_inputs()
    p = tmp_path / "p.csv"
    p.write_text("date,A\n")
    RunConfig(prices=str(p), market_index="INDEX").validate_inputs()
    with pytest.raises(ValidationError):
        RunConfig(prices=str(p), market_index=str(tmp_path / "i.csv")).validate_inputs()


def test_missing_index_exits_2_before_any_stage(data, tmp_path, capsys):
    out = tmp_path / "o"
    args = ["run-all", "--prices", str(data / "prices.csv"), "--market-index", str(tmp_path / "nope.csv"),
            "--out", str(out)]
    assert main(args) == 2
    assert "index file not found" in capsys.readouterr().err
    assert not out.exists()


def test_stage_subset(data, tmp_path):
    out = tmp_path / "o"
    assert main(["run-all", *run_args(data, out, "--stages", "hellinger")]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["hellinger.csv", "manifest.json", "segmentation.json"]
    man = json.loads((out / "manifest.json").read_text())
    assert man["stages"]["hellinger"] == "ok" and man["stages"]["network"] == "skipped"


def test_full_run_outputs(full_run):
    man = json.loads((full_run / "manifest.json").read_text())
    assert man["status"] == "ok" and man["error"] is None
    assert [p["label"] for p in man["notes"]["periods"]] == ["pre_crash", "crash", "post_crash"]
    assert set(man["stages"].values()) == {"ok"}
    assert man["versions"]["kernel_backend"] in ("cython", "python")
    for period in ("pre_crash", "crash", "post_crash"):
        d = full_run / period
        for name in ("mi.csv", "pvalues.csv", "mask.csv", "mst_edges.csv", "metrics.json", "community.json"):
            assert (d / name).is_file()
        with (d / "metrics_nodes.csv").open() as fh:
            assert next(csv.reader(fh))[:6] == ["ticker", "closeness", "eccentricity", "eigenvector",
                                               "wdegree", "betweenness"]
    with (full_run / "hellinger.csv").open() as fh:
        assert next(csv.reader(fh)) == ["date", "h", "threshold", "flag"]
    gr = json.loads((full_run / "gr.json").read_text())
    assert "INDEX" in json.dumps(gr)


def test_stage_failure_writes_failed_manifest(data, tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["metrics", *run_args(data, out)]) == 1
    assert "stage 'metrics' failed" in capsys.readouterr().err
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "FAILED"
    assert man["error"]["stage"] == "metrics"
    assert man["stages"]["metrics"] == "FAILED"


def test_subcommands_chain(data, tmp_path):
    out = tmp_path / "o"
    for cmd in ("detect", "network", "metrics", "community", "gr"):
        assert main([cmd, *run_args(data, out)]) == 0, cmd
    assert (out / "crash" / "community.json").is_file()
    assert (out / "gr.json").is_file()


def test_sweep_alpha_edge_counts_monotone(data, tmp_path):
    out = tmp_path / "o"
    assert main(["sweep-alpha", *run_args(data, out, "--alphas", "0.01,0.05,0.1")]) == 0
    doc = json.loads((out / "sweep_alpha.json").read_text())
    assert doc["edge_count_non_decreasing_in_alpha"] is True
    with (out / "sweep_alpha.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    for period in ("pre_crash", "crash", "post_crash"):
        counts = [int(r["n_significant"]) for r in rows if r["period"] == period]
        assert len(counts) == 3 and counts == sorted(counts)


def tree_files(root):
    return sorted(str(p.relative_to(root)) for p in Path(root).rglob("*") if p.is_file() and p.name != "manifest.json")


def test_threads_do_not_change_outputs(data, full_run, tmp_path):
    out = tmp_path / "o"
    assert main(["run-all", *run_args(data, out, "--threads", "4")]) == 0
    names = tree_files(full_run)
    assert names == tree_files(out)
    _, mismatch, errors = filecmp.cmpfiles(full_run, out, names, shallow=False)
    assert mismatch == [] and errors == []


def test_synth_without_crash(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path), "--n-assets", "3", "--n-days", "30", "--crash-length", "0",
                 "--n-sectors", "0"]) == 0
    paths = json.loads(capsys.readouterr().out)
    assert json.loads(Path(paths["truth"]).read_text())["crash_dates"] is None
