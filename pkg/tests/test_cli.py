import json

import pytest

from cohortclust.cli import main
from cohortclust.config import ConfigError, RunConfig, parse_kv


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "syn"
    assert main(["synth", "--out", str(out), "--set", "n_patients=90", "--set", "n_binary=20",
                 "--set", "missing_rate=0.05", "--seed", "3"]) == 0
    return out


def _data(d):
    return ["--input", str(d / "data.csv"), "--schema", str(d / "schema.txt")]


def test_synth_twice_identical(tmp_path, synth_dir):
    again = tmp_path / "again"
    main(["synth", "--out", str(again), "--set", "n_patients=90", "--set", "n_binary=20",
          "--set", "missing_rate=0.05", "--seed", "3"])
    for name in ("data.csv", "schema.txt", "truth.csv", "synth_spec.json"):
        assert (again / name).read_bytes() == (synth_dir / name).read_bytes()


def test_synth_infeasible_exit_2(tmp_path, capsys):
    code = main(["synth", "--out", str(tmp_path / "x"), "--set", "k_true=5", "--set", "separation=0.9"])
    assert code == 2
    assert "prototypes" in capsys.readouterr().err
    assert not (tmp_path / "x").exists()


def test_profile_round_trip(tmp_path, synth_dir):
    out = tmp_path / "prof"
    assert main(["profile", *_data(synth_dir), "--out", str(out)]) == 0
    rep = json.loads((out / "profile.json").read_text())
    assert rep["n_patients"] == 90 and 0 < rep["overall_fraction"] < 0.1


def test_profile_quarter_missing(tmp_path):
    (tmp_path / "d.csv").write_text("a,b\n1,\n0,1\n")
    (tmp_path / "s.txt").write_text("a binary\nb binary\n")
    out = tmp_path / "o"
    assert main(["profile", "--input", str(tmp_path / "d.csv"), "--schema", str(tmp_path / "s.txt"),
                 "--out", str(out)]) == 0
    assert json.loads((out / "profile.json").read_text())["overall_fraction"] == 0.25


def test_profile_malformed_header_exit_2(tmp_path):
    (tmp_path / "d.csv").write_text("a,c\n1,0\n")
    (tmp_path / "s.txt").write_text("a binary\nb binary\n")
    code = main(["profile", "--input", str(tmp_path / "d.csv"), "--schema", str(tmp_path / "s.txt"),
                 "--out", str(tmp_path / "o")])
    assert code == 2 and not (tmp_path / "o").exists()


def test_pipeline_planted(tmp_path, synth_dir):
    out = tmp_path / "run"
    code = main(["pipeline", *_data(synth_dir), "--truth", str(synth_dir / "truth.csv"),
                 "--out", str(out), "--set", "k_max=8", "--set", "agg_max=8"])
    assert code == 0
    rep = json.loads((out / "run_report.json").read_text())
    assert rep["chosen_k"] == 3
    assert rep["truth"]["consensus_ari"] == 1.0
    for name in ("index_table.csv", "consensus.csv", "truth_table.csv", "deviation.csv",
                 "survival_by_cluster.csv", "selection_with_friedman.csv", "selection_without_friedman.csv"):
        assert (out / name).exists()


def test_pipeline_toy(tmp_path):
    (tmp_path / "d.csv").write_text("a,b,tnm\n0,0,2\n0,1,3\n1,1,2\n1,0,3\n1,1,3\n")
    (tmp_path / "s.txt").write_text("a binary\nb binary\ntnm categorical outcome\n")
    cfg = tmp_path / "run.cfg"
    cfg.write_text("input = d.csv\nschema = s.txt\nk_min = 2\nk_max = 3\nagg_min = 2\nagg_max = 3\n"
                   "survival_attribute = \nrestarts = 4\n")
    out = tmp_path / "o"
    assert main(["pipeline", "--config", str(cfg), "--out", str(out)]) == 0
    rows = (out / "truth_table.csv").read_text().strip().splitlines()[1:]
    total = sum(float(v) for r in rows for v in r.split(",")[1:])
    assert total == pytest.approx(100.0, abs=1e-4)


def test_aggregation_beyond_sweep_exit_2(tmp_path, synth_dir):
    code = main(["pipeline", *_data(synth_dir), "--out", str(tmp_path / "o"),
                 "--set", "k_max=5", "--set", "agg_max=8"])
    assert code == 2 and not (tmp_path / "o").exists()


def test_existing_out_refused(tmp_path, synth_dir):
    code = main(["synth", "--out", str(synth_dir)])
    assert code == 2


def test_sweep_patients_cli(tmp_path, synth_dir):
    out = tmp_path / "sw"
    code = main(["sweep", "--mode", "patients", *_data(synth_dir), "--out", str(out),
                 "--set", "sweep_step=20", "--set", "sweep_floor=45", "--set", "agg_max=6",
                 "--set", "k_max=6"])
    assert code == 0
    rep = json.loads((out / "sweep_patients.json").read_text())
    assert [p["size"] for p in rep["points"]] == [90, 70, 50]
    assert {p["chosen_k"] for p in rep["points"]} == {3}
    assert rep["warnings"]


def test_sweep_attributes_cli(tmp_path, synth_dir):
    out = tmp_path / "sw"
    code = main(["sweep", "--mode", "attributes", *_data(synth_dir), "--out", str(out),
                 "--set", "min_attributes=2", "--set", "agg_max=6", "--set", "k_max=6"])
    assert code == 0
    sizes = [p["size"] for p in json.loads((out / "sweep_attributes.json").read_text())["points"]]
    assert sizes == list(range(20, 1, -1))


def test_config_parsing(tmp_path):
    assert parse_kv("a = 1 # note\n\nb-c = x\n") == {"a": "1", "b_c": "x"}
    with pytest.raises(ConfigError):
        parse_kv("no equals sign")
    with pytest.raises(ConfigError):
        RunConfig.from_mapping({"bogus": 1})
    cfg = RunConfig.from_mapping({"engines": "kmeans,pam", "force": "yes", "tnm_stages": "2,3"})
    assert cfg.engines == ("kmeans", "pam") and cfg.force and cfg.tnm_stages == (2, 3)
    assert cfg.threshold == 1
    with pytest.raises(ConfigError):
        RunConfig(agg_max=20).validate(need_input=False)
    with pytest.raises(ConfigError):
        RunConfig(reference="fcm", engines=("kmeans", "pam")).validate(need_input=False)
