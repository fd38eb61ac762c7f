import csv
import gzip
import json

import pytest

from enroute import cli
from enroute.schemes import Q_CCEF


def test_defaults():
    spec = cli.parse_args_and_config([])
    assert spec.nodes == (1000,) and spec.schemes == ("proposed",)
    assert spec.seeds == (0,) and spec.ftrs == (0.5,)
    assert spec.charts and spec.jobs == 1


def test_comma_lists_are_sweep_axes():
    spec = cli.parse_args_and_config(
        ["--nodes", "200,400", "--scheme", "ccef,def", "--seeds", "3", "--ftr", "0.2,0.5"])
    configs = spec.configs()
    assert len(configs) == 2 * 2 * 3 * 2
    assert {c.rng_seed for c in configs} == {0, 1, 2}
    assert configs[0].node_count == 200 and configs[0].scheme == "ccef"


def test_seed_list():
    assert cli.parse_args_and_config(["--seeds", "4,9"]).seeds == (4, 9)


def test_q_overrides_are_per_scheme():
    spec = cli.parse_args_and_config(["--scheme", "proposed,ccef", "--q-prop", "0.9"])
    by_scheme = {c.scheme: c.q for c in spec.configs()}
    assert by_scheme == {"proposed": 0.9, "ccef": None}


def test_config_file_and_precedence(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("# sweep\nnodes = 300\nscheme=def\nq_def=0.5\nm=0.4\n\njobs=2\n")
    spec = cli.parse_args_and_config(["--config", str(path), "--nodes", "150"])
    assert spec.nodes == (150,)
    assert spec.schemes == ("def",)
    assert spec.q == {"def": 0.5}
    assert spec.base.fitness_m == 0.4
    assert spec.jobs == 2


def test_spec_text_roundtrips(tmp_path):
    spec = cli.parse_args_and_config(["--scheme", "ccef,def", "--seeds", "2,5", "--q-ccef",
                                      "0.6", "--charts", "off", "--out", "x"])
    path = tmp_path / "again.cfg"
    path.write_text(spec.to_text())
    again = cli.parse_args_and_config(["--config", str(path)])
    assert again.to_text() == spec.to_text()


@pytest.mark.parametrize("argv", [
    ["--scheme", "sef"],
    ["--seeds", "0"],
    ["--ftr", "1.5"],
    ["--q-def", "2"],
    ["--m", "1.5"],
    ["--jobs", "0"],
    ["--charts", "maybe"],
    ["--nodes", "50"],
    ["--nodes", "a,b"],
])
def test_bad_values_are_usage_errors(argv):
    with pytest.raises(cli.UsageError):
        cli.parse_args_and_config(argv)


def test_unknown_flag_exits_nonzero():
    with pytest.raises(SystemExit) as exc:
        cli.parse_args_and_config(["--frobnicate", "1"])
    assert exc.value.code != 0


def test_unknown_config_key(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("nodes=200\nwarp=9\n")
    with pytest.raises(cli.UsageError, match="warp"):
        cli.parse_args_and_config(["--config", str(path)])


def test_missing_config_file(tmp_path):
    with pytest.raises(cli.FileError):
        cli.parse_args_and_config(["--config", str(tmp_path / "nope.cfg")])


def test_main_exit_codes(tmp_path, capsys):
    assert cli.main(["--scheme", "nope"]) == 2
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["--out", str(blocker / "sub")]) == 3


def test_end_to_end(tmp_path, capsys):
    out = tmp_path / "res"
    rc = cli.main(["--nodes", "200", "--scheme", "proposed,ccef,def", "--seeds", "2",
                   "--out", str(out)])
    assert rc == 0
    assert "scheme=proposed,ccef,def" in capsys.readouterr().out
    rows = list(csv.DictReader(open(out / "runs.csv")))
    assert len(rows) == 6
    assert list(rows[0]) == list(cli.RUN_COLUMNS)
    for name in ("fnd.svg", "lnd.svg", "filtering.svg", "comparison.csv", "summary.json",
                 "spec.txt"):
        assert (out / name).exists()
    with gzip.open(out / "rounds" / "ccef_n200_ftr0.5_s1.csv.gz", "rt") as fh:
        assert fh.readline().startswith("round,session,cluster")
    summary = json.load(open(out / "summaries" / "def_n200_ftr0.5_s0.json"))
    assert summary["scheme"] == "def" and summary["config"]["q"] is None
    comparison = list(csv.DictReader(open(out / "comparison.csv")))
    ccef = next(r for r in comparison if r["scheme"] == "ccef")
    assert float(ccef["reference_fnd_ratio"]) == 3.104
    assert "<svg" in (out / "fnd.svg").read_text()


def test_charts_use_runs_csv_medians(tmp_path):
    runs = tmp_path / "runs.csv"
    runs.write_text(
        "scheme,seed,nodes,ftr,fnd,lnd,filtering_efficiency\n"
        "ccef,0,200,0.5,10,20,0.9\nccef,1,200,0.5,30,40,0.8\nccef,2,200,0.5,,,0.7\n"
    )
    charts = cli.write_charts(str(tmp_path), str(runs))
    assert charts["fnd"][("200 nodes", "ccef")] == 20
    assert charts["filtering_efficiency"][("200 nodes", "ccef")] == 0.8


def test_parallel_matches_serial(tmp_path):
    args = ["--nodes", "200", "--scheme", "ccef,def", "--seeds", "2", "--charts", "off"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
    a = (tmp_path / "a" / "runs.csv").read_bytes()
    assert a == (tmp_path / "b" / "runs.csv").read_bytes()
    ga = (tmp_path / "a" / "rounds" / "def_n200_ftr0.5_s1.csv.gz").read_bytes()
    assert ga == (tmp_path / "b" / "rounds" / "def_n200_ftr0.5_s1.csv.gz").read_bytes()
