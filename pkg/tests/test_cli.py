import csv
import json

import numpy as np
import pytest

from irbrisk import cli
from irbrisk.data_io import RatePanel, synthesize_panel, write_panel
from irbrisk.normal import norm_cdf

FAST = ["--nsim", "20000", "--no-timestamp"]


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def panel_csv(tmp_path):
    path = tmp_path / "panel.csv"
    write_panel(synthesize_panel(seed=0), path)
    return str(path)


@pytest.fixture
def exp_csv(tmp_path):
    rng = np.random.default_rng(0)
    lgd = 0.3 + 0.1 * rng.exponential(size=37)
    pd_ar = rng.uniform(0.005, 0.03, 37)
    path = tmp_path / "exp.csv"
    write_panel(RatePanel(np.arange(1983, 2020), lgd, pd_ar, np.minimum(3 * pd_ar, 0.5)), path)
    return str(path)


def cells(report, section):
    return report["sections"][section]


@pytest.mark.parametrize("cmd", ["describe", "normality", "correlate", "naive", "capital", "addon", "report"])
def test_every_subcommand_runs(capsys, panel_csv, cmd):
    code, out, _ = run_cli(capsys, cmd, "--input", panel_csv, *FAST)
    assert code == 0 and out.startswith("# command=")


def test_describe_values(capsys, panel_csv):
    code, out, _ = run_cli(capsys, "describe", "--input", panel_csv, "--format", "json", "--no-timestamp")
    rep = json.loads(out)
    d = cells(rep, "descriptives")
    assert d["LGD"]["mean"] == {"value": pytest.approx(0.5526, abs=1e-6), "unit": "fraction"}
    assert d["LGD"]["std"]["value"] == pytest.approx(0.1025, abs=1e-6)
    assert d["k_AR"]["mean"]["value"] == pytest.approx(-2.208, abs=1e-6)
    assert d["LGD"]["n"] == {"value": 37, "unit": "count"}


def test_gaussian_fixture_not_rejected(capsys, panel_csv):
    for grade in ("ar", "sg"):
        _, out, _ = run_cli(capsys, "normality", "--input", panel_csv, "--grade", grade, "--format", "json")
        ps = [row["p_value"]["value"] for row in cells(json.loads(out), "normality").values()]
        assert len(ps) == 3 and min(ps) > 0.10


def test_exponential_fixture_rejected(capsys, exp_csv):
    _, out, _ = run_cli(capsys, "normality", "--input", exp_csv, "--format", "json")
    ps = [row["p_value"]["value"] for row in cells(json.loads(out), "normality").values()]
    assert min(ps) < 0.05


def test_correlate(capsys, panel_csv):
    _, out, _ = run_cli(capsys, "correlate", "--input", panel_csv, "--format", "json")
    c = cells(json.loads(out), "correlation")
    assert c["pearson"]["r"]["value"] == pytest.approx(0.717, abs=1e-9)
    assert c["regression k~LGD"]["adj_r2"]["value"] == pytest.approx(0.500, abs=5e-3)


def test_naive_from_published_moments(capsys):
    _, out, _ = run_cli(capsys, "naive", "--format", "json", "--no-timestamp")
    assert cells(json.loads(out), "naive_capital")["rc"]["value"] == pytest.approx(0.0866, abs=5e-4)
    _, out, _ = run_cli(capsys, "naive", "--grade", "sg", "--format", "json", "--no-timestamp")
    assert cells(json.loads(out), "naive_capital")["rc"]["value"] == pytest.approx(0.1224, abs=5e-4)


def test_explicit_moments_override(capsys):
    _, out, _ = run_cli(capsys, "naive", "--pd-hat", "0.0430", "--format", "json")
    m = cells(json.loads(out), "model")
    assert m["source"] == "moments" and m["pd_hat"]["value"] == 0.043
    assert norm_cdf(m["k_hat"]["value"]) < 0.043  # k_hat re-inferred, sits below the probit of the mean


def test_capital_table_layout(capsys):
    code, out, _ = run_cli(capsys, "capital", *FAST)
    assert code == 0
    assert "== capital ==" in out and "== addon ==" in out
    for name in ("lgd_only", "k_only", "independent", "correlated"):
        assert name in out
    assert "excess_el" in out and "%" in out


def test_scenario_subset_and_compare_alpha(capsys):
    _, out, _ = run_cli(capsys, "addon", "--scenarios", "k_only,correlated", "--compare-alpha", "0.99",
                        "--format", "json", *FAST)
    rep = json.loads(out)
    assert list(cells(rep, "addon")) == ["k_only", "correlated"]
    assert list(cells(rep, "addon_alpha_0.99")) == ["k_only", "correlated"]


def test_json_and_csv_agree(capsys, panel_csv):
    _, js, _ = run_cli(capsys, "report", "--input", panel_csv, "--format", "json", *FAST)
    _, cs, _ = run_cli(capsys, "report", "--input", panel_csv, "--format", "csv", *FAST)
    flat = []
    cli._flatten("", json.loads(js)["sections"], flat)
    rows = list(csv.DictReader(cs.splitlines()))
    assert len(rows) == len(flat)
    for (key, value, unit), row in zip(flat, rows):
        assert row["key"] == key and row["unit"] == unit
        if isinstance(value, float):
            assert float(row["value"]) == value  # bit-exact
        else:
            assert row["value"] == str(value)


def test_table_rounds_percent(capsys):
    _, out, _ = run_cli(capsys, "naive", "--no-timestamp")
    assert "8.67%" in out


def test_byte_identical_reruns(capsys, panel_csv):
    args = ["report", "--input", panel_csv, "--format", "json", *FAST]
    _, a, _ = run_cli(capsys, *args)
    _, b, _ = run_cli(capsys, *args)
    assert a == b


def test_digest_ignores_timestamp(capsys):
    _, a, _ = run_cli(capsys, "capital", "--format", "json", "--nsim", "5000")
    _, b, _ = run_cli(capsys, "capital", "--format", "json", "--nsim", "5000", "--no-timestamp")
    ma, mb = json.loads(a)["metadata"], json.loads(b)["metadata"]
    assert "timestamp" in ma and "timestamp" not in mb
    assert ma["digest"] == mb["digest"]


def test_threads_do_not_change_output(capsys):
    _, a, _ = run_cli(capsys, "capital", "--format", "json", "--threads", "1", *FAST)
    _, b, _ = run_cli(capsys, "capital", "--format", "json", "--threads", "4", *FAST)
    assert a == b


def test_seed_changes_output(capsys):
    _, a, _ = run_cli(capsys, "capital", "--format", "json", "--seed", "1", *FAST)
    _, b, _ = run_cli(capsys, "capital", "--format", "json", "--seed", "2", *FAST)
    assert json.loads(a)["metadata"]["digest"] != json.loads(b)["metadata"]["digest"]


def test_metadata_fields(capsys):
    _, out, _ = run_cli(capsys, "capital", "--format", "json", "--obligors", "50", "--rho-mode", "mean",
                        "--clamp-lgd", "--nsim", "1e4", "--seed", "0x10")
    meta = json.loads(out)["metadata"]
    assert meta["granularity"] == "finite(50)" and meta["rho_mode"] == "of_mean_pd"
    assert meta["lgd_clamp"] is True and meta["n_sim"] == 10_000 and meta["seed"] == 16
    assert len(meta["input_digest"]) == 64


def test_out_file(capsys, tmp_path):
    target = tmp_path / "r.json"
    code, out, _ = run_cli(capsys, "naive", "--format", "json", "--out", str(target))
    assert code == 0 and out == "" and json.loads(target.read_text())["sections"]["naive_capital"]


def test_histogram(capsys, tmp_path):
    target = tmp_path / "h.csv"
    code, _, _ = run_cli(capsys, "capital", "--histogram", str(target), *FAST)
    assert code == 0
    rows = list(csv.DictReader(target.open()))
    assert len(rows) == 100 and sum(int(r["count"]) for r in rows) == 20000


def test_qq(capsys, panel_csv, tmp_path):
    outdir = tmp_path / "qq"
    code, _, _ = run_cli(capsys, "qq", "--input", panel_csv, "--out", str(outdir))
    assert code == 0
    for name in ("qq_lgd.csv", "qq_k_ar.csv"):
        pts = np.loadtxt(outdir / name, delimiter=",", skiprows=1)
        assert pts.shape == (37, 2)
        assert np.all(np.diff(pts[:, 0]) > 0) and np.all(np.diff(pts[:, 1]) >= 0)


def test_config_file_with_cli_override(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("alpha = 0.99\nn_sim = 5000\ngrade = sg\n")
    _, out, _ = run_cli(capsys, "naive", "--config", str(cfg), "--grade", "ar", "--format", "json")
    meta = json.loads(out)["metadata"]
    assert meta["alpha"] == 0.99 and meta["grade"] == "ar" and meta["n_sim"] == 5000


# exit codes

def test_exit_validation_small_sample(capsys, tmp_path):
    path = tmp_path / "tiny.csv"
    write_panel(RatePanel([2000, 2001], [0.4, 0.5], [0.01, 0.02], [0.03, 0.04]), path)
    code, _, err = run_cli(capsys, "normality", "--input", str(path))
    assert code == 2 and "3 <= n" in err


def test_exit_validation_empty_panel(capsys, tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("year,lgd_rate,pd_all_ratings,pd_speculative\n")
    code, _, err = run_cli(capsys, "describe", "--input", str(path))
    assert code == 2 and "empty" in err


def test_exit_validation_missing_panel(capsys):
    assert run_cli(capsys, "describe")[0] == 2


def test_exit_validation_bad_scenario(capsys):
    assert run_cli(capsys, "addon", "--scenarios", "bogus", *FAST)[0] == 2


def test_exit_validation_small_nsim(capsys):
    assert run_cli(capsys, "capital", "--nsim", "10")[0] == 2


def test_exit_numeric(capsys):
    code, _, err = run_cli(capsys, "naive", "--pd-hat", "1.5")
    assert code == 3 and err.startswith("numeric error")


def test_exit_io_missing_input(capsys, tmp_path):
    assert run_cli(capsys, "describe", "--input", str(tmp_path / "nope.csv"))[0] == 4


def test_exit_io_bad_qq_path(capsys, panel_csv, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, _, err = run_cli(capsys, "qq", "--input", panel_csv, "--out", str(blocker / "sub"))
    assert code == 4 and err.startswith("I/O error")


def test_argparse_rejects_bad_flag():
    with pytest.raises(SystemExit) as exc:
        cli.main(["capital", "--grade", "bbb"])
    assert exc.value.code == 2
