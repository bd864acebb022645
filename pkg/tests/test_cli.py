import csv
import io
import json

import numpy as np
import pytest

from gammakde.bandwidth import PriorConfig, bayes_adaptive_bandwidths
from gammakde.cli import load_old_faithful, main, parse_grid
from gammakde.errors import UsageError
from gammakde.estimators import UNIFORM, BandwidthSet, density_estimate


def run(capsys, *argv, environ=None):
    code = main(list(argv), environ or {})
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_bundled_fixture_shape():
    X = load_old_faithful()
    assert X.shape == (272, 2) and np.all(X > 0)


def test_fit_old_faithful(tmp_path, capsys):
    out = tmp_path / "bw.json"
    code, _, _ = run(capsys, "fit", "--data", "old-faithful", "--selector", "SM", "--out", str(out))
    assert code == 0
    doc = json.loads(out.read_text())
    H = np.array(doc["bandwidths"])
    assert H.shape == (272, 2) and np.all(H > 0)
    assert doc["alpha"] == pytest.approx(272 ** 0.4) and doc["alpha_rule"] == "n**0.4"
    assert doc["betas"] == [1.0, 1.0] and doc["selector"] == "SM" and doc["seed"] == 0
    expected = bayes_adaptive_bandwidths(load_old_faithful(), selector="SM").values
    np.testing.assert_allclose(H, expected, rtol=1e-15)


def test_fit_selector_with_spaces(tmp_path, capsys):
    code, out, _ = run(capsys, "fit", "--data", "old-faithful", "--selector", "S M")
    assert code == 0 and json.loads(out)["selector"] == "SM"


def test_fit_errors(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert run(capsys, "fit", "--data", str(empty))[0] == 2
    neg = tmp_path / "neg.csv"
    neg.write_text("a,b\n1,2\n3,-4\n")
    code, _, err = run(capsys, "fit", "--data", str(neg))
    assert code == 2 and "row 2" in err and "'b'" in err
    one = tmp_path / "one.csv"
    one.write_text("a\n1\n")
    assert run(capsys, "fit", "--data", str(one))[0] == 2
    assert run(capsys, "fit", "--data", "old-faithful", "--selector", "SMM")[0] == 2
    assert run(capsys, "fit", "--data", str(tmp_path / "missing.csv"))[0] == 2
    assert run(capsys, "fit")[0] == 2
    assert run(capsys, "fit", "--data", "old-faithful", "--alpha", "0.3")[0] == 2


def test_numeric_failure_exit_code(tmp_path, capsys):
    zero = tmp_path / "zero.csv"
    # moment fit has shape > 1, so the start vanishes at the observation 0
    zero.write_text("a\n0\n1\n1.1\n1.2\n0.9\n")
    code, _, err = run(capsys, "eval-grid", "--data", str(zero), "--start", "gamma",
                       "--selector", "S", "--grid", "0:1:3")
    assert code == 3 and "numerical failure" in err


def test_eval_grid_single_point(tmp_path, capsys):
    bw = tmp_path / "bw.json"
    assert run(capsys, "fit", "--data", "old-faithful", "--selector", "SM", "--out", str(bw))[0] == 0
    code, out, _ = run(capsys, "eval-grid", "--data", "old-faithful", "--bandwidths", str(bw),
                       "--grid", "70:70:1,3.5:3.5:1")
    assert code == 0
    table = rows(out)
    assert table[0] == ["waiting", "duration", "density"] and len(table) == 2
    H = np.array(json.loads(bw.read_text())["bandwidths"])
    direct = density_estimate(load_old_faithful(), "SM", BandwidthSet.from_matrix(H),
                              UNIFORM, [70.0, 3.5], boundary=2e-8)
    assert float(table[1][2]) == pytest.approx(direct, rel=1e-12)


def test_eval_grid_full_and_bimodal(tmp_path, capsys):
    out = tmp_path / "grid.csv"
    code, _, _ = run(capsys, "eval-grid", "--data", "old-faithful", "--selector", "SM",
                     "--grid", "40:100:100,1:6:100", "--out", str(out))
    assert code == 0
    table = rows(out.read_text())
    assert len(table[0]) == 3 and len(table) == 1 + 10000
    dens = np.array([float(r[2]) for r in table[1:]]).reshape(100, 100)
    assert np.all(dens >= 0)
    # marginal profile along duration (sum over waiting)
    profile = dens.sum(axis=0)
    peaks = [k for k in range(1, 99) if profile[k] > profile[k - 1] and profile[k] >= profile[k + 1]]
    assert len(peaks) >= 2
    duration = np.linspace(1, 6, 100)[peaks]
    assert duration.min() < 2.8 and duration.max() > 3.8


def test_eval_grid_errors(capsys):
    assert run(capsys, "eval-grid", "--data", "old-faithful", "--grid", "-1:5:3,1:2:3")[0] == 2
    assert run(capsys, "eval-grid", "--data", "old-faithful", "--grid", "1:5:3")[0] == 2
    assert run(capsys, "eval-grid", "--data", "old-faithful", "--grid", "1:5,1:2:3")[0] == 2
    assert run(capsys, "eval-grid", "--data", "old-faithful")[0] == 2


def test_parse_grid():
    axes = parse_grid("0:1:3,2:2:1", 2)
    np.testing.assert_array_equal(axes[0], [0.0, 0.5, 1.0])
    np.testing.assert_array_equal(axes[1], [2.0])
    with pytest.raises(UsageError):
        parse_grid("1:0:3", 1)


def test_bench_ise_csv(capsys):
    code, out, _ = run(capsys, "bench-ise", "--scenario", "A", "--n", "20", "--methods",
                       "standard,modified", "--replications", "1", "--seed", "4")
    assert code == 0
    table = rows(out)
    assert table[0] == ["scenario", "n", "method", "mean_x1e3", "sd_x1e3"]
    assert [r[2] for r in table[1:]] == ["standard", "modified"]
    assert all(float(r[4]) == 0.0 for r in table[1:])
    assert float(table[1][3]) > 0


def test_bench_ise_spec_file_and_errors(tmp_path, capsys):
    from gammakde.scenarios import builtin
    spec = tmp_path / "spec.json"
    spec.write_text(builtin("E").to_json())
    code, out, _ = run(capsys, "bench-ise", "--spec", str(spec), "--n", "15",
                       "--methods", "combined", "--replications", "2")
    assert code == 0 and rows(out)[1][2] == "combined"
    assert run(capsys, "bench-ise", "--scenario", "Z")[0] == 2
    assert run(capsys, "bench-ise")[0] == 2
    assert run(capsys, "bench-ise", "--scenario", "A", "--n", "x")[0] == 2


def test_bench_loglik(capsys):
    code, out, _ = run(capsys, "bench-loglik", "--data", "old-faithful", "--m", "100",
                       "--replications", "2")
    assert code == 0
    table = rows(out)
    assert table[0] == ["m_n", "method", "mean", "sd"]
    assert [r[1] for r in table[1:]] == ["standard", "modified", "combined"]
    assert run(capsys, "bench-loglik", "--data", "old-faithful", "--m", "272")[0] == 2


def test_reproducible_outputs_are_byte_identical(tmp_path, capsys):
    paths = [tmp_path / f"run{k}.json" for k in range(2)]
    for p in paths:
        assert run(capsys, "fit", "--data", "old-faithful", "--reproducible", "--seed", "9",
                   "--out", str(p))[0] == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert json.loads(paths[0].read_text())["created"] is None
    csvs = [tmp_path / f"b{k}.csv" for k in range(2)]
    for p in csvs:
        run(capsys, "bench-ise", "--scenario", "B", "--n", "20", "--replications", "2",
            "--seed", "5", "--out", str(p))
    assert csvs[0].read_bytes() == csvs[1].read_bytes()
    assert not list(tmp_path.glob(".tmp-*"))


def test_env_overrides(capsys):
    code, out, _ = run(capsys, "fit", "--data", "old-faithful",
                       environ={"GAMMAKDE_ALPHA_EXP": "0.8", "GAMMAKDE_SELECTOR": "SS"})
    doc = json.loads(out)
    assert code == 0 and doc["alpha"] == pytest.approx(272 ** 0.8) and doc["selector"] == "SS"
    expected = bayes_adaptive_bandwidths(load_old_faithful(), prior=PriorConfig.default(272, 2, 0.8),
                                         selector="SS").values
    np.testing.assert_allclose(doc["bandwidths"], expected, rtol=1e-15)
    # explicit flags win
    code, out, _ = run(capsys, "fit", "--data", "old-faithful", "--alpha-exp", "0.4",
                       environ={"GAMMAKDE_ALPHA_EXP": "0.8"})
    assert json.loads(out)["alpha"] == pytest.approx(272 ** 0.4)
    assert run(capsys, "fit", "--data", "old-faithful",
               environ={"GAMMAKDE_ALPHA_EXP": "abc"})[0] == 2
    # env can supply required flags
    assert run(capsys, "fit", environ={"GAMMAKDE_DATA": "old-faithful"})[0] == 0


def test_module_entry_point():
    import subprocess
    import sys
    res = subprocess.run([sys.executable, "-m", "gammakde", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()
