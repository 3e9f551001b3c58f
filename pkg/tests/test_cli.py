import json

import numpy as np
import pandas as pd
import pytest

from floquetlab.cli import float_list, int_list, main, params_path, point_path, purification_fits


def _manifest(output):
    with open(output / "manifest.json") as f:
        return json.load(f)


def test_list_parsers():
    assert int_list("9,12,15") == [9, 12, 15]
    assert float_list("0.1,0.2") == [0.1, 0.2]
    assert float_list("0:1:5") == [0.0, 0.25, 0.5, 0.75, 1.0]


def test_gt(tmp_path):
    output = tmp_path / "gt"
    argv = ["gt", "--output", str(output), "--seed", "3", "--L", "3", "--pm", "0,1", "--cycles", "4",
            "--realizations", "2", "-q"]
    assert main(argv) == 0
    table = pd.read_csv(output / "gt.csv")
    assert list(table.columns) == ["L", "p_M", "p_S", "t", "mean", "stderr"]
    ideal = table[table["p_M"] == 0.0]
    np.testing.assert_array_equal(ideal["mean"], [1, 0, 1, 0, 1])
    frozen = table[table["p_M"] == 1.0]
    np.testing.assert_array_equal(frozen["mean"], np.ones(5))

    manifest = _manifest(output)
    assert manifest["status"] == "ok" and manifest["seed"] == 3
    assert manifest["config"]["L"] == [3]
    assert manifest["argv"] == argv
    assert manifest["wall_time"] >= 0


def test_gt_reuses_complete_point_files(tmp_path):
    output = tmp_path / "gt"
    argv = ["gt", "--output", str(output), "--seed", "3", "--L", "3", "--cycles", "4", "--realizations", "2", "-q"]
    assert main(argv) == 0
    path = point_path(str(output), "runs", 3, 0.0, 0.0)
    frame = pd.read_csv(path)
    frame["G"] = 1
    frame.to_csv(path, index=False)
    assert main(argv) == 0
    np.testing.assert_array_equal(pd.read_csv(output / "gt.csv")["mean"], np.ones(5))

    # more realizations than stored: the point is recomputed
    assert main(argv[:-3] + ["--realizations", "3", "-q"]) == 0
    np.testing.assert_array_equal(pd.read_csv(output / "gt.csv")["mean"], [1, 0, 1, 0, 1])


def test_config_file_with_flag_override(tmp_path):
    output = tmp_path / "sweep"
    config = tmp_path / "sweep.json"
    config.write_text(json.dumps({"output": str(output), "seed": 1, "L": [3], "cycles": 12, "corrected": True,
                                  "d": 3}))
    assert main(["sweep", "--config", str(config), "--cycles", "10", "-q"]) == 0
    table = pd.read_csv(output / "sweep.csv")
    assert table.loc[0, "Gpi"] == pytest.approx(1.0)
    assert table.loc[0, "corrected_Gpi"] == pytest.approx(1.0)
    assert _manifest(output)["config"]["cycles"] == 10


def test_missing_seed(tmp_path, capsys):
    output = tmp_path / "run"
    assert main(["gt", "--output", str(output), "--L", "3"]) == 2
    assert "seed is mandatory" in capsys.readouterr().err
    manifest = _manifest(output)
    assert manifest["status"] == "invalid"


def test_unknown_config_key(tmp_path):
    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"sizes": [3]}))
    assert main(["gt", "--config", str(config), "--output", str(tmp_path / "run"), "--seed", "0"]) == 2


def test_phase_diagram(tmp_path):
    output = tmp_path / "phase"
    argv = ["phase-diagram", "--output", str(output), "--seed", "2", "--L", "6", "--pm", "0", "--ps", "0",
            "--cycles", "3", "--realizations", "2", "-q"]
    assert main(argv) == 0
    table = pd.read_csv(output / "phase_diagram.csv")
    assert table.loc[0, "tee"] == 1.0 and table.loc[0, "tee_stderr"] == 0.0
    assert np.isnan(table.loc[0, "beta"])  # too few cycles for a decay fit


def test_tee(tmp_path):
    output = tmp_path / "tee"
    assert main(["tee", "--output", str(output), "--seed", "2", "--L", "6", "--cycles", "2", "-q"]) == 0
    table = pd.read_csv(output / "tee.csv")
    np.testing.assert_array_equal(table["mean"], np.ones(3))


def test_purify(tmp_path):
    output = tmp_path / "purify"
    argv = ["purify", "--output", str(output), "--seed", "0", "--L", "3", "--cycles", "3", "--realizations", "2",
            "--ancillas", "2", "--no-scramble", "-q"]
    assert main(argv) == 0
    table = pd.read_csv(output / "purify.csv")
    assert table.loc[0, "purified_fraction"] == 1.0
    assert table.loc[0, "final_entropy"] == 0.0
    assert (output / "purify_fit.json").is_file()
    assert (output / "points" / "purify_L3_pm0.csv").is_file()


def test_percolate(tmp_path):
    output = tmp_path / "perc"
    argv = ["percolate", "--output", str(output), "--seed", "5", "--kind", "square", "--L", "4,8",
            "--p", "0.3:0.7:5", "--samples", "200", "--bootstrap", "5", "-q"]
    assert main(argv) == 0
    with open(output / "threshold.json") as f:
        report = json.load(f)
    assert 0.3 < report["p_c"] < 0.7
    assert report["sizes"] == [4, 8]
    assert len(pd.read_csv(output / "spanning.csv")) == 10
    assert (output / "points" / "spanning_square_L8.csv").is_file()


def test_markov(tmp_path):
    output = tmp_path / "markov"
    measured = tmp_path / "gt.csv"
    t = np.arange(6)
    pd.DataFrame({"L": 6, "p_M": 0.0, "p_S": 0.0, "t": t, "mean": (t + 1) % 2, "stderr": 0.0}).to_csv(
        measured, index=False
    )
    argv = ["markov", "--output", str(output), "--seed", "0", "--L", "6", "--pm", "0", "--samples", "2",
            "--cycles", "5", "--columns", "--measured", str(measured), "-q"]
    assert main(argv) == 0
    with open(output / "markov.json") as f:
        report = json.load(f)
    assert report["channels"]["probabilities"]["em_exchange"] == 1.0
    assert report["comparison"]["within_two_stderr"]
    assert "sampled_matrix" in report
    np.testing.assert_allclose(pd.read_csv(output / "predicted.csv")["predicted"], (t + 1) % 2)


def test_failure_is_recorded(tmp_path):
    output = tmp_path / "markov"
    measured = tmp_path / "gt.csv"
    pd.DataFrame({"L": [9], "p_M": [0.5], "t": [0], "mean": [1.0], "stderr": [0.0]}).to_csv(measured, index=False)
    argv = ["markov", "--output", str(output), "--seed", "0", "--L", "6", "--pm", "0", "--samples", "1",
            "--measured", str(measured), "-q"]
    assert main(argv) == 1
    manifest = _manifest(output)
    assert manifest["status"] == "failed"
    assert manifest["error"].startswith("ValueError")
    assert "traceback" in manifest


def test_collapse(tmp_path):
    p = np.linspace(0.3, 0.7, 11)
    rows = [
        {"L": L, "p_M": value, "Gpi": np.tanh((value - 0.5) * L**0.75), "Gpi_stderr": 0.02}
        for L in (8, 16, 32)
        for value in p
    ]
    source = tmp_path / "sweep.csv"
    pd.DataFrame(rows).to_csv(source, index=False)
    output = tmp_path / "fss"
    assert main(["collapse", "--output", str(output), "--seed", "0", "--input", str(source), "--bootstrap", "3",
                 "-q"]) == 0
    with open(output / "collapse.json") as f:
        result = json.load(f)
    assert result["p_c"] == pytest.approx(0.5, abs=0.02)
    assert result["ansatz"] == "plain"
    assert len(pd.read_csv(output / "collapsed.csv")) == 33


def test_collapse_needs_input(tmp_path):
    assert main(["collapse", "--output", str(tmp_path / "fss"), "--seed", "0", "--input", "nope.csv"]) == 2


def test_gt_recomputes_points_of_other_parameters(tmp_path):
    output = tmp_path / "gt"
    argv = ["gt", "--output", str(output), "--seed", "3", "--L", "3", "--cycles", "4", "--realizations", "2", "-q"]
    assert main(argv) == 0
    path = point_path(str(output), "runs", 3, 0.0, 0.0)
    with open(params_path(path)) as f:
        assert json.load(f)["cycles"] == 4

    assert main(argv[:-5] + ["--cycles", "6", "--realizations", "2", "-q"]) == 0
    assert pd.read_csv(output / "gt.csv")["t"].max() == 6

    frame = pd.read_csv(path)
    frame["G"] = 1
    frame.to_csv(path, index=False)
    other_seed = ["gt", "--output", str(output), "--seed", "4", "--L", "3", "--cycles", "6", "--realizations", "2",
                  "-q"]
    assert main(other_seed) == 0
    np.testing.assert_array_equal(pd.read_csv(output / "gt.csv")["mean"], (np.arange(7) + 1) % 2)


def test_percolate_recomputes_points_of_another_criterion(tmp_path):
    output = tmp_path / "perc"
    argv = ["percolate", "--output", str(output), "--seed", "5", "--kind", "square", "--L", "4,8",
            "--p", "0.3:0.7:5", "--samples", "200", "--bootstrap", "0", "-q"]
    assert main(argv) == 0
    path = output / "points" / "spanning_square_L8.csv"
    frame = pd.read_csv(path)
    frame["spanning_probability"] = 0.5
    frame.to_csv(path, index=False)
    # point files are written before the crossing is located
    main(argv[:-1] + ["--criterion", "both", "-q"])
    with open(params_path(str(path))) as f:
        assert json.load(f)["criterion"] == "both"
    recomputed = pd.read_csv(path)["spanning_probability"].to_numpy()
    assert recomputed[0] < 0.5 < recomputed[-1]


def test_purification_fits_leave_out_unpurified_sizes():
    table = pd.DataFrame(
        {
            "L": [3, 6, 9, 3, 6],
            "p_M": [0.2, 0.2, 0.2, 0.8, 0.8],
            "purification_time": [2.0, 8.0, np.nan, 1.0, np.nan],
        }
    )
    fits = purification_fits(table)
    assert fits["0.2"]["sizes"] == [3, 6]
    assert fits["0.2"]["unpurified_sizes"] == [9]
    assert fits["0.2"]["exponent"] == pytest.approx(2.0)
    assert "0.8" not in fits


def test_markov_takes_a_single_point(tmp_path, capsys):
    output = tmp_path / "markov"
    argv = ["markov", "--output", str(output), "--seed", "0", "--L", "6,9", "--pm", "0", "--samples", "1", "-q"]
    assert main(argv) == 2
    assert "single L and p_M" in capsys.readouterr().err
    assert main(argv[:6] + ["6", "--pm", "0", "--mode", "green_only", "--samples", "1", "-q"]) == 2
