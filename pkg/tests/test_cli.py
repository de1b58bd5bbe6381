import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from sigrecon.cli import ExperimentConfig, main, stream


def run(argv):
    out = io.StringIO()
    code = main(argv, out=out)
    return code, out.getvalue()


def write_config(tmp_path, **data):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return str(path)


def test_trees_counts():
    code, text = run(["trees", "--word", "1,2,1,2"])
    assert code == 0
    assert "# trees: 6" in text and "# rooted_ops: 24" in text
    rows = [line for line in text.splitlines() if line.startswith("tree,")]
    assert len(rows) == 6


def test_trees_rejects_bad_word():
    assert run(["trees", "--word", "1,x"])[0] == 2
    assert run(["trees", "--word", "1" * 9])[0] == 2


def test_sig_single_segment_closed_form(tmp_path):
    cfg = write_config(tmp_path, d=1, N=1, L=4, path={"points": [[0.0], [1.5]]})
    code, text = run(["sig", "--config", cfg])
    assert code == 0
    data = json.loads(text)
    levels = data["signature"]["levels"]
    for n in range(5):
        assert levels[n][0] == pytest.approx(1.5**n / math.factorial(n))
    assert data["config"]["L"] == 4


def test_sig_level_flag_overrides_config(tmp_path):
    cfg = write_config(tmp_path, d=2, N=1, L=4, path={"points": [[0, 0], [1, 2]]})
    data = json.loads(run(["sig", "--config", cfg, "--level", "2"])[1])
    assert data["signature"]["L"] == 2 and data["config"]["L"] == 2


def test_solve_writes_trajectory(tmp_path):
    cfg = write_config(tmp_path, d=2, N=2, model="neural1", seed=3, y0=[0.1, 0.2])
    out = tmp_path / "traj.csv"
    code, _ = run(["solve", "--config", cfg, "--r", "0.5", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    header = json.loads(lines[0].removeprefix("# config: "))
    assert header["seed"] == 3 and header["r"] == 0.5
    assert lines[1] == "t,Y_1,Y_2"
    assert float(lines[2].split(",")[1]) == 0.1


def test_random_run_requires_seed(tmp_path):
    cfg = write_config(tmp_path, d=2, N=2)
    assert run(["solve", "--config", cfg])[0] == 2
    assert run(["solve", "--config", cfg, "--seed", "1"])[0] == 0


@pytest.mark.parametrize("data", [
    {"d": 0},
    {"d": 2, "N": 2, "bogus": 1},
    {"d": 2, "N": 2, "path": {"points": [[0.0], [1.0]]}},
    {"d": 2, "N": 2, "seed": 1, "y0": [1.0]},
    {"d": 2, "N": 2, "seed": 1, "solver": {"steps_per_segment": 0}},
    {"d": 2, "N": 2, "seed": 1, "model": "nope"},
])
def test_invalid_configs_exit_2(tmp_path, data):
    cfg = write_config(tmp_path, **data)
    assert run(["solve", "--config", cfg])[0] == 2


def test_unreadable_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["sig", "--config", str(bad)])[0] == 2
    assert run(["sig", "--config", str(tmp_path / "missing.json")])[0] == 2


def test_usage_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["independence", "--config", "x.json"])
    assert info.value.code == 2


def test_runtime_failure_exits_1(tmp_path, capsys):
    cfg = write_config(tmp_path, d=1, N=1, model="scalar_poly", seed=0, y0=[50.0],
                       path={"points": [[0.0], [20.0]]}, solver={"max_halvings": 2})
    assert run(["solve", "--config", cfg])[0] == 1
    assert "SolverError" in capsys.readouterr().err


def test_independence_verdicts(tmp_path):
    cfg = write_config(tmp_path, d=2, N=1, model="neural2exp", seed=0)
    code, text = run(["independence", "--config", cfg, "--level", "2"])
    data = json.loads(text)
    assert code == 0 and data["tree_family"]["verdict"] == "independent" and data["config"]["seed"] == 0
    cfg = write_config(tmp_path, d=3, N=1, model="scalar_poly", seed=0)
    assert run(["independence", "--config", cfg, "--level", "3"])[0] == 1
    cfg = write_config(tmp_path, d=3, N=1, model="scalar_poly", seed=0, expect="dependent")
    code, text = run(["independence", "--config", cfg, "--level", "3", "--check-remark37"])
    assert code == 0 and json.loads(text)["cyclic_identity"]["normalized_residual"] <= 1e-9


def test_independence_ladder_flag(tmp_path):
    cfg = write_config(tmp_path, d=2, N=3, model="neural1", seed=2, expect="dependent",
                       certificate={"n_point_sets": 1})
    code, text = run(["independence", "--config", cfg, "--level", "4", "--check-remark39"])
    data = json.loads(text)
    assert data["ladder_collision"]["word_prime"] == [1, 1, 2, 2]
    assert data["ladder_collision"]["component_similarity"] >= 1 - 1e-10
    assert code == (0 if data["ok"] else 1)


def test_reconstruct_outputs(tmp_path):
    cfg = write_config(tmp_path, d=2, N=2, L=2, model="neural2exp", seed=5)
    out, csv_out = tmp_path / "rep.json", tmp_path / "rep.csv"
    code, _ = run(["reconstruct", "--config", cfg, "--out", str(out), "--csv", str(csv_out)])
    data = json.loads(out.read_text())
    assert code == 0 and data["passed"] is True
    assert data["config"]["experiment"]["seed"] == 5
    lines = csv_out.read_text().splitlines()
    assert lines[0].startswith("# config: ") and lines[1].startswith("level,")


def test_reconstruct_negative_control_exits_1(tmp_path, capsys):
    cfg = write_config(tmp_path, d=3, N=1, L=3, model="scalar_poly", seed=0, path={"segments": 3, "box": 1.0})
    code, text = run(["reconstruct", "--config", cfg])
    assert code == 1
    assert json.loads(text)["levels"][2]["error"].startswith("SingularSystemError")
    assert "level 3" in capsys.readouterr().err


def test_demo_is_bit_identical():
    a, b = run(["demo", "--seed", "42"]), run(["demo", "--seed", "42"])
    assert a == b and a[0] == 0
    assert "# passed: true" in a[1]


def test_named_streams_are_independent():
    a = stream(1, "path").standard_normal(3)
    np.testing.assert_array_equal(a, stream(1, "path").standard_normal(3))
    assert not np.array_equal(a, stream(1, "y0").standard_normal(3))


def test_config_round_trip():
    cfg = ExperimentConfig(seed=4)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sigrecon", "trees", "--word", "121"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "# trees: 2" in proc.stdout
