import csv
import filecmp
import json
from pathlib import Path

import numpy as np
import pytest

from partialcsi.cli import (ConfigError, build_problem, load_config, main, parse_config,
                            read_decision_file)
from partialcsi.synth import per_user_utilities

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

SMALL = """
seed = 3

[scenario]
topology = "interference"
K = 2
p_max = 0.1
noise = 0.01
cross_db = 5.0
n_levels = 4

[states]
n_cells = 3

[observation]
structure = "individual"

[utility]
kind = "energy_efficiency"
psi = "outage"
psi_param = 1.0

[algorithm]
n_starts = 3

[region]
n_weights = 11

[evaluation]
n_blocks = 3000

[compare]
axis = "scenario.cross_db"
values = [3.0, 10.0]
"""


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL)
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def dirs_identical(a, b):
    cmp = filecmp.dircmp(a, b)
    names = sorted(cmp.left_list)
    return names == sorted(cmp.right_list) and all(
        filecmp.cmp(Path(a) / n, Path(b) / n, shallow=False) for n in names)


@pytest.mark.parametrize("command", ["synthesize", "region", "evaluate", "compare"])
def test_commands_deterministic(small_cfg, tmp_path, command):
    outs = [tmp_path / f"{command}{k}" for k in range(2)]
    for out in outs:
        assert main([command, "--config", str(small_cfg), "--out", str(out)]) == 0
    assert dirs_identical(*outs)


def test_seed_flag_overrides(small_cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["evaluate", "--config", str(small_cfg), "--out", str(a), "--seed", "3"])
    main(["evaluate", "--config", str(small_cfg), "--out", str(b), "--seed", "4"])
    assert read_csv(a / "evaluation.csv")[0]["mean"] != read_csv(b / "evaluation.csv")[0]["mean"]


def test_decision_file_round_trip(small_cfg, tmp_path):
    out = tmp_path / "syn"
    assert main(["synthesize", "--config", str(small_cfg), "--out", str(out)]) == 0
    profiles, header = read_decision_file(out / "decision_functions.txt")
    assert header["seed"] == "3" and len(header["config_sha256"]) == 64
    pb = build_problem(load_config(small_cfg), 3)
    u = per_user_utilities(profiles[0], pb.scenario, pb.observation, pb.spec)
    reported = [float(r["utility"]) for r in read_csv(out / "utilities.csv")]
    np.testing.assert_allclose(u, reported, rtol=1e-9)
    trace = read_csv(out / "synth_trace.csv")
    assert float(trace[-1]["w_lambda"]) == pytest.approx(u @ pb.spec.weights, rel=1e-9)


def test_evaluate_stored_functions(small_cfg, tmp_path):
    syn = tmp_path / "syn"
    main(["synthesize", "--config", str(small_cfg), "--out", str(syn)])
    text = small_cfg.read_text().replace(
        "n_blocks = 3000", f'n_blocks = 3000\ndecision_file = "{syn / "decision_functions.txt"}"')
    cfg = tmp_path / "eval.toml"
    cfg.write_text(text)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["evaluate", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["evaluate", "--config", str(small_cfg), "--out", str(b)]) == 0
    assert filecmp.cmp(a / "evaluation.csv", b / "evaluation.csv", shallow=False)


def test_region_frontier_columns(small_cfg, tmp_path):
    out = tmp_path / "reg"
    assert main(["region", "--config", str(small_cfg), "--out", str(out)]) == 0
    rows = read_csv(out / "frontier.csv")
    assert list(rows[0]) == ["lambda_1", "lambda_2", "U_1", "U_2", "profile_id"]
    profiles, _ = read_decision_file(out / "region_profiles.txt")
    pb = build_problem(load_config(small_cfg), 3)
    for r in rows:
        u = per_user_utilities(profiles[int(r["profile_id"])], pb.scenario, pb.observation, pb.spec)
        np.testing.assert_allclose(u, [float(r["U_1"]), float(r["U_2"])], rtol=1e-9)


def test_mac_qos_config(tmp_path):
    out = tmp_path / "mac"
    assert main(["region", "--config", str(CONFIGS / "mac_qos.toml"), "--out", str(out)]) == 0
    probs = sorted((float(r["probability"]) for r in read_csv(out / "mixture.csv")), reverse=True)
    assert probs[0] == pytest.approx(0.516, abs=0.02)
    assert probs[1] == pytest.approx(0.484, abs=0.02)


def test_compare_columns(small_cfg, tmp_path):
    out = tmp_path / "cmp"
    assert main(["compare", "--config", str(small_cfg), "--out", str(out)]) == 0
    rows = read_csv(out / "compare.csv")
    assert len(rows) == 2 * 5
    assert {r["policy"] for r in rows} == {"synthesized", "goodman_inversion", "iwfa",
                                           "bpc_cs", "full_power"}
    for x in ("3", "10"):
        assert len({r["draw_digest"] for r in rows if r["axis_value"] == x}) == 1


class TestErrors:
    def run(self, tmp_path, text, command="synthesize"):
        cfg = tmp_path / "c.toml"
        cfg.write_text(text)
        out = tmp_path / "out"
        code = main([command, "--config", str(cfg), "--out", str(out)])
        return code, json.loads((out / "error.json").read_text()) if code else None

    def test_unknown_key(self, tmp_path):
        code, err = self.run(tmp_path, SMALL.replace("n_cells = 3", "n_cells = 3\ncolour = 1"))
        assert code == 2 and err["exit_code"] == 2

    def test_out_of_range(self, tmp_path):
        assert self.run(tmp_path, SMALL.replace("p_max = 0.1", "p_max = -0.1"))[0] == 2

    def test_bad_toml(self, tmp_path):
        assert self.run(tmp_path, "[scenario\n")[0] == 2

    def test_weights_length(self, tmp_path):
        text = SMALL.replace('psi_param = 1.0', 'psi_param = 1.0\nweights = [1.0]')
        assert self.run(tmp_path, text)[0] == 2

    def test_infeasible_qos(self, tmp_path):
        text = (CONFIGS / "mac_qos.toml").read_text().replace(
            "qos = [2.996195167238308, 0.9987317224127692]", "qos = [6.0, 6.0]")
        code, err = self.run(tmp_path, text, "region")
        assert code == 3 and err["error"] == "QoSInfeasible"

    def test_budget(self, tmp_path):
        text = SMALL.replace("n_weights = 11", "n_weights = 11\nbudget = 10")
        assert self.run(tmp_path, text, "region")[0] == 4

    def test_goodman_without_root(self, tmp_path):
        text = SMALL.replace('psi = "outage"\npsi_param = 1.0', 'psi = "shannon"').replace(
            'values = [3.0, 10.0]', 'values = [3.0]\nbaselines = ["goodman_inversion"]')
        assert self.run(tmp_path, text, "compare")[0] == 2


def test_parse_rejects_noise_and_snr():
    with pytest.raises(ConfigError):
        parse_config(SMALL.replace("noise = 0.01", "noise = 0.01\nsnr_db = 20.0"))


@pytest.mark.parametrize("name", ["reference.toml", "noisy_reference.toml", "mac_qos.toml",
                                  "multiband_mac.toml", "multiband_mac_rate.toml"])
def test_shipped_configs_validate(name):
    load_config(CONFIGS / name)
