import csv
import io
import json

import numpy as np
import pytest

from qgraph.cli import cmd_spectrum, main
from qgraph.errors import ConfigError
from qgraph.fileio import format_value, parse_config, render_csv

CROSS95 = {"family": "cross", "params": {"l": 1, "lam": 0.95, "alpha": 1}}


def run_cli(tmp_path, command, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    out = tmp_path / f"{command}.csv"
    code = main([command, "--config", str(path), "--out", str(out)])
    return code, (out.read_text() if out.exists() else None)


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_spectrum_is_deterministic(tmp_path):
    cfg = {"graph": CROSS95, "command": {"L_range": [2, 4], "L_points": 5, "k_window": [0.1, 8]}}
    a = cmd_spectrum(parse_config(cfg, "spectrum"))
    b = cmd_spectrum(parse_config(cfg, "spectrum"))
    assert a == b and a.startswith("L,k,dkdL\n")
    code, text = run_cli(tmp_path, "spectrum", cfg)
    assert code == 0 and text == a


def test_spectrum_empty_window(tmp_path):
    cfg = {"graph": CROSS95, "command": {"L_points": 4, "k_window": [3, 3]}}
    code, text = run_cli(tmp_path, "spectrum", cfg)
    assert code == 0 and text == "L,k,dkdL\n"


def test_spectrum_flat_at_lambda_one(tmp_path):
    cfg = {"graph": {"family": "cross", "params": {"lam": 1}},
           "command": {"L_range": [1, 3], "L_points": 3, "k_window": [0.1, 5]}}
    code, text = run_cli(tmp_path, "spectrum", cfg)
    body = np.array(rows(text)[1:], dtype=float)
    assert code == 0 and len(body) == 9
    assert np.max(np.abs(body[:, 2])) < 1e-6


def test_resonances_single_pole(tmp_path):
    cfg = {"graph": CROSS95, "command": {"region": [6.0, 6.6, -0.3, -1e-4]}}
    code, text = run_cli(tmp_path, "resonances", cfg)
    r = rows(text)
    assert code == 0 and r[0] == ["re_k", "im_k", "residual", "count_check"] and len(r) == 2
    z = complex(float(r[1][0]), float(r[1][1]))
    assert abs(z - (6.3279390972803915 - 0.06790413476748342j)) < 1e-9
    assert float(r[1][2]) < 1e-10 and r[1][3] == "1"


def test_resonances_near_origin_is_empty(tmp_path):
    cfg = {"graph": CROSS95, "command": {"region": [0, 0.1, 0, 0.1]}}
    with pytest.warns(UserWarning):
        code, text = run_cli(tmp_path, "resonances", cfg)
    assert code == 0 and text == "re_k,im_k,residual,count_check\n"


def test_resonances_embedded_eigenvalue(tmp_path):
    cfg = {"graph": {"family": "cross", "params": {"lam": 1}}, "command": {"region": [6.0, 6.5, -0.1, 0.1]}}
    code, text = run_cli(tmp_path, "resonances", cfg)
    r = rows(text)
    assert code == 0 and len(r) == 2 and abs(float(r[1][0]) - 2 * np.pi) < 1e-10


def test_trajectory_single_point_and_reverse(tmp_path):
    cfg = {"graph": CROSS95, "command": {"lambda_start": 0.95, "lambda_end": 0.95,
                                          "k_start": [6.3279390972803915, -0.06790413476748342]}}
    code, text = run_cli(tmp_path, "trajectory", cfg)
    assert code == 0 and len(rows(text)) == 2
    cfg["command"]["lambda_end"] = 1.0
    code, text = run_cli(tmp_path, "trajectory", cfg)
    body = np.array(rows(text)[1:], dtype=float)
    assert code == 0 and np.all(np.diff(body[:, 0]) > 0)
    assert abs(body[-1, 1] - 2 * np.pi) < 1e-6 and abs(body[-1, 2]) < 1e-6


def test_trajectory_needs_family(tmp_path):
    cfg = {"graph": {"edges": [1.0], "leads": 0, "coupling": {"U": [[-1, 0], [0, -1]]}}, "command": {}}
    code, _ = run_cli(tmp_path, "trajectory", cfg)
    assert code == 1


def test_bound_states_rows(tmp_path):
    cfg = {"graph": {"family": "cross", "params": {"lam": 0.5, "alpha": -6}}, "command": {"L_grid": [2, 12]}}
    code, text = run_cli(tmp_path, "bound-states", cfg)
    r = rows(text)
    assert code == 0 and r[0] == ["L", "kappa", "energy"]
    assert [x[0] for x in r[1:]] == ["2", "12", "inf"]
    assert abs(float(r[3][1]) - 1.2303026038064) < 1e-10
    assert abs(float(r[3][2]) + 1.2303026038064 ** 2) < 1e-9


def test_bound_states_repulsive_is_empty(tmp_path):
    cfg = {"graph": {"family": "cross", "params": {"lam": 0.5, "alpha": 1}}, "command": {}}
    code, text = run_cli(tmp_path, "bound-states", cfg)
    assert code == 0 and text == "L,kappa,energy\n"


def test_validate_pass_and_special_cross_line(tmp_path):
    cfg = {"command": {"families": ["special_cross"], "draws": 1}}
    code, text = run_cli(tmp_path, "validate", cfg)
    assert code == 0
    assert "PASS" in text and "FAIL" not in text
    assert "c0 identically zero confirmed" in text


def test_validate_perturbed_unitary_fails(tmp_path):
    U = (np.eye(2) * (1 + 1e-6)).tolist()
    cfg = {"command": {"families": ["cross"], "draws": 1, "U": U}}
    code, text = run_cli(tmp_path, "validate", cfg)
    assert code == 2 and "FAIL" in text


def test_explicit_blocks_match_family(tmp_path):
    blocks = {"edges": [0.05, 1.95], "leads": 2,
              "coupling": {"blocks": [{"vertices": [0, 2, 4, 5], "delta": 1.0},
                                      {"vertices": [1], "U": [[-1]]}, {"vertices": [3], "U": [[-1]]}]}}
    region = {"region": [6.0, 6.6, -0.3, -1e-4]}
    _, a = run_cli(tmp_path, "resonances", {"graph": blocks, "command": region}, "a.json")
    _, b = run_cli(tmp_path, "resonances", {"graph": CROSS95, "command": region}, "b.json")
    za, zb = (complex(float(r[1][0]), float(r[1][1])) for r in (rows(a), rows(b)))
    assert abs(za - zb) < 1e-10


def test_graph_file_relative_to_config(tmp_path):
    (tmp_path / "graph.json").write_text(json.dumps(CROSS95))
    code, text = run_cli(tmp_path, "resonances", {"graph": "graph.json", "command": {"region": [6, 6.6, -0.3, -1e-4]}})
    assert code == 0 and len(rows(text)) == 2


@pytest.mark.parametrize("cfg", [
    {"graph": CROSS95, "command": {"L_rang": [1, 2]}},
    {"graph": CROSS95, "colour": "red"},
    {"graph": {"family": "cross", "params": {"lambda": 0.5}}},
    {"graph": CROSS95, "command": {"k_window": [5, 1]}},
    {"graph": CROSS95, "numeric": {"grid_density": -1}},
    {"command": {}},
])
def test_config_errors_exit_1(tmp_path, cfg):
    code, text = run_cli(tmp_path, "spectrum", cfg)
    assert code == 1 and text is None


def test_command_name_mismatch():
    with pytest.raises(ConfigError):
        parse_config({"graph": CROSS95, "command": {"name": "resonances"}}, "spectrum")


def test_missing_config_exit_3(tmp_path):
    assert main(["spectrum", "--config", str(tmp_path / "nope.json")]) == 3


def test_no_partial_output_on_numeric_failure(tmp_path):
    out = tmp_path / "t.csv"
    out.write_text("previous\n")
    # a starting guess far from any pole fails to refine
    cfg = {"graph": {"family": "cross", "params": {"lam": 1}},
           "command": {"lambda_start": 1.0, "lambda_end": 0.5, "k_start": [0.2, 50.0]}}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    code = main(["trajectory", "--config", str(path), "--out", str(out)])
    assert code == 2 and out.read_text() == "previous\n"
    assert [p.name for p in tmp_path.iterdir() if p.name.endswith(".tmp")] == []


def test_unwritable_output_exit_3(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"graph": CROSS95, "command": {"L_points": 0}}))
    assert main(["spectrum", "--config", str(path), "--out", str(tmp_path / "missing" / "o.csv")]) == 3


def test_stdout_output(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"graph": CROSS95, "command": {"L_points": 0}}))
    assert main(["spectrum", "--config", str(path)]) == 0
    assert capsys.readouterr().out == "L,k,dkdL\n"


def test_value_formatting():
    assert [format_value(v) for v in (-0.0, 0.1, float("nan"), float("-inf"), 3, "inf")] == \
        ["0", "0.10000000000000001", "nan", "-inf", "3", "inf"]
    assert float(format_value(np.pi)) == np.pi
    assert render_csv(["a"], []) == "a\n"
