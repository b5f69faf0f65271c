"""JSON run configurations and deterministic CSV output.

Graph section
-------------
Either a built-in family::

    {"family": "cross", "params": {"l": 1, "lam": 0.95, "alpha": 1}}

or an explicit flower graph::

    {"edges": [1.0, 2.0], "leads": 2, "coupling": {...}}

where ``coupling`` is one of

* ``{"family": ..., "params": {...}}`` (the built-in graph; ``edges`` and
  ``leads`` may then be omitted and must match if given),
* ``{"U": matrix}`` with the full ``(2N+M) x (2N+M)`` unitary,
* ``{"blocks": [{"vertices": [...], "U": matrix}, ...]}``; a block may give
  ``"A"``/``"B"`` instead of ``"U"``, or ``"delta": alpha`` for a delta coupling.

Matrices are lists of rows; complex entries are ``[re, im]`` pairs, real
entries may be plain numbers.  Boundary index ``2i`` is the ``x = 0`` end of
edge ``i``, ``2i+1`` its ``x = l_i`` end, ``2N + j`` lead ``j``.  The graph
section may also be a path to a JSON file holding it, relative to the
configuration file.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, ParameterError, StructureError
from .graph import (GraphParameters, MetricGraph, VertexCoupling, build_flower, builtin_graph,
                    delta_coupling)

COMMANDS = ("spectrum", "resonances", "trajectory", "bound-states", "validate")

# command option defaults; keys not listed here are rejected
COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "spectrum": {"boundary": "dirichlet", "L_range": [0.5, 8.0], "L_points": 600, "k_window": [0.1, 12.0]},
    "resonances": {"region": [0.1, 12.0, -1.0, -1e-4]},
    "trajectory": {"lambda_start": 1.0, "lambda_end": 0.0, "k_start": [2 * math.pi, 0.0], "step": 0.01,
                   "max_step": 0.02},
    "bound-states": {"boundary": "dirichlet", "L_grid": [1.0, 2.0, 3.0, 5.0, 8.0, 12.0], "include_open": True,
                     "kappa_window": [1e-3, 20.0]},
    "validate": {"families": ["loop", "cross", "tgraph", "special_cross"], "draws": 2, "seed": 0,
                 "L": 1.7, "U": None},
}
NUMERIC_KEYS = {"grid_density"}
TOP_KEYS = {"graph", "command", "numeric", "output"}


@dataclass(frozen=True)
class RunConfig:
    command: str
    graph: MetricGraph | None
    options: dict
    numeric: dict = field(default_factory=dict)
    output: str | None = None
    family: str | None = None
    params: GraphParameters | None = None


def parse_complex(value, name: str = "value") -> complex:
    if isinstance(value, bool):
        raise ConfigError(f"{name}: expected a number or [re, im]")
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        return complex(float(value[0]), float(value[1]))
    raise ConfigError(f"{name}: expected a number or [re, im], got {value!r}")


def parse_matrix(rows, name: str = "matrix") -> np.ndarray:
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise ConfigError(f"{name}: expected a non-empty list of rows")
    out = np.array([[parse_complex(v, name) for v in r] for r in rows], dtype=complex)
    if out.ndim != 2 or out.shape[0] != out.shape[1]:
        raise ConfigError(f"{name}: matrix must be square, got shape {out.shape}")
    return out


def _check_keys(data: Mapping, allowed: Iterable[str], where: str):
    if not isinstance(data, Mapping):
        raise ConfigError(f"{where}: expected an object")
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")


def _family_graph(family, params) -> tuple[MetricGraph, GraphParameters]:
    if not isinstance(family, str):
        raise ConfigError("graph.family must be a string")
    try:
        p = GraphParameters.from_mapping(params or {})
        return builtin_graph(family, p), p
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None


def parse_graph(data, base: Path | None = None) -> tuple[MetricGraph, str | None, GraphParameters | None]:
    """Build a :class:`MetricGraph` from the graph section (see module docstring)."""
    if isinstance(data, str):
        path = Path(data) if base is None else base / data
        data = load_json(path)
    _check_keys(data, {"family", "params", "edges", "leads", "coupling"}, "graph")
    if "family" in data:
        if {"edges", "leads", "coupling"} & set(data):
            raise ConfigError("graph: give either family/params or edges/leads/coupling")
        g, p = _family_graph(data["family"], data.get("params"))
        return g, data["family"], p
    if "params" in data:
        raise ConfigError("graph.params needs graph.family")
    if "coupling" not in data:
        raise ConfigError("graph: missing coupling")
    cpl = data["coupling"]
    _check_keys(cpl, {"family", "params", "U", "blocks"}, "graph.coupling")
    kinds = [k for k in ("family", "U", "blocks") if k in cpl]
    if len(kinds) != 1:
        raise ConfigError("graph.coupling: give exactly one of family, U, blocks")
    if kinds[0] == "family":
        g, p = _family_graph(cpl["family"], cpl.get("params"))
        if "edges" in data and not np.allclose(data["edges"], g.edge_lengths):
            raise ConfigError("graph.edges do not match the family's edge lengths")
        if "leads" in data and data["leads"] != g.lead_count:
            raise ConfigError("graph.leads does not match the family's lead count")
        return g, cpl["family"], p
    if "params" in cpl:
        raise ConfigError("graph.coupling.params needs coupling.family")
    edges = data.get("edges")
    leads = data.get("leads", 0)
    if not isinstance(edges, list) or not all(isinstance(e, (int, float)) for e in edges):
        raise ConfigError("graph.edges must be a list of lengths")
    if not isinstance(leads, int) or isinstance(leads, bool) or leads < 0:
        raise ConfigError("graph.leads must be a non-negative integer")
    if any(not (math.isfinite(e) and e >= 0) for e in edges):
        raise ConfigError("graph.edges must be finite and non-negative")
    try:
        if kinds[0] == "U":
            U = parse_matrix(cpl["U"], "graph.coupling.U")
            return MetricGraph(tuple(float(e) for e in edges), leads, U), None, None
        couplings, incidence = [], []
        if not isinstance(cpl["blocks"], list):
            raise ConfigError("graph.coupling.blocks must be a list")
        for i, blk in enumerate(cpl["blocks"]):
            where = f"graph.coupling.blocks[{i}]"
            _check_keys(blk, {"vertices", "U", "A", "B", "delta"}, where)
            verts = blk.get("vertices")
            if not isinstance(verts, list) or not all(isinstance(v, int) for v in verts):
                raise ConfigError(f"{where}.vertices must be a list of boundary indices")
            given = [k for k in ("U", "A", "delta") if k in blk]
            if len(given) != 1 or (("A" in blk) != ("B" in blk)):
                raise ConfigError(f"{where}: give exactly one of U, A+B, delta")
            if "U" in blk:
                couplings.append(VertexCoupling(parse_matrix(blk["U"], f"{where}.U")))
            elif "A" in blk:
                couplings.append(VertexCoupling.from_ab(parse_matrix(blk["A"], f"{where}.A"),
                                                        parse_matrix(blk["B"], f"{where}.B")))
            else:
                couplings.append(delta_coupling(len(verts), float(blk["delta"])))
            incidence.append(verts)
        return build_flower([float(e) for e in edges], leads, couplings, incidence), None, None
    except (StructureError, ParameterError) as exc:
        raise ConfigError(f"graph: {exc}") from None


def load_json(path: Path):
    """Read a JSON document; ``OSError`` propagates (an IO failure), bad JSON is a config error."""
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def _range(value, name, *, positive=False, allow_empty=True) -> list[float]:
    if (not isinstance(value, list) or len(value) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
        raise ConfigError(f"{name} must be [lo, hi]")
    lo, hi = float(value[0]), float(value[1])
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ConfigError(f"{name} must be finite")
    if hi < lo or (hi == lo and not allow_empty):
        raise ConfigError(f"{name} is empty or reversed")
    if positive and lo <= 0:
        raise ConfigError(f"{name} must be positive")
    return [lo, hi]


def _validate_options(command: str, opts: dict):
    if command == "spectrum":
        if str(opts["boundary"]).lower() not in ("dirichlet", "neumann"):
            raise ConfigError("spectrum.boundary must be 'dirichlet' or 'neumann'")
        opts["L_range"] = _range(opts["L_range"], "L_range", positive=True)
        opts["k_window"] = _range(opts["k_window"], "k_window")
        if not isinstance(opts["L_points"], int) or opts["L_points"] < 0:
            raise ConfigError("L_points must be a non-negative integer")
    elif command == "resonances":
        r = opts["region"]
        if not isinstance(r, list) or len(r) != 4:
            raise ConfigError("region must be [re_min, re_max, im_min, im_max]")
        opts["region"] = _range(r[:2], "region re", allow_empty=False) + _range(r[2:], "region im",
                                                                              allow_empty=False)
    elif command == "trajectory":
        for key in ("lambda_start", "lambda_end", "step", "max_step"):
            if not isinstance(opts[key], (int, float)) or not math.isfinite(opts[key]):
                raise ConfigError(f"{key} must be a finite number")
        if opts["step"] <= 0 or opts["max_step"] <= 0:
            raise ConfigError("step sizes must be positive")
        opts["k_start"] = parse_complex(opts["k_start"], "k_start")
    elif command == "bound-states":
        if str(opts["boundary"]).lower() not in ("dirichlet", "neumann"):
            raise ConfigError("bound-states.boundary must be 'dirichlet' or 'neumann'")
        grid = opts["L_grid"]
        if not isinstance(grid, list) or not all(isinstance(v, (int, float)) and v > 0 for v in grid):
            raise ConfigError("L_grid must be a list of positive lengths")
        opts["kappa_window"] = _range(opts["kappa_window"], "kappa_window")
    elif command == "validate":
        fams = opts["families"]
        if not isinstance(fams, list) or not all(isinstance(f, str) for f in fams):
            raise ConfigError("validate.families must be a list of family names")
        if opts["U"] is not None:
            opts["U"] = parse_matrix(opts["U"], "validate.U")
    return opts


def parse_config(data: Mapping, command: str | None = None, base: Path | None = None) -> RunConfig:
    """Validate a configuration document; every unknown key is an error."""
    _check_keys(data, TOP_KEYS, "config")
    cmd_data = dict(data.get("command", {}))
    name = cmd_data.pop("name", None)
    command = command or name
    if name is not None and name != command:
        raise ConfigError(f"config is for command {name!r}, not {command!r}")
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    defaults = COMMAND_DEFAULTS[command]
    _check_keys(cmd_data, defaults, f"command ({command})")
    opts = _validate_options(command, {**defaults, **cmd_data})
    numeric = data.get("numeric", {})
    _check_keys(numeric, NUMERIC_KEYS, "numeric")
    if "grid_density" in numeric and not (isinstance(numeric["grid_density"], (int, float))
                                          and numeric["grid_density"] > 0):
        raise ConfigError("numeric.grid_density must be positive")
    output = data.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output must be a path string")
    graph = family = params = None
    if "graph" in data:
        graph, family, params = parse_graph(data["graph"], base)
    elif command != "validate":
        raise ConfigError("config: missing graph")
    return RunConfig(command, graph, opts, dict(numeric), output, family, params)


def load_config(path, command: str | None = None) -> RunConfig:
    path = Path(path)
    return parse_config(load_json(path), command, path.parent)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def format_value(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    x = float(v)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0:
        return "0"
    return format(x, ".17g")


def render_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(format_value(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def write_atomic(path, text: str):
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
