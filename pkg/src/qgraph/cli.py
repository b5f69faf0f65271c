"""``qgraph`` command-line front end.

Exit codes: 0 success, 1 configuration error, 2 numeric failure, 3 IO
error (validate also exits 2 when a check fails).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .analysis import bound_states, spectral_map
from .errors import ConfigError, NumericError, ParameterError, StructureError
from .fileio import COMMANDS, RunConfig, load_config, render_csv, write_atomic
from .rootsolve import continue_root, find_complex_roots
from .secular import DirichletCut, NeumannCut, Open, secular_values
from .validation import run_validation

log = logging.getLogger("qgraph")

EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 1, 2, 3

_CUTS = {"dirichlet": DirichletCut, "neumann": NeumannCut}


def cmd_spectrum(cfg: RunConfig) -> str:
    o = cfg.options
    L_grid = np.linspace(*o["L_range"], o["L_points"]) if o["L_points"] else np.empty(0)
    sm = spectral_map(cfg.graph, _CUTS[o["boundary"].lower()], L_grid, o["k_window"],
                      cfg.numeric.get("grid_density"))
    return render_csv(["L", "k", "dkdL"], sm.points.tolist())


def cmd_resonances(cfg: RunConfig) -> str:
    found = find_complex_roots(cfg.graph, Open(), cfg.options["region"])
    roots = sorted(found.roots, key=lambda z: (z.real, z.imag))
    rows = []
    if roots:
        v, s = secular_values(cfg.graph, np.array(roots), Open(), with_scale=True)
        rows = [(z.real, z.imag, abs(fv) / sv, found.count) for z, fv, sv in zip(roots, v, s)]
    for flag in found.flags:
        log.warning(flag)
    return render_csv(["re_k", "im_k", "residual", "count_check"], rows)


def cmd_trajectory(cfg: RunConfig) -> str:
    if cfg.family is None:
        raise ConfigError("trajectory needs a built-in graph family")
    o = cfg.options
    tr = continue_root(cfg.family, cfg.params, Open(), o["lambda_start"], o["lambda_end"], o["k_start"],
                       step=o["step"], max_step=o["max_step"])
    return render_csv(["lambda", "re_k", "im_k"], [(lam, k.real, k.imag) for lam, k in zip(tr.lam, tr.k)])


def cmd_bound_states(cfg: RunConfig) -> str:
    o = cfg.options
    dens = cfg.numeric.get("grid_density")
    kind = _CUTS[o["boundary"].lower()]
    rows = []
    for L in sorted(float(x) for x in o["L_grid"]):
        rs = bound_states(cfg.graph, kind(L), o["kappa_window"], dens)
        rows += [(L, kap, -kap * kap) for kap in rs.roots]
    if o["include_open"]:
        rs = bound_states(cfg.graph, Open(), o["kappa_window"], dens)
        rows += [("inf", kap, -kap * kap) for kap in rs.roots]
    return render_csv(["L", "kappa", "energy"], rows)


def cmd_validate(cfg: RunConfig) -> tuple[str, bool]:
    o = cfg.options
    results = run_validation(o["families"], o["draws"], o["seed"], o["L"], o["U"])
    lines = [r.line() for r in results]
    ok = all(r.passed for r in results)
    lines.append(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    return "\n".join(lines) + "\n", ok


HANDLERS = {
    "spectrum": cmd_spectrum,
    "resonances": cmd_resonances,
    "trajectory": cmd_trajectory,
    "bound-states": cmd_bound_states,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qgraph", description="Resonances and cut-off spectra of quantum graphs.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", help="output file (default: config 'output', else stdout)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run(args) -> int:
    try:
        cfg = load_config(args.config, args.command)
    except OSError as exc:
        print(f"qgraph: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ParameterError, StructureError) as exc:
        print(f"qgraph: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    ok = True
    try:
        if cfg.command == "validate":
            text, ok = cmd_validate(cfg)
        else:
            text = HANDLERS[cfg.command](cfg)
    except (ConfigError, ParameterError, StructureError) as exc:
        print(f"qgraph: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"qgraph: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    out = args.out or cfg.output
    try:
        if out:
            write_atomic(Path(out), text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"qgraph: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0 if ok else EXIT_NUMERIC


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
