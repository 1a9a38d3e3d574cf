"""Command-line front end.

Subcommands::

    bmround rho --body SPEC
    bmround verify-lemma1 [--count N --seed S | --body SPEC] [--out rows.csv]
    bmround uniqueness [--count N --seed S | --body SPEC | --maps MAPS] [--restarts R]
    bmround modulus --field SPEC --family SPEC --n 16,32,64 [--out rows.csv]
    bmround svg --body SPEC --out figure.svg

``SPEC`` is a JSON document, a path to one, or a short name (``square``,
``hexagon``, ``disk``, ``lp:P``).  ``--config FILE`` supplies defaults for
any flag (keys as flag names with ``_`` for ``-``); flags on the command line
win.  CSV reports go to ``--out`` (stdout without it) and a figure is written
next to the CSV file with the extension ``.svg``.

Exit codes: 0 success, 1 input error, 2 uncertified optimum, 3 property
failure, 4 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import plotting
from .banach_mazur import OptimizerError, coset_deviation, minimize_ratio
from .envelopes import john_ellipse, verify_lemma1
from .geometry import BodyValidationError, SingularMapError, as_map, disk, lp_ball, regular_polygon
from .modulus import CurveFamily, ModulusError, compare_moduli
from .sampling import batch_bodies, batch_seeds
from .specs import load_json, parse_body, parse_field

EXIT_OK, EXIT_INPUT, EXIT_UNCERTIFIED, EXIT_PROPERTY, EXIT_SOLVER = 0, 1, 2, 3, 4

LEMMA1_HEADER = [
    "seed_index", "rho", "ell", "area", "lower_ok", "upper_ok",
    "envelope_ok", "K_O_factor", "K_I_factor", "certified",
]
UNIQUENESS_HEADER = ["index", "rho", "runs", "max_deviation", "status"]
MODULUS_HEADER = ["n", "mod_field", "mod_euclid", "ratio", "iterations_field", "iterations_euclid"]

UNIQUENESS_TOL = 1e-3
UNIQUENESS_MIN_RHO = 1.001
RATIO_BAND = (2 / math.pi - 0.06, 4 / math.pi + 0.06)

NAMED_BODIES = {
    "square": lambda: lp_ball(math.inf),
    "hexagon": lambda: regular_polygon(6),
    "disk": lambda: disk(),
}


class InputError(Exception):
    pass


@dataclass
class ExperimentConfig:
    seed: int = 0
    count: int = 1
    body: str | None = None
    restarts: int = 5
    tol: float | None = None
    grid_n: int = 200
    out: Path | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.count < 1:
            raise InputError("count must be >= 1")
        if self.restarts < 1:
            raise InputError("restarts must be >= 1")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.15g}"


def body_from_arg(text: str):
    name = text.strip()
    if name in NAMED_BODIES:
        return NAMED_BODIES[name]()
    if name.startswith("lp:"):
        return parse_body({"type": "lp", "p": name[3:]})
    try:
        return parse_body(text)
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as err:
        raise InputError(f"cannot read body spec: {err}") from err


def _write_rows(out: Path | None, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([[fmt(v) if not isinstance(v, str) else v for v in row] for row in rows])
    if out is None:
        sys.stdout.write(buf.getvalue())
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(buf.getvalue())


def _figure_path(out: Path | None) -> Path | None:
    return None if out is None else out.with_suffix(".svg")


def _bodies(cfg: ExperimentConfig):
    if cfg.body is not None:
        return [body_from_arg(cfg.body)] * cfg.count, [0] * cfg.count
    return batch_bodies(cfg.seed, cfg.count), batch_seeds(cfg.seed, cfg.count)


# commands ----------------------------------------------------------------


def cmd_rho(cfg: ExperimentConfig) -> int:
    if cfg.body is None:
        raise InputError("rho needs --body")
    body = body_from_arg(cfg.body)
    result = minimize_ratio(body, grid_n=cfg.grid_n, restarts=1, tol=cfg.tol or 1e-9, seed=cfg.seed)
    T = result.T_star
    lines = [
        f"rho: {fmt(result.rho)}",
        f"T_star: [[{fmt(T[0, 0])}, {fmt(T[0, 1])}], [{fmt(T[1, 0])}, {fmt(T[1, 1])}]]",
        f"ell: {fmt(result.inner)}",
        f"L: {fmt(result.outer)}",
        "outer_contacts: " + ("all" if result.full_circle else ", ".join(map(fmt, result.outer_contacts))),
        "inner_contacts: " + ("all" if result.full_circle else ", ".join(map(fmt, result.inner_contacts))),
        f"certified: {fmt(result.certified)}",
    ]
    print("\n".join(lines))
    return EXIT_OK if result.certified else EXIT_UNCERTIFIED


def cmd_verify_lemma1(cfg: ExperimentConfig) -> int:
    bodies, _ = _bodies(cfg)
    rows, ells, areas, flags = [], [], [], []
    for i, body in enumerate(bodies):
        result = minimize_ratio(body, grid_n=cfg.grid_n, seed=cfg.seed)
        rep = verify_lemma1(body, result, cfg.tol)
        ok = rep.lower_ok and rep.upper_ok and rep.envelope_ok and result.certified
        rows.append([i, result.rho, rep.ell, rep.area, rep.lower_ok, rep.upper_ok,
                     rep.envelope_ok, rep.K_O_factor, rep.K_I_factor, result.certified])
        ells.append(rep.ell)
        areas.append(rep.area)
        flags.append(ok)
    _write_rows(cfg.out, LEMMA1_HEADER, rows)
    fig_path = _figure_path(cfg.out)
    if fig_path is not None:
        plotting.save_svg(plotting.lemma1_figure(ells, areas, flags), fig_path)
    bad = [r[0] for r, ok in zip(rows, flags) if not ok]
    if bad:
        print(f"failing rows: {bad}", file=sys.stderr)
        return EXIT_PROPERTY
    return EXIT_OK


def cmd_uniqueness(cfg: ExperimentConfig) -> int:
    rows = []
    maps = cfg.extra.get("maps")
    if maps is not None:
        Ts = [as_map(m) for m in load_json(maps)]
        if len(Ts) < 2:
            raise InputError("--maps needs at least two matrices")
        dev = max(coset_deviation(A, B) for k, A in enumerate(Ts) for B in Ts[k + 1:])
        rows.append([0, math.nan, len(Ts), dev, "ok" if dev <= UNIQUENESS_TOL else "fail"])
    else:
        bodies, seeds = _bodies(cfg)
        for i, (body, seed) in enumerate(zip(bodies, seeds)):
            result = minimize_ratio(body, grid_n=cfg.grid_n, restarts=cfg.restarts, seed=seed)
            Ts = result.restarts
            dev = max((coset_deviation(A, B) for k, A in enumerate(Ts) for B in Ts[k + 1:]), default=0.0)
            if result.rho <= UNIQUENESS_MIN_RHO:
                status = "skipped"
            else:
                status = "ok" if dev <= UNIQUENESS_TOL else "fail"
            rows.append([i, result.rho, len(Ts), dev, status])
    _write_rows(cfg.out, UNIQUENESS_HEADER, rows)
    for r in rows:
        if r[4] == "skipped":
            print(f"row {r[0]}: rho <= {UNIQUENESS_MIN_RHO}, the canonical ellipse is not resolved", file=sys.stderr)
    return EXIT_PROPERTY if any(r[4] == "fail" for r in rows) else EXIT_OK


def cmd_modulus(cfg: ExperimentConfig) -> int:
    extra = cfg.extra
    if extra.get("field") is None or extra.get("family") is None:
        raise InputError("modulus needs --field and --family")
    try:
        fld = parse_field(_field_arg(extra["field"]))
        family = CurveFamily.from_spec(load_json(extra["family"]))
        ns = [int(v) for v in str(extra.get("n") or "64").split(",")]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as err:
        raise InputError(f"cannot read modulus spec: {err}") from err
    if not fld.is_constant:
        raise InputError("modulus ratio needs a constant field")
    rows, last = [], None
    for n in ns:
        cmp = compare_moduli(fld, family, n)
        rows.append([n, cmp.field.value, cmp.euclid.value, cmp.ratio, cmp.field.iterations, cmp.euclid.iterations])
        last = (n, cmp)
    _write_rows(cfg.out, MODULUS_HEADER, rows)
    fig_path = _figure_path(cfg.out)
    if fig_path is not None and last is not None:
        n, cmp = last
        title = f"extremal density, n = {n}, ratio = {cmp.ratio:.6f}"
        plotting.save_svg(plotting.density_figure(cmp.field.density, fld.rect, title), fig_path)
    lo, hi = RATIO_BAND
    return EXIT_OK if all(lo <= r[3] <= hi for r in rows) else EXIT_PROPERTY


def _field_arg(text):
    """Accept a field spec, or a body spec / short name for a constant field."""
    name = str(text).strip()
    if name in NAMED_BODIES or name.startswith("lp:"):
        return {"constant": body_from_arg(name).to_json()}
    spec = load_json(text)
    if isinstance(spec, dict) and "type" in spec:
        return {"constant": spec}
    return spec


def cmd_svg(cfg: ExperimentConfig) -> int:
    if cfg.body is None or cfg.out is None:
        raise InputError("svg needs --body and --out")
    body = body_from_arg(cfg.body)
    result = minimize_ratio(body, grid_n=cfg.grid_n, seed=cfg.seed)
    john = None if result.full_circle else john_ellipse(body, grid_n=cfg.grid_n)
    plotting.save_svg(plotting.rounding_figure(body, result, john), cfg.out)
    print(f"wrote {cfg.out}")
    return EXIT_OK


COMMANDS = {
    "rho": cmd_rho,
    "verify-lemma1": cmd_verify_lemma1,
    "uniqueness": cmd_uniqueness,
    "modulus": cmd_modulus,
    "svg": cmd_svg,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bmround", description="Banach-Mazur rounding of planar symmetric convex bodies.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file with default flag values")
    common.add_argument("--seed", type=int)
    common.add_argument("--count", type=int)
    common.add_argument("--restarts", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--grid-n", type=int)
    common.add_argument("--out", type=Path)
    common.add_argument("--body", help="body spec: JSON, path, or square|hexagon|disk|lp:P")
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "uniqueness":
            p.add_argument("--maps", help="JSON list of 2x2 matrices to compare instead of optimizer runs")
        if name == "modulus":
            p.add_argument("--field", help="norm field spec, or a body spec for a constant field")
            p.add_argument("--family", help="curve family spec")
            p.add_argument("--n", help="comma-separated grid sizes")
    return parser


def make_config(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if args.config is not None:
        try:
            values.update(json.loads(args.config.read_text()))
        except (OSError, json.JSONDecodeError) as err:
            raise InputError(f"cannot read config: {err}") from err
    for key, val in vars(args).items():
        if key not in ("config", "command") and val is not None:
            values[key] = val
    known = {"seed", "count", "body", "restarts", "tol", "grid_n", "out"}
    extra = {k: v for k, v in values.items() if k not in known}
    core = {k: v for k, v in values.items() if k in known}
    if isinstance(core.get("body"), dict):
        core["body"] = json.dumps(core["body"])
    if core.get("out") is not None:
        core["out"] = Path(core["out"])
    for key in ("field", "family"):
        if isinstance(extra.get(key), (dict, list)):
            extra[key] = json.dumps(extra[key])
    if isinstance(extra.get("n"), list):
        extra["n"] = ",".join(map(str, extra["n"]))
    return ExperimentConfig(**core, extra=extra)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = make_config(args)
        return COMMANDS[args.command](cfg)
    except (InputError, BodyValidationError, SingularMapError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except (OptimizerError, ModulusError, RuntimeError) as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
