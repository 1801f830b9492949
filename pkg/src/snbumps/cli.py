"""Command-line entry point.

    snbumps <command> [--config PATH] [--out DIR] [--workers N] [--seed N]

Commands: groundstate, constants, landscape, critical, interaction, verify,
reduce.  Exit status 0 on success, 1 on a numeric failure, 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from types import MappingProxyType
from typing import Any, Callable, Mapping

import numpy as np

from . import __version__, outputs
from .ansatz import admissible_box, box_centers, make_config
from .groundstate import (
    GroundStateError,
    TableFormatError,
    extract_constants,
    load_table,
    save_table,
)
from .interaction import InteractionError, build_pair_tables, default_d_grid, save_pair_tables
from .nonlocal_field import FieldError
from .reduced_energy import (
    CriticalPointError,
    ReducedModel,
    ReducedEnergySurface,
    solve_critical,
    sweep_points,
)

COMMANDS = ("groundstate", "constants", "landscape", "critical", "interaction", "verify", "reduce")


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text: str) -> tuple[int, ...]:
    vals = tuple(int(float(x)) for x in text.replace(";", ",").split(",") if x.strip())
    if not vals:
        raise ValueError("empty list")
    return vals


def _int(text: str) -> int:
    v = float(text)
    if v != int(v):
        raise ValueError(f"not an integer: {text!r}")
    return int(v)


# section -> key -> (parser, default)
SCHEMA: dict[str, dict[str, tuple[Callable[[str], Any], Any]]] = {
    "groundstate": {"tolerance": (float, 1e-10), "r_max": (float, 30.0), "nodes": (_int, 6000),
                    "table": (str, "")},
    "potential": {"b": (float, 1.0), "q": (float, 0.5), "V1": (float, 1.0),
                  "b_corrected": (_bool, False)},
    "landscape": {"m": (_int, 10000), "alpha0": (float, 0.1), "beta0": (float, 0.1),
                  "nr": (_int, 41), "nt": (_int, 41)},
    "critical": {"m_list": (_int_list, (1000, 10000, 100000, 1000000))},
    "interaction": {"n_d": (_int, 161), "d_max": (float, 60.0)},
    "reduce": {"case": (str, "m4-sep15"), "spacing": (float, 0.6), "margin": (float, 16.0),
               "decay_tol": (float, 1e-5), "probes": (_int, 50), "tol": (float, 1e-8),
               "source": (str, "discrete")},
    "verify": {"criteria": (_int_list, tuple(range(1, 12)))},
}


@dataclass(frozen=True)
class RunConfig:
    sections: Mapping[str, Mapping[str, Any]]
    seed: int = 0

    @classmethod
    def defaults(cls, seed: int = 0) -> "RunConfig":
        return cls.from_mapping({}, seed)

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Mapping[str, str]], seed: int = 0) -> "RunConfig":
        out = {}
        for sec in raw:
            if sec not in SCHEMA:
                raise ConfigError(f"unknown config section [{sec}]")
            for key in raw[sec]:
                if key not in SCHEMA[sec]:
                    raise ConfigError(f"unknown key {key!r} in section [{sec}]")
        for sec, keys in SCHEMA.items():
            vals = {}
            for key, (parse, default) in keys.items():
                if sec in raw and key in raw[sec]:
                    try:
                        vals[key] = parse(raw[sec][key])
                    except ValueError as exc:
                        raise ConfigError(f"[{sec}] {key}: {exc}") from None
                else:
                    vals[key] = default
            out[sec] = MappingProxyType(vals)
        cfg = cls(sections=MappingProxyType(out), seed=int(seed))
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str, seed: int = 0) -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None, strict=True)
        parser.optionxform = str
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        raw = {s: dict(parser.items(s)) for s in parser.sections()}
        return cls.from_mapping(raw, seed)

    def __getitem__(self, sec: str) -> Mapping[str, Any]:
        return self.sections[sec]

    def validate(self) -> None:
        q = self["potential"]["q"]
        if not 0.5 <= q < 1:
            raise ConfigError("potential.q must lie in [1/2, 1)")
        for sec, key in (("landscape", "nr"), ("landscape", "nt"), ("interaction", "n_d"),
                         ("groundstate", "nodes"), ("reduce", "probes")):
            if self[sec][key] < 1:
                raise ConfigError(f"{sec}.{key} must be >= 1")
        if self["groundstate"]["r_max"] < 20 or self["groundstate"]["nodes"] < 2000:
            raise ConfigError("groundstate needs r_max >= 20 and nodes >= 2000")
        table = self["groundstate"]["table"]
        if table and not os.path.isfile(table):
            raise ConfigError(f"ground-state table {table!r} does not exist")
        if any(m < 10 for m in self["critical"]["m_list"]):
            raise ConfigError("critical.m_list entries must be >= 10")
        if self["landscape"]["m"] < 3:
            raise ConfigError("landscape.m must be >= 3")
        from .reduction import SYNTHETIC
        if self["reduce"]["case"] not in SYNTHETIC:
            raise ConfigError(f"unknown synthetic case {self['reduce']['case']!r}; "
                              f"choose from {', '.join(sorted(SYNTHETIC))}")
        if self["reduce"]["source"] not in ("discrete", "continuum"):
            raise ConfigError("reduce.source must be 'discrete' or 'continuum'")
        if any(c not in range(1, 12) for c in self["verify"]["criteria"]):
            raise ConfigError("verify.criteria must be numbers 1-11")

    def canonical(self) -> dict:
        return {s: {k: list(v) if isinstance(v, tuple) else v for k, v in self[s].items()}
                for s in sorted(self.sections)} | {"seed": self.seed}

    @property
    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


# --------------------------------------------------------------------------
# shared inputs


def _context(cfg: RunConfig, workers: int = 1):
    from .acceptance import Context

    gsc = cfg["groundstate"]
    gs = None
    if gsc["table"]:
        gs, _ = load_table(gsc["table"])
    elif (gsc["tolerance"], gsc["r_max"], gsc["nodes"]) != (1e-10, 30.0, 6000):
        from .groundstate import solve_ground_state
        gs = solve_ground_state(gsc["tolerance"], gsc["r_max"], gsc["nodes"])
    return Context(seed=cfg.seed, workers=workers, gs=gs)


def _model(cfg: RunConfig, m: int, A1: float, A2: float) -> ReducedModel:
    p = cfg["potential"]
    return ReducedModel(m=m, q=p["q"], b=p["b"], A1=A1, A2=A2, b_corrected=p["b_corrected"])


LANDSCAPE_HEADER = ("m", "q", "b", "r", "t", "F1", "F1_r", "F1_t", "F1_rr", "F1_rt", "F1_tt")
CRITICAL_HEADER = ("m", "q", "b", "r_star", "t_star", "grad_norm", "class", "in_box", "iters")
INTERACTION_HEADER = ("d", "P", "O", "Q", "normalized_P")


def _sweep_chunk(args):
    model, rs, ts = args
    return sweep_points(model, rs, ts)


def landscape_surface(cfg: RunConfig, ctx, workers: int = 1) -> ReducedEnergySurface:
    lc, p = cfg["landscape"], cfg["potential"]
    c = ctx.constants
    model = _model(cfg, lc["m"], c.A1, c.A2)
    box = admissible_box(lc["m"], p["q"], p["b"], c.A1, lc["alpha0"], lc["beta0"],
                         b_corrected=p["b_corrected"])
    rs = np.linspace(box.r_lo, box.r_hi, lc["nr"]) if lc["nr"] > 1 else np.array([box.r_center])
    ts = np.linspace(box.t_lo, box.t_hi, lc["nt"]) if lc["nt"] > 1 else np.array([box.t_center])
    if workers <= 1 or rs.size < 2:
        return sweep_points(model, rs, ts)
    chunks = [ch for ch in np.array_split(rs, min(workers, rs.size)) if ch.size]
    with ProcessPoolExecutor(workers) as ex:
        parts = list(ex.map(_sweep_chunk, [(model, ch, ts) for ch in chunks]))
    return ReducedEnergySurface(model=model, r_values=rs, t_values=ts,
                                F1=np.concatenate([s.F1 for s in parts]),
                                grad=np.concatenate([s.grad for s in parts]),
                                hess=np.concatenate([s.hess for s in parts]))


def landscape_csv(cfg: RunConfig, surf: ReducedEnergySurface) -> str:
    m = surf.model
    rows = ((m.m, m.q, m.b) + tuple(row) for row in surf.rows())
    return outputs.csv_text(cfg.digest, LANDSCAPE_HEADER, rows)


def critical_points(cfg: RunConfig, ctx) -> list:
    c = ctx.constants
    p = cfg["potential"]
    out = []
    for m in cfg["critical"]["m_list"]:
        model = _model(cfg, m, c.A1, c.A2)
        box = admissible_box(m, p["q"], p["b"], c.A1, b_corrected=p["b_corrected"])
        out.append((model, box, solve_critical(model, box)))
    return out


def critical_csv(cfg: RunConfig, pts: list) -> str:
    rows = [(mod.m, mod.q, mod.b, cp.r_star, cp.t_star, cp.gradient_norm, cp.classification,
             cp.in_box, cp.iterations) for mod, _, cp in pts]
    return outputs.csv_text(cfg.digest, CRITICAL_HEADER, rows)


def interaction_rows(cfg: RunConfig, tables, A1: float) -> list[tuple]:
    return [(d, P, O, Q, 8 * math.pi * d * P / A1**2)
            for d, P, O, Q in zip(tables.d_grid, tables.pair_interaction_values,
                                  tables.overlap_values, tables.coupling_values)]


def pair_tables(cfg: RunConfig, ctx):
    ic = cfg["interaction"]
    if (ic["n_d"], ic["d_max"]) == (161, 60.0):
        return ctx.tables
    return build_pair_tables(ctx.gs, default_d_grid(ic["n_d"], ic["d_max"]), workers=ctx.workers)


def render_csv_artifacts(cfg: RunConfig, ctx) -> dict[str, str]:
    """The CSV outputs of landscape, critical and interaction, as text."""
    tab = pair_tables(cfg, ctx)
    return {
        "landscape.csv": landscape_csv(cfg, landscape_surface(cfg, ctx, ctx.workers)),
        "critical.csv": critical_csv(cfg, critical_points(cfg, ctx)),
        "interaction.csv": outputs.csv_text(cfg.digest, INTERACTION_HEADER,
                                            interaction_rows(cfg, tab, ctx.constants.A1)),
    }


# --------------------------------------------------------------------------
# commands


def _plot(path: str, make: Callable[[], str]) -> None:
    """Plots never change the exit status."""
    try:
        outputs.write_text(path, make())
    except Exception as exc:  # noqa: BLE001
        print(f"warning: plot {os.path.basename(path)} failed: {exc}", file=sys.stderr)


def cmd_groundstate(cfg, ctx, out):
    gs = ctx.gs
    c = ctx.constants
    path = os.path.join(out, "groundstate.tbl")
    save_table(gs, c, path, extra={"tool_version": __version__, "config_hash": cfg.digest})
    print(f"wrote {path}: E={gs.energy_shift_pre_rescale:.12g} U(0)={gs.u_values[0]:.12g} "
          f"shoot_residual={gs.shoot_residual:.3g}")


def cmd_constants(cfg, ctx, out):
    if not cfg["groundstate"]["table"]:
        saved = os.path.join(out, "groundstate.tbl")
        if os.path.isfile(saved):
            ctx.__dict__["gs"], _ = load_table(saved)
    c = ctx.constants
    payload = {"A1": c.A1, "A2": c.A2, "lambda2": c.lambda2, "lambda3": c.lambda3}
    text = outputs.json_text(cfg.digest, payload)
    outputs.write_text(os.path.join(out, "constants.json"), text)
    print(json.dumps(payload))


def cmd_landscape(cfg, ctx, out):
    surf = landscape_surface(cfg, ctx, ctx.workers)
    outputs.write_text(os.path.join(out, "landscape.csv"), landscape_csv(cfg, surf))
    _plot(os.path.join(out, "landscape.svg"), lambda: outputs.heatmap(
        cfg.digest, f"reduced energy F1, m={surf.model.m}", "r", "t",
        list(surf.r_values), list(surf.t_values), surf.F1))
    print(f"landscape: {surf.F1.size} points")


def cmd_critical(cfg, ctx, out):
    pts = critical_points(cfg, ctx)
    outputs.write_text(os.path.join(out, "critical.csv"), critical_csv(cfg, pts))
    q = cfg["potential"]["q"]
    ms = [mod.m for mod, _, _ in pts]
    tcol = [cp.t_star * math.sqrt(math.log(mod.m)) for mod, _, cp in pts]
    rcol = [cp.r_star / box_centers(mod.m, q, mod.A1, mod.b, mod.b_corrected)[0]
            for mod, _, cp in pts]
    _plot(os.path.join(out, "critical.svg"), lambda: outputs.line_plot(
        cfg.digest, "critical point against the asymptotic laws", "m", "ratio",
        {"t* sqrt(ln m)": (ms, tcol), "r* / r-center": (ms, rcol)}, logx=True, refs=(1.0,)))
    for (mod, _, cp), tv, rv in zip(pts, tcol, rcol):
        print(f"m={mod.m}: r*={cp.r_star:.6g} t*={cp.t_star:.6g} t*sqrt(ln m)={tv:.4f} "
              f"r-ratio={rv:.4f} class={cp.classification}")


def cmd_interaction(cfg, ctx, out):
    tab = pair_tables(cfg, ctx)
    save_pair_tables(tab, os.path.join(out, "pair_tables.tbl"),
                     extra={"tool_version": __version__, "config_hash": cfg.digest})
    rows = interaction_rows(cfg, tab, ctx.constants.A1)
    outputs.write_text(os.path.join(out, "interaction.csv"),
                       outputs.csv_text(cfg.digest, INTERACTION_HEADER, rows))
    sel = [r for r in rows if r[0] >= 1.0]
    _plot(os.path.join(out, "interaction.svg"), lambda: outputs.line_plot(
        cfg.digest, "8 pi d P(d) / A1^2", "d", "normalized P",
        {"quadrature": ([r[0] for r in sel], [r[4] for r in sel])}, refs=(1.0,)))
    print(f"interaction: {len(rows)} separations")


def cmd_reduce(cfg, ctx, out):
    from . import reduction as red
    from .acceptance import synthetic_problem

    rc = cfg["reduce"]
    prob = synthetic_problem(ctx, rc["case"], spacing=rc["spacing"], margin=rc["margin"],
                             decay_tol=rc["decay_tol"])
    _, diag = red.solve_phi(prob, tol=rc["tol"], source=rc["source"], n_probes=rc["probes"],
                            seed=cfg.seed)
    payload = {"case": rc["case"], "grid": list(prob.grid.dims), "spacing": prob.grid.spacing,
               "b": prob.vp.b, "q": prob.vp.q} | diag.as_json()
    text = outputs.json_text(cfg.digest, payload)
    outputs.write_text(os.path.join(out, "reduce.json"), text)
    print(text, end="")


def cmd_verify(cfg, ctx, out):
    from . import acceptance

    results = acceptance.run(ctx, cfg["verify"]["criteria"], report=print)
    outputs.write_text(os.path.join(out, "verify.csv"), outputs.csv_text(
        cfg.digest, ("criterion", "check", "value", "target", "status"),
        acceptance.report_rows(results)))
    for name, text in render_csv_artifacts(cfg, ctx).items():
        outputs.write_text(os.path.join(out, name), text)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed"
          + (f"; failing: {', '.join(map(str, failed))}" if failed else ""))
    return 1 if failed else 0


HANDLERS = {"groundstate": cmd_groundstate, "constants": cmd_constants,
            "landscape": cmd_landscape, "critical": cmd_critical,
            "interaction": cmd_interaction, "verify": cmd_verify, "reduce": cmd_reduce}

NUMERIC_ERRORS = (GroundStateError, CriticalPointError, InteractionError, FieldError,
                  ArithmeticError, np.linalg.LinAlgError)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="snbumps", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", help=", ".join(COMMANDS))
    ap.add_argument("--config", metavar="PATH", help="sectioned key = value run description")
    ap.add_argument("--out", metavar="DIR", default="snbumps-out", help="output directory")
    ap.add_argument("--workers", metavar="N", type=int, default=1)
    ap.add_argument("--seed", metavar="N", type=int, default=0)
    ap.add_argument("--version", action="version", version=f"snbumps {__version__}")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    if args.command not in HANDLERS:
        print(f"error: unknown command {args.command!r}; choose from {', '.join(COMMANDS)}",
              file=sys.stderr)
        return 2
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 2
    from .reduction import ReductionError

    try:
        cfg = RunConfig.from_file(args.config, args.seed) if args.config else RunConfig.defaults(args.seed)
        os.makedirs(args.out, exist_ok=True)
        ctx = _context(cfg, args.workers)
        status = HANDLERS[args.command](cfg, ctx, args.out)
    except (ConfigError, TableFormatError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (*NUMERIC_ERRORS, ReductionError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1
    return int(status or 0)


if __name__ == "__main__":
    sys.exit(main())
