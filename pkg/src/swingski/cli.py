"""Command-line front end: analyze | simulate | synthesize | compare."""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from . import elliptic, integrate, models, synthesis, vecfield
from .errors import (
    InvalidParams,
    NoTransversalRoot,
    SwingSkiError,
    TargetUnreachable,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_UNREACHABLE, EXIT_NO_ROOT = 0, 2, 3, 4, 5


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    model: str
    params: dict
    options: dict = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def load(cls, path: Optional[str], model_override: Optional[str], command: str, seed: int) -> "RunConfig":
        data = {}
        if path is not None:
            try:
                with open(path) as fh:
                    data = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        model = model_override or data.get("model", "swing")
        if model not in ("swing", "ski"):
            raise ConfigError(f"unknown model {model!r}")
        opts = data.get(command, {})
        if not isinstance(opts, dict):
            raise ConfigError(f"'{command}' block must be an object")
        cfg = cls(model, data.get(model, {}), opts, seed)
        cfg.build()  # validate before any computation
        return cfg

    def build(self):
        try:
            return models.load_model({"model": self.model, self.model: self.params})
        except (InvalidParams, TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, int, np.floating, np.integer)) and not isinstance(v, bool) else v for v in r])


def _dump_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


# ------------------------------------------------------------------ analyze


def cmd_analyze(cfg: RunConfig, out: str, args) -> int:
    params, env = cfg.build()
    pair = env.pair
    default = [0.0, 2 * math.pi, -10.0, 10.0] if cfg.model == "swing" else [0.0, 2 * math.pi / abs(params.c), -500.0, 500.0]
    window = [float(v) for v in cfg.options.get("window", default)]
    if len(window) != 4:
        raise ConfigError("window must have four numbers")
    step = float(cfg.options.get("step", 1e-3))
    arcs = vecfield.find_turnpikes(pair, window, step=step)
    rows = []
    for k, arc in enumerate(arcs):
        for x, ph in zip(arc.points, arc.phi):
            rows.append((x[0], x[1], vecfield.delta_a(pair, x), vecfield.delta_b(pair, x), ph, int(arc.regular)))
    _write_csv(os.path.join(out, "loci.csv"), ("x1", "x2", "delta_a", "delta_b", "phi", "regular_flag"), rows)
    report = {"model": cfg.model, "arcs": [], "window": window}
    for arc in arcs:
        lo, hi = arc.x1_range
        report["arcs"].append({"x1_min": lo, "x1_max": hi, "regular": arc.regular, "turnpike": arc.is_turnpike, "samples": len(arc.points)})
    if cfg.model == "swing":
        reaches = models.regular_reaches_pi(params)
        print(f"regular turnpike reaches x1=pi: {'yes' if reaches else 'no'}")
        print(f"phi limit at pi: {models.swing_phi_limit_pi(params):.12g} (ratio r+/r- = {params.r_plus / params.r_minus:.12g}, golden = {models.GOLDEN:.12g})")
        lo, hi = models.swing_regular_interval(params)
        print(f"regular interval on the upper-left branch: ({lo:.9f}, {hi:.9f})")
        report["reaches_pi"] = reaches
        report["regular_interval"] = [lo, hi]
    else:
        val = params.validity()
        for k, v in val.items():
            print(f"condition {k}: {'ok' if v else 'fails'}")
        report["validity"] = val
    p1 = models.verify_p1(env, window if window[1] > window[0] and window[3] > window[2] else [0, 1, 0, 1], samples=100, seed=cfg.seed)
    print(f"convexity check P1: {'pass' if p1.passed else 'fail'} (worst margin {p1.worst_margin:.3g})")
    report["p1"] = {"passed": p1.passed, "worst_margin": p1.worst_margin}
    print(f"locus arcs: {len(arcs)} ({sum(a.regular for a in arcs)} regular)")
    _dump_json(os.path.join(out, "analyze.json"), report)
    return EXIT_OK


# ----------------------------------------------------------------- simulate


def _original_rhs(env):
    return lambda t, x, v: env.h(x, v)


def cmd_simulate(cfg: RunConfig, out: str, args) -> int:
    params, env = cfg.build()
    pair = env.pair
    o = cfg.options
    try:
        x0 = np.array(o["origin"], dtype=float)
        schedule = o.get("schedule", [])
    except KeyError as exc:
        raise ConfigError("simulate needs 'origin' and 'schedule'") from exc
    system = o.get("system", "auxiliary")
    path = os.path.join(out, "trajectory.csv")
    total = sum(float(e.get("duration", 0.0)) for e in schedule)
    if total == 0.0:
        integrate.export_csv(pair, None, path)
        return EXIT_OK
    if system == "auxiliary":
        sched = []
        for e in schedule:
            if "u" not in e:
                raise ConfigError("auxiliary schedule entries need 'u'")
            u = e["u"]
            label = integrate.SINGULAR if u == "singular" else integrate.bang_label(float(u))
            sched.append((label, float(e["duration"])))
        lam0 = o.get("lambda0")
        traj = integrate.integrate_schedule(pair, x0, sched, lam0=None if lam0 is None else np.array(lam0, float))
        integrate.export_csv(pair, traj, path)
    elif system == "original":
        rows, x, t = [], x0, 0.0
        for e in schedule:
            if "v" not in e:
                raise ConfigError("original schedule entries need 'v'")
            v, dur = float(e["v"]), float(e["duration"])
            env.h(x, v)  # range check
            res = solve_ivp(lambda s, y: env.h(y, v), (t, t + dur), x, method="DOP853", rtol=integrate.RTOL, atol=integrate.ATOL)
            for s, y in zip(res.t, res.y.T):
                try:
                    u = models.project_control(env, y, v)
                except SwingSkiError:
                    u = math.nan
                rows.append((s, y[0], y[1], u, math.nan, math.nan, math.nan, math.nan))
            x, t = res.y[:, -1], float(res.t[-1])
        _write_csv(path, integrate.CSV_COLUMNS, rows)
    else:
        raise ConfigError(f"unknown system {system!r}")
    return EXIT_OK


# --------------------------------------------------------------- synthesize


def cmd_synthesize(cfg: RunConfig, out: str, args) -> int:
    params, env = cfg.build()
    pair = env.pair
    o = cfg.options
    try:
        origin = np.array(o["origin"], dtype=float)
        target = float(o["target"])
    except KeyError as exc:
        raise ConfigError("synthesize needs 'origin' and 'target'") from exc
    backbones = o.get("backbones")
    if backbones is None:
        backbones = ["turnpike"] if o.get("on_turnpike") else ["Y", "X"]
    if o.get("on_turnpike"):
        origin = elliptic.turnpike_origin(params, float(origin[0]))
    res = synthesis.solve_mayer(
        pair,
        origin,
        target,
        s_grid=args.grid,
        backbones=backbones,
        jobs=args.jobs,
        eps=float(o.get("eps", 1e-3)),
    )
    if args.oracle:
        if cfg.model != "swing":
            raise ConfigError("the grid oracle is available for the swing only")
        from .oracle import grid_oracle

        # schedules slower than the synthesized one cannot change the verdict
        orc = grid_oracle(params, origin, target, horizon=res.value + 0.5)
        if math.isfinite(orc.value):
            res.oracle_gap = res.value - orc.value
        else:
            print("oracle: no schedule with <= 2 switches within the horizon")
    doc = res.to_json()
    doc["config"] = {"model": cfg.model, "params": params.to_dict(), "origin": origin.tolist(), "target": target}
    if cfg.model == "swing" and not res.original_exists:
        try:
            fb = synthesis.compare_feedback(params, pair, res.optimal)
            doc["feedback"] = {"T_gamma": fb.T_gamma, "T_eta": fb.T_eta, "gap": fb.gap}
        except SwingSkiError as exc:
            doc["feedback"] = {"error": str(exc)}
    if res.near_optimal_original is not None:
        sched = res.near_optimal_original["schedule"]
        dictionary = {integrate.BANG_PLUS: env.control_plus, integrate.BANG_MINUS: env.control_minus}
        _write_csv(
            os.path.join(out, "epsilon_schedule.csv"),
            ("label", "duration", "original_control"),
            [(lab, d, dictionary[lab]) for lab, d in sched],
        )
    _dump_json(os.path.join(out, "result.json"), doc)
    with open(os.path.join(out, "candidates.csv"), "w") as fh:
        fh.write("family,s,t_s,psi,pattern\n")
        for kind, s, t, psi, pat in res.table:
            fh.write(f"{kind},{_fmt(s)},{'' if t is None else _fmt(t)},{_fmt(psi)},{pat}\n")
    integrate.export_csv(pair, res.optimal.trajectory, os.path.join(out, "trajectory.csv"))
    print(f"minimum time {res.value:.12g}; pattern {res.optimal.trajectory.pattern}; original_exists={str(res.original_exists).lower()}")
    if res.oracle_gap is not None:
        print(f"oracle gap {res.oracle_gap:.3e}")
    return EXIT_OK


# ------------------------------------------------------------------ compare


def cmd_compare(cfg: RunConfig, out: str, args) -> int:
    src = cfg.options.get("result")
    if src is None:
        raise ConfigError("compare needs a 'result' path")
    if os.path.isdir(src):
        src = os.path.join(src, "result.json")
    try:
        with open(src) as fh:
            doc = json.load(fh)
        conf = doc["config"]
        arcs = doc["arcs"]
        origin = np.array(conf["origin"], float)
        if conf["model"] != "swing":
            raise ConfigError("compare supports swing results")
        params = models.SwingParams.from_dict(conf["params"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad result file: {exc}") from exc
    pair = models.make_swing_pair(params).pair
    sched = [(a["label"], float(a["t1"]) - float(a["t0"])) for a in arcs]
    traj = integrate.integrate_schedule(pair, origin, sched)
    T_ode = traj.T
    T_ell = 0.0
    for arc in traj.arcs:
        if arc.label == integrate.SINGULAR:
            T_ell += arc.duration
        else:
            u = 1 if arc.label == integrate.BANG_PLUS else -1
            pieces = synthesis.monotone_pieces(pair, arc)
            waypoints = [arc.state(tb)[0] for _, tb in pieces]
            try:
                T_ell += elliptic.bang_path_time(params, arc.start, u, waypoints)
            except SwingSkiError:
                T_ell = math.nan
    try:
        fb = synthesis.compare_feedback(params, pair, traj)
        Tg, Te = fb.T_gamma, fb.T_eta
    except SwingSkiError:
        Tg = Te = math.nan
    table = {"T_gamma": Tg, "T_eta": Te, "T_elliptic": T_ell, "T_ode": T_ode}
    rows = [(k, v) for k, v in table.items()]
    names = list(table)
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            rows.append((f"{names[j]}-{names[i]}", table[names[j]] - table[names[i]]))
    _write_csv(os.path.join(out, "compare.csv"), ("quantity", "value"), rows)
    for k, v in rows:
        print(f"{k:>20s} {v:.12g}")
    known = [v for v in table.values() if math.isfinite(v)]
    spread = max(known) - min(known) if known else math.nan
    print(f"max spread {spread:.3e} (tolerance {args.tol:.1e}: {'within' if spread <= args.tol else 'exceeded'})")
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "synthesize": cmd_synthesize, "compare": cmd_compare}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="swingski", description=__doc__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--model", choices=["swing", "ski"], default=None, help="override the model named in the config")
    ap.add_argument("--config", default=None, help="JSON configuration file")
    ap.add_argument("--out", default=".", help="output directory (default: current)")
    ap.add_argument("--tol", type=float, default=1e-6, help="agreement tolerance reported by compare (default 1e-6)")
    ap.add_argument("--oracle", action="store_true", help="validate synthesize against the brute-force grid oracle")
    ap.add_argument("--grid", type=int, default=200, help="switch-time grid size for synthesize (default 200)")
    ap.add_argument("--jobs", type=int, default=1, help="worker threads for candidate integration (default 1)")
    ap.add_argument("--seed", type=int, default=0, help="seed for sampled checks (default 0)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config, args.model, args.command, args.seed)
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TargetUnreachable as exc:
        print(f"error: target unreachable: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    except NoTransversalRoot as exc:
        print(f"error: no transversality root: {exc} (psi endpoints {exc.psi_endpoints}, best {exc.best})", file=sys.stderr)
        return EXIT_NO_ROOT
    except (InvalidParams,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SwingSkiError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
