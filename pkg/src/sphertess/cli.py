"""Command-line front end.

Every subcommand is driven by an :class:`ExperimentConfig`, built either from
flags or from a JSON file (``sphertess run CONFIG``).  Each run writes
``<output>.rows.csv`` and ``<output>.summary.json``.

Exit codes: 0 success, 1 a verification failed, 2 invalid configuration,
3 degeneracy budget exceeded.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import platform
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import constants as C
from . import estimators as E
from .functionals import (DeviationOptions, SizeKind, SizeSpec, U1_perimeter, centred_inradius,
                          inradius_free, theta_r, volume)
from .processes import (DegenerateError, bisector_crofton_cell, crofton_cell, partition_volume,
                        same_normal_set, sample_poisson, sample_tessellation, voronoi_cell)
from .sphere_core import omega, origin
from .spherical_convex import polygon_area, vertices

COMMANDS = (
    "simulate-crofton", "simulate-voronoi-typical", "tessellate", "verify-urysohn",
    "verify-stability", "check-cell-count", "check-typical-identity", "check-voronoi-tail",
    "check-lower-bound", "estimate-rate", "estimate-conditional", "constants",
)

COLUMNS_HELP = {
    "simulate-crofton": "id,hyperplanes,facets,area,u1,inradius,centred_inradius,theta_r",
    "simulate-voronoi-typical": "id,nuclei,facets,area,centred_inradius,bisector_match",
    "tessellate": "cell,facets,area",
    "verify-urysohn": ",".join(C.StabilityReport.CSV_COLUMNS),
    "verify-stability": ",".join(C.StabilityReport.CSV_COLUMNS),
    "check-cell-count": ",".join(E.CellCountReport.COLUMNS),
    "check-typical-identity": ",".join(E.IdentityReport.COLUMNS),
    "check-voronoi-tail": ",".join(E.TailReport.COLUMNS),
    "check-lower-bound": ",".join(E.LowerBoundReport.COLUMNS),
    "estimate-rate": ",".join(E.RateCurve.COLUMNS),
    "estimate-conditional": ",".join(E.ConditionalEstimate.COLUMNS),
    "constants": "name,d,args,value",
}


class ConfigError(ValueError):
    pass


@dataclass
class MCOptions:
    volume_samples: int = 20000
    u1_samples: int = 20000
    delta2_grid: int = 128


@dataclass
class ExperimentConfig:
    command: str
    d: int = 2
    gamma_s: float | None = None
    gammas: list[float] | None = None
    model: str = "HyperplaneCrofton"
    size: str = "Volume"
    deviation: str = "ThetaR"
    functional: str = "volume"
    stability: str = "InradiusThetaR"
    a: float | None = None
    epsilon: float | None = None
    n: int = 1000
    seed: int = 0
    mc: MCOptions = field(default_factory=MCOptions)
    output: str = "sphertess-out"

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        names = {f.name for f in dataclasses.fields(cls)}
        for key in raw:
            if key not in names:
                raise ConfigError(f"unknown config key {key!r}")
        if "command" not in raw:
            raise ConfigError("missing config key 'command'")
        raw = dict(raw)
        mc_raw = raw.pop("mc", {}) or {}
        if not isinstance(mc_raw, dict):
            raise ConfigError("config key 'mc' must be an object")
        mc_names = {f.name for f in dataclasses.fields(MCOptions)}
        for key in mc_raw:
            if key not in mc_names:
                raise ConfigError(f"unknown config key 'mc.{key}'")
        cfg = cls(**raw, mc=MCOptions(**mc_raw))
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> None:
        def need(cond, key, msg):
            if not cond:
                raise ConfigError(f"invalid config key {key!r}: {msg}")

        def integer(key, value, lo, hi=None):
            ok = isinstance(value, int) and not isinstance(value, bool) and value >= lo
            need(ok and (hi is None or value < hi), key,
                 f"expected an integer >= {lo}" + (f" and < {hi}" if hi else ""))

        def real(key, value, positive=True):
            ok = isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)
            need(ok and (value > 0 if positive else value >= 0), key,
                 "expected a positive number" if positive else "expected a number >= 0")

        need(self.command in COMMANDS, "command", f"expected one of {', '.join(COMMANDS)}")
        integer("d", self.d, 2)
        integer("n", self.n, 1)
        integer("seed", self.seed, 0, 2**64)
        integer("mc.volume_samples", self.mc.volume_samples, 1)
        integer("mc.u1_samples", self.mc.u1_samples, 1)
        integer("mc.delta2_grid", self.mc.delta2_grid, 8)
        need(isinstance(self.output, str) and self.output, "output", "expected a path prefix")
        for key, enum in (("model", E.Model), ("deviation", E.Deviation), ("size", SizeKind),
                          ("stability", C.StabilityKind)):
            value = getattr(self, key)
            need(value in {m.value for m in enum}, key,
                 f"expected one of {', '.join(m.value for m in enum)}")
        need(self.functional in E.IDENTITY_FUNCTIONALS, "functional",
             f"expected one of {', '.join(E.IDENTITY_FUNCTIONALS)}")
        if self.gamma_s is not None:
            real("gamma_s", self.gamma_s)
        if self.a is not None:
            real("a", self.a)
        if self.epsilon is not None:
            real("epsilon", self.epsilon, positive=False)
        if self.gammas is not None:
            need(isinstance(self.gammas, list) and self.gammas, "gammas", "expected a non-empty list")
            for g in self.gammas:
                real("gammas", g)
            need(all(x < y for x, y in zip(self.gammas, self.gammas[1:])), "gammas",
                 "grid must be increasing")

        uses_gamma = self.command not in ("estimate-rate", "constants")
        if uses_gamma:
            need(self.gamma_s is not None, "gamma_s", "required by this command")
        if self.command == "estimate-rate":
            need(self.gammas is not None, "gammas", "required by estimate-rate")
        if self.command in ("check-voronoi-tail", "check-lower-bound", "estimate-rate",
                            "estimate-conditional"):
            need(self.a is not None, "a", "required by this command")
        if self.command == "estimate-conditional":
            need(self.epsilon is not None, "epsilon", "required by estimate-conditional")
        if self.command in ("tessellate", "check-cell-count", "check-typical-identity"):
            need(self.d == 2, "d", "cell enumeration is implemented for d = 2")
        if self.a is not None:
            radius = (self.command in ("check-voronoi-tail", "verify-stability")
                      or self.size != "Volume")
            if radius:
                need(self.a < math.pi / 2, "a", "radius levels must lie in (0, pi/2)")
            else:
                need(self.a < omega(self.d + 1), "a", "volume level must be below omega_{d+1}")

    def size_spec(self) -> SizeSpec:
        return SizeSpec(self.size, origin(self.d) if self.size == "CentredInradius" else None)


# --- commands -----------------------------------------------------------------

@dataclass
class Outcome:
    columns: tuple
    rows: list
    results: dict
    passed: bool | None = None


def _g(x) -> str:
    return format(float(x), ".17g")


def _crofton_bodies(cfg: ExperimentConfig, need_proper: bool):
    """Yields (id, cell) for cfg.n Crofton cells drawn from per-body seeds."""
    for i in range(cfg.n):
        rng = np.random.default_rng([cfg.seed, i])
        for attempt in range(100):
            try:
                P = crofton_cell(sample_poisson(cfg.gamma_s, cfg.d, rng))
            except DegenerateError:
                continue
            if not need_proper or (not P.is_whole_sphere and vertices(P, report=True).line_free):
                break
        else:
            raise DegenerateError("degeneracy budget exceeded")
        yield f"cell-{i}", P


def cmd_simulate_crofton(cfg):
    rows = []
    areas = []
    for i, (bid, P) in enumerate(_crofton_bodies(cfg, False)):
        area = (polygon_area(P) if cfg.d == 2
                else volume(P, cfg.mc.volume_samples, E.derive_seed(cfg.seed, i)).value)
        u1 = U1_perimeter(P) if cfg.d == 2 else float("nan")
        r, _ = inradius_free(P)
        line_free = not P.is_whole_sphere and vertices(P, report=True).line_free
        th = theta_r(P) if line_free else float("nan")
        rows.append([bid, str(len(P)), str(len(vertices(P).vertices) if line_free else 0),
                     _g(area), _g(u1), _g(r), _g(centred_inradius(P, origin(cfg.d))), _g(th)])
        areas.append(area)
    return Outcome(tuple(COLUMNS_HELP[cfg.command].split(",")), rows,
                   {"mean_area": float(np.mean(areas)), "cells": cfg.n})


def cmd_simulate_voronoi(cfg):
    rows = []
    mismatches = 0
    o = origin(cfg.d)
    for i in range(cfg.n):
        rng = np.random.default_rng([cfg.seed, i])
        X = sample_poisson(cfg.gamma_s, cfg.d, rng)
        P = voronoi_cell(o, np.vstack([o[None, :], X]))
        match = same_normal_set(P, bisector_crofton_cell(X, o)) if len(X) else True
        mismatches += not match
        area = (polygon_area(P) if cfg.d == 2
                else volume(P, cfg.mc.volume_samples, E.derive_seed(cfg.seed, i)).value)
        line_free = not P.is_whole_sphere and vertices(P, report=True).line_free
        rows.append([f"cell-{i}", str(len(X)), str(len(vertices(P).vertices) if line_free else 0),
                     _g(area), _g(centred_inradius(P, o)), str(match).lower()])
    return Outcome(tuple(COLUMNS_HELP[cfg.command].split(",")), rows,
                   {"cells": cfg.n, "bisector_mismatches": mismatches}, mismatches == 0)


def cmd_tessellate(cfg):
    rng = np.random.default_rng(cfg.seed)
    tess, rejected = sample_tessellation(cfg.gamma_s, cfg.d, rng)
    rows = [[f"cell-{i}", str(len(c)), _g(polygon_area(c))] for i, c in enumerate(tess.cells)]
    k = len(tess.generators)
    total = partition_volume(tess)
    ok = len(tess) == C.schlafli_count(2, k) and abs(total - omega(3)) < 1e-8
    return Outcome(tuple(COLUMNS_HELP[cfg.command].split(",")), rows,
                   {"hyperplanes": k, "cells": len(tess), "schlafli": C.schlafli_count(2, k),
                    "total_area": total, "rejected": rejected,
                    "tessellation": json.loads(tess.to_json())}, ok)


def _report_outcome(cfg, reports):
    counts: dict[str, int] = {}
    for r in reports:
        counts[r.verdict.value] = counts.get(r.verdict.value, 0) + 1
    violations = counts.get(C.Verdict.VIOLATED.value, 0)
    rows = [r.csv_row() for r in reports]
    return Outcome(C.StabilityReport.CSV_COLUMNS, rows,
                   {"bodies": len(reports), "verdicts": counts,
                    "conclusive_violations": violations}, violations == 0)


def cmd_verify_urysohn(cfg):
    reports = [C.verify_urysohn(P, cfg.mc.u1_samples, E.derive_seed(cfg.seed, i), bid)
               for i, (bid, P) in enumerate(_crofton_bodies(cfg, True))]
    return _report_outcome(cfg, reports)


def cmd_verify_stability(cfg):
    params = {"deviation_options": DeviationOptions(grid=cfg.mc.delta2_grid)}
    if cfg.a is not None:
        params["a"] = cfg.a
    if cfg.epsilon is not None:
        params["epsilon"] = cfg.epsilon
    reports = []
    for i, (bid, P) in enumerate(_crofton_bodies(cfg, True)):
        reports.append(C.verify_stability(cfg.stability, P, params, cfg.mc.u1_samples,
                                          E.derive_seed(cfg.seed, i), bid))
    return _report_outcome(cfg, reports)


def _from_report(rep, passed=True):
    return Outcome(rep.COLUMNS, rep.rows(), rep.to_dict(), passed)


def cmd_check_cell_count(cfg):
    rep = E.check_cell_count(cfg.gamma_s, cfg.n, cfg.seed, cfg.d)
    return _from_report(rep, rep.passed)


def cmd_check_typical_identity(cfg):
    rep = E.check_typical_identity(cfg.functional, cfg.gamma_s, cfg.n, cfg.seed, cfg.d, cfg.a)
    return _from_report(rep, rep.passed)


def cmd_check_voronoi_tail(cfg):
    rep = E.check_voronoi_tail(cfg.a, cfg.gamma_s, cfg.d, cfg.n, cfg.seed)
    return _from_report(rep, rep.passed)


def cmd_check_lower_bound(cfg):
    rep = E.check_zero_cell_lower_bound(cfg.size_spec(), cfg.a, cfg.gamma_s, cfg.n, cfg.seed,
                                        cfg.d, cfg.mc.volume_samples)
    return _from_report(rep, rep.passed)


def cmd_estimate_rate(cfg):
    curve = E.estimate_rate(cfg.size_spec(), cfg.a, cfg.gammas, cfg.n, cfg.seed, cfg.d,
                            cfg.mc.volume_samples)
    return _from_report(curve, curve.bound_ok)


def cmd_estimate_conditional(cfg):
    rep = E.estimate_conditional_deviation(
        cfg.model, cfg.size_spec(), cfg.deviation, cfg.a, cfg.epsilon, cfg.gamma_s, cfg.n,
        cfg.seed, cfg.d, DeviationOptions(grid=cfg.mc.delta2_grid), cfg.mc.volume_samples,
        cfg.mc.u1_samples)
    return _from_report(rep, None)


def constants_table(d: int) -> list[list[str]]:
    rows = []
    for a0, ac in ((0.2, 0.2), (0.3, 0.5), (0.5, 1.0)):
        rows.append(["beta", str(d), f"alpha0={a0};alphaC={ac}", _g(C.beta_stability(a0, ac, d))])
    for a in (0.1, 0.3, 0.7, 1.2):
        rows.append(["c_inradius", str(d), f"a={a}", _g(C.c_inradius(a, d))])
        rows.append(["c_voronoi", str(d), f"a={a}", _g(C.c_voronoi(a, d))])
    for frac in (0.05, 0.2, 0.45):
        a = frac * omega(d + 1)
        rows.append(["beta_bar", str(d), f"a={_g(a)}", _g(C.beta_bar(a, d))])
    for m in range(0, 5):
        for t in (0.0, 1.0, 4.0, 10.0):
            rows.append(["h_m", str(d), f"m={m};t={t}", _g(C.h_m(m, t))])
    for k in range(0, 11):
        rows.append(["N", str(d), f"k={k}", str(C.schlafli_count(d, k))])
    return rows


def cmd_constants(cfg):
    rows = constants_table(cfg.d)
    return Outcome(("name", "d", "args", "value"), rows, {"entries": len(rows)})


HANDLERS = {
    "simulate-crofton": cmd_simulate_crofton,
    "simulate-voronoi-typical": cmd_simulate_voronoi,
    "tessellate": cmd_tessellate,
    "verify-urysohn": cmd_verify_urysohn,
    "verify-stability": cmd_verify_stability,
    "check-cell-count": cmd_check_cell_count,
    "check-typical-identity": cmd_check_typical_identity,
    "check-voronoi-tail": cmd_check_voronoi_tail,
    "check-lower-bound": cmd_check_lower_bound,
    "estimate-rate": cmd_estimate_rate,
    "estimate-conditional": cmd_estimate_conditional,
    "constants": cmd_constants,
}


# --- persistence ------------------------------------------------------------------

def csv_body(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, np.generic):
        return _json_safe(x.item())
    return x


def versions() -> dict:
    return {"sphertess": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def execute(cfg: ExperimentConfig, stream=sys.stdout) -> int:
    """Run one experiment, write its artifacts, and return the exit code."""
    start = time.perf_counter()
    print(f"sphertess {cfg.command} seed={cfg.seed} "
          + " ".join(f"{k}={v}" for k, v in versions().items()), file=stream)
    try:
        out = HANDLERS[cfg.command](cfg)
    except DegenerateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    body = csv_body(out.columns, out.rows)
    digest = hashlib.sha256(body.encode()).hexdigest()
    prefix = Path(cfg.output)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    with open(f"{prefix}.rows.csv", "w", newline="") as fh:
        fh.write(f"# generated {stamp}\r\n")
        fh.write(body)
    summary = {"config": cfg.to_dict(), "seed": cfg.seed, "versions": versions(),
               "results": _json_safe(out.results), "pass": out.passed,
               "rows_sha256": digest, "runtime_s": time.perf_counter() - start}
    with open(f"{prefix}.summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {prefix}.rows.csv ({len(out.rows)} rows, sha256 {digest[:12]}) "
          f"pass={out.passed}", file=stream)
    return 1 if out.passed is False else 0


def rows_hash(path) -> str:
    """sha256 of a rows file without its timestamp line."""
    text = Path(path).read_bytes().decode()
    body = text.split("\r\n", 1)[1] if text.startswith("#") else text
    return hashlib.sha256(body.encode()).hexdigest()


# --- argument parsing ----------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--gamma-s", type=float)
    p.add_argument("--gammas", type=lambda s: [float(x) for x in s.split(",")],
                   help="comma-separated increasing grid (estimate-rate)")
    p.add_argument("--model", default="HyperplaneCrofton")
    p.add_argument("--size", default="Volume")
    p.add_argument("--deviation", default="ThetaR")
    p.add_argument("--functional", default="volume")
    p.add_argument("--stability", default="InradiusThetaR")
    p.add_argument("--a", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--volume-samples", type=int, default=20000)
    p.add_argument("--u1-samples", type=int, default=20000)
    p.add_argument("--delta2-grid", type=int, default=128)
    p.add_argument("--output", default=None, help="path prefix for the artifacts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sphertess",
        description="Random spherical tessellations: simulation and verification.",
        epilog="Set SPHERTESS_THREADS (integer, 0 = all cores) to parallelise replications.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment described by a JSON config")
    run.add_argument("config")
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"CSV columns: {COLUMNS_HELP[name]}",
                           description=f"CSV columns: {COLUMNS_HELP[name]}")
        _add_common(p)
    return parser


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    if ns.command == "run":
        try:
            raw = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}")
        return ExperimentConfig.from_dict(raw)
    raw = {k: getattr(ns, k) for k in ("command", "d", "gamma_s", "gammas", "model", "size",
                                       "deviation", "functional", "stability", "a", "epsilon",
                                       "n", "seed")}
    raw = {k: v for k, v in raw.items() if v is not None}
    raw["mc"] = {"volume_samples": ns.volume_samples, "u1_samples": ns.u1_samples,
                 "delta2_grid": ns.delta2_grid}
    raw["output"] = ns.output or f"sphertess-out/{ns.command}"
    return ExperimentConfig.from_dict(raw)


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return execute(cfg)


if __name__ == "__main__":
    sys.exit(main())
