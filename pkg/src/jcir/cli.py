"""Scenario-driven command line interface.

    jcir <subcommand> --config scenario.yaml [--out DIR] [--threads N] [--seed S]

A scenario file is YAML with keys ``name``, ``seed``, ``model`` and
``knobs`` (experiment settings).  Every run writes ``<name>_<subcommand>.csv``
and a JSON summary ``<name>_<subcommand>.json`` into ``--out``.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .bessel import BesselParams, bessel_chf, bessel_moment, bessel_sample, moment_bound_scan
from .chf import ModelParams, invert_density, jcir_chf
from .ergo import (TestFn, decay_fit, forgetting_time, moment_estimate, stationary_law, sup_moment_scan,
                   test_fn_from_dict, time_average)
from .lyapunov import DivergentTailError, check_log_drift, check_power_drift
from .rng import RandomStream, run_chunked
from .sim import Scheme, jcir_exact_oneshot, sample_marginal, sample_paths

SUBCOMMANDS = ("simulate", "chf", "density", "moments", "drift", "ergodic", "decay", "bessel-check")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_REFUSED = 3


class ConfigError(ValueError):
    """The scenario file is malformed; the message names the offending field."""


class PreconditionError(RuntimeError):
    """A hypothesis needed by the experiment fails; the message cites the result it comes from."""


def _normalize(obj):
    """JSON-compatible canonical form, so scenarios compare equal after a round trip."""
    return json.loads(json.dumps(obj, sort_keys=True))


@dataclass(frozen=True)
class Scenario:
    name: str
    experiment: str
    model: ModelParams
    seed: int
    knobs: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "knobs", _normalize(self.knobs))

    def to_dict(self) -> dict:
        return {"name": self.name, "experiment": self.experiment, "seed": self.seed,
                "model": self.model.to_dict(), "knobs": self.knobs}

    @classmethod
    def from_dict(cls, d: dict, experiment: str | None = None) -> "Scenario":
        if not isinstance(d, dict):
            raise ConfigError("config: top level must be a mapping")
        for key in ("name", "model"):
            if key not in d:
                raise ConfigError(f"config: missing field '{key}'")
        exp = d.get("experiment", experiment)
        if experiment is not None and exp != experiment:
            raise ConfigError(f"experiment: config says {exp!r} but subcommand is {experiment!r}")
        if exp not in SUBCOMMANDS:
            raise ConfigError(f"experiment: unknown value {exp!r}")
        try:
            model = ModelParams.from_dict(d["model"])
        except (KeyError, TypeError) as err:
            raise ConfigError(f"model: missing or malformed field {err}") from None
        except ValueError as err:
            raise ConfigError(f"model: {err}") from None
        seed = d.get("seed", 0)
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed: must be a nonnegative integer")
        knobs = d.get("knobs", {}) or {}
        if not isinstance(knobs, dict):
            raise ConfigError("knobs: must be a mapping")
        return cls(str(d["name"]), exp, model, seed, knobs)


def load_config(path: str | Path) -> tuple[dict, bytes]:
    raw = Path(path).read_bytes()
    try:
        data = yaml.safe_load(raw)
    except yaml.YAMLError as err:
        raise ConfigError(f"config: not valid YAML ({err})") from None
    return data, raw


# --------------------------------------------------------------------------
# knob helpers
# --------------------------------------------------------------------------


def _knob(s: Scenario, key: str, default=None, kind=float):
    if key not in s.knobs:
        if default is None:
            raise ConfigError(f"knobs.{key}: required for {s.experiment}")
        return default
    try:
        return kind(s.knobs[key])
    except (TypeError, ValueError):
        raise ConfigError(f"knobs.{key}: expected {kind.__name__}, got {s.knobs[key]!r}") from None


def _grid(s: Scenario, key: str, default=None) -> np.ndarray:
    """A list of numbers, or a mapping ``{start, stop, num}`` (optionally ``log: true``)."""
    spec = s.knobs.get(key, default)
    if spec is None:
        raise ConfigError(f"knobs.{key}: required for {s.experiment}")
    try:
        if isinstance(spec, dict):
            make = np.geomspace if spec.get("log") else np.linspace
            return make(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
        if isinstance(spec, (int, float)):
            return np.asarray([float(spec)])
        return np.asarray([float(v) for v in spec])
    except (KeyError, TypeError, ValueError):
        raise ConfigError(f"knobs.{key}: expected a list or {{start, stop, num}}") from None


def _scheme(s: Scenario) -> Scheme | None:
    kind = s.knobs.get("scheme")
    if kind is None:
        return None
    if kind == "exact":
        return Scheme("exact")
    if kind == "euler":
        return Scheme("euler", _knob(s, "dt", 1e-3), _knob(s, "eps", 1e-3), bool(s.knobs.get("compensate", True)))
    raise ConfigError(f"knobs.scheme: expected 'exact' or 'euler', got {kind!r}")


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise PreconditionError(message)


def _require_a_positive(s: Scenario, result: str) -> None:
    _require(s.model.a > 0, f"{result} assumes a > 0 (got a = {s.model.a:g}); {s.experiment} refused")


def _require_log_tail(s: Scenario) -> None:
    _require(math.isfinite(s.model.levy.log_tail()),
             f"Theorem 1.2(a): int_{{z>1}} log z nu(dz) = inf; {s.experiment} refused")


def _require_moment(s: Scenario, kappa: float) -> None:
    _require(s.model.levy.tail_moment(kappa).finite,
             f"Theorem 1.1(iii): int_{{z>1}} z^kappa nu(dz) = inf for kappa = {kappa:g}; "
             f"{'moment' if s.experiment == 'moments' else s.experiment} experiment refused")


# --------------------------------------------------------------------------
# experiments: each returns (header, rows, results)
# --------------------------------------------------------------------------


def run_simulate(s: Scenario, threads: int):
    stream = RandomStream(s.seed)
    n = _knob(s, "n", 1000, int)
    x0 = _knob(s, "x0", 1.0)
    scheme = _scheme(s)
    if "times" in s.knobs:
        times = _grid(s, "times")
        path = sample_paths(s.model, times, x0, n, stream, scheme, threads)
        rows = [(i, t, v) for i in range(n) for t, v in zip(path.times, path.values[i])]
        vals = path.values[:, -1]
        header = ["path_id", "time", "value"]
        sch = path.scheme.to_dict()
    else:
        t = _knob(s, "t", 1.0)
        vals = sample_marginal(s.model, t, x0, n, stream, scheme, threads)
        rows = [(v,) for v in vals]
        header = ["value"]
        sch = (scheme or Scheme("exact" if s.model.levy.finite_activity else "euler")).to_dict()
    return header, rows, {"n": n, "scheme": sch, "final_mean": float(np.mean(vals)), "final_min": float(np.min(vals))}


def run_chf(s: Scenario, threads: int):
    t = _knob(s, "t", 1.0)
    x0 = _knob(s, "x0", 1.0)
    pts = s.knobs.get("u", [[-1.0, 0.0], [0.0, 1.0]])
    try:
        u = np.array([complex(float(p[0]), float(p[1])) for p in pts])
    except (TypeError, ValueError, IndexError):
        raise ConfigError("knobs.u: expected a list of [re, im] pairs") from None
    if np.any(u.real > 0):
        raise ConfigError("knobs.u: transforms are defined for Re u <= 0 only")
    vals = np.atleast_1d(jcir_chf(s.model, t, x0, u))
    rows = [(t, x0, v.real, v.imag, c.real, c.imag) for v, c in zip(u, vals)]
    return ["t", "x0", "re_u", "im_u", "re_chf", "im_chf"], rows, {"max_modulus": float(np.max(np.abs(vals)))}


def run_density(s: Scenario, threads: int):
    _require_a_positive(s, "Proposition 3.1")
    t = _knob(s, "t", 1.0)
    x0 = _knob(s, "x0", 1.0)
    y = _grid(s, "y", {"start": 0.05, "stop": 10.0, "num": 200})
    grid = invert_density(s.model, t, x0, y, n_terms=_knob(s, "n_terms", 8192, int))
    err = grid.inversion_error_estimate
    rows = [(t, x0, yy, f, err) for yy, f in grid.points]
    return ["t", "x0", "y", "density", "err_est"], rows, {
        "inversion_error_estimate": err, "min_interior": grid.min_interior, "support": grid.support}


def _mc_rows(s: Scenario, label: str, t: float, e) -> tuple:
    return (label, t, e.mean, e.stderr, e.n, e.seed)


MC_HEADER = ["scenario_id", "t", "estimate", "stderr", "n", "seed"]


def run_moments(s: Scenario, threads: int):
    kappa = _knob(s, "kappa", 1.0)
    _require_moment(s, kappa)
    x0 = _knob(s, "x0", 1.0)
    n = _knob(s, "n", 10_000, int)
    times = _grid(s, "times", [1.0])
    scheme = _scheme(s)
    if times.size == 1:
        ests = [moment_estimate(s.model, float(times[0]), x0, kappa, n, RandomStream(s.seed), scheme, threads)]
    else:
        ests = sup_moment_scan(s.model, float(times[-1]), x0, kappa, times, n, RandomStream(s.seed),
                               scheme, threads).estimates
    rows = [_mc_rows(s, s.name, float(t), e) for t, e in zip(times, ests)]
    best = max(ests, key=lambda e: e.mean)
    return MC_HEADER, rows, {"kappa": kappa, "max_estimate": best.to_dict()}


def run_drift(s: Scenario, threads: int):
    form = s.knobs.get("form", "log")
    grid = _grid(s, "grid", {"start": 0.0, "stop": 100.0, "num": 201})
    if form == "log":
        _require_log_tail(s)
        _require_a_positive(s, "Theorem 1.2(a)")
        K = s.knobs.get("K")
        report = check_log_drift(s.model, grid, None if K is None else float(K),
                                 None if "c" not in s.knobs else _knob(s, "c"))
    elif form == "power":
        kappa = _knob(s, "kappa", 0.5)
        _require_moment(s, kappa)
        report = check_power_drift(s.model, kappa, grid, None if "c" not in s.knobs else _knob(s, "c"))
    else:
        raise ConfigError(f"knobs.form: expected 'log' or 'power', got {form!r}")
    rows = list(zip(report.grid, report.dv, report.jv, report.av_values))
    return ["x", "dv", "jv", "av"], rows, {"report": report.to_dict()}


def run_ergodic(s: Scenario, threads: int):
    _require_log_tail(s)
    _require_a_positive(s, "Theorem 1.2(a)")
    f = test_fn_from_dict(s.knobs.get("f", {"kind": "exp", "q": 1.0}))
    T = _knob(s, "T", 2000.0 / s.model.b)
    dt_obs = _knob(s, "dt_obs", 0.05)
    x0s = _grid(s, "x0", [0.0, 50.0])
    scheme = _scheme(s)
    ests = []
    for k, x0 in enumerate(x0s):
        ests.append(time_average(s.model, f, T, float(x0), dt_obs, RandomStream(s.seed, k), scheme=scheme))
    rows = [_mc_rows(s, f"{s.name}/x0={x0:g}", T, e) for x0, e in zip(x0s, ests)]
    results = {"f": f.to_dict(), "estimates": [e.to_dict() for e in ests]}
    if len(ests) >= 2:
        a, b = ests[0], ests[-1]
        results["x0_agreement"] = bool(abs(a.mean - b.mean) <= 3 * math.hypot(a.stderr, b.stderr))
    if f.bounded:
        target = stationary_law(s.model).expect(f)
        results["stationary_value"] = target
        results["within_3se"] = [bool(abs(e.mean - target) <= 3 * e.stderr) for e in ests]
    return MC_HEADER, rows, results


def run_decay(s: Scenario, threads: int):
    _require_a_positive(s, "Theorem 1.2(b)")
    kappa = _knob(s, "kappa", 0.25)
    _require_moment(s, kappa)
    x0s = _grid(s, "x0", [0.0, 20.0])
    times = _grid(s, "times", [0.5, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12])
    n = _knob(s, "n", 100_000, int)
    burn = s.knobs.get("burn_in")
    burn = max(forgetting_time(s.model, float(x)) for x in x0s) if burn is None else float(burn)
    law = stationary_law(s.model)
    fits = [decay_fit(s.model, float(x0), times, n, RandomStream(s.seed, k), law=law, burn_in=burn,
                      scheme=_scheme(s), threads=threads) for k, x0 in enumerate(x0s)]
    rows = []
    for x0, fit in zip(x0s, fits):
        rows += [(f"{s.name}/x0={x0:g}", t, d, se, n, s.seed) for t, d, se in zip(fit.times, fit.distances, fit.stderrs)]
    results = {"fits": [f.to_dict() for f in fits], "burn_in": burn}
    if len(fits) >= 2:
        results["rates_agree"] = bool(fits[0].agrees_with(fits[-1]))
    return MC_HEADER, rows, results


def run_bessel_check(s: Scenario, threads: int):
    alphas = _grid(s, "alpha", [0.5, 2.0, 8.0])
    betas = _grid(s, "beta", [0.5, 2.0, 8.0])
    kappas = _grid(s, "kappa", [0.5, 1.0, 2.0])
    delta = _knob(s, "delta", 1.0)
    n = _knob(s, "n", 100_000, int)
    grid = [(float(a), float(b)) for a in alphas for b in betas]
    rows = []
    scans = {}
    for kappa in kappas:
        rep = moment_bound_scan(float(kappa), delta, grid)
        scans[f"{kappa:g}"] = rep.to_dict()
        for a, b in grid:
            m = bessel_moment(BesselParams(a, b), float(kappa))
            rows.append((a, b, float(kappa), m, m * b**kappa / (1 + a**kappa),
                         m * b**kappa / a**kappa if a >= delta else float("nan")))
    sampler = []
    for k, (a, b) in enumerate(grid):
        p = BesselParams(a, b)
        draws = run_chunked(lambda gen, m, p=p: bessel_sample(p, gen, m), n, RandomStream(s.seed, k), threads)
        zero = float(np.mean(draws == 0))
        sampler.append({"alpha": a, "beta": b, "atom_freq": zero, "atom": math.exp(-a),
                        "atom_se": math.sqrt(math.exp(-a) * (1 - math.exp(-a)) / n),
                        "chf_minus1_mc": float(np.mean(np.exp(-draws))),
                        "chf_minus1": float(bessel_chf(p, -1.0).real)})
    header = ["alpha", "beta", "kappa", "moment", "upper_ratio", "lower_ratio"]
    return header, rows, {"scans": scans, "sampler": sampler}


RUNNERS = {
    "simulate": run_simulate,
    "chf": run_chf,
    "density": run_density,
    "moments": run_moments,
    "drift": run_drift,
    "ergodic": run_ergodic,
    "decay": run_decay,
    "bessel-check": run_bessel_check,
}


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def format_csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def run_scenario(s: Scenario, out_dir: Path, threads: int = 1, config_bytes: bytes = b"") -> dict:
    start = time.perf_counter()
    header, rows, results = RUNNERS[s.experiment](s, threads)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{s.name}_{s.experiment}"
    (out_dir / f"{stem}.csv").write_text(format_csv(header, rows), encoding="utf-8")
    summary = {
        "scenario": s.to_dict(),
        "code_version": __version__,
        "config_hash": hashlib.sha256(config_bytes).hexdigest(),
        "wall_time_s": time.perf_counter() - start,
        "results": _jsonable(results),
        "csv": f"{stem}.csv",
    }
    (out_dir / f"{stem}.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return summary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jcir", description="Jump-diffusion CIR experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="scenario YAML file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads for Monte Carlo chunks")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        data, raw = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed: must be nonnegative")
            data = dict(data or {}, seed=args.seed)
        scenario = Scenario.from_dict(data, args.command)
        if args.threads < 1:
            raise ConfigError("--threads: must be at least 1")
        summary = run_scenario(scenario, Path(args.out), args.threads, raw)
    except (ConfigError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (PreconditionError, DivergentTailError) as err:
        print(f"refused: {err}", file=sys.stderr)
        return EXIT_REFUSED
    print(json.dumps({"csv": str(Path(args.out) / summary["csv"]), "wall_time_s": summary["wall_time_s"]}))
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
