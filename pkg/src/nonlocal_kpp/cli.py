"""Scenario-driven command line front end.

Every verb reads one JSON scenario (``--config``), applies ``--set`` overrides
given as dotted paths and writes CSV/JSON files into ``--out``.

Exit codes: 0 pass, 1 runtime error, 2 assumption violation, 3 a certificate
search hit its cap ("not certified"), 4 an asserted inequality or verdict
failed ("violated").
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from . import dynamics as dy
from . import env
from . import fronts as fr
from . import kernel as kn
from . import speed as sp
from . import verify as vf
from .errors import AssumptionViolation, DomainExhaustedError, NonlocalKPPError, StabilityError

EXIT_OK, EXIT_RUNTIME, EXIT_ASSUMPTION, EXIT_NOT_CERTIFIED, EXIT_VIOLATED = 0, 1, 2, 3, 4

DEFAULTS: dict[str, Any] = {
    "name": "scenario",
    "kernel": {"family": "gaussian", "params": {"variance": 1.0}, "scale": 1.0},
    "coefficient": {"form": "constant", "params": {"value": 2.0}},
    "nonlinearity": {"form": "logistic"},
    "initial": {"kind": "compact_bump", "params": {"A": 10.0, "p": 0.5}, "shift": -10.0},
    "grid": {"x_min": -100.0, "x_max": 500.0, "n": 8192},
    "dt": 0.05,
    "t_end": 120.0,
    "thresholds": [0.1, 0.5, 0.9],
    "record_every": 1.0,
    "fit_window": None,
    "eta_factor": 0.1,
    "tolerance_factor": 0.05,
    "inner_tolerance": 0.05,
    "tail_from": 20.0,
    "tail_level": 1e-3,
    "output": {"snapshots": "none", "snapshot_every": 10.0},
    "seed": 0,
    "least_mean": {"T_max": 1024.0, "s_max": 64.0},
    "minorant_delta": None,
    "verify": {
        "horizon": 10.0,
        "t_probe": 1.0,
        "comparison_pairs": 20,
        "comparison_t_end": 20.0,
        "comparison_grid": {"x_min": -50.0, "x_max": 150.0, "n": 1024},
        "slow_lambda_factor": 0.5,
        "cosine": {"gamma_factor": 0.9, "B_start": 4.0, "R_cap": 1000.0},
        "two_exp": {"h": None, "B1": None},
    },
    "sweep": None,
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("params",):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def set_dotted(cfg: dict, assignment: str) -> None:
    """Apply ``a.b.c=value``; the value is parsed as JSON when possible."""
    key, sep, raw = assignment.partition("=")
    if not sep:
        raise ValueError(f"--set expects key=value, got {assignment!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = key.split(".")
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            node[p] = {}
        node = node[p]
    node[parts[-1]] = value


@dataclass
class Scenario:
    name: str
    kernel: kn.KernelSpec
    coefficient: env.Coefficient
    nonlinearity: dy.Nonlinearity
    initial: dy.InitialData
    grid: dy.Grid
    dt: float
    t_end: float
    cfg: dict

    @property
    def lambda_init(self):
        p = self.initial.params
        if self.initial.kind in ("plateau_tail", "pure_exponential"):
            return float(p["lambda"])
        return "compact"


def build_scenario(cfg: dict, base_dir: str | None = None) -> Scenario:
    cfg = _merge(DEFAULTS, cfg)
    kernel = kn.KernelSpec.from_dict(cfg["kernel"], base_dir)
    mu = env.Coefficient.from_dict(cfg["coefficient"], base_dir)
    nlc = cfg["nonlinearity"]
    if nlc["form"] == "logistic":
        nl = dy.logistic(mu)
    elif nlc["form"] == "logistic_H":
        nl = dy.logistic_H(mu, float(nlc["H"]))
    else:
        raise ValueError("only logistic and logistic_H nonlinearities can be configured from JSON")
    init = dy.InitialData.from_dict(cfg["initial"])
    g = cfg["grid"]
    grid = dy.Grid(float(g["x_min"]), float(g["x_max"]), int(g["n"]))
    return Scenario(cfg["name"], kernel, mu, nl, init, grid, float(cfg["dt"]), float(cfg["t_end"]), cfg)


def load_scenario(path: str | None, overrides=()) -> Scenario:
    cfg: dict = {}
    base_dir = None
    if path:
        with open(path) as fh:
            cfg = json.load(fh)
        base_dir = str(Path(path).resolve().parent)
    cfg = _merge(DEFAULTS, cfg)
    for item in overrides:
        set_dotted(cfg, item)
    return build_scenario(cfg, base_dir)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, data) -> None:
    with open(path, "w") as fh:
        json.dump(_json_safe(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- shared analysis --------------------------------------------------------

def _least_mean(sc: Scenario) -> env.LeastMeanEstimate:
    lm = sc.cfg["least_mean"]
    return env.least_mean(sc.coefficient, T_max=float(lm["T_max"]), s_max=float(lm["s_max"]))


def _analysis(sc: Scenario):
    """Least mean, assumption report and speed curve (``None`` when the hypotheses fail)."""
    est = _least_mean(sc)
    report = sp.check_assumptions(sc.kernel, sc.coefficient, est)
    curve = None
    if est.value > kn.mass(sc.kernel):
        curve = sp.minimize_speed(sc.kernel, est.value)
    return est, report, curve


def _failed_names(report: dict) -> list[str]:
    return [c["name"] for c in report["checks"] if not c["passed"]]


# -- verbs --------------------------------------------------------------------

def cmd_speeds(sc: Scenario, out: Path, lambda_grid: int = 256) -> int:
    est, report, curve = _analysis(sc)
    summary = {
        "name": sc.name,
        "kernel": sc.kernel.to_dict(),
        "coefficient": sc.coefficient.to_dict(),
        "Kbar": kn.mass(sc.kernel),
        "sigma": kn.abscissa(sc.kernel),
        "least_mean": est.to_dict(),
        "assumptions": report,
    }
    if curve is None:
        summary["failed"] = _failed_names(report)
        write_json(out / "summary.json", summary)
        print(f"assumption violated: {', '.join(summary['failed'])}", file=sys.stderr)
        return EXIT_ASSUMPTION
    sp.write_curve_csv(str(out / "speed_curve.csv"), sp.sample_curve(curve, lambda_grid))
    summary.update(curve.summary())
    delta = sc.cfg["minorant_delta"] or kn.default_minorant_delta(sc.kernel)
    minor = kn.minorant(sc.kernel, float(delta))
    m = env.value_range(sc.coefficient)[0]
    summary["minorant"] = {"delta": float(delta), "height": minor.height, "mass": minor.mass, "m": m,
                           "c0": sp.c_autonomous(minor, m)}
    if curve.star_interior:
        summary["truncated_ladder"] = sp.truncated_ladder(curve)
    summary["notes"] = curve.notes
    write_json(out / "summary.json", summary)
    if not report["pass"]:
        print(f"assumption violated: {', '.join(_failed_names(report))}", file=sys.stderr)
        return EXIT_ASSUMPTION
    print(f"lambda_star = {curve.lambda_star:.8g}  c_star = {curve.c_star:.8g}")
    return EXIT_OK


def _require(sc: Scenario):
    est, report, curve = _analysis(sc)
    if curve is None or not report["pass"]:
        raise AssumptionViolation("assumptions fail: " + ", ".join(_failed_names(report)))
    sp.require_interior(curve)
    return est, report, curve


def cmd_simulate(sc: Scenario, out: Path) -> int:
    est, report, curve = _require(sc)
    cfg = sc.cfg
    model_guard = dy.guard_start(dy.Model(sc.kernel, sc.nonlinearity, sc.grid))
    tracker = fr.FrontTracker(cfg["thresholds"], x_guard=model_guard)
    stride = max(1, int(round(float(cfg["record_every"]) / sc.dt)))
    observers = [tracker]
    recorder = None
    snap = cfg["output"]["snapshots"]
    if snap != "none" or sc.t_end == 0:
        recorder = dy.SnapshotRecorder()
        every = max(1, int(round(float(cfg["output"]["snapshot_every"]) / (stride * sc.dt))))
        seen = [0]

        def snapshot(f):
            if seen[0] % every == 0 or abs(f.t - sc.t_end) < 1e-9:
                recorder(f)
            seen[0] += 1

        observers.append(snapshot)
    eta = float(cfg["eta_factor"]) * curve.c_star
    tail = {"t_from": float(cfg["tail_from"]), "max": 0.0, "at": None}
    t_env = [0.0]

    def upper(t):
        return float(fr.theoretical_envelope(curve, sc.coefficient, sc.lambda_init, [t]).upper[0])

    def tail_watch(f):
        t_env.append(f.t)
        if f.t >= tail["t_from"] - 1e-9:
            v = fr.tail_max(f, upper(f.t) + eta * f.t)
            if v > tail["max"] or tail["at"] is None:
                tail["max"], tail["at"] = v, f.t

    observers.append(tail_watch)
    traj = dy.run(sc.kernel, sc.nonlinearity, sc.initial, sc.grid, sc.t_end, sc.dt, observers, stride=stride)
    fr.write_traces_csv(str(out / "fronts.csv"), tracker.traces.values())
    theta = 0.5 if 0.5 in tracker.traces else sorted(tracker.traces)[0]
    trace = tracker.traces[theta]
    times = np.unique(np.asarray(t_env))
    envl = fr.theoretical_envelope(curve, sc.coefficient, sc.lambda_init, times)
    fr.write_envelope_csv(str(out / "envelope.csv"), envl, trace)
    if recorder is not None:
        meta = {"grid": sc.grid.to_dict(), "kernel": sc.kernel.to_dict(), "coefficient": sc.coefficient.to_dict(),
                "nonlinearity": sc.nonlinearity.to_dict(), "dt": traj.dt}
        if snap == "npz":
            dy.write_snapshots_npz(str(out / "snapshots.npz"), recorder.fields, meta)
        else:
            dy.write_snapshots_csv(str(out / "snapshots.csv"), recorder.fields)
            write_json(out / "snapshots.json", meta)
    result = {"name": sc.name, "lambda_star": curve.lambda_star, "c_star": curve.c_star,
              "least_mean": est.value, "max_overshoot": traj.max_overshoot,
              "max_guard_value": traj.max_guard_value, "dt": traj.dt, "n_steps": traj.n_steps}
    if sc.t_end == 0:
        write_json(out / "verdict.json", {**result, "pass": None, "note": "t_end = 0: initial state only"})
        return EXIT_OK
    t_burn = fr.burn_in(kn.mass(sc.kernel), sc.t_end)
    t_fit = tuple(cfg["fit_window"]) if cfg["fit_window"] else (t_burn, sc.t_end)
    v = fr.verdict(trace, envl, eta, float(cfg["tolerance_factor"]) * curve.c_star, t_burn=t_burn,
                   final=traj.final, logistic=sc.nonlinearity.form == "logistic",
                   inner_tolerance=float(cfg["inner_tolerance"]), t_fit=t_fit)
    tail_ok = tail["at"] is None or tail["max"] <= float(cfg["tail_level"])
    v["checks"].append({"name": "no mass beyond the upper envelope", "passed": bool(tail_ok),
                        "max_u": tail["max"], "t_from": tail["t_from"], "level": float(cfg["tail_level"])})
    slopes = {}
    for th, tr in sorted(tracker.traces.items()):
        try:
            slopes[repr(th)] = fr.fit_speed(tr, t_fit).slope
        except NonlocalKPPError:
            slopes[repr(th)] = None
    v["numbers"]["slopes_by_theta"] = slopes
    v["pass"] = all(c["passed"] for c in v["checks"])
    write_json(out / "verdict.json", {**result, **v})
    print(f"verdict: {'pass' if v['pass'] else 'fail'}")
    return EXIT_OK if v["pass"] else EXIT_VIOLATED


def cmd_verify(sc: Scenario, out: Path) -> int:
    est, report, curve = _require(sc)
    vc = sc.cfg["verify"]
    horizon = float(vc["horizon"])
    results: dict[str, Any] = {}

    lam_init = sc.lambda_init
    lam_super = curve.lambda_star if lam_init == "compact" or lam_init >= curve.lambda_star else lam_init
    u0 = dy.make_initial(sc.initial, sc.grid)
    A = vf.fit_supersolution_amplitude(u0, lam_super)
    sup = vf.supersolution_exp(curve, sc.coefficient, A, lam_super)
    rep = vf.residual(sc.kernel, sc.nonlinearity, sup, (0.0, max(sc.t_end, horizon)),
                      (sc.grid.x_min, sc.grid.x_max), tol=1e-8 * A)
    results["supersolution"] = {"status": "certified" if rep.passed else rep.status, "report": rep.to_dict(),
                                "candidate": sup.to_dict()}

    cc = vc["cosine"]
    cos = vf.certify_cosine(sc.kernel, sc.nonlinearity, curve, gamma_frac=float(cc["gamma_factor"]),
                            B_start=float(cc["B_start"]), R_cap=float(cc["R_cap"]), horizon=horizon)
    results["subsolution_cosine"] = cos.to_dict()

    te = vc["two_exp"]
    lam_slow = lam_init if lam_init != "compact" and lam_init < curve.lambda_star \
        else float(vc["slow_lambda_factor"]) * curve.lambda_star
    if te.get("B1") is None:
        two = vf.certify_two_exp(sc.kernel, sc.nonlinearity, curve, lam_slow, h=te.get("h"), horizon=horizon)
        results["subsolution_two_exp"] = two.to_dict()
    else:
        h = te.get("h") or vf.default_h(curve, lam_slow)
        cand = vf.subsolution_two_exp(sc.kernel, sc.coefficient, lam_slow, h, float(te["B1"]))
        r = vf._two_exp_report(sc.kernel, sc.nonlinearity, cand, horizon)
        results["subsolution_two_exp"] = {"status": "certified" if r.passed else r.status,
                                          "candidate": cand.to_dict(), "report": r.to_dict()}

    rng = np.random.default_rng(sc.cfg["seed"])
    g = vc["comparison_grid"]
    cgrid = dy.Grid(float(g["x_min"]), float(g["x_max"]), int(g["n"]))
    pairs = []
    for _ in range(int(vc["comparison_pairs"])):
        low, high = vf.random_ordered_pair(rng)
        pairs.append(vf.comparison_test(sc.kernel, sc.nonlinearity, low, high, float(vc["comparison_t_end"]),
                                        cgrid, sc.dt))
    results["comparison"] = {"pairs": len(pairs), "max_violation": max((p["max_violation"] for p in pairs), default=0.0),
                             "failures": sum(not p["passed"] for p in pairs),
                             "status": "certified" if all(p["passed"] for p in pairs) else "violated"}
    pos = vf.positivity_test(sc.kernel, sc.nonlinearity, sc.initial, float(vc["t_probe"]), sc.grid, sc.dt)
    results["positivity"] = {**pos, "status": "certified" if pos["passed"] else "violated"}

    for key, val in results.items():
        write_json(out / f"verify_{key}.json", val)
    statuses = {k: v["status"] for k, v in results.items()}
    write_json(out / "verify.json", {"name": sc.name, "statuses": statuses})
    for k, s in statuses.items():
        print(f"{k}: {s}")
    if any(s in ("violated", "inconclusive") for s in statuses.values()):
        return EXIT_VIOLATED
    if any(s == "not certified" for s in statuses.values()):
        return EXIT_NOT_CERTIFIED
    return EXIT_OK


def cmd_report(out: Path) -> int:
    """Gather the JSON results found in ``out`` into ``report.json`` and print a digest."""
    collected = {}
    for name in sorted(os.listdir(out)):
        if name.endswith(".json") and name != "report.json":
            with open(out / name) as fh:
                collected[name] = json.load(fh)
    write_json(out / "report.json", collected)
    for name, data in collected.items():
        if isinstance(data, dict):
            flag = data.get("pass", data.get("status", ""))
            print(f"{name}: {flag}" if flag != "" else name)
    return EXIT_OK


VERBS = {"speeds", "simulate", "verify"}


def _run_verb(verb: str, sc: Scenario, out: Path, args) -> int:
    out.mkdir(parents=True, exist_ok=True)
    if verb == "speeds":
        return cmd_speeds(sc, out, args.lambda_grid)
    if verb == "simulate":
        return cmd_simulate(sc, out)
    return cmd_verify(sc, out)


def cmd_sweep(base_cfg: dict, base_dir: str | None, out: Path, args) -> int:
    """Run one verb over a list of values for one dotted key, each in its own directory."""
    sw = base_cfg.get("sweep") or {}
    key, values, verb = sw.get("key"), sw.get("values", []), sw.get("verb", "speeds")
    if not key or verb not in VERBS:
        raise ValueError("sweep needs {'key': dotted path, 'values': [...], 'verb': speeds|simulate|verify}")
    workers = int(os.environ.get("NONLOCAL_KPP_THREADS", os.cpu_count() or 1))

    def one(i_val):
        i, val = i_val
        cfg = copy.deepcopy(base_cfg)
        set_dotted(cfg, f"{key}={json.dumps(val)}")
        sub = out / f"run_{i:03d}"
        try:
            return _run_verb(verb, build_scenario(cfg, base_dir), sub, args)
        except AssumptionViolation:
            return EXIT_ASSUMPTION
        except NonlocalKPPError:
            return EXIT_RUNTIME

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        codes = list(pool.map(one, enumerate(values)))
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "sweep.json", {"key": key, "verb": verb,
                                    "runs": [{"dir": f"run_{i:03d}", "value": v, "exit_code": c}
                                             for i, (v, c) in enumerate(zip(values, codes))]})
    return max(codes, default=EXIT_OK)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nonlocal-kpp", description=__doc__.splitlines()[0])
    ap.add_argument("verb", choices=["speeds", "simulate", "verify", "sweep", "report"])
    ap.add_argument("--config", help="scenario JSON file")
    ap.add_argument("--out", default="out", help="output directory (default: out)")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override a scenario field by dotted path; repeatable")
    ap.add_argument("--lambda-grid", type=int, default=256, help="rows in speed_curve.csv")
    ap.add_argument("--seed", type=int, default=None, help="seed for randomized checks")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        if args.verb == "report":
            return cmd_report(out)
        if args.verb == "sweep":
            cfg: dict = {}
            base_dir = None
            if args.config:
                with open(args.config) as fh:
                    cfg = json.load(fh)
                base_dir = str(Path(args.config).resolve().parent)
            cfg = _merge(DEFAULTS, cfg)
            for item in list(args.overrides) + ([f"seed={args.seed}"] if args.seed is not None else []):
                set_dotted(cfg, item)
            return cmd_sweep(cfg, base_dir, out, args)
        overrides = list(args.overrides) + ([f"seed={args.seed}"] if args.seed is not None else [])
        sc = load_scenario(args.config, overrides)
        return _run_verb(args.verb, sc, out, args)
    except AssumptionViolation as exc:
        print(f"assumption violated: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except DomainExhaustedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except StabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (NonlocalKPPError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
