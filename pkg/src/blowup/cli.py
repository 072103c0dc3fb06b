"""Command line: blowup {spectrum, evolve, dissipativity, resolvent, fit, verify}.

Parameters come from built-in defaults, then an optional JSON document
(--config), then flags; later sources win. Every run writes its outputs and
a manifest.json into --out. Exit codes: 0 success, 2 configuration error,
3 numerical failure, 4 acceptance failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
import traceback
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError, NumericalError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_ACCEPTANCE = 0, 2, 3, 4
WORKERS_ENV = "BLOWUP_WORKERS"

DEFAULTS = {
    "spectrum": {"p": 7.0, "ell": "0..3", "N": 24, "Lmax": None, "a3": 0.0, "m": 0, "tol": 1e-7},
    "evolve": {
        "p": 7.0, "mode": "nonlinear", "a3": 0.0, "N": 24, "Lmax": 8, "dtau": None, "tau_max": 1.0,
        "dealias": False, "cadence": 10, "initial": "static", "delta": 1e-3, "weights": [1.0, 1.0, 1.0],
        "T": 1.0, "shoot": False, "seed": 0, "snapshots": 0, "fit": False,
    },
    "dissipativity": {"p": [4.0, 5.0, 7.0, 9.0], "samples": 100, "seed": 1, "N": 12, "Lmax": 4, "ms": [-2, -1, 0, 1, 2]},
    "resolvent": {"ell": "0..3", "points": 9},
    "fit": {
        "p": 7.0, "delta": 1e-3, "weights": [1.0, 1.0, 1.0], "N": 24, "Lmax": 6, "tau_max": 15.0,
        "window": [2.0, 15.0], "input": None,
    },
    "verify": {"only": None},
}


def version():
    from . import __version__

    return __version__


def workers():
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be at least 1")
    return n


def pool_map(fn, items):
    """Order-preserving map; runs in worker processes when BLOWUP_WORKERS > 1."""
    n = workers()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(n, len(items))) as ex:
        return list(ex.map(fn, items))


def parse_range(spec):
    """'0..3' -> [0, 1, 2, 3]; '0,2' -> [0, 2]; ints and lists pass through."""
    if spec is None:
        return None
    if isinstance(spec, int):
        return [spec]
    if isinstance(spec, (list, tuple)):
        return [int(x) for x in spec]
    s = str(spec).strip()
    try:
        if ".." in s:
            lo, hi = s.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(x) for x in s.split(",") if x]
    except ValueError:
        raise ConfigError(f"cannot read {spec!r} as an index range") from None


def parse_floats(spec):
    if spec is None or isinstance(spec, (list, tuple)):
        return spec
    if isinstance(spec, (int, float)):
        return [float(spec)]
    try:
        return [float(x) for x in str(spec).split(",") if x]
    except ValueError:
        raise ConfigError(f"cannot read {spec!r} as numbers") from None


# ---------------------------------------------------------------------------
# validation


def _require(cond, field, msg):
    if not cond:
        raise ConfigError(f"{field}: {msg}")


def _check_p(value, field="p"):
    for p in value if isinstance(value, list) else [value]:
        _require(np.isfinite(p) and p > 3, field, f"must exceed 3, got {p}")


def validate(workflow, cfg):
    from .family import RAPIDITY_CAP
    from .spectral import AXISYM_CAP

    if workflow in ("spectrum", "evolve", "fit", "dissipativity"):
        _check_p(cfg["p"])
    for key in ("N", "Lmax"):
        if cfg.get(key) is not None:
            _require(int(cfg[key]) >= 2 if key == "N" else int(cfg[key]) >= 0, key, "out of range")
    if workflow == "spectrum":
        _require(abs(cfg["a3"]) <= AXISYM_CAP, "a3", f"|a3| must not exceed {AXISYM_CAP}")
        ells = parse_range(cfg["ell"])
        _require(ells is None or min(ells) >= 0, "ell", "must be nonnegative")
    if workflow == "evolve":
        _require(abs(cfg["a3"]) <= RAPIDITY_CAP, "a3", f"|a3| must not exceed {RAPIDITY_CAP}")
        _require(cfg["initial"] in ("static", "perturbed", "random", "zero"), "initial",
                 "one of static, perturbed, random, zero")
        _require(cfg["T"] > 0, "T", "must be positive")
        _require(cfg["snapshots"] >= 0, "snapshots", "must be nonnegative")
        _require(len(cfg["weights"]) == 3, "weights", "three mix weights (growing, boost, decaying)")
    if workflow == "dissipativity":
        _require(cfg["samples"] >= 1, "samples", "must be positive")
    if workflow == "resolvent":
        ells = parse_range(cfg["ell"])
        _require(min(ells) >= 0, "ell", "must be nonnegative")
        _require(cfg["points"] >= 1, "points", "must be positive")
    if workflow == "fit":
        _require(cfg["delta"] > 0, "delta", "must be positive")
        w = cfg["window"]
        _require(len(w) == 2 and w[0] < w[1], "window", "two increasing times")


# ---------------------------------------------------------------------------
# workflows; each returns (list of output files, summary dict)


def _spectrum_one(args):
    from .spectral import spectrum_report

    p, N, ell, a3, Lmax, m, tol = args
    rep = spectrum_report(p, N, ell=ell, a3=a3, Lmax=Lmax, m=m, tol=tol)
    return [(lam.real, lam.imag) for lam in rep.stable], rep.gap_margin


def run_spectrum(cfg, out: Path):
    from .storage import write_csv

    p, N, a3, m = float(cfg["p"]), int(cfg["N"]), float(cfg["a3"]), int(cfg["m"])
    ells = parse_range(cfg["ell"])
    if ells is None:
        Lmax = int(cfg["Lmax"] if cfg["Lmax"] is not None else 8)
        jobs = [(p, N, None, a3, Lmax, m, cfg["tol"])]
        labels = ["all"]
    else:
        jobs = [(p, N, ell, 0.0, None, m, cfg["tol"]) for ell in ells]
        labels = ells
    results = pool_map(_spectrum_one, jobs)
    rows = []
    for label, (eigs, _) in zip(labels, results):
        rows += [(p, label, m, a3 if label == "all" else 0.0, re, im) for re, im in eigs]
    write_csv(out / "spectrum.csv", ("p", "ell", "m", "a3", "re", "im"), rows)
    margins = [g for _, g in results]
    print(f"{len(rows)} resolution-verified eigenvalues; gap margin {max(margins):.6f}")
    return ["spectrum.csv"], {"eigenvalues": len(rows), "gap_margin": max(margins)}


def _initial(cfg, basis):
    from .family import profile_fields
    from .harmonics import ModeState, random_mode_state
    from .workflows import initial_state, perturbation_mix

    p, a = cfg["p"], (0.0, 0.0, cfg["a3"])
    kind = cfg["initial"]
    if kind == "zero":
        return ModeState.zeros(basis), cfg["T"]
    if kind == "random":
        return random_mode_state(basis, np.random.default_rng(cfg["seed"])) * cfg["delta"], cfg["T"]
    if kind == "static":
        return ModeState(basis, *(basis.project_axisymmetric(f) for f in profile_fields(p, a))), cfg["T"]
    v = perturbation_mix(p, cfg["delta"], cfg["weights"], basis)
    T = cfg["T"]
    if cfg["shoot"]:
        from .evolve import EvolutionConfig
        from .workflows import shoot_blowup_time

        T, _ = shoot_blowup_time(v, EvolutionConfig(p, "nonlinear", N=basis.N, Lmax=basis.Lmax), T0=T)
    return initial_state(T, v, p, basis), T


def run_evolve(cfg, out: Path):
    from . import energy
    from .evolve import EvolutionConfig, integrate
    from .family import profile_fields
    from .harmonics import ModeState
    from .modulation import estimate_blowup_time, fit_rapidity
    from .storage import TRAJECTORY_COLUMNS, write_csv, write_snapshot

    p, a = cfg["p"], (0.0, 0.0, cfg["a3"])
    ec = EvolutionConfig(p, cfg["mode"], a, N=cfg["N"], Lmax=cfg["Lmax"], dtau=cfg["dtau"],
                         tau_max=cfg["tau_max"], dealias=cfg["dealias"], cadence=cfg["cadence"])
    basis = ec.basis()
    state, T = _initial(cfg, basis)
    reference = None
    if cfg["mode"] == "nonlinear" and cfg["initial"] in ("static", "perturbed"):
        reference = ModeState(basis, *(basis.project_axisymmetric(f) for f in profile_fields(p, a)))
    traj = integrate(state, ec, reference=reference)
    rows = []
    guess = None
    for k, tau in enumerate(traj.times):
        fitted = a
        if cfg["fit"] and cfg["mode"] == "nonlinear":
            guess = fit_rapidity(traj.states[k], p, guess=guess, neighbourhood=None).a
            fitted = tuple(guess)
        rows.append((tau, traj.norm_total[k], traj.norm_sobolev[k], *fitted, *traj.amplitudes[k]))
    amp_cols = tuple(f"amp_l{l}" for l in basis.ells)
    write_csv(out / "trajectory.csv", TRAJECTORY_COLUMNS + amp_cols, rows)
    files = ["trajectory.csv"]
    every = int(cfg["snapshots"])
    last = len(traj.times) - 1
    picks = sorted(set(range(0, last, every)) | {last}) if every else [last]
    for k in picks:
        stem = f"snapshot_{k:05d}"
        write_snapshot(out, stem, traj.states[k], traj.times[k], p, a, T, text=cfg.get("text", False))
        files += [f"{stem}.json", f"{stem}.{'csv' if cfg.get('text') else 'bin'}"]
    summary = {"reason": traj.reason, "records": len(traj.times), "T": T,
               "final_norm": traj.norm_total[-1], "dtau": ec.dtau}
    if reference is not None:
        summary["final_distance"] = energy.energy_norm(traj.final - reference)
        if len(traj.times) >= 3:
            # blowup time as an observer of u(t, 0) alone would estimate it
            t, u = _u_at_origin(traj.states, traj.times, T, p)
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                summary["T_estimate"] = estimate_blowup_time(t, u, p)
            summary["T_estimate_monotone"] = not caught
    print(f"evolved to tau = {traj.times[-1]:.4g} ({traj.reason}); final norm {traj.norm_total[-1]:.6e}")
    if traj.reason == "overflow":
        raise NumericalError("evolution overflowed")
    return files, summary


def _dissipativity_one(args):
    from . import energy
    from .harmonics import ParityBasis, random_mode_state

    p, samples, seed, N, Lmax, ms = args
    rng = np.random.default_rng(seed)
    bases = [ParityBasis(N, Lmax, m) for m in ms]
    rows = []
    for k in range(samples):
        rep = energy.dissipativity_report([random_mode_state(b, rng) for b in bases], p)
        rows.append((p, k, *rep.relative(), *rep.norms, rep.violations()))
    return rows


def run_dissipativity(cfg, out: Path):
    from .storage import write_csv

    ps = parse_floats(cfg["p"]) if not isinstance(cfg["p"], list) else cfg["p"]
    ms = [int(m) for m in cfg["ms"]]
    _require(all(abs(m) <= cfg["Lmax"] for m in ms), "ms", "sectors must satisfy |m| <= Lmax")
    jobs = [(float(p), int(cfg["samples"]), int(cfg["seed"]) + i, int(cfg["N"]), int(cfg["Lmax"]), ms)
            for i, p in enumerate(ps)]
    rows = [r for chunk in pool_map(_dissipativity_one, jobs) for r in chunk]
    write_csv(out / "margins.csv", ("p", "sample", "margin1", "margin2", "margin3", "norm1", "norm2", "norm3",
                                    "violations"), rows)
    v = sum(r[-1] for r in rows)
    print(f"{v} violations")
    return ["margins.csv"], {"violations": v, "samples": len(rows)}


def run_resolvent(cfg, out: Path):
    from .acceptance import _manufactured
    from .hypergeom import numerical_wronskian, resolvent_mode_solve, resolvent_operator, resolvent_wronskian
    from .storage import write_csv

    ells = parse_range(cfg["ell"])
    rho = np.linspace(0.05, 0.95, int(cfg["points"]))
    names = ("polynomial", "exponential", "rational")
    sol_rows, w_rows = [], []
    worst_u = worst_w = 0.0
    for ell in ells:
        for name, parts in zip(names, _manufactured(ell)):
            g = lambda r, parts=parts, ell=ell: resolvent_operator(ell, *parts(r), r)  # noqa: E731
            u = resolvent_mode_solve(ell, g, rho)
            exact = parts(rho)[0]
            worst_u = max(worst_u, float(np.abs(u - exact).max()))
            sol_rows += [(ell, name, r, e, s, abs(s - e)) for r, e, s in zip(rho, exact, u)]
        wn, we = numerical_wronskian(ell, rho), resolvent_wronskian(ell, rho)
        worst_w = max(worst_w, float(np.max(np.abs(wn / we - 1))))
        w_rows += [(ell, r, a, b) for r, a, b in zip(rho, wn, we)]
    write_csv(out / "resolvent.csv", ("ell", "profile", "rho", "exact", "solved", "error"), sol_rows)
    write_csv(out / "wronskian.csv", ("ell", "rho", "numerical", "closed_form"), w_rows)
    print(f"manufactured solutions: max error {worst_u:.3e}; Wronskian: max relative error {worst_w:.3e}")
    return ["resolvent.csv", "wronskian.csv"], {"solution_error": worst_u, "wronskian_error": worst_w}


def _u_at_origin(states, times, T, p):
    # u(t, 0) = (T - t)^{-2/(p-1)} psi1(tau, 0) with T - t = T e^{-tau}
    origin = np.zeros((1, 3))
    times = np.asarray(times, dtype=float)
    R = T * np.exp(-times)
    psi1 = np.array([s.values(origin)[0][0] for s in states])
    return T - R, psi1 * R ** (-2.0 / (p - 1))


def run_fit(cfg, out: Path):
    from .modulation import estimate_blowup_time, fit_rapidity, rate_fit
    from . import energy
    from .storage import read_snapshot, write_csv
    from .workflows import stability_run

    p = float(cfg["p"])
    if cfg["input"]:
        heads = sorted(Path(cfg["input"]).glob("snapshot_*.json"))
        _require(len(heads) > 0, "input", "no snapshot headers found")
        snaps = [read_snapshot(h) for h in heads]
        times = [h["tau"] for _, h in snaps]
        T = snaps[0][1]["T"]
        rows, norms, guess = [], [], None
        for (st, _), tau in zip(snaps, times):
            fit = fit_rapidity(st, p, guess=guess, neighbourhood=None)
            guess = fit.a
            norms.append(energy.energy_norm(fit.phi))
            rows.append((tau, norms[-1], *fit.a))
        write_csv(out / "rates.csv", ("tau", "norm_phi", "a1", "a2", "a3"), rows)
        summary = {"T": T, "a_inf": rows[-1][-1]}
        if len(rows) >= 10:
            r = rate_fit(times, norms, window=cfg["window"])
            summary.update(omega=r.omega, band=r.band, truncated=r.truncated)
        print(json.dumps(summary, default=float))
        return ["rates.csv"], summary
    res = stability_run(p, float(cfg["delta"]), tuple(cfg["weights"]), N=int(cfg["N"]), Lmax=int(cfg["Lmax"]),
                        tau_max=float(cfg["tau_max"]), window=tuple(cfg["window"]))
    rows = [(t, n, 0.0, 0.0, a3, s, sn, d1, d2, d3) for t, n, a3, s, sn, d1, d2, d3 in zip(
        res.times, res.phi_norm, res.a3, res.shift, res.phi_shift_norm,
        res.diagnostics["h2h1"], res.diagnostics["h1l2"], res.diagnostics["l2"])]
    write_csv(out / "rates.csv", ("tau", "norm_phi", "a1", "a2", "a3", "shift", "norm_phi_shifted",
                                  "h2h1", "h1l2", "l2"), rows)
    summary = {
        "T": res.T, "a_inf": res.a_inf, "reason": res.reason,
        "omega": res.omega.omega, "band": list(res.omega.band), "window": list(res.omega.window),
        "truncated": res.omega.truncated,
        "exponents": {k: {"omega": e.omega, "band": list(e.band), "truncated": e.truncated}
                      for k, e in res.exponents.items()},
        "shooting": {"tau": res.shooting.times, "T": res.shooting.T, "shift": res.shooting.shift},
    }
    print(f"T = {res.T:.15f}, omega = {res.omega.omega:.4f} "
          f"[{res.omega.band[0]:.4f}, {res.omega.band[1]:.4f}], a_inf = {res.a_inf:.3e}")
    return ["rates.csv"], summary


def run_verify(cfg, out: Path):
    from .acceptance import run_all
    from .storage import write_csv

    only = parse_range(cfg["only"]) if cfg["only"] else None
    results = run_all(only=only, echo=print)
    write_csv(out / "acceptance.csv", ("criterion", "name", "passed", "value", "threshold", "seconds", "detail"),
              [(r.number, r.name, int(r.passed), r.value, r.threshold, r.seconds, r.detail) for r in results])
    failed = [r.number for r in results if not r.passed]
    return ["acceptance.csv"], {"failed": failed, "ran": [r.number for r in results]}


WORKFLOWS = {
    "spectrum": run_spectrum,
    "evolve": run_evolve,
    "dissipativity": run_dissipativity,
    "resolvent": run_resolvent,
    "fit": run_fit,
    "verify": run_verify,
}


# ---------------------------------------------------------------------------
# argument parsing


def build_parser():
    ap = argparse.ArgumentParser(prog="blowup", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="workflow", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON document with parameters; flags override it")
        sp.add_argument("--out", help="output directory (default runs/<workflow>)")
        sp.add_argument("--text", action="store_true", default=None, help="CSV snapshots instead of binary")

    sp = sub.add_parser("spectrum", help="resolution-verified spectrum of the linearized operator")
    common(sp)
    sp.add_argument("--p", type=float)
    sp.add_argument("--ell", help="mode index range, e.g. 0..3 or 0,2; omit with --Lmax for the boosted operator")
    sp.add_argument("--N", type=int)
    sp.add_argument("--Lmax", type=int)
    sp.add_argument("--a3", type=float)
    sp.add_argument("--m", type=int)
    sp.add_argument("--tol", type=float)

    sp = sub.add_parser("evolve", help="time integration in similarity variables")
    common(sp)
    for name, typ in (("p", float), ("a3", float), ("N", int), ("Lmax", int), ("dtau", float),
                      ("tau-max", float), ("cadence", int), ("delta", float), ("T", float), ("seed", int),
                      ("snapshots", int)):
        sp.add_argument(f"--{name}", type=typ)
    sp.add_argument("--mode", choices=("linear_free", "linear_a", "nonlinear"))
    sp.add_argument("--initial", choices=("static", "perturbed", "random", "zero"))
    sp.add_argument("--weights", type=parse_floats, help="mix weights growing,boost,decaying")
    sp.add_argument("--dealias", action="store_true", default=None)
    sp.add_argument("--shoot", action="store_true", default=None, help="choose T to remove the growing mode")
    sp.add_argument("--fit", action="store_true", default=None, help="fit the rapidity at every record")

    sp = sub.add_parser("dissipativity", help="margins of the energy estimates on random states")
    common(sp)
    sp.add_argument("--p", type=parse_floats)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--N", type=int)
    sp.add_argument("--Lmax", type=int)

    sp = sub.add_parser("resolvent", help="mode-ODE solver on manufactured solutions, and Wronskians")
    common(sp)
    sp.add_argument("--ell")
    sp.add_argument("--points", type=int)

    sp = sub.add_parser("fit", help="stability run with modulation fits, or fits of saved snapshots")
    common(sp)
    for name, typ in (("p", float), ("delta", float), ("N", int), ("Lmax", int), ("tau-max", float)):
        sp.add_argument(f"--{name}", type=typ)
    sp.add_argument("--weights", type=parse_floats)
    sp.add_argument("--window", type=parse_floats)
    sp.add_argument("--input", help="directory of snapshots written by evolve")

    sp = sub.add_parser("verify", help="run the acceptance suite")
    common(sp)
    sp.add_argument("--only", help="criterion numbers, e.g. 1..9 or 2,5")
    return ap


def resolve_config(args):
    wf = args.workflow
    cfg = dict(DEFAULTS[wf])
    cfg["text"] = False
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config: top level must be an object")
        unknown = set(doc) - set(cfg) - {"out", "workflow"}
        if unknown:
            raise ConfigError(f"config: unknown fields {sorted(unknown)}")
        cfg.update({k: v for k, v in doc.items() if k != "workflow"})
    flags = {k.replace("-", "_"): v for k, v in vars(args).items()}
    for k, v in flags.items():
        if k in ("workflow", "config") or v is None:
            continue
        cfg[k] = v
    if wf == "dissipativity":
        cfg["p"] = parse_floats(cfg["p"])
    for key in ("weights", "window"):
        if key in cfg:
            cfg[key] = parse_floats(cfg[key])
    if wf == "spectrum" and args.ell is None and "ell" not in doc and cfg["Lmax"] is not None:
        # --Lmax without --ell selects the coupled operator at rapidity a3
        cfg["ell"] = None
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    wf = args.workflow
    try:
        cfg = resolve_config(args)
        validate(wf, cfg)
    except (ConfigError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.pop("out", None) or f"runs/{wf}")
    from .storage import config_hash, write_json

    manifest_cfg = {"workflow": wf, **cfg}
    t0 = time.perf_counter()
    try:
        files, summary = WORKFLOWS[wf](cfg, out)
    except (ConfigError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        write_json(out / "failure.json", {"workflow": wf, "config": manifest_cfg, "error": repr(exc),
                                          "traceback": traceback.format_exc()})
        print(f"numerical failure: {exc} (details in {out / 'failure.json'})", file=sys.stderr)
        return EXIT_NUMERICAL
    wall = time.perf_counter() - t0
    write_json(out / "manifest.json", {
        "workflow": wf,
        "config": manifest_cfg,
        "config_hash": config_hash(manifest_cfg),
        "version": version(),
        "wall_time_seconds": wall,
        "outputs": files,
        "summary": summary,
    })
    if wf == "verify" and summary["failed"]:
        print(f"acceptance failures: {summary['failed']}", file=sys.stderr)
        return EXIT_ACCEPTANCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
