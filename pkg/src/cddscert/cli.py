"""Command-line front end.

Subcommands: ``check``, ``min-gamma``, ``margin``, ``verify``, ``hierarchy``.
Exit codes: 0 certified / passed, 1 not certified / failed, 2 usage or
input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys as _sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (AnalysisReport, Certificate, build_sdp, check_pointwise, check_range,
                       estimate_margin, hierarchy_sweep, minimize_gamma)
from .builder import FunctionalDegrees
from .model import CddsSystem, DelayRange, ModelError, SupplyRate, l2_gain_supply, passivity_supply
from .oracle import dissipation_check, sigma_sweep, simulate
from .polymatrix import PolyMatrix
from .relax import RelaxationPlan
from .sdp import export_sdpa
from .sysfile import SystemFileError, bundled_path, load_system

__all__ = ["main", "build_parser", "certificate_to_dict", "certificate_from_dict", "run_report"]

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


# -- serialization ------------------------------------------------------------------


def _num(v):
    if v is None:
        return None
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_num(x) for x in v.tolist()] if v.ndim else _num(v.item())
    if isinstance(v, (list, tuple)):
        return [_num(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _num(x) for k, x in v.items()}
    return v


def _supply_to_dict(J: SupplyRate) -> dict:
    out = {"mode": J.mode, "m": J.m, "q": J.q}
    if J.mode == "l2gain":
        out["gamma"] = J.gamma
    else:
        out.update(J1=J.J1.tolist(), J2=J.J2.tolist(), J3=J.J3.tolist())
    return out


def _supply_from_dict(doc: dict) -> SupplyRate:
    if doc["mode"] == "l2gain":
        return l2_gain_supply(doc.get("gamma"), doc["m"], doc["q"])
    return SupplyRate(doc["m"], doc["q"], doc["mode"], np.array(doc["J1"], float).reshape(doc["m"], doc["m"]),
                      np.array(doc["J2"], float).reshape(doc["m"], doc["q"]),
                      np.array(doc["J3"], float).reshape(doc["q"], doc["q"]))


def certificate_to_dict(cert: Certificate) -> dict:
    lo, hi = cert.interval
    return _num({
        "d": cert.d,
        "degrees": [cert.deg.lam1, cert.deg.lam2, cert.deg.lam3],
        "interval": [lo, hi],
        "g_coefficients": [lo * hi, -(lo + hi), 1.0],
        "supply": _supply_to_dict(cert.supply),
        "P": cert.P.coeffs, "S": cert.S.coeffs, "U": cert.U.coeffs,
        "grid": {k: {"min_eig": v[0], "tol": v[1]} for k, v in cert.grid.items()},
        "strict_margin": cert.margin,
        "grams": {k: {"gram": q, "multiplier": qm} for k, (q, qm) in cert.grams.items()},
    })


def certificate_from_dict(doc: dict) -> Certificate:
    """Rebuild the parts of a certificate needed to evaluate the functional."""
    return Certificate(
        d=int(doc["d"]), deg=FunctionalDegrees(*doc["degrees"]), interval=tuple(doc["interval"]),
        supply=_supply_from_dict(doc["supply"]),
        P=PolyMatrix(np.array(doc["P"], float)), S=PolyMatrix(np.array(doc["S"], float)),
        U=PolyMatrix(np.array(doc["U"], float)),
        grams={}, grid={k: (float(v["min_eig"]), float(v["tol"])) for k, v in doc.get("grid", {}).items()},
        margin=float(doc.get("strict_margin", 0.0)))


def _split_timing(obj, timing: dict, prefix: str = ""):
    # pull wall-clock fields out so the rest is reproducible byte for byte
    if isinstance(obj, dict):
        out = {}
        for k, v in obj.items():
            if "seconds" in str(k):
                timing[prefix + str(k)] = v
            else:
                out[k] = _split_timing(v, timing, f"{prefix}{k}.")
        return out
    if isinstance(obj, list):
        return [_split_timing(v, timing, f"{prefix}{i}.") for i, v in enumerate(obj)]
    return obj


def run_report(command: str, config: dict, rep: AnalysisReport | None = None, extra: dict | None = None) -> dict:
    """Machine-readable report; wall-clock fields are collected under ``timing``."""
    doc = {"tool": "cddscert", "version": __version__, "command": command, "config": config}
    if rep is not None:
        summary = {k: v for k, v in rep.summary().items() if k not in ("bracket", "interval", "probes", "direction")}
        doc["result"] = summary
        for k in ("direction", "interval", "probes", "bracket"):
            if k in rep.details:
                doc["result"][k] = rep.details[k]
        doc["certificate"] = certificate_to_dict(rep.certificate) if rep.certified and rep.certificate else None
    if extra:
        doc.update(extra)
    timing: dict = {}
    doc = _split_timing(_num(doc), timing)
    doc["timing"] = timing
    return doc


def dumps_report(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# -- argument handling -------------------------------------------------------------


def _load(arg: str) -> CddsSystem:
    p = Path(arg)
    if not p.exists():
        try:
            p = bundled_path(arg)
        except FileNotFoundError:
            raise UsageError(f"{arg}: no such file or bundled system") from None
    return load_system(p)


def _supply(text: str | None, sys: CddsSystem) -> SupplyRate | None:
    if text is None or text == "none":
        return None
    if text == "passivity":
        if sys.m != sys.q or sys.m == 0:
            raise UsageError("passivity supply needs as many outputs as disturbances (m = q > 0)")
        return passivity_supply(sys.m)
    if text.startswith("l2gain:"):
        try:
            g = float(text.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad gain in --supply {text!r}") from None
        if sys.m == 0 or sys.q == 0:
            raise UsageError("L2-gain supply needs outputs and disturbances")
        return l2_gain_supply(g, sys.m, sys.q)
    raise UsageError(f"--supply must be l2gain:GAMMA, passivity or none, got {text!r}")


def _where(args):
    if getattr(args, "r0", None) is not None:
        if args.r1 is not None or args.r2 is not None:
            raise UsageError("give either --r0 or --r1/--r2")
        if not args.r0 > 0:
            raise UsageError("--r0 must be positive")
        return float(args.r0)
    if args.r1 is None or args.r2 is None:
        raise UsageError("a delay range --r1/--r2 (or --r0) is required")
    try:
        return DelayRange(args.r1, args.r2)
    except ModelError as exc:
        raise UsageError(str(exc)) from None


def _deg(args) -> FunctionalDegrees:
    return FunctionalDegrees(args.lambda1, args.lambda2, args.lambda3)


def _plan(args) -> RelaxationPlan:
    dl = [getattr(args, f"delta{i}") for i in range(1, 9)]
    return RelaxationPlan(pi=(dl[0], dl[1]), s=(dl[2], dl[3]), u=(dl[4], dl[5]), theta=(dl[6], dl[7]),
                          vertex=args.vertex)


def _config(args, sys: CddsSystem, **more) -> dict:
    cfg = {"system": args.system, "system_name": sys.name,
           "dimensions": {"n": sys.n, "nu": sys.nu, "m": sys.m, "q": sys.q}}
    for key in ("r1", "r2", "r0", "d", "lambda1", "lambda2", "lambda3", "vertex", "supply", "gamma",
                "direction", "tol", "limit", "dmin", "dmax", "r", "mode"):
        if hasattr(args, key):
            cfg[key] = getattr(args, key)
    if hasattr(args, "delta1"):
        cfg["deltas"] = [getattr(args, f"delta{i}") for i in range(1, 9)]
    if getattr(args, "r1", None) is not None and getattr(args, "r2", None) is not None:
        cfg["g_coefficients"] = [args.r1 * args.r2, -(args.r1 + args.r2), 1.0]
    cfg.update(more)
    return cfg


def _emit(args, doc: dict) -> None:
    text = dumps_report(doc)
    if getattr(args, "report", None):
        Path(args.report).write_text(text, encoding="utf-8")
    if getattr(args, "json", False):
        _sys.stdout.write(text)


def _exit_for(rep: AnalysisReport) -> int:
    if rep.certified:
        return EXIT_OK
    statuses = (rep.sdp.get("status"), rep.sdp.get("strict_status"))
    return EXIT_NUMERIC if "error" in statuses else EXIT_FAIL


def _print_report(rep: AnalysisReport, label: str = "") -> None:
    print(f"{label}verdict: {rep.verdict}")
    if rep.gamma is not None:
        print(f"gamma*: {rep.gamma:.6g}")
    if rep.gamma_lower is not None:
        print(f"gamma infimum: {rep.gamma_lower:.6g}")
    if rep.margin is not None:
        print(f"rho*: {rep.margin:.6g}")
    if rep.certificate is not None:
        for k, (v, tol) in rep.certificate.grid.items():
            print(f"  grid {k:<12s} min eig {v: .3e}  (tol {tol:.1e})")
    if rep.message:
        print(rep.message)
    print(f"time: {rep.seconds:.2f} s")


def _maybe_sdpa(args, sys, where, J) -> None:
    if getattr(args, "emit_sdpa", None):
        prob = build_sdp(sys, where, _deg(args), _plan(args), J, d=args.d)
        export_sdpa(prob, args.emit_sdpa)


# -- subcommands --------------------------------------------------------------------


def cmd_check(args) -> int:
    sys = _load(args.system)
    where = _where(args)
    J = _supply(args.supply, sys)
    _maybe_sdpa(args, sys, where, J)
    if isinstance(where, DelayRange):
        rep = check_range(sys, where, _deg(args), _plan(args), J, d=args.d)
    else:
        rep = check_pointwise(sys, where, _plan(args), J, d=args.d)
    _print_report(rep)
    _emit(args, run_report("check", _config(args, sys), rep))
    return _exit_for(rep)


def cmd_min_gamma(args) -> int:
    sys = _load(args.system)
    if sys.q == 0:
        raise UsageError("no disturbance channel (q = 0): nothing to minimize")
    if sys.m == 0:
        raise UsageError("no performance output (m = 0): nothing to minimize")
    where = _where(args)
    _maybe_sdpa(args, sys, where, l2_gain_supply(None, sys.m, sys.q))
    rep = minimize_gamma(sys, where, _deg(args), _plan(args), d=args.d)
    _print_report(rep)
    _emit(args, run_report("min-gamma", _config(args, sys), rep))
    return _exit_for(rep)


def cmd_margin(args) -> int:
    sys = _load(args.system)
    if args.gamma is not None and args.supply is not None:
        raise UsageError("give either --gamma or --supply")
    J = _supply(f"l2gain:{args.gamma}" if args.gamma is not None else args.supply, sys)
    if not args.r0 > 0 or not args.tol > 0:
        raise UsageError("--r0 and --tol must be positive")
    try:
        rep = estimate_margin(sys, args.r0, args.direction, J, _deg(args), _plan(args), tol=args.tol,
                              limit=args.limit, d=args.d)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _print_report(rep)
    if rep.certified:
        print(f"certified interval: [{rep.details['interval'][0]:.6g}, {rep.details['interval'][1]:.6g}]")
    _emit(args, run_report("margin", _config(args, sys), rep))
    return _exit_for(rep)


def cmd_hierarchy(args) -> int:
    sys = _load(args.system)
    where = _where(args)
    J = _supply(args.supply, sys)
    minimize = J is None and sys.m > 0 and sys.q > 0 and not args.stability
    if args.dmin > args.dmax:
        raise UsageError("--dmin must not exceed --dmax")
    rows = hierarchy_sweep(sys, where, range(args.dmin, args.dmax + 1), _deg(args), _plan(args), J,
                           minimize=minimize)
    print(f"{'d':>3} {'verdict':>10} {'gamma*':>10} {'padding':>8} {'seconds':>8}")
    out = []
    for row in rows:
        pad = row.get("padding")
        padtxt = "-" if pad is None else ("pass" if pad["passed"] else "FAIL")
        g = row["gamma"]
        print(f"{row['d']:>3} {row['verdict']:>10} {('-' if g is None else f'{g:.5f}'):>10} {padtxt:>8} "
              f"{row['seconds']:>8.1f}")
        out.append({"d": row["d"], "verdict": row["verdict"], "gamma": row["gamma"],
                    "gamma_lower": row["gamma_lower"], "seconds": row["seconds"], "padding": pad})
    gammas = [r["gamma"] for r in rows if r["gamma"] is not None]
    monotone = all(a >= b - 1e-9 * max(1.0, a) for a, b in zip(gammas, gammas[1:]))
    pads = all(r["padding"]["passed"] for r in rows if r.get("padding"))
    print(f"gamma nonincreasing: {monotone}; padding checks: {'pass' if pads else 'FAIL'}")
    _emit(args, run_report("hierarchy", _config(args, sys, minimize=minimize),
                           extra={"rows": out, "gamma_nonincreasing": monotone, "padding_passed": pads}))
    certified = any(r["verdict"] == "certified" for r in rows)
    return EXIT_OK if certified and pads else EXIT_FAIL


def _auto_steps(sys: CddsSystem, r: float) -> int:
    # keep h * |A1| inside the classical RK4 stability region with room to spare
    rad = float(np.max(np.abs(np.linalg.eigvals(sys.A1)), initial=0.0)) + float(np.linalg.norm(sys.A2, 2))
    return max(50, int(math.ceil(r * rad / 1.0)))


def cmd_verify(args) -> int:
    sys = _load(args.system)
    if not args.r > 0:
        raise UsageError("--r must be positive")
    extra: dict = {}
    if args.mode == "freqsweep":
        if sys.m == 0 or sys.q == 0:
            raise UsageError("frequency sweep needs outputs and disturbances")
        fr = sigma_sweep(sys, args.r, omega_max=args.omega_max, npoints=args.npoints)
        print(f"sup sigma_max = {fr.peak:.6g} at omega = {fr.omega_peak:.6g} rad/s")
        if args.csv:
            fr.to_csv(args.csv)
        extra = {"peak": fr.peak, "omega_peak": fr.omega_peak}
        code = EXIT_OK
    else:
        N = args.N or _auto_steps(sys, args.r)
        rng = np.random.default_rng(args.seed)
        x0 = rng.standard_normal(sys.n)
        if args.mode == "simulate":
            tr = simulate(sys, args.r, x0=x0, N=N, T=args.T)
            nrm = np.linalg.norm(tr.x, axis=1)
            first = float(np.max(nrm[: N + 1]))
            last = float(np.max(nrm[-(N + 1):]))
            ratio = last / first if first > 0 else 0.0
            verdict = "decaying" if ratio < 1e-3 else ("growing" if ratio > 1.0 else "bounded")
            print(f"{verdict}: max |x| over the last delay / first delay = {ratio:.3e}")
            if args.csv:
                tr.to_csv(args.csv)
            extra = {"trajectory": verdict, "ratio": ratio, "steps_per_delay": N}
            code = EXIT_OK if verdict == "decaying" else EXIT_FAIL
        else:
            if not args.certificate:
                raise UsageError("--mode dissipation needs --certificate FILE (a report from check or min-gamma)")
            try:
                doc = json.loads(Path(args.certificate).read_text(encoding="utf-8"))
                cert = certificate_from_dict(doc["certificate"])
            except (OSError, KeyError, TypeError, ValueError) as exc:
                raise UsageError(f"{args.certificate}: not a certified report ({exc})") from None
            lo, hi = cert.interval
            if not lo <= args.r <= hi:
                raise UsageError(f"--r {args.r} outside the certified interval [{lo}, {hi}]")
            J = cert.supply
            csys = sys if J.m + J.q else sys.without_io()
            ph = rng.uniform(0, 2 * np.pi, csys.q)
            w = (lambda t: np.sin(1.3 * t + ph)) if csys.q else None
            tr = simulate(csys, args.r, w=w, x0=x0, N=N, T=args.T)
            res = dissipation_check(csys, args.r, cert, J, tr)
            ok = res["relative"] <= 1e-4
            print(f"worst residual {res['worst_residual']:.3e} (energy scale {res['energy_scale']:.3e}, "
                  f"relative {res['relative']:.3e}): {'pass' if ok else 'FAIL'}")
            if args.csv:
                from .oracle import write_csv
                write_csv(args.csv, ["t", "v", "supply_integral"], [res["times"], res["v"], res["supply"]])
            extra = {"worst_residual": res["worst_residual"], "energy_scale": res["energy_scale"],
                     "relative": res["relative"], "passed": ok}
            code = EXIT_OK if ok else EXIT_FAIL
    _emit(args, run_report("verify", _config(args, sys), extra=extra))
    return code


# -- parser ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, rng: bool = True, degrees: bool = True) -> None:
    p.add_argument("--system", required=True, help="system file or bundled name (example1, example2, neutral3, neutral3_dist)")
    if rng:
        p.add_argument("--r1", type=float, help="lower end of the delay range")
        p.add_argument("--r2", type=float, help="upper end of the delay range")
    if degrees:
        for i in (1, 2, 3):
            p.add_argument(f"--lambda{i}", type=int, default=0, help=f"degree in r of the functional matrix {i}")
        p.add_argument("--d", type=int, default=None, help="Legendre degree (default: the system's kernel degree)")
        names = ["Pi", "Pi multiplier", "S", "S multiplier", "U", "U multiplier", "Theta", "Theta multiplier"]
        for i, nm in enumerate(names, 1):
            p.add_argument(f"--delta{i}", type=int, default=None, help=f"Gram half degree for {nm}")
        p.add_argument("--vertex", choices=["auto", "never"], default="auto",
                       help="use endpoint checks for constraints affine in r")
    p.add_argument("--report", help="write the JSON run report here")
    p.add_argument("--json", action="store_true", help="print the JSON run report")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cddscert", description="Delay-range stability and L2-gain certificates "
                                 "for coupled differential-difference systems.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="certify a delay range (or one delay with --r0)")
    _common(p)
    p.add_argument("--r0", type=float, help="single delay (constant matrices)")
    p.add_argument("--supply", default=None, help="l2gain:GAMMA | passivity | none (default none: stability only)")
    p.add_argument("--emit-sdpa", dest="emit_sdpa", help="write the assembled SDP in SDPA sparse format")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("min-gamma", help="smallest certifiable L2 gain")
    _common(p)
    p.add_argument("--r0", type=float, help="single delay (constant matrices)")
    p.add_argument("--emit-sdpa", dest="emit_sdpa", help="write the assembled SDP in SDPA sparse format")
    p.set_defaults(func=cmd_min_gamma)

    p = sub.add_parser("margin", help="bisect for the farthest certified delay from r0")
    _common(p, rng=False)
    p.add_argument("--r0", type=float, required=True)
    p.add_argument("--direction", choices=["down", "up"], required=True)
    p.add_argument("--gamma", type=float, help="fixed L2 gain")
    p.add_argument("--supply", default=None, help="l2gain:GAMMA | passivity | none")
    p.add_argument("--tol", type=float, default=1e-3, help="bisection tolerance in r")
    p.add_argument("--limit", type=float, default=None, help="far end of the search (default 0 down, 4 r0 up)")
    p.set_defaults(func=cmd_margin)

    p = sub.add_parser("verify", help="simulation, frequency sweep or dissipation check")
    _common(p, rng=False, degrees=False)
    p.add_argument("--r", type=float, required=True, help="delay")
    p.add_argument("--mode", choices=["simulate", "freqsweep", "dissipation"], required=True)
    p.add_argument("--certificate", help="JSON report holding a certificate (dissipation mode)")
    p.add_argument("--csv", help="write the trajectory / sweep as CSV")
    p.add_argument("--T", type=float, default=200.0, help="simulation horizon")
    p.add_argument("--N", type=int, default=None, help="steps per delay (default: chosen from |A1|, at least 50)")
    p.add_argument("--seed", type=int, default=0, help="seed for the random initial state")
    p.add_argument("--omega-max", dest="omega_max", type=float, default=1e3)
    p.add_argument("--npoints", type=int, default=2000)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("hierarchy", help="analysis per Legendre degree with padding checks")
    _common(p)
    p.add_argument("--r0", type=float, help="single delay (constant matrices)")
    p.add_argument("--dmin", type=int, default=1)
    p.add_argument("--dmax", type=int, required=True)
    p.add_argument("--supply", default=None, help="fixed supply; default minimizes the L2 gain when possible")
    p.add_argument("--stability", action="store_true", help="stability only, even with inputs and outputs")
    p.set_defaults(func=cmd_hierarchy)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, SystemFileError, ModelError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_USAGE
    except (np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=_sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    _sys.exit(main())
