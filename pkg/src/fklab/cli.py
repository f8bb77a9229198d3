"""Command-line front end: `fklab <subcommand> ...` or `python -m fklab ...`.

Every subcommand writes one JSON artifact (to --out, or stdout) that echoes the
run configuration; some also write a CSV via --csv.  Exit status is 0 on
success, 1 when a check fails, 2 on usage or input errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from typing import Optional, Sequence

from . import __version__
from .report import RunConfig, artifact, emit_report, read_text, write_text

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ helpers

def _exact(s: str):
    """Decimal or a/b literal as an exact Fraction."""
    from .bigint import parse_real
    try:
        return Fraction(parse_real(str(s)))
    except (ValueError, ZeroDivisionError) as e:
        raise argparse.ArgumentTypeError(f"not an exact number: {s!r}") from e


def _family(args):
    from .perturbation import family_with_bumps
    spec = {"family": args.family, "lambda": args.lam}
    try:
        return family_with_bumps(spec)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _load_json(path: str):
    try:
        return json.loads(read_text(path))
    except json.JSONDecodeError as e:
        raise UsageError(f"{path}: not valid JSON ({e})") from None


def _configs_from_file(path: str, p: Optional[int], q: Optional[int]) -> list:
    """PeriodicConfigs from a CSV orbit file, a config JSON, or a minimize artifact."""
    from .lattice import PeriodicConfig
    if path.lower().endswith(".csv"):
        if q is None:
            raise UsageError("a CSV orbit needs --q")
        x = PeriodicConfig.from_csv(read_text(path), q)
        if p is not None and x.p != p:
            raise UsageError(f"{path} holds {x.p} sites, --p says {p}")
        return [x]
    doc = _load_json(path)
    body = doc.get("result", doc) if isinstance(doc, dict) else doc
    if isinstance(body, dict) and "minimizers" in body:
        items = [m["config"] for m in body["minimizers"]]
    elif isinstance(body, dict) and "values" in body:
        items = [body]
    else:
        raise UsageError(f"{path}: expected a configuration or a minimize result")
    return [PeriodicConfig.from_dict(d) for d in items]


def _sequence(args):
    """Either a stored orbit (--input) or the rigid rotation generator."""
    if args.input:
        return _configs_from_file(args.input, None, args.orbit_q)[0]
    from .lattice import RigidRotation
    from .numbertheory import as_rotation
    return RigidRotation(float(as_rotation(args.omega)), args.xi0)


def _certificate(path: str):
    from .pipeline import DestructionCertificate
    doc = _load_json(path)
    body = doc.get("result", doc)
    if isinstance(body, dict) and "certificate" in body:
        body = body["certificate"]
    try:
        return DestructionCertificate.from_dict(body)
    except (KeyError, TypeError, ValueError) as e:
        raise UsageError(f"{path}: not a destruction certificate ({e})") from None


# -------------------------------------------------------------- subcommands

def cmd_verify(args):
    from .potentials import verify_conditions
    rep = verify_conditions(_family(args), D=args.D, seed=args.seed, n_samples=args.samples)
    return rep.to_dict(), rep.ok


def cmd_minimize(args):
    from .minimize import check_minimizer, minimizer_set
    F = _family(args)
    ms = minimizer_set(F, args.p, args.q, n_starts=args.starts, seed=args.seed, tol=args.tol,
                       max_iter=args.max_iter)
    body = ms.to_dict()
    body["checks"] = [check_minimizer(F, m, tol=max(args.tol, 1e-9)) for m in ms.members]
    if args.csv and ms.members:
        write_text(args.csv, ms.members[0].config.to_csv())
    return body, bool(ms.members)


def cmd_gaps(args):
    from .birkhoff import extended_orbit, find_gaps
    out = []
    for x in _configs_from_file(args.input, args.p, args.q):
        gaps = find_gaps(extended_orbit(x))
        out.append({"p": x.p, "q": x.q, "n_points": len(extended_orbit(x).points),
                    "max_gap": gaps[0].to_dict() if gaps else None,
                    "one_over_p": 1 / x.p, "gaps": [g.to_dict() for g in gaps]})
    return {"orbits": out}, True


def cmd_bump(args):
    from .perturbation import make_bump
    try:
        phi = make_bump(args.xi_minus, args.xi_plus, args.eps, args.k)
    except ValueError as e:
        raise UsageError(str(e)) from None
    norm = phi.cnorm(args.grid)
    if args.csv:
        write_text(args.csv, phi.to_csv(args.grid))
    lo, hi = phi.plateau
    body = {"bump": phi.to_dict(), "cnorm": norm, "plateau": [lo, hi],
            "plateau_value": phi((lo + hi) / 2), "cnorm<=eps": norm <= args.eps}
    return body, norm <= args.eps


def cmd_near_periodicity(args):
    from .birkhoff import near_periodicity_verify
    res = near_periodicity_verify(_sequence(args), args.omega, args.p, args.q, args.r, args.i1, args.i2)
    return res.to_dict(), res.ok


def cmd_confine(args):
    from .birkhoff import confine
    res = confine(_sequence(args), args.omega, args.p, args.q, args.i1, args.i2, args.extension)
    if args.csv:
        write_text(args.csv, res.psi_table.to_csv())
    return res.to_dict(), res.ok


def cmd_select_params(args):
    from .numbertheory import number_checks, select_parameters
    from .pipeline import parse_mode
    sel = select_parameters(args.omega, args.gamma, args.sigma, args.k, args.r, args.eps, args.C,
                            search_bound=args.search_bound, relax=parse_mode(args.mode))
    if not sel:
        return {"selected": False, "reason": sel.reason, "examined": sel.examined}, False
    checks = number_checks(sel)
    body = {"selected": True, "selection": sel.to_dict(), "checks": [c.to_dict() for c in checks]}
    return body, all(c.passed for c in checks)


def cmd_destroy_periodic(args):
    from .perturbation import destroy_periodic
    rep = destroy_periodic(_family(args), args.p, args.q, args.eps, args.k, tol=args.tol,
                           n_starts=args.starts, seed=args.seed)
    if args.csv:
        write_text(args.csv, rep.bump.to_csv(args.grid))
    return rep.to_dict(), rep.ok


def cmd_destroy(args):
    from .pipeline import check_certificate, destroy
    cert = destroy(_family(args), args.omega, args.gamma, args.sigma, args.k, args.r, args.eps, args.C,
                   mode=args.mode, search_bound=args.search_bound, n_starts=args.starts, seed=args.seed,
                   tol=args.tol, n_probes=args.probes, omegas=args.omegas, control=not args.no_control,
                   max_sites=args.max_sites)
    rep = check_certificate(cert)
    return {"certificate": cert.to_dict(), "verification": rep.to_dict()}, rep.ok


def cmd_check_cert(args):
    from .pipeline import check_certificate
    rep = check_certificate(_certificate(args.cert))
    return rep.to_dict(), rep.ok


def cmd_probe(args):
    from .perturbation import bump_from_dict, family_with_bumps, perturb
    from .pipeline import default_probe_omegas, probe_gap_minimizers
    cert = _certificate(args.cert)
    if cert.stage2_bump is None or cert.y_min is None:
        raise UsageError(f"{args.cert}: certificate has no stage data to probe (exact-constants run)")
    F = family_with_bumps(cert.family)
    F2 = perturb(perturb(F, bump_from_dict(cert.stage1_bump)), bump_from_dict(cert.stage2_bump))
    oms = args.omegas if args.omegas else default_probe_omegas(cert.params)
    rows = probe_gap_minimizers(F2, cert.params, cert.y_min, oms, cert.eta_minus, cert.eta_plus,
                                n_starts=args.starts, seed=args.seed, tol=args.tol, max_sites=args.max_sites)
    hits = sum(r["status"] == "hit" for r in rows)
    return {"eta_minus": str(cert.eta_minus), "eta_plus": str(cert.eta_plus), "probes": rows,
            "hits": hits}, hits == 0


# ------------------------------------------------------------------- parser

def _add_family(sp):
    sp.add_argument("--family", default="fk_nn", help="built-in family: fk_nn or fk_nnn")
    sp.add_argument("--lambda", dest="lam", type=float, default=1.0, help="coupling strength")


def _add_period(sp, required=True):
    sp.add_argument("--p", type=int, required=required, help="period")
    sp.add_argument("--q", type=int, required=required, help="winding")


def _add_run(sp, starts=10, tol=1e-10):
    sp.add_argument("--starts", type=int, default=starts, help="multistart count")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tol", type=float, default=tol, help="gradient tolerance")


def _add_window(sp):
    sp.add_argument("--omega", required=True, help="rotation number: a/b, decimal, golden, "
                    "liouville:B[:DEPTH] or quadratic:a,b,d,c")
    sp.add_argument("--xi0", type=float, default=0.0, help="phase of the rigid rotation")
    sp.add_argument("--input", help="orbit file (CSV or JSON) instead of the rigid rotation")
    sp.add_argument("--orbit-q", type=int, help="winding of a CSV --input orbit")
    _add_period(sp)
    sp.add_argument("--r", type=int, default=1, help="interaction range")
    sp.add_argument("--i1", type=int, required=True)
    sp.add_argument("--i2", type=int, required=True)


def _add_selection(sp):
    sp.add_argument("--omega", required=True)
    sp.add_argument("--gamma", type=_exact, required=True)
    sp.add_argument("--sigma", type=_exact, required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--r", type=int, default=1)
    sp.add_argument("--eps", type=_exact, required=True)
    sp.add_argument("--C", type=_exact, default=Fraction(3), help="family constant (default 3)")
    sp.add_argument("--search-bound", type=int, default=20)
    sp.add_argument("--mode", default="exact", help="exact, exact-constants or relaxed:FACTOR")


SUBCOMMANDS = {}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fklab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"fklab {__version__}")
    sub = ap.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="JSON file whose keys mirror the flags")
        sp.add_argument("--out", help="JSON artifact path (default: stdout)")
        sp.set_defaults(func=fn)
        SUBCOMMANDS[name] = sp
        return sp

    sp = add("verify", cmd_verify, "sample the standing conditions for a family")
    _add_family(sp)
    sp.add_argument("--D", type=float, default=3.0, help="half-width of the sampled window box")
    sp.add_argument("--samples", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)

    sp = add("minimize", cmd_minimize, "multistart (p, q) minimizers")
    _add_family(sp)
    _add_period(sp)
    _add_run(sp)
    sp.add_argument("--max-iter", type=int, default=500)
    sp.add_argument("--csv", help="write the first minimizer as CSV")

    sp = add("gaps", cmd_gaps, "gaps of the extended orbit of stored configurations")
    sp.add_argument("--input", required=True, help="minimize artifact, config JSON or CSV orbit")
    _add_period(sp, required=False)

    sp = add("bump", cmd_bump, "bump function on a gap, with sampled derivatives")
    sp.add_argument("--xi-minus", type=float, required=True)
    sp.add_argument("--xi-plus", type=float, required=True)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--grid", type=int, default=1000)
    sp.add_argument("--csv", help="write xi, phi, phi', ... samples")

    sp = add("near-periodicity", cmd_near_periodicity, "near-periodicity witness on a window")
    _add_window(sp)

    sp = add("confine", cmd_confine, "confine a window between a periodic Birkhoff config and its translate")
    _add_window(sp)
    sp.add_argument("--extension", default="step", choices=("step", "linear"))
    sp.add_argument("--csv", help="write the psi breakpoint table")

    sp = add("select-params", cmd_select_params, "exact parameter selection and number checks")
    _add_selection(sp)

    sp = add("destroy-periodic", cmd_destroy_periodic, "bump a (p, q) gap and test isolation")
    _add_family(sp)
    _add_period(sp)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--k", type=int, default=2)
    _add_run(sp, starts=50)
    sp.add_argument("--grid", type=int, default=1000)
    sp.add_argument("--csv", help="write bump samples")

    sp = add("destroy", cmd_destroy, "two-stage destruction with certificate")
    _add_family(sp)
    _add_selection(sp)
    _add_run(sp, starts=4)
    sp.add_argument("--probes", type=int, default=10, help="pinned penalty probes in stage 2")
    sp.add_argument("--omegas", nargs="+", type=_exact, help="probe rotation numbers")
    sp.add_argument("--no-control", action="store_true", help="skip the unperturbed control probe")
    sp.add_argument("--max-sites", type=int, default=400_000)

    sp = add("check-cert", cmd_check_cert, "re-verify a stored certificate")
    sp.add_argument("--cert", required=True)

    sp = add("probe", cmd_probe, "search for minimizers hitting the forbidden interval")
    sp.add_argument("--cert", required=True)
    sp.add_argument("--omegas", nargs="+", type=_exact)
    _add_run(sp, starts=4, tol=1e-8)
    sp.add_argument("--max-sites", type=int, default=400_000)
    return ap


def _apply_config(ap: argparse.ArgumentParser, argv: list) -> list:
    """Fold --config JSON into subparser defaults; explicit flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return argv
    cfg = _load_json(known.config)
    if not isinstance(cfg, dict):
        raise UsageError(f"{known.config}: expected a JSON object")
    cfg = dict(cfg)
    name = cfg.pop("subcommand", None)
    if not any(a in SUBCOMMANDS for a in argv):
        if name is None:
            raise UsageError(f"{known.config}: no subcommand given")
        argv = [name] + argv
    name = next(a for a in argv if a in SUBCOMMANDS)
    sp = SUBCOMMANDS[name]
    dests = {a.dest: a for a in sp._actions}
    defaults = {}
    for key, val in cfg.items():
        dest = key.lstrip("-").replace("-", "_")
        dest = "lam" if dest == "lambda" else dest
        if dest not in dests or dest in ("help", "config"):
            raise UsageError(f"{known.config}: unknown option {key!r} for {name}")
        act = dests[dest]
        if isinstance(val, list):
            defaults[dest] = [act.type(str(v)) if act.type else v for v in val]
        elif isinstance(val, bool) or val is None:
            defaults[dest] = val
        else:
            # string defaults go through the option's type conversion
            defaults[dest] = str(val)
        act.required = False
    sp.set_defaults(**defaults)
    return argv


def _echo(args) -> RunConfig:
    opts = {}
    for k, v in vars(args).items():
        if k in ("func", "subcommand", "config"):
            continue
        if isinstance(v, Fraction):
            v = str(v)
        elif isinstance(v, list):
            v = [str(x) if isinstance(x, Fraction) else x for x in v]
        opts["lambda" if k == "lam" else k] = v
    return RunConfig(args.subcommand, opts)


def run(argv: Optional[Sequence[str]] = None, stdout=None) -> int:
    """Parse argv, run one subcommand, write its artifact; returns the exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    out = stdout or sys.stdout
    ap = build_parser()
    try:
        argv = _apply_config(ap, argv)
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    except (UsageError, OSError) as e:
        print(f"fklab: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if not args.subcommand:
        ap.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        body, ok = args.func(args)
    except (UsageError, OSError) as e:
        print(f"fklab: error: {e}", file=sys.stderr)
        SUBCOMMANDS[args.subcommand].print_usage(sys.stderr)
        return EXIT_USAGE
    except (ValueError, TypeError) as e:
        print(f"fklab {args.subcommand}: invalid input: {e}", file=sys.stderr)
        return EXIT_USAGE
    except RuntimeError as e:
        print(f"fklab {args.subcommand}: {e}", file=sys.stderr)
        return EXIT_FAIL
    doc = artifact(_echo(args), body, ok=ok)
    try:
        text = emit_report(doc, args.out)
    except OSError as e:
        print(f"fklab: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if not args.out:
        out.write(text)
    return EXIT_OK if ok else EXIT_FAIL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
