"""Command-line front end: ``toricnet {info,check,eq,embed,simulate,probe}``.

Every command prints one JSON report to stdout.  Exit codes are 0 on
success (or membership), 2 when the rates are definitely outside the toric
locus, and 1 on any other error.
"""

from __future__ import annotations

import argparse
import functools
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .dynamics import IntegratorOptions, convergence_report, integrate, write_csv
from .equilibrium import (
    BirchOptions,
    equilibrium_from_rates,
    smooth_dependence_probe,
    solve_log_equilibrium,
)
from .errors import NotInToricLocus, ToricNetError
from .fluxcone import (
    BALANCE_TOL,
    IMMERSION_RANK_TOL,
    complex_balance_residual,
    flux_space,
    immersion_rank_check,
    jacobian_max_rel_error,
    phi_embedding,
    sample_flux,
)
from .kirchhoff import DEFAULT_MEMBERSHIP_TOL, toric_membership
from .lincore import DEFAULT_RANK_TOL
from .netmodel import EGraph, is_weakly_reversible, load_network, stoich_decomp

EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE = 0, 1, 2


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _vec(a) -> list[float]:
    return [float(v) for v in np.asarray(a, dtype=float).reshape(-1)]


def _params(args) -> dict[str, float]:
    out: dict[str, float] = {}
    for item in args.set or ():
        name, sep, value = item.partition("=")
        if not sep:
            raise ToricNetError(f"--set expects name=value, got {item!r}")
        out[name.strip().lstrip("$")] = float(value)
    return out


def resolve_rates(g: EGraph, args) -> np.ndarray:
    """Rates from ``--rates`` (positional list or name=value pairs), ``--set`` and the file."""
    params = _params(args)
    text = getattr(args, "rates", None)
    if text:
        if "=" in text:
            for item in text.split(","):
                name, _, value = item.partition("=")
                params[name.strip().lstrip("$")] = float(value)
        else:
            k = np.array(_floats(text))
            if k.size != g.n_edges:
                raise ToricNetError(f"--rates needs {g.n_edges} values in edge order, got {k.size}")
            return k
    return g.resolve_rates(params)


def _state(text: str, g: EGraph, flag: str) -> np.ndarray:
    x = np.array(_floats(text))
    if x.size != g.n:
        raise ToricNetError(f"{flag} needs {g.n} values (species {' '.join(g.species)}), got {x.size}")
    return x


def _default_seed() -> int:
    return int(os.environ.get("TORICNET_SEED", "0"))


def cmd_info(args) -> tuple[dict, int]:
    g = load_network(args.network)
    sd = stoich_decomp(g, args.rank_tol)
    fs = flux_space(g, args.rank_tol)
    wr = is_weakly_reversible(g)
    results = {
        "n": g.n,
        "m": g.m,
        "n_edges": g.n_edges,
        "n_components": len(g.components),
        "weakly_reversible": wr,
        "s": sd.s,
        "flux_dim": fs.dim,
        "deficiency": g.m - len(g.components) - sd.s,
        "species": list(g.species),
        "vertices": [{"label": v.label, "exponents": list(v.exponents)} for v in g.vertices],
        "edges": [
            {
                "index": e.index,
                "src": e.source,
                "dst": e.target,
                "reaction": f"{g.vertices[e.source].label} -> {g.vertices[e.target].label}",
            }
            for e in g.edges
        ],
        "components": [list(c) for c in g.components],
        "basis_Sperp": [_vec(v) for v in sd.basis_Sperp],
    }
    return _report("info", args, results, {"rank_tol": args.rank_tol}), EXIT_OK


def cmd_check(args) -> tuple[dict, int]:
    g = load_network(args.network)
    k = resolve_rates(g, args)
    res = toric_membership(g, k, args.tol)
    results = {
        "member": res.is_member,
        "residual": res.residual,
        "log_solution": _vec(res.log_solution),
        "rates": _vec(k),
    }
    code = EXIT_OK if res.is_member else EXIT_NEGATIVE
    return _report("check", args, results, {"tol": res.tolerance_used}), code


def cmd_eq(args) -> tuple[dict, int]:
    g = load_network(args.network)
    k = resolve_rates(g, args)
    x0 = _state(args.x0, g, "--x0")
    sd = stoich_decomp(g, args.rank_tol)
    opts = BirchOptions(grad_tol=args.grad_tol, max_iter=args.max_iter)
    member = toric_membership(g, k, args.tol)
    log_eq = solve_log_equilibrium(g, k, sd, args.tol)
    res = equilibrium_from_rates(g, k, x0, sd, args.tol, opts)
    cb, outflow = complex_balance_residual(g, k, res.x_star)
    results = {
        "X_star": _vec(log_eq.X_star),
        "x_star": _vec(res.x_star),
        "method": log_eq.method,
        "rows_used": list(log_eq.system_rows_used),
        "w": _vec(res.w),
        "complex_balance_residual": float(cb.max()),
        "complex_balance_relative": float(np.max(cb / outflow)),
        "conservation_residual": float(np.max(np.abs(sd.basis_Sperp @ (res.x_star - x0)), initial=0.0)),
    }
    diagnostics = {
        "tol": args.tol,
        "membership_residual": member.residual,
        "rank_tol": args.rank_tol,
        "grad_tol": args.grad_tol,
        "birch_iterations": res.iterations,
        "final_grad_norm": res.final_grad_norm,
    }
    return _report("eq", args, results, diagnostics), EXIT_OK


def _random_rank_point(g, sd, fs, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.2, 5.0, g.n)
    beta = sample_flux(g, fs, seed=int(rng.integers(2**31)))
    return immersion_rank_check(x, beta, g, sd, fs).passed


def cmd_embed(args) -> tuple[dict, int]:
    g = load_network(args.network)
    x = _state(args.x, g, "--x")
    sd = stoich_decomp(g, args.rank_tol)
    fs = flux_space(g, args.rank_tol)
    if args.beta:
        beta = np.array(_floats(args.beta))
        seed = None
    else:
        seed = _default_seed() if args.sample_seed is None else args.sample_seed
        beta = sample_flux(g, fs, seed)
    k = phi_embedding(x, beta, g, args.balance_tol)
    member = toric_membership(g, k, args.tol)
    rank = immersion_rank_check(x, beta, g, sd, fs)
    results = {
        "x": _vec(x),
        "beta": _vec(beta),
        "k": _vec(k),
        "member": member.is_member,
        "membership_residual": member.residual,
        "jacobian_fd_max_rel_error": jacobian_max_rel_error(x, beta, g),
        "rank": rank.rank,
        "expected_rank": rank.expected,
        "rank_pass": rank.passed,
    }
    if args.rank_samples:
        base = _default_seed() if seed is None else seed
        seeds = [base + i for i in range(args.rank_samples)]
        with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
            passed = list(pool.map(lambda s: _random_rank_point(g, sd, fs, s), seeds))
        results["rank_samples"] = len(passed)
        results["rank_samples_passed"] = int(sum(passed))
    diagnostics = {
        "tol": args.tol,
        "balance_tol": args.balance_tol,
        "jacobian_tol": 1e-6,
        "immersion_rank_tol": IMMERSION_RANK_TOL,
        "sample_seed": seed,
    }
    code = EXIT_OK if member.is_member and rank.passed else EXIT_ERROR
    return _report("embed", args, results, diagnostics), code


def cmd_simulate(args) -> tuple[dict, int]:
    g = load_network(args.network)
    k = resolve_rates(g, args)
    x0 = _state(args.x0, g, "--x0")
    sd = stoich_decomp(g, args.rank_tol)
    opts = IntegratorOptions(rtol=args.rtol, atol=args.atol)
    traj = integrate(g, k, x0, args.t_end, opts, sd)
    if args.out:
        write_csv(traj, args.out)
    results = {
        "accepted_steps": len(traj.times) - 1,
        "rejected_steps": traj.rejected,
        "final_state": _vec(traj.final),
        "conserved_drift": _vec(traj.conserved_drift),
        "csv": args.out,
    }
    wr = is_weakly_reversible(g)
    member = toric_membership(g, k, args.tol) if wr else None
    if member is not None and member.is_member:
        x_star = equilibrium_from_rates(g, k, x0, sd, args.tol).x_star
        rep = convergence_report(traj, x_star, rel_slack=args.rtol)
        results.update(
            x_star=_vec(x_star), final_distance=rep.final_distance, monotone_tail=rep.monotone_tail
        )
    else:
        results["note"] = "rates are not in the toric locus; no equilibrium comparison made"
    diagnostics = {
        "rtol": args.rtol,
        "atol": args.atol,
        "drift_bound": 100 * args.rtol * float(np.linalg.norm(x0)),
        "tol": args.tol,
        "membership_residual": None if member is None else member.residual,
    }
    return _report("simulate", args, results, diagnostics), EXIT_OK


def cmd_probe(args) -> tuple[dict, int]:
    g = load_network(args.network)
    k = resolve_rates(g, args)
    x0 = _state(args.x0, g, "--x0")
    d = np.array(_floats(args.direction))
    steps = args.h0 * 0.5 ** np.arange(args.steps + 1)
    res = smooth_dependence_probe(
        g, k, x0, d, steps, kind=args.kind, tol=args.tol, project=args.project, jobs=args.jobs
    )
    results = {
        "kind": res.kind,
        "x_star": _vec(res.x_star),
        "steps": _vec(res.steps),
        "estimates": [_vec(row) for row in res.estimates],
        "richardson_ratios": [None if np.isnan(r) else float(r) for r in res.ratios],
    }
    diagnostics = {"tol": args.tol, "ratio_window": [3.5, 4.5], "projected": args.project}
    return _report("probe", args, results, diagnostics), EXIT_OK


def _report(command: str, args, results: dict, diagnostics: dict) -> dict:
    inputs = {
        key: value
        for key, value in sorted(vars(args).items())
        if key not in ("func", "command") and value is not None
    }
    return {"command": command, "inputs": inputs, "results": results, "diagnostics": diagnostics}


@functools.lru_cache(maxsize=None)
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="toricnet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, rates=True):
        p.add_argument("network", help="network file in the reaction DSL")
        p.add_argument("--rank-tol", type=float, default=DEFAULT_RANK_TOL,
                       help="relative singular-value threshold (default %(default)g)")
        p.add_argument("--tol", type=float, default=DEFAULT_MEMBERSHIP_TOL,
                       help="membership residual tolerance (default %(default)g)")
        if rates:
            p.add_argument("--rates", help="k1,k2,... in edge order, or name=value,...")
            p.add_argument("--set", action="append", metavar="NAME=VALUE",
                           help="bind a $NAME rate placeholder; repeatable")

    p = sub.add_parser("info", help="network structure summary")
    common(p, rates=False)
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("check", help="toric-locus membership test")
    common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("eq", help="complex-balanced equilibrium in the class of x0")
    common(p)
    p.add_argument("--x0", required=True)
    p.add_argument("--grad-tol", type=float, default=BirchOptions.grad_tol,
                   help="Newton gradient tolerance (default %(default)g)")
    p.add_argument("--max-iter", type=int, default=BirchOptions.max_iter)
    p.set_defaults(func=cmd_eq)

    p = sub.add_parser("embed", help="rates from (x, beta) and immersion checks")
    common(p, rates=False)
    p.add_argument("--x", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--beta", help="balanced positive flux in edge order")
    group.add_argument("--sample-seed", type=int,
                       help="sample beta with this seed (default $TORICNET_SEED or 0)")
    p.add_argument("--balance-tol", type=float, default=BALANCE_TOL)
    p.add_argument("--rank-samples", type=int, default=0,
                   help="extra random interior points for the rank check")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("simulate", help="integrate the mass-action ODE")
    common(p)
    p.add_argument("--x0", required=True)
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--out", help="CSV path for the trajectory")
    p.add_argument("--rtol", type=float, default=IntegratorOptions.rtol)
    p.add_argument("--atol", type=float, default=IntegratorOptions.atol)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("probe", help="finite-difference smoothness probe")
    common(p)
    p.add_argument("--x0", required=True)
    p.add_argument("--direction", required=True)
    p.add_argument("--kind", choices=("x0", "rates"), default="x0")
    p.add_argument("--h0", type=float, default=0.05)
    p.add_argument("--steps", type=int, default=3, help="number of step halvings")
    p.add_argument("--no-project", dest="project", action="store_false",
                   help="reject off-locus rate perturbations instead of projecting them")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_probe)
    return parser


def run(argv=None) -> tuple[dict, int]:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NotInToricLocus as exc:
        return _error(args, exc), EXIT_NEGATIVE
    except (ToricNetError, ValueError, OSError) as exc:
        return _error(args, exc), EXIT_ERROR


def _error(args, exc: Exception) -> dict:
    err = {"type": type(exc).__name__, "message": str(exc)}
    for attr in ("line", "column", "residual"):
        if getattr(exc, attr, None) is not None:
            err[attr] = getattr(exc, attr)
    return {"command": args.command, "error": err}


def main(argv=None) -> int:
    report, code = run(argv)
    json.dump(report, sys.stdout, indent=2)
    sys.stdout.write("\n")
    if "error" in report:
        print(f"toricnet: {report['error']['type']}: {report['error']['message']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
