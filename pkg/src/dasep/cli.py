"""Command-line front end.

stdout carries the JSON or CSV artifact, stderr the human-readable lines.
Exit status: 0 when every requested check passes, 1 when one fails, 2 on
bad arguments.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
import time
import warnings
from pathlib import Path

from .duality import (
    AlphaRangeWarning,
    MeasureParams,
    check_detailed_balance,
    check_interlacing,
    check_orthogonality,
    species_duality_matrix,
)
from .generator import GeneratorParams, global_generator, validate_generator
from .qgroup import (
    check_symmetry_elements,
    check_theorem2,
    fundamental_rep,
    theorem2_sweep,
    verify_relations,
    verify_star_structures,
)
from .reports import CheckReport, RunReport, dumps, tolerance
from .simulate import SimParams, mc_duality_check, step_ic_experiment

__all__ = ["main", "build_parser"]


class _ArgError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgError(f"{self.prog}: error: {message}")


def _phi(text: str) -> tuple[int, int]:
    try:
        a, b = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("phi must look like 2,3") from None
    return a, b


def _common_model(p):
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--n", type=int, default=2)


def _alphas(p):
    p.add_argument("--alpha1", type=float, default=10.0)
    p.add_argument("--alpha2", type=float, default=10.0)


def _plot(p):
    p.add_argument("--plot", metavar="DIR", help="write PNG figures into DIR")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="dasep", description="Two-species type D ASEP toolkit.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generator", help="list the L-site generator")
    _common_model(g)
    g.add_argument("--emit", choices=("json", "csv"), default="json")

    v = sub.add_parser("verify", help="verification checks")
    vsub = v.add_subparsers(dest="target", required=True, parser_class=_Parser)
    vd = vsub.add_parser("duality")
    _common_model(vd)
    _alphas(vd)
    vd.add_argument("--all-checks", action="store_true",
                    help="also detailed balance, orthogonality and the two duality forms")
    vd.add_argument("--emit", choices=("json",), default="json")
    vq = vsub.add_parser("qgroup")
    _qgroup_verify_args(vq)

    qg = sub.add_parser("qgroup", help="quantum group checks")
    qsub = qg.add_subparsers(dest="action", required=True, parser_class=_Parser)
    _qgroup_verify_args(qsub.add_parser("verify"))
    t2 = qsub.add_parser("theorem2")
    t2.add_argument("--L", type=int, required=True)
    t2.add_argument("--q", type=float, required=True)
    t2.add_argument("--M0", type=int)
    t2.add_argument("--M1", type=int)
    t2.add_argument("--M2", type=int)
    t2.add_argument("--all-sectors", action="store_true", help="sweep every (M0, M1, M2)")
    sy = qsub.add_parser("symmetry")
    sy.add_argument("--L", type=int, required=True)
    sy.add_argument("--q", type=float, required=True)
    _alphas(sy)
    sy.add_argument("--star", choices=("transpose", "coproduct"), default="transpose")
    sy.add_argument("--hat-exponent", type=float, default=-0.5)

    sm = sub.add_parser("simulate", help="Monte Carlo runs")
    ssub = sm.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    sd = ssub.add_parser("duality")
    _common_model(sd)
    _alphas(sd)
    sd.add_argument("--t", type=float, required=True)
    sd.add_argument("--trials", type=int, default=10_000)
    sd.add_argument("--seed", type=int, default=0)
    sd.add_argument("--eta0")
    sd.add_argument("--xi0")
    _plot(sd)
    st = ssub.add_parser("step-ic")
    _common_model(st)
    st.add_argument("--t", type=float, required=True, help="conjecture time")
    st.add_argument("--m", type=int, action="append", required=True, help="particle rank (repeatable)")
    st.add_argument("--trials", type=int, default=200)
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--time-change", choices=("asep", "tau"), default="asep")
    st.add_argument("--emit", choices=("csv",), default="csv")
    _plot(st)

    su = sub.add_parser("suite", help="acceptance battery")
    su.add_argument("--quick", action="store_true", help="L <= 2 battery without the step-IC run")
    su.add_argument("--only", type=int, action="append", help="criterion number (repeatable)")
    _plot(su)
    return ap


def _qgroup_verify_args(p):
    p.add_argument("--m", type=int, choices=(3, 4), default=3)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--L", type=int, default=1, help="also check the coproduct on L copies")
    p.add_argument("--phi", type=_phi, action="append", help="diagram automorphism, e.g. 2,3")


def _params(args) -> dict:
    return {k: v for k, v in vars(args).items() if v is not None}


def _default_configs(L: int) -> tuple[str, str]:
    eta0 = ("31" + "0" * L)[:L]
    xi0 = ("0" * L + "23")[-L:]
    return eta0, xi0


def _cmd_generator(args, out):
    p = GeneratorParams(args.q, args.n)
    g = global_generator(args.L, p)
    rep = validate_generator(g, tolerance("row_sum"))
    if args.emit == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", "col", "rate"])
        for r, c, v in g.entries():
            w.writerow([r, c, repr(v)])
        out.write(buf.getvalue())
    else:
        out.write(dumps({**g.to_json(), "validation": rep.as_dict()}) + "\n")
    check = CheckReport("generator", {"L": args.L, **p.as_dict()},
                        rep.max_row_sum / max(rep.scale, 1.0), tolerance("row_sum"), rep.passed)
    return [check], None


def _quiet(fn, *a, **k):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AlphaRangeWarning)
        return fn(*a, **k)


def _cmd_verify_duality(args, out):
    p = GeneratorParams(args.q, args.n)
    mp = MeasureParams(args.alpha1, args.alpha2)
    if not mp.in_literal_range(args.q, args.L):
        print(f"note: alpha outside the literal range (0, {mp.literal_bound(args.q, args.L):.4g})",
              file=sys.stderr)
    checks = [_quiet(check_interlacing, args.L, p, mp)]
    if args.all_checks:
        checks.append(check_detailed_balance(args.L, p, mp))
        checks.append(_quiet(check_orthogonality, args.L, p, mp))
        for i, a in ((1, mp.alpha1), (2, mp.alpha2)):
            A = species_duality_matrix(args.L, a, args.q, "krawtchouk")
            B = species_duality_matrix(args.L, a, args.q, "common_sites")
            rel = float((abs(A - B) / abs(B)).max())
            checks.append(CheckReport(f"forms_species{i}", {"L": args.L, "q": args.q, "alpha": a},
                                      rel, tolerance("forms"), rel <= tolerance("forms")))
    return checks, None


def _cmd_qgroup_verify(args, out):
    rep = fundamental_rep(args.m, args.q)
    checks = [verify_relations(rep), verify_star_structures(rep)]
    if args.L > 1:
        checks.append(verify_relations(rep, L=args.L))
    for phi in args.phi or []:
        checks.append(verify_star_structures(rep, phi))
    return checks, None


def _cmd_theorem2(args, out):
    if args.all_sectors:
        return [theorem2_sweep(args.L, args.q)], None
    if None in (args.M0, args.M1, args.M2):
        raise _ArgError("theorem2 needs --M0 --M1 --M2 or --all-sectors")
    return [check_theorem2(args.L, args.M0, args.M1, args.M2, args.q)], None


def _cmd_symmetry(args, out):
    return [check_symmetry_elements(args.L, args.alpha1, args.alpha2, args.q,
                                    star=args.star, hat_exponent=args.hat_exponent)], None


def _cmd_sim_duality(args, out):
    eta0, xi0 = _default_configs(args.L)
    eta0, xi0 = args.eta0 or eta0, args.xi0 or xi0
    sp = SimParams(args.L, args.q, args.n, args.t, args.trials, args.seed)
    r = mc_duality_check(eta0, xi0, sp, MeasureParams(args.alpha1, args.alpha2))
    artifacts = {}
    if args.plot:
        from .plotting import plot_mc_duality

        artifacts["mc_duality_png"] = str(plot_mc_duality([r], Path(args.plot) / "mc_duality.png"))
    return [r], artifacts


def _cmd_step_ic(args, out):
    p = GeneratorParams(args.q, args.n)
    res = step_ic_experiment(args.L, p, args.t, args.m, args.trials, args.seed, args.time_change)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial", "species", "m", "position", "rescaled"])
    for row in res.rows:
        w.writerow([row[0], row[1], row[2], row[3], repr(float(row[4]))])
    out.write(buf.getvalue())
    summ = res.summary()
    for key, s in summ.items():
        print(f"{key}: n={s['n']} velocity={s['velocity']:.4f} c1={s['c1']:.4f} "
              f"rescaled mean={s['rescaled_mean']:.4f} var={s['rescaled_var']:.4f}", file=sys.stderr)
    details = {"summary": summ, "contaminated_trials": res.contaminated,
               "process_time": res.process_time,
               "conjecture": {m: c.as_dict() for m, c in res.conj.items()}}
    for m in res.conj:
        ks = res.ks_species(m)
        if ks is not None:
            details[f"ks_pvalue_m{m}"] = float(ks.pvalue)
    n_bad = len(res.contaminated)
    check = CheckReport("boundary_contamination", {"L": args.L, "t": args.t, "m": args.m},
                        float(n_bad), 0.0, n_bad == 0, details)
    artifacts = {}
    if args.plot:
        from .plotting import plot_step_ic

        artifacts["step_ic_png"] = str(plot_step_ic(res, Path(args.plot) / "step_ic.png"))
    return [check], artifacts


def _cmd_suite(args, out):
    from .suite import gating_passed, run_suite

    reports, _ = run_suite(quick=args.quick, only=args.only,
                           log=lambda s: print(s, file=sys.stderr))
    artifacts = {}
    if args.plot:
        from .plotting import plot_mc_duality, plot_residuals, plot_step_ic

        d = Path(args.plot)
        artifacts["residuals_png"] = str(plot_residuals(reports, d / "residuals.png"))
        for r in reports:
            if "per_seed" in r.details:
                artifacts["mc_duality_png"] = str(plot_mc_duality(r.details["per_seed"],
                                                                  d / "mc_duality.png"))
            if "_result" in r.details:
                artifacts["step_ic_png"] = str(plot_step_ic(r.details["_result"], d / "step_ic.png"))
    verdict = "PASS" if gating_passed(reports) else "FAIL"
    print(f"suite: {verdict} ({sum(r.passed for r in reports)}/{len(reports)} criteria passed)",
          file=sys.stderr)
    return reports, artifacts


_DISPATCH = {
    ("generator",): _cmd_generator,
    ("verify", "duality"): _cmd_verify_duality,
    ("verify", "qgroup"): _cmd_qgroup_verify,
    ("qgroup", "verify"): _cmd_qgroup_verify,
    ("qgroup", "theorem2"): _cmd_theorem2,
    ("qgroup", "symmetry"): _cmd_symmetry,
    ("simulate", "duality"): _cmd_sim_duality,
    ("simulate", "step-ic"): _cmd_step_ic,
    ("suite",): _cmd_suite,
}

# commands whose stdout artifact is not the JSON report
_OWN_STDOUT = {("generator",), ("simulate", "step-ic")}


def main(argv=None, stdout=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    out = stdout or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except _ArgError as e:
        print(e, file=sys.stderr)
        return 2
    except SystemExit as e:  # --help
        return int(e.code or 0)
    key = tuple(x for x in (args.command, getattr(args, "target", None),
                            getattr(args, "action", None), getattr(args, "experiment", None))
                if x is not None)
    start = time.perf_counter()
    try:
        checks, artifacts = _DISPATCH[key](args, out)
    except (_ArgError, ValueError, IndexError) as e:
        print(f"dasep: error: {e}", file=sys.stderr)
        return 2
    report = RunReport(["dasep", *argv], _params(args), checks,
                       time.perf_counter() - start, getattr(args, "seed", None), artifacts or {})
    for c in checks:
        print(c.line(), file=sys.stderr)
    if key not in _OWN_STDOUT:
        out.write(dumps(report) + "\n")
    if key == ("suite",):
        from .suite import gating_passed

        return 0 if gating_passed(checks) else 1
    return 0 if report.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
