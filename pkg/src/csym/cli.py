"""Command line driver: ``csym <command> [options]``.

Exit status is 0 when every check passes, 2 when a statistical or exact
check fails, and 1 on usage or input errors.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from math import gcd

from . import config
from .errors import CsymError
from .groups import FiniteAbelianGroup, exterior_square_order, order
from .harness import (
    compare_classes,
    directional_checks,
    empirical_distribution,
    empirical_moment,
    moment_sum_oracle,
    verify_alternating_form_bound,
    verify_generation_bound,
)
from .isotropy import (
    GroupMap,
    isotropy_probability_exact,
    isotropy_probability_mc,
    isotropy_report,
)
from .limits import (
    LimitDistribution,
    cl_probability,
    count_perfect_symmetric_pairings,
    isotropy_fraction_limit,
    sandpile_probability,
)
from .linalg import ExactMatrix, cokernel, cokernel_mod, smith_normal_form
from .models import standard_alternating
from .rng import SeedSpec

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, help="base seed (default 0)")
    g.add_argument("--trials", type=int, help="Monte Carlo trials")
    g.add_argument("--out", help="output file (default stdout)")
    g.add_argument("--format", choices=("json", "csv"), default="json")
    g.add_argument("--config", help="key=value config file; flags override it")
    return p


def _model_flags(p):
    g = p.add_argument_group("model")
    g.add_argument("--model", choices=("iid", "symmetric", "c_symmetric", "symmetric_mod_h",
                                       "corner_perturbed", "alternating_uniform", "random_corner"))
    g.add_argument("--n", type=int)
    g.add_argument("--m", type=int, help="columns for iid (default n)")
    g.add_argument("--modulus", type=int, help="entries mod a; 0 means integer entries")
    g.add_argument("--dist", help="uniform_mod:a, two_point:v0,v1,p or uniform_range:lo,hi")
    g.add_argument("--dist2", help="second distribution for symmetric_mod_h")
    g.add_argument("--c-file", help="JSON matrix with the alternating form C")
    g.add_argument("--h", type=int)
    g.add_argument("--positions", help="corner positions as i-j pairs, e.g. 0-1,2-3")
    g.add_argument("--units", help="comma-separated units for the corner positions")
    g.add_argument("--k", type=int)


def _options(args) -> dict:
    opts = config.load_config(args.config) if getattr(args, "config", None) else {}
    for key, value in vars(args).items():
        if value is not None and key not in ("config", "func", "command", "mode_name"):
            opts[key] = value
    return opts


def _seed(opts) -> SeedSpec:
    return SeedSpec(int(opts.get("seed", 0)))


def _trials(opts, default: int) -> int:
    t = int(opts.get("trials", default))
    if t < 1:
        raise UsageError("--trials must be positive")
    return t


def _group(opts, key: str = "group") -> FiniteAbelianGroup:
    if not opts.get(key):
        raise UsageError(f"--{key} is required")
    return FiniteAbelianGroup.parse(str(opts[key]))


def _matrix(path) -> ExactMatrix:
    if not path:
        raise UsageError("a matrix file is required")
    return ExactMatrix.load(path)


# commands


def cmd_snf(opts):
    M = _matrix(opts.get("matrix"))
    a = M.modulus
    dec = smith_normal_form(M.lift())
    d = dec.invariant_factors
    if a:
        d = [gcd(x, a) if x % a else a for x in d]
        rank = sum(1 for x in d if x != a)
        free = 0
        coker = cokernel_mod(M)
    else:
        rank = dec.rank
        free = M.rows - rank
        coker = cokernel(M)
    return {"d": d, "rank": rank, "free_rank": free, "cokernel": str(coker)}, True


def cmd_cokernel(opts):
    M = _matrix(opts.get("matrix"))
    G = cokernel_mod(M) if M.modulus else cokernel(M)
    return {
        "cokernel": str(G), "pretty": G.pretty(), "order": order(G) if G.is_finite else None,
        "generators": G.rank,
    }, True


def _auto_target(model, G):
    if model.kind == "iid":
        u = (model.cols - model.n)
        return float(Fraction(1, order(G) ** u))
    if model.kind == "symmetric":
        return float(exterior_square_order(G))
    return None


def cmd_moment(opts):
    model = config.model_from_options(opts)
    G = _group(opts)
    est = empirical_moment(model, G, _trials(opts, 2 * 10**4), _seed(opts))
    out = est.to_json()
    target = float(opts["target"]) if opts.get("target") is not None else _auto_target(model, G)
    passed = True
    if target is not None:
        passed = est.within(target)
        out.update(target=target, passed=passed)
    return out, passed


def cmd_isotropy(opts):
    C = _matrix(opts.get("c_file"))
    G = _group(opts)
    a = int(opts.get("modulus") or C.modulus)
    if a != C.modulus:
        raise UsageError(f"form modulus {C.modulus} differs from --modulus {a}")
    out = {"group": str(G), "modulus": a, "n": C.rows}
    if opts.get("exact"):
        P = isotropy_probability_exact(C, G, a)
        out.update(probability=float(P), exact=str(P))
    elif opts.get("trials") is not None:
        est = isotropy_probability_mc(C, G, a, _trials(opts, 10**5), _seed(opts))
        out.update(probability=est.mean, stderr=est.stderr, trials=est.trials, seed=est.seed.base_seed)
    out["limit_h1"] = float(isotropy_fraction_limit(G, 1))
    if opts.get("map_file"):
        F = GroupMap.from_rows(G, _matrix(opts["map_file"]).tolist(), a)
    elif C.rows >= G.rank:
        F = GroupMap.projection(G, C.rows, a)
    else:
        F = None
    if F is not None:
        report = isotropy_report(F, C)
        out["map"] = F.to_json()
        out["report"] = report.to_json()
        if opts.get("witness") and report.witness is not None:
            report.witness.dump(opts["witness"])
    return out, True


def _reference(opts):
    kind = opts.get("reference", "none")
    if kind in (None, "none"):
        return None
    p = int(opts.get("p", 2))
    if kind == "cl":
        return LimitDistribution.cohen_lenstra(p, int(opts.get("u", 0)))
    if kind == "sandpile":
        return LimitDistribution.sandpile(p)
    raise UsageError(f"unknown reference {kind!r}")


def cmd_distribution(opts):
    model = config.model_from_options(opts)
    a = int(opts.get("a") or model.modulus)
    if a < 2:
        raise UsageError("--a (reduction modulus) must be at least 2")
    ref = _reference(opts)
    table = empirical_distribution(model, a, _trials(opts, 2 * 10**4), _seed(opts), ref)
    out = table.to_json()
    passed = True
    if opts.get("check") and ref is not None:
        top = int(opts["check"])
        checks = compare_classes(table, [r.group for r in table.rows[:top]])
        passed = all(c["passed"] for c in checks)
        out.update(checks=checks, passed=passed)
    return out, passed


def cmd_limits(opts):
    kind, p = opts.get("dist"), int(opts.get("p", 2))
    G = _group(opts)
    bound = int(opts.get("max_order", 64))
    if kind == "cl":
        lv = cl_probability(G, p, int(opts.get("u", 0)))
    elif kind == "sandpile":
        count_perfect_symmetric_pairings(G, bound)
        lv = sandpile_probability(G, p)
    else:
        raise UsageError("--dist must be cl or sandpile")
    return {"value": lv.value, "tail_bound": lv.tail_bound, "group": str(G)}, True


def cmd_verify(opts):
    mode = opts["mode_name"] if "mode_name" in opts else opts.get("verify")
    seed = _seed(opts)
    if mode == "alternating-form":
        a, n, m = int(opts["a"]), int(opts["n"]), int(opts["m"])
        C = ExactMatrix.load(opts["c_file"]) if opts.get("c_file") else standard_alternating(
            n, int(opts.get("c_rank", n - n % 2)), a)
        S = ExactMatrix.load(opts["s_file"]) if opts.get("s_file") else ExactMatrix.zeros(m, m, a)
        r = verify_alternating_form_bound(a, n, m, C, S, opts.get("sample_mode", "exact"),
                                          _trials(opts, 10**5), seed)
        return r.to_json(), r.passed
    if mode == "generation":
        r = verify_generation_bound(int(opts["a"]), int(opts["ell"]), int(opts["k"]), _trials(opts, 10**4), seed)
        return r.to_json(), r.passed
    if mode == "directional":
        seed = SeedSpec(int(opts["seed"])) if opts.get("seed") is not None else None
        scen = directional_checks(int(opts.get("n", 40)), _trials(opts, 2 * 10**4), seed,
                                  h2_trials=int(opts.get("h2_trials", 0)))
        passed = all(s.passed for s in scen)
        return {"scenarios": [s.to_json() for s in scen], "passed": passed}, passed
    if mode == "moment-sum-oracle":
        model = config.model_from_options(opts)
        lhs, rhs = moment_sum_oracle(model, _group(opts))
        return {"lhs": str(lhs), "rhs": str(rhs), "passed": lhs == rhs}, lhs == rhs
    raise UsageError(f"unknown verify mode {mode!r}")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="csym", description="Cokernels of random C-symmetric matrices.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("snf", parents=[common], help="Smith normal form of a JSON matrix")
    p.add_argument("--matrix", required=True)
    p.set_defaults(func=cmd_snf)

    p = sub.add_parser("cokernel", parents=[common], help="cokernel of a JSON matrix")
    p.add_argument("--matrix", required=True)
    p.set_defaults(func=cmd_cokernel)

    p = sub.add_parser("moment", parents=[common], help="empirical G-moment of a matrix model")
    _model_flags(p)
    p.add_argument("--group")
    p.add_argument("--target", type=float, help="expected moment (iid and symmetric default to the limit)")
    p.set_defaults(func=cmd_moment)

    p = sub.add_parser("isotropy", parents=[common], help="isotropy of maps for an alternating form")
    p.add_argument("--c-file")
    p.add_argument("--group")
    p.add_argument("--modulus", type=int)
    p.add_argument("--exact", action="store_true", help="enumerate every map")
    p.add_argument("--map-file", help="JSON matrix whose rows define F (default: coordinate projection)")
    p.add_argument("--witness", help="write the witness M for the map here")
    p.set_defaults(func=cmd_isotropy)

    p = sub.add_parser("distribution", parents=[common], help="histogram of coker tensor Z/a")
    _model_flags(p)
    p.add_argument("--a", type=int, help="reduction modulus (default: model modulus)")
    p.add_argument("--reference", choices=("none", "cl", "sandpile"))
    p.add_argument("--p", type=int)
    p.add_argument("--u", type=int)
    p.add_argument("--check", type=int, help="compare the top K classes against the reference")
    p.set_defaults(func=cmd_distribution)

    p = sub.add_parser("limits", parents=[common], help="limit probability of a group")
    p.add_argument("--dist", choices=("cl", "sandpile"), required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--u", type=int)
    p.add_argument("--group", required=True)
    p.add_argument("--max-order", type=int, help="largest |G| for pairing enumeration (default 64)")
    p.set_defaults(func=cmd_limits)

    p = sub.add_parser("verify", parents=[common], help="bound, oracle and directional checks")
    vsub = p.add_subparsers(dest="mode_name", required=True, parser_class=_Parser)
    v = vsub.add_parser("alternating-form", parents=[common])
    v.add_argument("--a", type=int, required=True)
    v.add_argument("--n", type=int, required=True)
    v.add_argument("--m", type=int, required=True)
    v.add_argument("--c-file")
    v.add_argument("--c-rank", type=int, help="rank of the standard form used when no --c-file")
    v.add_argument("--s-file")
    v.add_argument("--sample-mode", choices=("exact", "mc"))
    v = vsub.add_parser("generation", parents=[common])
    v.add_argument("--a", type=int, required=True)
    v.add_argument("--ell", type=int, required=True)
    v.add_argument("--k", type=int, required=True)
    v = vsub.add_parser("directional", parents=[common])
    v.add_argument("--n", type=int)
    v.add_argument("--h2-trials", type=int, help="also run the (Z/4)^2 scenario with this many trials")
    v = vsub.add_parser("moment-sum-oracle", parents=[common])
    _model_flags(v)
    v.add_argument("--group")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = _options(args)
        if args.command == "verify":
            opts["mode_name"] = args.mode_name
        payload, passed = args.func(opts)
        config.emit(payload, opts.get("out"), opts.get("format", "json"))
    except (UsageError, CsymError, ValueError, KeyError, OSError) as exc:
        msg = f"missing option {exc}" if isinstance(exc, KeyError) else str(exc)
        print(f"csym: error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    if not passed:
        print(f"csym: check failed (seed {opts.get('seed', 0)})", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
