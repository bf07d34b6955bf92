"""Command-line entry point: run algorithms, adversaries, bounds and checks.

Exit codes: 0 success, 1 invalid instance or config, 2 infeasible input,
3 adversary failure (no confusion triple), 4 enumeration cap exceeded.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

from . import adversaries, algorithms, analysis, problem, verification
from .automata import RNG_ID, BranchCapError, ExactMode, SampledMode
from .functions import EnumerationCapError, FunctionSpec, blocks_with_value
from .problem import InfeasibleInstanceError, InvalidInstanceError

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INFEASIBLE = 2
EXIT_ADVERSARY = 3
EXIT_CAP = 4

FORMAT_VERSION = 1


def _parse_gen_spec(spec: str) -> tuple[problem.BHParams, FunctionSpec, int]:
    fields = {}
    for part in spec.split(","):
        if not part:
            continue
        key, _, value = part.partition("=")
        if not value:
            raise InvalidInstanceError(f"bad generator field {part!r}")
        fields[key.strip()] = value.strip()
    try:
        name = fields["fn"]
        k = int(fields["k"])
        t = int(fields["t"])
        r = int(fields["r"])
        w = int(fields["w"])
        seed = int(fields.get("seed", "0"))
        raw_m = fields["m"]
        m = tuple(int(x) for x in raw_m.split("/")) if "/" in raw_m else (int(raw_m),) * k
        if name == "partialmod":
            function = FunctionSpec("partialmod", beta=int(fields["beta"]))
        elif name == "eq":
            function = FunctionSpec("eq")
        else:
            raise InvalidInstanceError(f"generator cannot build fn={name!r}")
    except KeyError as exc:
        raise InvalidInstanceError(f"generator spec missing {exc}") from exc
    except ValueError as exc:
        raise InvalidInstanceError(f"bad generator spec: {exc}") from exc
    return problem.BHParams(k=k, t=t, r=r, w=w, m=m), function, seed


def _load_or_generate(args) -> tuple[problem.BHInstance, FunctionSpec]:
    if args.instance:
        return problem.load_instance(args.instance)
    if args.gen:
        params, function, seed = _parse_gen_spec(args.gen)
        return problem.generate_instance(function, params, seed), function
    raise InvalidInstanceError("need --instance or --gen")


def _config_hash(parts: dict) -> str:
    canon = json.dumps(parts, sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _emit(text: str, out_path):
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    instance, function = _load_or_generate(args)
    alg = algorithms.build_algorithm(args.algorithm, instance.params, function, eps=args.eps)
    if args.mode == "exact":
        mode = ExactMode()
    else:
        if args.trials is None or args.seed is None:
            raise InvalidInstanceError("mc mode needs --trials and --seed")
        mode = SampledMode(trials=args.trials, seed=args.seed)
    report = analysis.empirical_ratio(alg, instance, function, mode)
    metadata = {
        "format_version": FORMAT_VERSION,
        "rng": RNG_ID,
        "config_hash": _config_hash({
            "algorithm": args.algorithm, "eps": args.eps, "mode": args.mode,
            "trials": args.trials, "seed": args.seed,
            "instance": args.instance or args.gen}),
    }
    if args.format == "csv":
        text = analysis.reports_to_csv([report], metadata)
    else:
        text = analysis.reports_to_json([report], metadata)
    _emit(text, args.out)
    return EXIT_OK


def cmd_adversary(args) -> int:
    if args.instance or args.gen:
        if args.instance:
            instance, function = problem.load_instance(args.instance)
            params = instance.params
        else:
            params, function, _ = _parse_gen_spec(args.gen)
    else:
        raise InvalidInstanceError("need --instance or --gen for the problem shape")
    alg = algorithms.build_algorithm(args.algorithm, params, function, eps=0.0)
    if alg.kind != "deterministic":
        raise InvalidInstanceError("adversaries only run against deterministic algorithms")

    if args.kind == "fooling":
        try:
            result = adversaries.build_fooling_input(alg, params, function)
        except adversaries.AdversaryFailure as exc:
            payload = {"kind": "fooling", "algorithm": args.algorithm,
                       "failed_stage": exc.stage, "reason": exc.reason}
            _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", args.out)
            return EXIT_ADVERSARY
        extras = {
            "sigma": list(result.sigma),
            "stages": [{"stage": tr.stage, "y": tr.answer,
                        "X0": tr.block_zero, "X1": tr.block_one}
                       for tr in result.triples],
        }
        report = adversaries.adversary_report("fooling", alg, params, function,
                                              result.instance, extras)
    else:
        lengths = set(params.m)
        zero_pool = {m: blocks_with_value(function, m, 0, limit=4) for m in lengths}
        one_pool = {m: blocks_with_value(function, m, 1, limit=4) for m in lengths}
        instance = adversaries.unbounded_adversary(alg, params, function, zero_pool, one_pool)
        report = adversaries.adversary_report("unbounded", alg, params, function, instance)
    _emit(json.dumps(report, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_bounds(args) -> int:
    zs = [int(x) for x in args.z.split(",") if x]
    eps_values = [float(x) for x in args.eps.split(",") if x]
    for e in eps_values:
        if not 0.0 <= e < 0.5:
            raise InvalidInstanceError(f"eps {e} outside [0, 0.5)")
    lines = ["z,r,w,eps,c_quantum,c2,c1"]
    for z in zs:
        for e in (eps_values or [0.0]):
            lines.append(",".join([
                str(z), str(args.r), str(args.w), repr(e),
                repr(analysis.bound_quantum(e, z, args.r, args.w)),
                repr(analysis.bound_c2(z, args.r, args.w)),
                repr(analysis.bound_c1(args.r, args.w)),
            ]))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    results = verification.run_suite(args.suite)
    if not results:
        print(f"no checks match {args.suite!r}", file=sys.stderr)
        return EXIT_INVALID
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_INVALID


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blackhats")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="measure an algorithm's competitive ratio")
    run.add_argument("--instance", help="instance JSON path")
    run.add_argument("--gen", help="generator spec, e.g. fn=partialmod,beta=1,k=8,t=2,r=1,w=3,m=8,seed=1")
    run.add_argument("--algorithm", required=True)
    run.add_argument("--eps", type=float, default=0.0,
                     help="designed subroutine error for bh-rand/bh-quantum partialmod")
    run.add_argument("--mode", choices=("exact", "mc"), default="exact")
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--format", choices=("csv", "json"), default="csv")
    run.set_defaults(func=cmd_run)

    adv = sub.add_parser("adversary", help="run a constructive adversary")
    adv.add_argument("--kind", choices=("fooling", "unbounded"), required=True)
    adv.add_argument("--algorithm", required=True)
    adv.add_argument("--instance")
    adv.add_argument("--gen")
    adv.add_argument("--out")
    adv.set_defaults(func=cmd_adversary)

    bounds = sub.add_parser("bounds", help="print the closed-form bound table")
    bounds.add_argument("--z", default="1,2,4")
    bounds.add_argument("--r", type=int, default=1)
    bounds.add_argument("--w", type=int, default=3)
    bounds.add_argument("--eps", default="0")
    bounds.add_argument("--out")
    bounds.set_defaults(func=cmd_bounds)

    verify = sub.add_parser("verify", help="run the acceptance checks")
    verify.add_argument("--suite", help="substring filter on check names")
    verify.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleInstanceError as exc:
        print(f"infeasible input: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (BranchCapError, EnumerationCapError) as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except adversaries.PoolError as exc:
        print(f"pool error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (InvalidInstanceError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
