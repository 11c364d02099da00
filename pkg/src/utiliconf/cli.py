"""Command line entry point: ``utiliconf run|sweep-captime|sweep-epsilon|montecarlo|verify``.

Exit status is 0 on success, 2 when the inputs admit no valid run (for
example every captime has utility above epsilon) and 1 on other errors.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .distributions import dump_synthetic_spec
from .errors import InfeasibleInputsError, NoCounterexampleError
from .harness import ExperimentSpec, Report, montecarlo_correctness, sweep_captime, sweep_delta, sweep_epsilon
from .procedures import DEFAULT_MAX_M, run_naive, run_oracle, run_up, write_events
from .report import emit_report
from .verification import adversarial_extension, run_verification


def _floats(values) -> list[float]:
    out = []
    for v in values or []:
        out += [float(x) for x in str(v).split(",") if x.strip()]
    return out


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--dataset", help="runtime matrix CSV (header: instance,<algorithm names>)")
    src.add_argument("--synthetic", help="synthetic distribution JSON (default: shipped benchmark family)")
    common.add_argument("--utility", help="loglaplace:<t0>,<sigma> | uniform:<t0> | table:<csv>")
    common.add_argument("--procedure", action="append", choices=("up", "naive", "oracle"),
                        help="procedure to run; repeat for several")
    common.add_argument("--delta", type=float, default=0.1)
    common.add_argument("--epsilon", nargs="+", help="epsilon grid, space or comma separated")
    common.add_argument("--captime", nargs="+", help="captime grid in seconds")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int, default=1)
    common.add_argument("--max-m", type=int, default=DEFAULT_MAX_M)
    common.add_argument("--budget-seconds", type=float, help="stop after this much simulated time")
    common.add_argument("--free-oracle", action="store_true", help="do not charge the oracle's runs")
    common.add_argument("--workers", type=int, default=1, help="worker processes for trials")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--format", choices=("csv", "json", "svg"), default="csv")

    p = argparse.ArgumentParser(prog="utiliconf", description="Utility-maximizing algorithm configuration.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="run one procedure once")
    run.add_argument("--events", help="write the per-round event log here (JSON lines)")
    sub.add_parser("sweep-captime", parents=[common], help="Naive total time over a captime x epsilon grid")
    se = sub.add_parser("sweep-epsilon", parents=[common], help="total time to reach each epsilon, per procedure")
    se.add_argument("--delta-grid", nargs="+", help="repeat the sweep for each of these deltas")
    sub.add_parser("montecarlo", parents=[common], help="success rate of each procedure over seeded trials")
    ver = sub.add_parser("verify", parents=[common], help="certify epsilon-optimality from truncated CDFs")
    ver.add_argument("--emit-witness", action="store_true",
                     help="when the check fails, write adversarial extensions that defeat the claim")
    return p


def _spec(args, procedures, epsilons=None, captimes=None) -> ExperimentSpec:
    kw = {}
    if epsilons:
        kw["epsilons"] = epsilons
    if captimes:
        kw["captimes"] = captimes
    return ExperimentSpec(
        procedures=tuple(procedures), dataset=args.dataset, synthetic=args.synthetic, utility=args.utility,
        delta=args.delta, seed=args.seed, trials=args.trials, max_m=args.max_m, budget=args.budget_seconds,
        free_oracle=args.free_oracle, workers=args.workers, **kw,
    )


def _cmd_run(args) -> Report:
    proc = (args.procedure or ["up"])[0]
    eps, caps = _floats(args.epsilon), _floats(args.captime)
    spec = _spec(args, [proc], eps[:1], caps[:1])
    src, u = spec.source(0), spec.utility_function()
    events = [] if args.events else None
    if proc == "up":
        res = run_up(src, u, spec.delta, max_m=spec.max_m, budget=spec.budget, event_log=events)
    elif proc == "oracle":
        res = run_oracle(src, u, spec.delta, max_m=spec.max_m, budget=spec.budget,
                         free_oracle=spec.free_oracle, event_log=events)
    else:
        if not eps or not caps:
            raise SystemExit("naive needs --epsilon and --captime")
        res = run_naive(src, u, eps[0], spec.delta, caps[0], event_log=events)
    if events is not None:
        write_events(events, args.events)
    dropped = dict((i, m) for m, i in res.eliminations)
    rows = [{"algorithm": i, "name": res.names[i], "winner": res.winner, "cap": res.caps[i],
             "samples": res.samples[i], "time": res.per_algorithm_time[i], "eliminated_at": dropped.get(i)}
            for i in range(len(res.names))]
    summary = res.to_dict()
    print(f"winner {res.winner_name} ({res.termination} after {res.rounds} rounds, "
          f"total time {res.total_time:.6g} s, epsilon {summary['epsilon']:.4g})")
    return Report("run", rows, {**spec.to_dict(), "result": summary})


def _cmd_verify(args) -> Report:
    spec = _spec(args, ["up"], _floats(args.epsilon) or None)
    dists, u, names = spec.distributions(), spec.utility_function(), list(spec.source(0).names)
    caps = _floats(args.captime) or None
    if caps is not None and len(caps) != len(dists):
        raise SystemExit(f"--captime for verify needs one value per algorithm ({len(dists)})")
    rows, written = [], []
    for eps in spec.epsilons:
        res = run_verification(dists, u, eps, caps)
        v = res.verdict
        for i, view in enumerate(res.views):
            rows.append({"epsilon": eps, "algorithm": i, "name": names[i], "utility": res.utilities[i],
                         "gap": res.gaps[i], "kappa": view.kappa, "lb": view.lb, "ub": view.ub,
                         "certified": v.certified, "winner": v.winner})
        print(f"epsilon {eps:g}: " + (f"certified {names[v.winner]}" if v.certified
                                      else f"rejected, violators {[names[i] for i in v.violators]}"))
        if args.emit_witness and not v.certified:
            star = res.views[v.winner]
            for i in v.violators:
                try:
                    ext_i, ext_s = adversarial_extension(dists[i], res.views[i], dists[v.winner], star, u, eps)
                except NoCounterexampleError:
                    continue
                # same disclosed CDFs, but now the claimed winner is not epsilon-optimal
                world = list(dists)
                world[i], world[v.winner] = ext_i, ext_s
                out = Path(args.out)
                out.mkdir(parents=True, exist_ok=True)
                path = out / f"witness-{names[i]}-eps{eps:g}.json"
                dump_synthetic_spec(path, names, world, utility=u.to_spec())
                written.append(path)
    for path in written:
        print(f"witness written to {path}")
    return Report("verify", rows, spec.to_dict())


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    started = time.perf_counter()
    try:
        procs = args.procedure or (["naive"] if args.command == "sweep-captime" else ["up"])
        if args.command == "run":
            report = _cmd_run(args)
        elif args.command == "verify":
            report = _cmd_verify(args)
        else:
            spec = _spec(args, procs, _floats(args.epsilon), _floats(args.captime))
            if args.command == "sweep-captime":
                report = sweep_captime(spec)
            elif args.command == "montecarlo":
                report = montecarlo_correctness(spec)
            elif getattr(args, "delta_grid", None):
                report = sweep_delta(spec, _floats(args.delta_grid))
            else:
                report = sweep_epsilon(spec)
        path = emit_report(report, args.out, args.format)
    except InfeasibleInputsError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - surfaced as exit status 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    wall = time.perf_counter() - started
    print(f"wrote {path} (simulator wall clock {wall:.2f} s)", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
