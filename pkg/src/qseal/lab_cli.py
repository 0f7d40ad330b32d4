"""Command-line entry point: ``qseal-lab``.

Exit codes: 0 when every pass flag holds, 1 when any flag fails, 2 for an
invalid invocation or spec.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import lab
from . import seal_bit as sb
from . import seal_string as ss
from .errors import MalformedHeader
from .rng import stream

EXIT_OK, EXIT_FLAGGED, EXIT_INVALID = 0, 1, 2


def _num_list(kind):
    def parse(text: str) -> list:
        try:
            return [kind(x) for x in text.split(",") if x.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    p.add_argument("--trials", type=int, default=None, help="trials per grid cell (>= 100)")
    p.add_argument("--config", type=Path, default=None, help="YAML experiment config; flags override it")
    p.add_argument("--out", default=None, help="CSV path (default $QSEAL_OUT_DIR/<name>.csv)")
    p.add_argument("--workers", type=int, default=None)


def _grid_flags(p: argparse.ArgumentParser, keys) -> None:
    for key in keys:
        kind = int if key in ("s", "m", "n", "N", "payload") else float
        p.add_argument(f"--{key}", type=_num_list(kind), default=None, metavar="V[,V...]")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qseal-lab", description="Quantum seal and bit-commitment experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    demo = sub.add_parser("seal-demo", help="seal one string, optionally read it, and check it")
    demo.add_argument("--seed", type=int, default=0)
    demo.add_argument("--N", type=int, default=None, help="string length (default 8, or 40 with a rule)")
    demo.add_argument("--Theta", type=float, default=math.pi / 8)
    demo.add_argument("--alpha", type=float, default=0.25)
    demo.add_argument("--read", action=argparse.BooleanOptionalAction, default=True)
    demo.add_argument("--rule", choices=("none", "parity", "rotated-pair"), default="none")
    demo.add_argument("--angle", type=int, default=15, help="rotated-pair angle in whole degrees, 0-15")
    demo.add_argument("--bit", type=int, choices=(0, 1), default=1)
    demo.add_argument("--out", default=None, help="write the JSON-lines log here instead of stdout")

    basic = sub.add_parser("commit-basic", help="batch of basic-protocol sessions")
    basic.add_argument("--strategy", choices=("honest", "flip", "guess", "deferred-choice"), default=None)
    basic.add_argument("--target-b", type=int, choices=(0, 1), default=None)
    _grid_flags(basic, ("s", "m", "Theta", "alpha"))
    _common(basic)

    adv = sub.add_parser("commit-advanced", help="batch of advanced-protocol sessions")
    adv.add_argument("--strategy", choices=("honest", "flip", "guess", "random-index", "collective-search"), default=None)
    adv.add_argument("--target-b", type=int, choices=(0, 1), default=None)
    adv.add_argument("--t-max", type=int, default=None)
    _grid_flags(adv, ("s", "m", "n", "Theta", "alpha"))
    _common(adv)

    attack = sub.add_parser("attack", help="run one attack strategy over a grid")
    attack.add_argument("--strategy", choices=sorted(lab.STRATEGY_PROTOCOLS), default=None)
    attack.add_argument("--protocol", choices=lab.PROTOCOLS, default=None,
                        help="defaults to the only protocol the strategy applies to")
    attack.add_argument("--target-b", type=int, choices=(0, 1), default=None)
    attack.add_argument("--t-max", type=int, default=None)
    _grid_flags(attack, lab.GRID_KEYS)
    _common(attack)

    sweep = sub.add_parser("sweep", help="run a grid described entirely by a config file")
    _common(sweep)
    return parser


def _seal_demo(args) -> int:
    N = args.N if args.N is not None else (8 if args.rule == "none" else 40)
    params = ss.SealParams(args.Theta, args.alpha, N)
    rng = stream(args.seed, 0)
    log = []
    if args.rule == "none":
        bits = rng.integers(0, 2, size=N).tolist()
        regs, record = ss.seal(bits, params, rng)
        layout = None
    else:
        tail = (N - 2, N - 1)
        rule = sb.ParityOfPositions(tail) if args.rule == "parity" else sb.RotatedPairParity(tail, args.angle * sb.DEGREE)
        regs, record, layout = sb.seal_bit(args.bit, rule, params, rng)
    log.append({"event": "seal", "params": params.to_dict(), "epsilon": ss.max_error_rate(params),
                "bits": "".join(map(str, record.bits)),
                **({"layout": layout.to_dict(), "bit": args.bit} if layout else {})})
    if args.read:
        if layout is None:
            seen = ss.read(regs, rng)
            log.append({"event": "read", "bits": "".join(map(str, seen)),
                        "errors": sum(a != b for a, b in zip(seen, record.bits))})
        else:
            try:
                log.append({"event": "read_bit", "decoded": sb.read_bit(regs, rng)})
            except MalformedHeader as exc:
                # header qubits can flip on an honest read too
                log.append({"event": "read_bit", "decoded": None, "error": str(exc)})
    report = ss.check(regs, record, rng)
    log.append({"event": "check", "verdict": report.verdict, "failed": sorted(report.failed_indices)})
    text = "".join(json.dumps(entry, sort_keys=True) + "\n" for entry in log)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _spec_from_args(args) -> lab.ExperimentSpec:
    overrides = {
        "seed": args.seed,
        "trials": args.trials,
        "out": args.out,
        "workers": args.workers,
        "strategy": getattr(args, "strategy", None),
        "target_b": getattr(args, "target_b", None),
        "t_max": getattr(args, "t_max", None),
    }
    if args.command == "commit-basic":
        overrides["protocol"] = "basic"
    elif args.command == "commit-advanced":
        overrides["protocol"] = "advanced"
    elif args.command == "attack":
        protocol = args.protocol
        if protocol is None and args.strategy:
            options = lab.STRATEGY_PROTOCOLS[args.strategy]
            protocol = options[0] if len(options) == 1 else None
        overrides["protocol"] = protocol
    grid = {k: getattr(args, k) for k in lab.GRID_KEYS if getattr(args, k, None) is not None}

    if args.config:
        spec = lab.ExperimentSpec.from_config(args.config, **overrides)
        spec.grid = {**spec.grid, **grid}
        return spec
    if overrides.get("protocol") is None:
        raise lab.InvalidSpec(["protocol not given; pass --protocol or --config"])
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.command == "attack" and "strategy" not in overrides:
        raise lab.InvalidSpec(["attack needs --strategy"])
    return lab.ExperimentSpec(grid=grid, **overrides)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "seal-demo":
        try:
            return _seal_demo(args)
        except ValueError as exc:
            print(f"qseal-lab: {exc}", file=sys.stderr)
            return EXIT_INVALID
    if args.command == "sweep" and args.config is None:
        print("qseal-lab: sweep requires --config", file=sys.stderr)
        return EXIT_INVALID
    try:
        spec = _spec_from_args(args)
        rows, ok = lab.run_experiment(spec)
    except lab.InvalidSpec as exc:
        print(f"qseal-lab: {exc}", file=sys.stderr)
        return EXIT_INVALID
    path = lab.write_report(spec, rows)
    for row in rows:
        status = "PASS" if row["pass"] else "FAIL"
        print(f"[{status}] cell {row['cell']}: {row['rate_name']}={row['rate']:.6g} "
              f"ci=({row['ci_lo']:.4g},{row['ci_hi']:.4g}) ref={lab._fmt(row['reference'])}")
    print(f"wrote {path}")
    return EXIT_OK if ok else EXIT_FLAGGED


if __name__ == "__main__":
    sys.exit(main())
