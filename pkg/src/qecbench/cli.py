"""Command-line entry point: ``qecbench {transpile,simulate,bench,presets}``."""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from . import bench
from .calibration import PRESET_DIR_ENV, build_noise_model, load_device, preset_names
from .circuit import Circuit, dumps, loads
from .errors import QecBenchError
from .simulator import ExecutionOptions, run
from .transpiler import native_problems, transpile


def _read_circuit(path: str) -> Circuit:
    if path == "-":
        return loads(sys.stdin.read())
    p = Path(path)
    if not p.is_file():
        raise QecBenchError(f"circuit file not found: {p}")
    return loads(p.read_text())


def _write(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
        return
    p = Path(out)
    try:
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
    except OSError as exc:
        raise QecBenchError(f"cannot write {p}: {exc.strerror or exc}") from exc


def cmd_presets(args) -> int:
    for name in preset_names():
        d = load_device(name)
        print(f"{name}\t{d.n_qubits} qubits")
    return 0


def cmd_transpile(args) -> int:
    c = _read_circuit(args.circuit)
    device = load_device(args.device)
    result = transpile(c, device, build_noise_model(device))
    text = dumps(result.circuit, result.layout)
    report = result.report()
    if args.format == "json":
        _write(json.dumps(dict(report, circuit=text), indent=2) + "\n", args.out)
        return 0
    lines = [f"# {k}: {json.dumps(v)}" for k, v in report.items()]
    if args.out is None:
        sys.stdout.write("\n".join(lines) + "\n" + text)
    else:
        _write(text, args.out)
        print("\n".join(line[2:] for line in lines))
    return 0


def cmd_simulate(args) -> int:
    c = _read_circuit(args.circuit)
    noise = None
    if args.device:
        device = load_device(args.device)
        problems = native_problems(c, device)
        if problems:
            raise QecBenchError(f"circuit is not native to {device.name} ({problems[0]}); run transpile first")
        noise = build_noise_model(device)
    res = run(c, ExecutionOptions(shots=args.shots, seed=args.seed, noise=noise))
    if args.format == "json":
        doc = {"probabilities": res.probabilities}
        if not res.exact:
            doc.update(shots=res.shots, counts=res.counts)
        _write(json.dumps(doc, indent=2) + "\n", args.out)
        return 0
    if res.exact:
        rows = ["outcome,probability"] + [f"{k},{p!r}" for k, p in res.probabilities.items()]
    else:
        rows = ["outcome,count"] + [f"{k},{n}" for k, n in res.counts.items()]
    _write("\n".join(rows) + "\n", args.out)
    return 0


def cmd_bench(args) -> int:
    source = args.config
    path = Path(source)
    config = bench.load_config(path if path.is_file() else bench.bundled_config(source))
    config = bench.with_overrides(
        config,
        devices=tuple(args.device) if args.device else None,
        shots=args.shots,
        seed=args.seed,
        format=args.format,
        output=args.out,
    )
    result = bench.run_experiment(config)
    text = bench.emit(result, config.format, config.output)
    if config.output is None:
        sys.stdout.write(text)
    else:
        print(f"wrote {len(result.rows)} rows to {config.output}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qecbench",
        description="Transpile, simulate and benchmark small repetition codes on device models.",
        epilog=f"Device presets are looked up in ${PRESET_DIR_ENV} first, then in the bundled set.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("presets", help="list bundled device presets")
    sp.set_defaults(func=cmd_presets)

    sp = sub.add_parser("transpile", help="place a circuit file on a device")
    sp.add_argument("circuit", help="circuit text file, or - for stdin")
    sp.add_argument("--device", required=True, help="preset name or device file")
    sp.add_argument("--format", choices=("text", "json"), default="text")
    sp.add_argument("--out", help="write the transpiled circuit here instead of stdout")
    sp.set_defaults(func=cmd_transpile)

    sp = sub.add_parser("simulate", help="run a circuit file and print its outcome distribution")
    sp.add_argument("circuit", help="circuit text file, or - for stdin")
    sp.add_argument("--device", help="use this device's calibrated noise (default: noiseless)")
    sp.add_argument("--shots", type=int, default=0, help="0 gives exact probabilities")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("bench", help="run an experiment config and emit its sweep table")
    sp.add_argument("--config", required=True, help="config file, or a bundled name (fig7, fig9)")
    sp.add_argument("--device", action="append", help="override the platforms (repeatable)")
    sp.add_argument("--shots", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--format", choices=bench.FORMATS)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "shots", None) is not None and args.shots < 0:
        print("error: --shots must be >= 0", file=sys.stderr)
        return 2
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return args.func(args)
    except (QecBenchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
