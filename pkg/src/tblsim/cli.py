"""Command line front end.

    tblsim sim CIRCUIT --t-end 2.0 [--probe NODE ...] [--out trace.csv]
    tblsim truth CIRCUIT --inputs a,b --output q [--expect EXPR]
    tblsim freq CIRCUIT [--t-end T] [--probe NODE ...]
    tblsim bom CIRCUIT
    tblsim check CIRCUIT

Exit codes: 0 success, 1 usage, 2 netlist or network error, 3 simulation
or analysis error, 4 a verification check that ran but did not match.
"""

from __future__ import annotations

import argparse
import json
import sys

from .defaults import load_defaults
from .engine import (
    SimConfig,
    dc_operating_point,
    extract_frequency,
    simulate,
)
from .errors import (
    EngineError,
    NetlistError,
    NetworkError,
    TblError,
    VerifyError,
)
from .netlist import bom as make_bom
from .netlist import expand, format_circuit, parse
from .verify import LogicLevels, check_against_boolean, truth_table

USAGE_EXIT = 1
NETLIST_EXIT = 2
ANALYSIS_EXIT = 3
MISMATCH_EXIT = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _build_parser() -> _Parser:
    p = _Parser(prog="tblsim", description="tube-balloon logic circuit simulator")
    p.add_argument(
        "--format",
        choices=("text", "csv", "json-lines"),
        default="text",
        help="output format (default: text)",
    )
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="NAME.KEY=VALUE",
        dest="overrides",
        help="override a statement parameter, or KEY=VALUE for a default",
    )
    p.add_argument("--defaults", metavar="FILE", help="JSON defaults file")
    p.add_argument(
        "--seed", type=int, default=None, help="reserved for stochastic extensions"
    )
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("sim", help="transient simulation to CSV")
    sim.add_argument("circuit")
    sim.add_argument("--t-end", type=float, default=2.0, metavar="SECONDS")
    sim.add_argument("--sample-interval", type=float, default=1e-3, metavar="SECONDS")
    sim.add_argument(
        "--probe",
        action="append",
        default=None,
        metavar="NODE",
        help="probe node (repeatable; replaces probes from the file)",
    )
    sim.add_argument("--out", metavar="FILE", help="write CSV here instead of stdout")
    sim.add_argument("--svg", metavar="FILE", help="also write an SVG plot")

    tr = sub.add_parser("truth", help="enumerate a truth table")
    tr.add_argument("circuit")
    tr.add_argument("--inputs", required=True, metavar="NODE,NODE")
    tr.add_argument("--output", required=True, metavar="NODE")
    tr.add_argument(
        "--expect", metavar="EXPR", help="boolean reference, e.g. '!(a|b)'"
    )

    fr = sub.add_parser("freq", help="oscillation frequency and phases")
    fr.add_argument("circuit")
    fr.add_argument("--t-end", type=float, default=2.0, metavar="SECONDS")
    fr.add_argument("--probe", action="append", default=None, metavar="NODE")
    fr.add_argument(
        "--min-amplitude", type=float, default=1.0, metavar="KPA",
        help="swing below this does not count as oscillation",
    )

    bm = sub.add_parser("bom", help="bill of materials and cost")
    bm.add_argument("circuit")

    ck = sub.add_parser("check", help="parse, expand and validate only")
    ck.add_argument("circuit")
    ck.add_argument(
        "--canonical", action="store_true", help="print the canonical netlist"
    )
    return p


def _read_circuit(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise NetlistError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _apply_overrides(ast, defaults: PhysicalDefaults, pairs: list[str]):
    """NAME.KEY=VALUE patches one statement; KEY=VALUE patches a default."""
    patch: dict[str, float] = {}
    for pair in pairs:
        if "=" not in pair:
            raise NetlistError(f"--set needs NAME.KEY=VALUE, got {pair!r}")
        target, _, value = pair.partition("=")
        if "." in target:
            name, _, key = target.rpartition(".")
            ast = ast.with_override(name, key, value)
        else:
            try:
                patch[target] = float(value)
            except ValueError:
                raise NetlistError(f"bad value for {target!r}: {value!r}") from None
    if patch:
        try:
            defaults = defaults.merged(patch)
        except ValueError as exc:
            raise NetlistError(str(exc)) from None
    return ast, defaults


def _diag(exc: TblError, path: str) -> str:
    loc = path
    line = getattr(exc, "line", None)
    col = getattr(exc, "column", None)
    if line:
        loc += f":{line}"
        if col:
            loc += f":{col}"
    return f"{loc}: {exc.code}: {exc}"


def _emit(text: str, out_path: str | None):
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _svg_plot(trace, path: str):
    """Minimal line plot, one polyline per probe."""
    width, height, pad = 800, 400, 40
    lo = float(trace.pressures_kpa.min())
    hi = float(trace.pressures_kpa.max())
    if hi - lo < 1e-9:
        hi = lo + 1.0
    t0, t1 = float(trace.times[0]), float(trace.times[-1])
    if t1 - t0 <= 0:
        t1 = t0 + 1.0

    def sx(t):
        return pad + (t - t0) / (t1 - t0) * (width - 2 * pad)

    def sy(p):
        return height - pad - (p - lo) / (hi - lo) * (height - 2 * pad)

    colours = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{pad}" y="20" font-size="12">kPa vs s '
        f"({lo:.1f} to {hi:.1f} kPa, {t0:g} to {t1:g} s)</text>",
    ]
    for i, probe in enumerate(trace.probes):
        col = trace.column(probe)
        pts = " ".join(
            f"{sx(t):.2f},{sy(p):.2f}" for t, p in zip(trace.times, col)
        )
        c = colours[i % len(colours)]
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{width - pad + 2}" y="{pad + 14 * i}" font-size="11" '
            f'fill="{c}">{probe}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def _cmd_sim(args, ast, defaults) -> int:
    net = expand(ast, defaults)
    if args.t_end <= 0:
        print("tblsim: error: --t-end must be positive", file=sys.stderr)
        return USAGE_EXIT
    cfg = SimConfig(
        t_end=args.t_end,
        sample_interval=args.sample_interval,
        probes=tuple(args.probe) if args.probe else None,
    )
    trace = simulate(net, cfg)
    for w in trace.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if args.format == "json-lines":
        lines = []
        for k, t in enumerate(trace.times):
            rec = {"time_s": float(t)}
            rec.update(
                {p: float(trace.pressures_kpa[k, i]) for i, p in enumerate(trace.probes)}
            )
            lines.append(json.dumps(rec))
        _emit("\n".join(lines) + "\n", args.out)
    else:
        _emit(trace.to_csv(), args.out)
    if args.svg:
        _svg_plot(trace, args.svg)
    return 0


def _cmd_truth(args, ast, defaults) -> int:
    net = expand(ast, defaults)
    inputs = tuple(s for s in args.inputs.split(",") if s)
    levels = LogicLevels(
        drive_high_kpa=defaults.supply_kpa,
        read_high_min_kpa=defaults.inflate_kpa,
        read_low_max_kpa=defaults.deflate_kpa,
    )
    table = truth_table(net, inputs, args.output, levels)
    if args.format == "json-lines":
        for row in table.rows:
            print(
                json.dumps(
                    {
                        "inputs": dict(zip(table.input_nodes, row.inputs)),
                        "output": row.output,
                        "output_kpa": round(row.output_kpa, 3),
                    }
                )
            )
    else:
        head = " ".join(table.input_nodes)
        print(f"{head} | {table.output_node} (kPa)")
        for row in table.rows:
            bits = " ".join(str(b) for b in row.inputs)
            print(f"{bits} | {row.output} ({row.output_kpa:.2f})")
    if args.expect:
        report = check_against_boolean(table, args.expect)
        if not report.passed:
            for m in report.mismatches:
                assign = ", ".join(
                    f"{n}={b}" for n, b in zip(table.input_nodes, m.inputs)
                )
                print(
                    f"mismatch at {assign}: expected {m.expected}, "
                    f"got {m.actual} ({m.output_kpa:.2f} kPa)",
                    file=sys.stderr,
                )
            return MISMATCH_EXIT
        print(f"matches {args.expect}")
    return 0


def _cmd_freq(args, ast, defaults) -> int:
    net = expand(ast, defaults)
    cfg = SimConfig(
        t_end=args.t_end,
        sample_interval=min(1e-3, args.t_end / 2000),
        probes=tuple(args.probe) if args.probe else None,
    )
    trace = simulate(net, cfg)
    report = extract_frequency(trace, trace.probes[0], min_amplitude_kpa=args.min_amplitude)
    if args.format == "json-lines":
        for probe in trace.probes:
            print(
                json.dumps(
                    {
                        "probe": probe,
                        "frequency_hz": report.frequency_hz,
                        "peak_kpa": report.peaks_kpa[probe],
                        "trough_kpa": report.troughs_kpa[probe],
                        "phase_deg": report.phase_deg[probe],
                        "duty": report.duty,
                        "cycles": report.cycles,
                    }
                )
            )
    else:
        print(
            f"frequency: {report.frequency_hz:.3f} Hz over {report.cycles} cycles "
            f"(duty {report.duty:.2f}, reference probe {report.probe})"
        )
        for probe in trace.probes:
            print(
                f"  {probe}: peak {report.peaks_kpa[probe]:.2f} kPa, trough "
                f"{report.troughs_kpa[probe]:.2f} kPa, phase {report.phase_deg[probe]:.1f} deg"
            )
        for note in report.assumptions:
            print(f"note: {note}")
    return 0


def _cmd_bom(args, ast, defaults) -> int:
    bill = make_bom(ast, defaults)
    if args.format == "json-lines":
        for line in bill.lines:
            print(
                json.dumps(
                    {
                        "item": line.description,
                        "quantity": line.quantity,
                        "unit": line.unit,
                        "cost_usd": str(line.cost),
                    }
                )
            )
        print(
            json.dumps(
                {
                    "devices": bill.device_count,
                    "total_usd": str(bill.total),
                    "note": bill.note,
                }
            )
        )
    else:
        print(f"devices: {bill.device_count}")
        for line in bill.lines:
            qty = f"{line.quantity} {line.unit}".strip()
            print(f"  {line.description}: {qty} (${line.cost})")
        print(f"total: ${bill.total}")
        print(f"note: {bill.note}")
    return 0


def _cmd_check(args, ast, defaults) -> int:
    net = expand(ast, defaults)
    if args.canonical:
        sys.stdout.write(format_circuit(ast))
        return 0
    n_nodes = len(net.node_order())
    print(
        f"ok: {len(net.valves)} valves, {len(net.tubes)} tubes, "
        f"{len(net.balloons) + sum(1 for v in net.valves if v.balloon)} balloons, "
        f"{n_nodes} nodes"
    )
    try:
        steady = dc_operating_point(net)
    except EngineError as exc:
        if exc.code != "AstableCircuit":
            raise
        print("operating point: none (astable; every assignment re-switches)")
        return 0
    states = ", ".join(
        f"{name}={state.value}" for name, state in sorted(steady.valve_states.items())
    )
    print(f"operating point: {states if states else 'no valves'}")
    if len(steady.fixed_points) > 1:
        print(f"note: {len(steady.fixed_points)} distinct operating points exist")
    return 0


_COMMANDS = {
    "sim": _cmd_sim,
    "truth": _cmd_truth,
    "freq": _cmd_freq,
    "bom": _cmd_bom,
    "check": _cmd_check,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_EXIT
    path = args.circuit
    try:
        defaults = load_defaults(args.defaults)
    except ValueError as exc:
        print(f"tblsim: error: defaults: {exc}", file=sys.stderr)
        return USAGE_EXIT
    try:
        text = _read_circuit(path)
        ast = parse(text)
        ast, defaults = _apply_overrides(ast, defaults, args.overrides)
        return _COMMANDS[args.command](args, ast, defaults)
    except (NetlistError, NetworkError) as exc:
        print(_diag(exc, path), file=sys.stderr)
        return NETLIST_EXIT
    except (EngineError, VerifyError) as exc:
        print(_diag(exc, path), file=sys.stderr)
        return ANALYSIS_EXIT
    except TblError as exc:
        print(_diag(exc, path), file=sys.stderr)
        return ANALYSIS_EXIT


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
