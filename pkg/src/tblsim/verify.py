"""Static verification: truth tables, boolean reference checks, fan-out.

Logic levels follow the switching band of the devices themselves: an
output at or above the inflate threshold reads as 1 (it would close a
downstream valve), at or below the deflate threshold as 0, and anything
strictly between is indeterminate and refused rather than rounded.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .defaults import PhysicalDefaults
from .elements import PneumaticNetwork, ValveState
from .engine import solve_pressures
from .errors import IndeterminateLevelError, UnknownVariableError, VerifyError


@dataclass(frozen=True)
class LogicLevels:
    drive_high_kpa: float = 145.0
    drive_low_kpa: float = 0.0
    read_high_min_kpa: float = 85.0
    read_low_max_kpa: float = 60.0

    def __post_init__(self):
        if not self.read_low_max_kpa < self.read_high_min_kpa:
            raise ValueError("read thresholds must leave a forbidden band")
        if self.drive_high_kpa < self.read_high_min_kpa:
            raise ValueError("drive high cannot read as low")

    def drive(self, bit: int) -> float:
        return self.drive_high_kpa if bit else self.drive_low_kpa

    def read(self, pressure_kpa: float, node: str) -> int:
        if pressure_kpa >= self.read_high_min_kpa:
            return 1
        if pressure_kpa <= self.read_low_max_kpa:
            return 0
        raise IndeterminateLevelError(
            f"node {node!r} sits at {pressure_kpa:.2f} kPa, inside the "
            f"({self.read_low_max_kpa:g}, {self.read_high_min_kpa:g}) kPa band",
            node=node,
            pressure_kpa=pressure_kpa,
        )


@dataclass(frozen=True)
class TruthRow:
    inputs: tuple[int, ...]
    output: int
    output_kpa: float


@dataclass(frozen=True)
class TruthTable:
    input_nodes: tuple[str, ...]
    output_node: str
    rows: tuple[TruthRow, ...]

    def bits(self) -> dict[tuple[int, ...], int]:
        return {r.inputs: r.output for r in self.rows}


def truth_table(
    net: PneumaticNetwork,
    input_nodes: tuple[str, ...] | list[str],
    output_node: str,
    levels: LogicLevels | None = None,
) -> TruthTable:
    """Drive every input combination and read the settled output level.

    Inputs are held by ideal sources; each row starts from the network's
    declared valve states so rows are independent of one another.
    """
    levels = levels or LogicLevels()
    input_nodes = tuple(input_nodes)
    rows = []
    for bits in itertools.product((0, 1), repeat=len(input_nodes)):
        pins = {n: levels.drive(b) for n, b in zip(input_nodes, bits)}
        pinned = net.with_pins(pins)
        steady = _settle(pinned)
        kpa = float(steady.node_pressures_kpa[output_node])
        rows.append(TruthRow(inputs=bits, output=levels.read(kpa, output_node), output_kpa=kpa))
    return TruthTable(input_nodes, output_node, tuple(rows))


def _settle(net: PneumaticNetwork):
    from .engine import dc_operating_point

    return dc_operating_point(net)


# ---------------------------------------------------------------------------
# boolean reference expressions
# ---------------------------------------------------------------------------

# grammar:  expr := term ('|' term)* ; term := factor ('&' factor)* ;
#           factor := '!' factor | '(' expr ')' | name | '0' | '1'


class _BoolParser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def parse(self):
        node = self._expr()
        self._skip()
        if self.pos != len(self.text):
            raise VerifyError(
                f"trailing input at position {self.pos}: {self.text[self.pos:]!r}"
            )
        return node

    def _skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def _peek(self):
        self._skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def _expr(self):
        node = self._term()
        while self._peek() == "|":
            self.pos += 1
            node = ("or", node, self._term())
        return node

    def _term(self):
        node = self._factor()
        while self._peek() == "&":
            self.pos += 1
            node = ("and", node, self._factor())
        return node

    def _factor(self):
        ch = self._peek()
        if ch == "!":
            self.pos += 1
            return ("not", self._factor())
        if ch == "(":
            self.pos += 1
            node = self._expr()
            if self._peek() != ")":
                raise VerifyError(f"expected ')' at position {self.pos}")
            self.pos += 1
            return node
        if ch and ch in "01":
            self.pos += 1
            return ("const", int(ch))
        start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos].isalnum() or self.text[self.pos] in "_."
        ):
            self.pos += 1
        if self.pos == start:
            raise VerifyError(f"expected a variable at position {start}")
        return ("var", self.text[start:self.pos])


def _eval_bool(node, env: dict[str, int]) -> int:
    op = node[0]
    if op == "const":
        return node[1]
    if op == "var":
        if node[1] not in env:
            raise UnknownVariableError(
                f"expression names {node[1]!r}; table has {sorted(env)}"
            )
        return env[node[1]]
    if op == "not":
        return 1 - _eval_bool(node[1], env)
    if op == "and":
        return _eval_bool(node[1], env) & _eval_bool(node[2], env)
    if op == "or":
        return _eval_bool(node[1], env) | _eval_bool(node[2], env)
    raise AssertionError(op)


@dataclass(frozen=True)
class Mismatch:
    inputs: tuple[int, ...]
    expected: int
    actual: int
    output_kpa: float


@dataclass(frozen=True)
class CheckReport:
    passed: bool
    expression: str
    mismatches: tuple[Mismatch, ...]


def check_against_boolean(table: TruthTable, expression: str) -> CheckReport:
    """Compare a measured truth table against a reference expression.

    Variables in the expression are the table's input node names.
    """
    tree = _BoolParser(expression).parse()
    bad = []
    for row in table.rows:
        env = dict(zip(table.input_nodes, row.inputs))
        want = _eval_bool(tree, env)
        if want != row.output:
            bad.append(Mismatch(row.inputs, want, row.output, row.output_kpa))
    return CheckReport(passed=not bad, expression=expression, mismatches=tuple(bad))


# ---------------------------------------------------------------------------
# fan-out
# ---------------------------------------------------------------------------

_FANOUT_CAP = 1024


@dataclass(frozen=True)
class FanoutReport:
    limit: int
    unbounded: bool
    threshold_kpa: float
    samples: tuple[tuple[int, float], ...]

    def sample_dict(self) -> dict[int, float]:
        return dict(self.samples)


def fanout_limit(
    supply_kpa: float = 145.0,
    internal_resistance: float = 0.0,
    defaults: PhysicalDefaults | None = None,
    levels: LogicLevels | None = None,
    cap: int = _FANOUT_CAP,
) -> FanoutReport:
    """Largest load count a high output can still switch.

    The driver output feeds every load's control balloon. Worst case for
    the supply is the instant before the loads switch: their valves are
    still open, each pulling supply current through its own pull-down,
    which drags the shared output down through the source's internal
    resistance. A load switches only if its control node still reaches
    the inflate threshold in that state.
    """
    defaults = defaults or PhysicalDefaults()
    levels = levels or LogicLevels()
    threshold = levels.read_high_min_kpa

    def control_kpa(n: int) -> float:
        net = _fanout_network(n, supply_kpa, internal_resistance, defaults)
        states = {v.name: ValveState.OPEN for v in net.valves}
        pressures = solve_pressures(net, states)
        return pressures["load1.b"]

    samples: list[tuple[int, float]] = []

    def ok(n: int) -> bool:
        kpa = control_kpa(n)
        samples.append((n, kpa))
        return kpa >= threshold

    if not ok(1):
        return FanoutReport(0, False, threshold, tuple(sorted(set(samples))))
    lo = 1
    hi = 1
    while hi < cap:
        hi = min(hi * 2, cap)
        if ok(hi):
            lo = hi
        else:
            break
    else:
        return FanoutReport(cap, True, threshold, tuple(sorted(set(samples))))
    if lo == cap:
        return FanoutReport(cap, True, threshold, tuple(sorted(set(samples))))
    # invariant: ok(lo), not ok(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return FanoutReport(lo, False, threshold, tuple(sorted(set(samples))))


def _fanout_network(
    n: int, supply_kpa: float, internal_resistance: float, defaults: PhysicalDefaults
) -> PneumaticNetwork:
    """One inverter driving n identical inverter loads from one source."""
    from .netlist import CircuitAst, Statement, expand
    from .units import Quantity

    stmts = [
        Statement(
            "source",
            "SUP",
            {
                "pressure": Quantity(supply_kpa, "kPa"),
                "resistance": Quantity(internal_resistance, ""),
            },
        ),
        Statement(
            "gate", "drv", {"in": ("x",), "out": "y", "supply": "SUP"}, gate_type="NOT"
        ),
    ]
    for i in range(1, n + 1):
        stmts.append(
            Statement(
                "gate",
                f"load{i}",
                {"in": ("y",), "out": f"z{i}", "supply": "SUP"},
                gate_type="NOT",
            )
        )
    net = expand(CircuitAst(tuple(stmts)), defaults)
    # the driver input must be low so its own valve stays open and drives y high
    return net.with_pins({"x": 0.0})
