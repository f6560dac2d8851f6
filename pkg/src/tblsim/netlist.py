"""Line-oriented netlist DSL: parse, format, expand, bill of materials.

Grammar (one statement per line, ``#`` starts a comment):

    source  <id> pressure=<P> [resistance=<R>]
    atm     <id>
    tube    <id> from=<node> to=<node> length=<L> [id=<d>]
    balloon <id> node=<node> [volume=<V>] [compliance=<C>] [burst=<P>] [init=<P>]
    valve   <id> from=<node> to=<node> control=<node> [open_conductance=<G>]
            [leak=<G>] [inflate=<P>] [deflate=<P>] [volume=<V>] [compliance=<C>]
            [burst=<P>] [state=open|closed] [init=<P>]
    gate    NOT|NOR|NAND|AND|OR <id> in=<node>[,<node>] out=<node> supply=<source>
            [length=<L>] [id=<d>] [pulldown_length=<L>] [inflate=<P>] [deflate=<P>]
            [volume=<V>] [compliance=<C>] [burst=<P>] [open_conductance=<G>] [leak=<G>]
    ring    <id> n=<odd int> supply=<source> [taps=<node>,...]
            [pulldown=per-gate|central] [gate overrides...]
    probe   <node>

Quantities take an optional unit suffix from {kPa, mL, cm, mm, m, s};
bare numbers are SI. Node names are created implicitly on first use;
element identifiers must be unique per kind. ``format_circuit`` emits a
canonical form (sorted keys, normalized units, LF endings) whose parse
is structurally identical to the AST it came from.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field as dc_field
from decimal import Decimal

from .defaults import PhysicalDefaults
from .elements import (
    Balloon,
    BalloonParams,
    HysteresisThresholds,
    KinkValveDevice,
    PneumaticNetwork,
    SourceElement,
    TubeElement,
    ValveState,
    check_pressure,
)
from .errors import (
    DuplicateIdError,
    EvenRingError,
    NetlistSyntaxError,
    SupplyMissingError,
    UnboundPortError,
    UnknownKeywordError,
    UnknownUnitError,
)
from .units import DIMENSION, Quantity, from_si

FILE_EXTENSION = ".tbl"

GATE_TYPES = ("NOT", "NOR", "NAND", "AND", "OR")

_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")
_NUMBER_RE = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)([A-Za-z]*)$")
_TOKEN_RE = re.compile(r"\S+")

# value kinds: q:<dimension>, ident, idents, int, flag words
_SCHEMA: dict[str, dict[str, str]] = {
    "source": {"pressure": "q:pressure", "resistance": "q:raw"},
    "atm": {},
    "tube": {"from": "ident", "to": "ident", "length": "q:length", "id": "q:length"},
    "balloon": {
        "node": "ident",
        "volume": "q:volume",
        "compliance": "q:raw",
        "burst": "q:pressure",
        "init": "q:pressure",
    },
    "valve": {
        "from": "ident",
        "to": "ident",
        "control": "ident",
        "open_conductance": "q:raw",
        "leak": "q:raw",
        "inflate": "q:pressure",
        "deflate": "q:pressure",
        "volume": "q:volume",
        "compliance": "q:raw",
        "burst": "q:pressure",
        "state": "ident",
        "init": "q:pressure",
    },
    "gate": {
        "in": "idents",
        "out": "ident",
        "supply": "ident",
        "length": "q:length",
        "id": "q:length",
        "pulldown_length": "q:length",
        "inflate": "q:pressure",
        "deflate": "q:pressure",
        "volume": "q:volume",
        "compliance": "q:raw",
        "burst": "q:pressure",
        "open_conductance": "q:raw",
        "leak": "q:raw",
    },
    "probe": {},
}
_SCHEMA["ring"] = dict(
    _SCHEMA["gate"],
    **{"n": "int", "taps": "idents", "pulldown": "ident"},
)
for _k in ("in", "out"):
    _SCHEMA["ring"].pop(_k)

_REQUIRED: dict[str, tuple[str, ...]] = {
    "source": ("pressure",),
    "atm": (),
    "tube": ("from", "to", "length"),
    "balloon": ("node",),
    "valve": ("from", "to", "control"),
    "gate": ("in", "out", "supply"),
    "ring": ("n", "supply"),
    "probe": (),
}


Value = "Quantity | str | int | tuple[str, ...]"


@dataclass(frozen=True)
class Statement:
    kind: str
    name: str
    params: dict
    gate_type: str | None = None
    line: int = dc_field(default=0, compare=False)

    def get(self, key: str, default=None):
        return self.params.get(key, default)


@dataclass(frozen=True)
class CircuitAst:
    statements: tuple[Statement, ...] = ()

    def of_kind(self, kind: str) -> list[Statement]:
        return [s for s in self.statements if s.kind == kind]

    def with_override(self, name: str, key: str, value) -> "CircuitAst":
        """Return a copy with one statement parameter replaced."""
        out = []
        hit = False
        for s in self.statements:
            if s.name == name and s.kind not in ("probe",):
                schema = _SCHEMA[s.kind]
                if key not in schema:
                    raise UnknownKeywordError(
                        f"{s.kind} {name} has no parameter {key!r}", line=s.line
                    )
                params = dict(s.params)
                raw = _parse_value(value, s.line, 0) if isinstance(value, str) else value
                params[key] = _coerce_value(raw, schema[key], s.line, 0)
                out.append(Statement(s.kind, s.name, params, s.gate_type, s.line))
                hit = True
            else:
                out.append(s)
        if not hit:
            raise UnknownKeywordError(f"no statement named {name!r} to override")
        return CircuitAst(tuple(out))


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _parse_value(text: str, line: int, col: int):
    """Classify a raw value token: quantity, ident, or ident list."""
    m = _NUMBER_RE.match(text)
    if m:
        number, unit = m.groups()
        if unit:
            if unit not in DIMENSION:
                raise UnknownUnitError(f"unknown unit {unit!r}", line=line, column=col)
            return Quantity(float(number), unit).canonical()
        return Quantity(float(number), "")
    if "," in text:
        parts = tuple(p for p in text.split(","))
        for p in parts:
            if not _IDENT_RE.match(p):
                raise NetlistSyntaxError(
                    f"bad identifier {p!r} in list", line=line, column=col
                )
        return parts
    if _IDENT_RE.match(text):
        return text
    if text and text[0] in "+-.0123456789":
        raise NetlistSyntaxError(f"bad number {text!r}", line=line, column=col)
    raise NetlistSyntaxError(f"bad value {text!r}", line=line, column=col)


def _coerce_value(value, kind: str, line: int, col: int):
    """Check a parsed value against the schema kind, normalizing units."""
    if kind == "int":
        if isinstance(value, Quantity) and value.unit == "" and value.value == int(value.value):
            return int(value.value)
        raise NetlistSyntaxError(f"expected an integer, got {value!r}", line=line, column=col)
    if kind == "ident":
        if isinstance(value, str):
            return value
        raise NetlistSyntaxError(f"expected an identifier, got {value!r}", line=line, column=col)
    if kind == "idents":
        if isinstance(value, str):
            return (value,)
        if isinstance(value, tuple):
            return value
        raise NetlistSyntaxError(f"expected identifiers, got {value!r}", line=line, column=col)
    if kind.startswith("q:"):
        dim = kind[2:]
        if not isinstance(value, Quantity):
            raise NetlistSyntaxError(f"expected a number, got {value!r}", line=line, column=col)
        if value.unit == "" and dim != "raw":
            return from_si(value.value, dim)  # bare numbers are SI
        if value.dimension != dim:
            raise NetlistSyntaxError(
                f"expected a {dim} value, got {value.render()!r}", line=line, column=col
            )
        return value
    raise AssertionError(kind)


def parse(text: str) -> CircuitAst:
    """Parse netlist text into an AST; errors carry line and column."""
    statements: list[Statement] = []
    seen: dict[tuple[str, str], int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        tokens = list(_TOKEN_RE.finditer(line))
        if not tokens:
            continue
        kind_tok = tokens[0]
        kind = kind_tok.group(0)
        if kind not in _SCHEMA:
            raise UnknownKeywordError(
                f"unknown statement kind {kind!r}", line=lineno, column=kind_tok.start() + 1
            )
        rest = tokens[1:]
        gate_type = None
        if kind == "gate":
            if not rest:
                raise NetlistSyntaxError("gate needs a type", line=lineno, column=len(line))
            gt = rest[0].group(0)
            if gt.upper() not in GATE_TYPES:
                raise UnknownKeywordError(
                    f"unknown gate type {gt!r}", line=lineno, column=rest[0].start() + 1
                )
            gate_type = gt.upper()
            rest = rest[1:]
        if not rest:
            raise NetlistSyntaxError(
                f"{kind} statement needs a name", line=lineno, column=len(line) + 1
            )
        name_tok = rest[0]
        name = name_tok.group(0)
        if not _IDENT_RE.match(name) or "=" in name:
            raise NetlistSyntaxError(
                f"bad identifier {name!r}", line=lineno, column=name_tok.start() + 1
            )
        schema = _SCHEMA[kind]
        params: dict = {}
        for tok in rest[1:]:
            col = tok.start() + 1
            part = tok.group(0)
            if "=" not in part:
                raise NetlistSyntaxError(
                    f"expected key=value, got {part!r}", line=lineno, column=col
                )
            key, _, val_text = part.partition("=")
            if key not in schema:
                raise UnknownKeywordError(
                    f"{kind} has no parameter {key!r}", line=lineno, column=col
                )
            if key in params:
                raise NetlistSyntaxError(
                    f"duplicate key {key!r}", line=lineno, column=col
                )
            if not val_text:
                raise NetlistSyntaxError(f"empty value for {key!r}", line=lineno, column=col)
            value = _parse_value(val_text, lineno, col + len(key) + 1)
            params[key] = _coerce_value(value, schema[key], lineno, col + len(key) + 1)
        missing = [k for k in _REQUIRED[kind] if k not in params]
        if missing:
            raise NetlistSyntaxError(
                f"{kind} {name} is missing {', '.join(missing)}", line=lineno,
                column=kind_tok.start() + 1,
            )
        dup_key = (kind, name)
        if dup_key in seen:
            raise DuplicateIdError(
                f"{kind} {name!r} already declared on line {seen[dup_key]}",
                line=lineno, column=name_tok.start() + 1,
            )
        seen[dup_key] = lineno
        statements.append(Statement(kind, name, params, gate_type, lineno))
    return CircuitAst(tuple(statements))


def format_circuit(ast: CircuitAst) -> str:
    """Canonical text form: one statement per line, keys sorted, LF ends."""
    lines = []
    for s in ast.statements:
        head = s.kind if s.gate_type is None else f"{s.kind} {s.gate_type}"
        parts = [head, s.name]
        for key in sorted(s.params):
            parts.append(f"{key}={_render_value(s.params[key])}")
        lines.append(" ".join(parts))
    if not lines:
        return ""
    return "\n".join(lines) + "\n"


def _render_value(value) -> str:
    if isinstance(value, Quantity):
        return value.render()
    if isinstance(value, tuple):
        return ",".join(value)
    if isinstance(value, bool):
        raise TypeError("booleans are not netlist values")
    if isinstance(value, int):
        return str(value)
    return str(value)


# ---------------------------------------------------------------------------
# macro expansion
# ---------------------------------------------------------------------------


@dataclass
class _GateParams:
    tube_length: float
    tube_id: float
    pulldown_length: float
    inflate: float
    deflate: float
    volume: float
    compliance: float
    burst: float
    open_conductance: float
    leak: float
    viscosity: float

    @classmethod
    def build(cls, defaults: PhysicalDefaults, stmt: Statement) -> "_GateParams":
        def q(key, fallback):
            v = stmt.get(key)
            return v.si if isinstance(v, Quantity) else fallback

        return cls(
            tube_length=q("length", defaults.device_tube_length),
            tube_id=q("id", defaults.tube_inner_diameter),
            pulldown_length=q("pulldown_length", defaults.pulldown_length),
            inflate=q("inflate", defaults.inflate_kpa * 1e3) / 1e3,
            deflate=q("deflate", defaults.deflate_kpa * 1e3) / 1e3,
            volume=q("volume", defaults.balloon_rest_volume),
            compliance=q("compliance", defaults.balloon_compliance),
            burst=q("burst", defaults.burst_kpa * 1e3) / 1e3,
            open_conductance=q("open_conductance", defaults.open_conductance),
            leak=q("leak", defaults.leak_conductance),
            viscosity=defaults.air_viscosity,
        )

    def thresholds(self) -> HysteresisThresholds:
        return HysteresisThresholds(p_inflate=self.inflate, p_deflate=self.deflate)

    def balloon(self) -> BalloonParams:
        return BalloonParams(
            rest_volume=self.volume, compliance=self.compliance, burst_kpa=self.burst
        )


class _Builder:
    def __init__(self, defaults: PhysicalDefaults):
        self.defaults = defaults
        self.tubes: list[TubeElement] = []
        self.valves: list[KinkValveDevice] = []
        self.balloons: list[Balloon] = []
        self.sources: list[SourceElement] = []
        self.probes: list[str] = []
        self.atmosphere = "ATM"

    def tube(self, name, a, b, length, diameter, viscosity=None):
        self.tubes.append(
            TubeElement.from_geometry(
                name, a, b, length, diameter, viscosity or self.defaults.air_viscosity
            )
        )

    def network(self) -> PneumaticNetwork:
        return PneumaticNetwork(
            tubes=tuple(self.tubes),
            valves=tuple(self.valves),
            balloons=tuple(self.balloons),
            sources=tuple(self.sources),
            atmosphere=self.atmosphere,
            probes=tuple(self.probes),
        )


def _expand_not(
    b: _Builder, name: str, gp: _GateParams, input_node: str, out: str,
    supply_node: str, with_pulldown: bool = True,
    state: ValveState = ValveState.OPEN, init_kpa: float = 0.0,
):
    """supply --tube--> valve --> out; control balloon fed from the input;
    pull-down from out to atmosphere."""
    s1 = f"{name}.s"
    bal = f"{name}.b"
    b.tube(f"{name}.ts", supply_node, s1, gp.tube_length, gp.tube_id)
    b.tube(f"{name}.tc", input_node, bal, gp.tube_length, gp.tube_id)
    b.valves.append(
        KinkValveDevice(
            name=f"{name}.v",
            flow_from=s1,
            flow_to=out,
            control_node=bal,
            balloon=gp.balloon(),
            thresholds=gp.thresholds(),
            open_conductance=gp.open_conductance,
            leak_conductance=gp.leak,
            state=state,
            initial_control_kpa=init_kpa,
        )
    )
    if with_pulldown:
        b.tube(f"{name}.tp", out, b.atmosphere, gp.pulldown_length, gp.tube_id)


def _expand_nor(b, name, gp, in_a, in_b, out, supply_node):
    """Two devices in series on one supply path; one pull-down at the output."""
    s1, mid = f"{name}.s", f"{name}.m"
    ba, bb = f"{name}.b1", f"{name}.b2"
    b.tube(f"{name}.ts", supply_node, s1, gp.tube_length, gp.tube_id)
    b.tube(f"{name}.tc1", in_a, ba, gp.tube_length, gp.tube_id)
    b.tube(f"{name}.tc2", in_b, bb, gp.tube_length, gp.tube_id)
    common = dict(
        balloon=gp.balloon(), thresholds=gp.thresholds(),
        open_conductance=gp.open_conductance, leak_conductance=gp.leak,
    )
    b.valves.append(KinkValveDevice(f"{name}.v1", s1, mid, ba, **common))
    b.valves.append(KinkValveDevice(f"{name}.v2", mid, out, bb, **common))
    b.tube(f"{name}.tp", out, b.atmosphere, gp.pulldown_length, gp.tube_id)


def _expand_nand(b, name, gp, in_a, in_b, out, supply_node):
    """Two parallel supply branches joined at the output; one pull-down."""
    s1, s2 = f"{name}.s1", f"{name}.s2"
    ba, bb = f"{name}.b1", f"{name}.b2"
    b.tube(f"{name}.ts1", supply_node, s1, gp.tube_length, gp.tube_id)
    b.tube(f"{name}.ts2", supply_node, s2, gp.tube_length, gp.tube_id)
    b.tube(f"{name}.tc1", in_a, ba, gp.tube_length, gp.tube_id)
    b.tube(f"{name}.tc2", in_b, bb, gp.tube_length, gp.tube_id)
    common = dict(
        balloon=gp.balloon(), thresholds=gp.thresholds(),
        open_conductance=gp.open_conductance, leak_conductance=gp.leak,
    )
    b.valves.append(KinkValveDevice(f"{name}.v1", s1, out, ba, **common))
    b.valves.append(KinkValveDevice(f"{name}.v2", s2, out, bb, **common))
    b.tube(f"{name}.tp", out, b.atmosphere, gp.pulldown_length, gp.tube_id)


def _expand_gate(b: _Builder, stmt: Statement, defaults: PhysicalDefaults, sources: dict):
    gp = _GateParams.build(defaults, stmt)
    inputs = stmt.get("in", ())
    out = stmt.get("out")
    supply = stmt.get("supply")
    if supply not in sources:
        raise SupplyMissingError(
            f"gate {stmt.name}: supply {supply!r} is not a declared source",
            line=stmt.line,
        )
    supply_node = sources[supply].node
    gt = stmt.gate_type
    need = 1 if gt == "NOT" else 2
    if len(inputs) != need or out is None:
        raise UnboundPortError(
            f"gate {stmt.name}: {gt} takes {need} input(s) and one output",
            line=stmt.line,
        )
    if gt == "NOT":
        _expand_not(b, stmt.name, gp, inputs[0], out, supply_node)
    elif gt == "NOR":
        _expand_nor(b, stmt.name, gp, inputs[0], inputs[1], out, supply_node)
    elif gt == "NAND":
        _expand_nand(b, stmt.name, gp, inputs[0], inputs[1], out, supply_node)
    elif gt == "AND":
        mid = f"{stmt.name}.q"
        _expand_nand(b, f"{stmt.name}.n", gp, inputs[0], inputs[1], mid, supply_node)
        _expand_not(b, f"{stmt.name}.i", gp, mid, out, supply_node)
    elif gt == "OR":
        mid = f"{stmt.name}.q"
        _expand_nor(b, f"{stmt.name}.n", gp, inputs[0], inputs[1], mid, supply_node)
        _expand_not(b, f"{stmt.name}.i", gp, mid, out, supply_node)


def _expand_ring(b: _Builder, stmt: Statement, defaults: PhysicalDefaults, sources: dict):
    gp = _GateParams.build(defaults, stmt)
    n = stmt.get("n")
    if n is None or n < 3 or n % 2 == 0:
        raise EvenRingError(
            f"ring {stmt.name}: n must be an odd integer >= 3, got {n}", line=stmt.line
        )
    supply = stmt.get("supply")
    if supply not in sources:
        raise SupplyMissingError(
            f"ring {stmt.name}: supply {supply!r} is not a declared source",
            line=stmt.line,
        )
    supply_node = sources[supply].node
    taps = list(stmt.get("taps", ()))
    if len(taps) > n:
        raise UnboundPortError(
            f"ring {stmt.name}: {len(taps)} taps for {n} gates", line=stmt.line
        )
    while len(taps) < n:
        taps.append(f"{stmt.name}.q{len(taps) + 1}")
    mode = stmt.get("pulldown", "per-gate")
    if mode not in ("per-gate", "central"):
        raise UnknownKeywordError(
            f"ring {stmt.name}: pulldown must be per-gate or central, got {mode!r}",
            line=stmt.line,
        )
    per_gate = mode == "per-gate"
    for i in range(n):
        gate_name = f"{stmt.name}.g{i + 1}"
        input_node = taps[i - 1]  # cyclic: gate 1 is driven by gate n
        _expand_not(
            b, gate_name, gp, input_node, taps[i], supply_node, with_pulldown=per_gate
        )
    if not per_gate:
        centre = f"{stmt.name}.c"
        for i in range(n):
            b.tube(f"{stmt.name}.tl{i + 1}", taps[i], centre, gp.tube_length, gp.tube_id)
        b.tube(f"{stmt.name}.tp", centre, b.atmosphere, gp.pulldown_length, gp.tube_id)


def expand(ast: CircuitAst, defaults: PhysicalDefaults | None = None) -> PneumaticNetwork:
    """Elaborate an AST into a flat PneumaticNetwork.

    Gate and ring macros expand to tubes, valves and balloons with
    namespaced internal nodes (``<gate>.b`` and friends). The returned
    network is validated.
    """
    defaults = defaults or PhysicalDefaults()
    b = _Builder(defaults)
    atm_stmts = ast.of_kind("atm")
    if atm_stmts:
        b.atmosphere = atm_stmts[0].name
    sources: dict[str, SourceElement] = {}
    for s in ast.of_kind("source"):
        resistance = s.get("resistance")
        src = SourceElement(
            name=s.name,
            node=s.name,
            pressure_kpa=check_pressure(s.get("pressure").si / 1e3, f"source {s.name}"),
            internal_resistance=resistance.si if resistance else 0.0,
        )
        sources[s.name] = src
        b.sources.append(src)

    for stmt in ast.statements:
        if stmt.kind == "tube":
            d = stmt.get("id")
            b.tube(
                stmt.name,
                stmt.get("from"),
                stmt.get("to"),
                stmt.get("length").si,
                d.si if d else defaults.tube_inner_diameter,
            )
        elif stmt.kind == "balloon":
            vol = stmt.get("volume")
            comp = stmt.get("compliance")
            burst = stmt.get("burst")
            init = stmt.get("init")
            b.balloons.append(
                Balloon(
                    name=stmt.name,
                    node=stmt.get("node"),
                    params=BalloonParams(
                        rest_volume=vol.si if vol else defaults.balloon_rest_volume,
                        compliance=comp.si if comp else defaults.balloon_compliance,
                        burst_kpa=burst.si / 1e3 if burst else defaults.burst_kpa,
                    ),
                    initial_kpa=init.si / 1e3 if init else 0.0,
                )
            )
        elif stmt.kind == "valve":
            vol = stmt.get("volume")
            comp = stmt.get("compliance")
            burst = stmt.get("burst")
            init = stmt.get("init")
            inflate = stmt.get("inflate")
            deflate = stmt.get("deflate")
            g_open = stmt.get("open_conductance")
            leak = stmt.get("leak")
            state_txt = stmt.get("state", "open")
            if state_txt not in ("open", "closed"):
                raise NetlistSyntaxError(
                    f"valve {stmt.name}: state must be open or closed", line=stmt.line
                )
            b.valves.append(
                KinkValveDevice(
                    name=stmt.name,
                    flow_from=stmt.get("from"),
                    flow_to=stmt.get("to"),
                    control_node=stmt.get("control"),
                    balloon=BalloonParams(
                        rest_volume=vol.si if vol else defaults.balloon_rest_volume,
                        compliance=comp.si if comp else defaults.balloon_compliance,
                        burst_kpa=burst.si / 1e3 if burst else defaults.burst_kpa,
                    ),
                    thresholds=HysteresisThresholds(
                        p_inflate=inflate.si / 1e3 if inflate else defaults.inflate_kpa,
                        p_deflate=deflate.si / 1e3 if deflate else defaults.deflate_kpa,
                    ),
                    open_conductance=g_open.si if g_open else defaults.open_conductance,
                    leak_conductance=leak.si if leak else defaults.leak_conductance,
                    state=ValveState(state_txt),
                    initial_control_kpa=init.si / 1e3 if init else 0.0,
                )
            )
        elif stmt.kind == "gate":
            _expand_gate(b, stmt, defaults, sources)
        elif stmt.kind == "ring":
            _expand_ring(b, stmt, defaults, sources)
        elif stmt.kind == "probe":
            b.probes.append(stmt.name)

    net = b.network()
    known = set(net.node_order())
    for stmt in ast.of_kind("probe"):
        if stmt.name not in known:
            raise UnboundPortError(
                f"probe references unknown node {stmt.name!r}", line=stmt.line
            )
    return net.validate()


# ---------------------------------------------------------------------------
# bill of materials
# ---------------------------------------------------------------------------

# Per-device consumables and unit prices. One switching device uses one
# straw, one balloon, 30 cm of tubing (two 7.5 cm device tubes plus the
# 15 cm pull-down) and 6 cm^2 of sealing film.
_BOM_UNITS = (
    ("boba straw", 1, "", Decimal("0.08")),
    ("twisting balloon", 1, "", Decimal("0.05")),
    ("PVC tubing (1 mm ID)", 30, "cm", Decimal("0.29")),
    ("sealing film", 6, "cm^2", Decimal("0.03")),
)

COST_PER_DEVICE = Decimal("0.45")

BOM_NOTE = (
    "30 cm tubing per device = two 7.5 cm device tubes + one 15 cm pull-down"
)


@dataclass(frozen=True)
class BomLine:
    description: str
    quantity: int
    unit: str
    cost: Decimal


@dataclass(frozen=True)
class BillOfMaterials:
    device_count: int
    lines: tuple[BomLine, ...]
    total: Decimal
    note: str = BOM_NOTE


def bom(ast: CircuitAst, defaults: PhysicalDefaults | None = None) -> BillOfMaterials:
    """Count switching devices after macro expansion and price the build."""
    net = expand(ast, defaults)
    count = len(net.valves)
    lines = tuple(
        BomLine(desc, qty * count, unit, price * count)
        for desc, qty, unit, price in _BOM_UNITS
    )
    return BillOfMaterials(
        device_count=count,
        lines=lines,
        total=COST_PER_DEVICE * count,
    )
