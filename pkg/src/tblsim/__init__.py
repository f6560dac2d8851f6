"""Lumped-parameter simulator for tube-balloon pneumatic logic."""

from .defaults import PhysicalDefaults, load_defaults
from .elements import (
    Balloon,
    BalloonParams,
    HysteresisThresholds,
    KinkValveDevice,
    PneumaticNetwork,
    SourceElement,
    TubeElement,
    ValveState,
    balloon_pressure,
    element_flow,
    tube_resistance,
    valve_step,
)
from .engine import (
    CalibrationBounds,
    CalibrationResult,
    OscillationReport,
    SimConfig,
    SteadyState,
    Trace,
    branch_flows,
    calibrate_oscillator,
    dc_operating_point,
    extract_frequency,
    node_residuals,
    simulate,
    solve_pressures,
)
from .errors import (
    AstableCircuitError,
    CalibrationFailedError,
    DuplicateIdError,
    EngineError,
    EvenRingError,
    IndeterminateLevelError,
    NetlistError,
    NetlistSyntaxError,
    NetworkError,
    NoOscillationError,
    NonConvergenceError,
    SingularNetworkError,
    SupplyMissingError,
    TblError,
    TooManyValvesError,
    UnboundPortError,
    UnknownKeywordError,
    UnknownUnitError,
    UnknownVariableError,
    VerifyError,
)
from .netlist import (
    BillOfMaterials,
    BomLine,
    CircuitAst,
    Statement,
    bom,
    expand,
    format_circuit,
    parse,
)
from .units import Quantity, from_si
from .verify import (
    CheckReport,
    FanoutReport,
    LogicLevels,
    TruthRow,
    TruthTable,
    check_against_boolean,
    fanout_limit,
    truth_table,
)

__version__ = "0.1.0"

__all__ = [
    "AstableCircuitError",
    "Balloon",
    "BalloonParams",
    "BillOfMaterials",
    "BomLine",
    "CalibrationBounds",
    "CalibrationFailedError",
    "CalibrationResult",
    "CheckReport",
    "CircuitAst",
    "DuplicateIdError",
    "EngineError",
    "EvenRingError",
    "FanoutReport",
    "HysteresisThresholds",
    "IndeterminateLevelError",
    "KinkValveDevice",
    "LogicLevels",
    "NetlistError",
    "NetlistSyntaxError",
    "NetworkError",
    "NoOscillationError",
    "NonConvergenceError",
    "OscillationReport",
    "PhysicalDefaults",
    "PneumaticNetwork",
    "Quantity",
    "SimConfig",
    "SingularNetworkError",
    "SourceElement",
    "Statement",
    "SteadyState",
    "SupplyMissingError",
    "TblError",
    "TooManyValvesError",
    "Trace",
    "TruthRow",
    "TruthTable",
    "TubeElement",
    "UnboundPortError",
    "UnknownKeywordError",
    "UnknownUnitError",
    "UnknownVariableError",
    "ValveState",
    "VerifyError",
    "balloon_pressure",
    "bom",
    "branch_flows",
    "calibrate_oscillator",
    "check_against_boolean",
    "dc_operating_point",
    "element_flow",
    "expand",
    "extract_frequency",
    "fanout_limit",
    "format_circuit",
    "from_si",
    "load_defaults",
    "node_residuals",
    "parse",
    "simulate",
    "solve_pressures",
    "truth_table",
    "tube_resistance",
    "valve_step",
]
