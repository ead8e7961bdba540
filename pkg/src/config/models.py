"""
Data models for scenario files using dataclasses for type safety.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, List, Optional


class ControllerKind(Enum):
    """Enum for controller kinds."""
    UNCONSTRAINED_EQUALITY = "unconstrained-equality"
    UNCONSTRAINED_EXPLICIT = "unconstrained-explicit"
    UNCONSTRAINED_TERMINAL_COST = "unconstrained-terminal-cost"
    CONSTRAINED = "constrained"


AUTO_BISECT = "auto-bisect"
DEADBEAT_GAIN = "deadbeat"
TERMINAL_WEIGHT_KEYWORDS = ("identity", "lyapunov")


@dataclass
class PlantConfig:
    """Plant matrices, A row-major and B as a flat column."""
    a: Optional[List[List[float]]] = None
    b: Optional[List[float]] = None


@dataclass
class WeightsConfig:
    """Stage weights; q is a scalar (q·I) or a matrix."""
    q: Any = 1.0
    r: float = 0.1


@dataclass
class ControllerConfig:
    """Configuration for the controller."""
    kind: str = ControllerKind.UNCONSTRAINED_EQUALITY.value
    stabilizing_gain: Any = DEADBEAT_GAIN
    terminal_weight: Any = "identity"


@dataclass
class StateConstraintConfig:
    """State polytope H·x ≤ h; empty leaves the state unconstrained."""
    h: List[List[float]] = field(default_factory=list)
    rhs: List[float] = field(default_factory=list)


@dataclass
class ConstraintsConfig:
    """Configuration for the constraint sets."""
    state: StateConstraintConfig = field(default_factory=StateConstraintConfig)
    u_min: float = -1e9
    u_max: float = 1e9
    terminal_halfwidth: Any = AUTO_BISECT


@dataclass
class SimulationConfig:
    """Configuration for closed-loop runs."""
    x0: Optional[List[float]] = None
    steps: int = 20
    seed: int = 0
    settle_tolerance: float = 1e-9


@dataclass
class VerifyConfig:
    """Configuration for the property suite."""
    random_systems: int = 100
    random_runs: int = 50
    max_dimension: int = 5
    steps: int = 40
    workers: int = 4


@dataclass
class OutputConfig:
    """Result file locations; file names are relative to directory."""
    directory: str = "./out"
    csv: str = "trajectory.csv"
    svg: str = "trajectory.svg"
    report: str = "design_report.txt"
    verify_report: str = "verify_report.json"


@dataclass
class ReferenceConfig:
    """Published design values, compared but never gating."""
    deadbeat_gain: Optional[List[float]] = None
    terminal_weight: Optional[List[List[float]]] = None
    tolerance: float = 1e-3


@dataclass
class LoggingConfig:
    """Configuration for logging."""
    level: str = "WARNING"
    log_to_file: bool = False
    log_file_path: str = "./logs/deadbeat_mpc.log"
    max_file_size_mb: int = 10
    backup_count: int = 3
    log_to_console: bool = True


@dataclass
class Scenario:
    """Main scenario configuration."""
    name: str = "scenario"
    plant: PlantConfig = field(default_factory=PlantConfig)
    weights: WeightsConfig = field(default_factory=WeightsConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    constraints: ConstraintsConfig = field(default_factory=ConstraintsConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    reference: ReferenceConfig = field(default_factory=ReferenceConfig)
    logging: LoggingConfig = field(default_factory=LoggingConfig)

    @property
    def kind(self) -> ControllerKind:
        return ControllerKind(self.controller.kind)
