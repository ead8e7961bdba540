"""
Human-readable design report.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from numpy.typing import NDArray

from ..control.cmpc import TerminalSetCertificate
from ..error_handling.exceptions import OutputError
from ..linalg.matrix import max_norm


logger = logging.getLogger(__name__)


def _vector(values: NDArray) -> str:
    return "[" + ", ".join(f"{v:.4f}" for v in values) + "]"


def _matrix(values: NDArray, indent: str = "    ") -> List[str]:
    return [indent + "  ".join(f"{v:12.4f}" for v in row) for row in values]


@dataclass
class DesignReport:
    """Design quantities of one scenario; reference values are compared but never gate."""
    scenario_name: str
    kind: str
    k_db: NDArray[np.float64]
    nilpotency_index: int
    s_inv_first_row: NDArray[np.float64]
    stabilizing_gain: Optional[NDArray[np.float64]] = None
    schur_stable: Optional[bool] = None
    p: Optional[NDArray[np.float64]] = None
    lyapunov_residual: Optional[float] = None
    certificate: Optional[TerminalSetCertificate] = None
    bisected: bool = False
    reference_gain: Optional[NDArray[np.float64]] = None
    reference_p: Optional[NDArray[np.float64]] = None
    reference_tolerance: float = 1e-3
    notes: List[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.k_db.shape[0]

    @property
    def gain_deviation(self) -> Optional[float]:
        if self.reference_gain is None:
            return None
        return max_norm(self.k_db - self.reference_gain)

    @property
    def p_deviation(self) -> Optional[float]:
        if self.reference_p is None or self.p is None:
            return None
        return max_norm(self.p - self.reference_p)

    def render(self) -> str:
        lines = [
            f"Design report: {self.scenario_name}",
            f"Controller kind: {self.kind}",
            f"State dimension n = {self.n}, horizon N = {self.n}",
            "",
            f"Deadbeat gain K_db = {_vector(self.k_db)}",
            f"First row of S^-1   = {_vector(self.s_inv_first_row)}",
            f"Nilpotency index of A - B*K_db: {self.nilpotency_index}",
        ]
        if self.gain_deviation is not None:
            status = "OK" if self.gain_deviation <= self.reference_tolerance else "DIFFERS"
            lines.append(f"Reference K_db deviation: {self.gain_deviation:.3e} ({status})")

        if self.stabilizing_gain is not None:
            lines += ["", f"Stabilizing gain K = {_vector(self.stabilizing_gain)}"]
            if self.schur_stable is not None:
                lines.append(f"A - B*K Schur stable: {'yes' if self.schur_stable else 'NO'}")

        if self.p is not None:
            lines += ["", "Terminal weight P:"] + _matrix(self.p)
            if self.lyapunov_residual is not None:
                status = "OK" if self.lyapunov_residual <= 1e-8 * max(1.0, max_norm(self.p)) else "FAILED"
                lines.append(f"Lyapunov residual: {self.lyapunov_residual:.3e} ({status})")
            if self.p_deviation is not None:
                lines.append(f"Reference P deviation: {self.p_deviation:.3e} (informational)")

        if self.certificate is not None:
            how = "bisected" if self.bisected else "given"
            lines += [
                "",
                f"Terminal box halfwidth ({how}): {_vector(self.certificate.halfwidth)}",
                f"Vertex certificate: {'PASSED' if self.certificate.certified else 'FAILED'}"
                f" ({self.certificate.vertex_count} vertices)",
                f"Box invariant under A - B*K_db: {'yes' if self.certificate.box_invariant else 'no'}",
            ]
            for violation in self.certificate.violations:
                lines.append(f"  vertex {violation.vertex_index} {violation.condition}: slack {violation.slack:.3e}")

        if self.notes:
            lines += [""] + [f"Note: {note}" for note in self.notes]
        return "\n".join(lines) + "\n"


def write_design_report(report: DesignReport, path: Union[str, Path]) -> Path:
    """
    Write the rendered report.

    Raises:
        OutputError: the file cannot be written
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(report.render(), encoding='utf-8')
    except OSError as e:
        raise OutputError(f"cannot write design report ({e.strerror})", str(path))
    logger.info(f"Wrote design report to {path}")
    return path
