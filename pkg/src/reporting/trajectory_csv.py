"""
Trajectory CSV writer and reader.

Header ``k,x1,...,xn,u,objective,terminal_norm,active_set_size``; floats are
written with 17 significant digits so a file reproduces the run bit for bit.
Fields a controller does not produce are left empty, as is the control
column of the final state.
"""
import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from numpy.typing import NDArray

from ..error_handling.exceptions import OutputError
from ..simulation.simkit import Trajectory


logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return ""
    value = float(value)
    # -0.0 prints as "-0"
    return format(0.0 if value == 0.0 else value, '.17g')


def csv_header(n: int) -> List[str]:
    return ['k'] + [f"x{i}" for i in range(1, n + 1)] + ['u', 'objective', 'terminal_norm', 'active_set_size']


def write_trajectory_csv(trajectory: Trajectory, path: PathLike) -> Path:
    """
    Write one row per recorded state.

    Raises:
        OutputError: the file cannot be written
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(csv_header(trajectory.n))
            for record in trajectory.steps:
                writer.writerow(
                    [str(record.k)]
                    + [_fmt(value) for value in record.x]
                    + [_fmt(record.u), _fmt(record.objective), _fmt(record.terminal_norm),
                       "" if record.active_set_size is None else str(record.active_set_size)]
                )
    except OSError as e:
        raise OutputError(f"cannot write trajectory CSV ({e.strerror})", str(path))
    logger.info(f"Wrote {len(trajectory.steps)} trajectory rows to {path}")
    return path


@dataclass
class TrajectoryTable:
    """Columns parsed back from a trajectory CSV; empty cells become NaN (or -1 for counts)."""
    k: NDArray[np.int64]
    states: NDArray[np.float64]
    controls: NDArray[np.float64]
    objectives: NDArray[np.float64]
    terminal_norms: NDArray[np.float64]
    active_set_sizes: NDArray[np.int64]

    @property
    def applied_controls(self) -> NDArray[np.float64]:
        """Controls of every row except the trailing final state."""
        return self.controls[~np.isnan(self.controls)]


def read_trajectory_csv(path: PathLike) -> TrajectoryTable:
    """
    Parse a file written by write_trajectory_csv.

    Raises:
        OutputError: the file is missing or its header is not a trajectory header
    """
    path = Path(path)
    try:
        with open(path, 'r', newline='', encoding='utf-8') as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise OutputError(f"cannot read trajectory CSV ({e.strerror})", str(path))
    if not rows:
        raise OutputError("empty trajectory CSV", str(path))

    header = rows[0]
    n = len(header) - 5
    if n < 1 or header != csv_header(n):
        raise OutputError("unrecognized trajectory CSV header", str(path))

    def number(cell: str) -> float:
        return float(cell) if cell else float('nan')

    body = rows[1:]
    return TrajectoryTable(
        k=np.array([int(row[0]) for row in body], dtype=np.int64),
        states=np.array([[float(cell) for cell in row[1:n + 1]] for row in body]).reshape(len(body), n),
        controls=np.array([number(row[n + 1]) for row in body]),
        objectives=np.array([number(row[n + 2]) for row in body]),
        terminal_norms=np.array([number(row[n + 3]) for row in body]),
        active_set_sizes=np.array([int(row[n + 4]) if row[n + 4] else -1 for row in body], dtype=np.int64),
    )
