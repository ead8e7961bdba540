"""
Self-contained SVG plot of a closed-loop run: states over k on top, the
control over k below with the input bounds as dashed lines.
"""
import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..error_handling.exceptions import OutputError
from ..simulation.simkit import Trajectory


logger = logging.getLogger(__name__)

WIDTH = 900
HEIGHT = 600
MARGIN_LEFT = 80
MARGIN_RIGHT = 110
MARGIN_TOP = 40
MARGIN_BOTTOM = 40
PANEL_GAP = 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f")


@dataclass
class _Panel:
    """Data-to-pixel mapping of one plot area."""
    top: float
    height: float
    k_max: float
    y_low: float
    y_high: float

    @property
    def left(self) -> float:
        return MARGIN_LEFT

    @property
    def width(self) -> float:
        return WIDTH - MARGIN_LEFT - MARGIN_RIGHT

    def px(self, k: float) -> float:
        return self.left + self.width * k / self.k_max

    def py(self, y: float) -> float:
        return self.top + self.height * (self.y_high - y) / (self.y_high - self.y_low)


def _range(values: Sequence[float]) -> Tuple[float, float]:
    values = [v for v in values if np.isfinite(v)]
    if not values:
        return -1.0, 1.0
    low, high = min(values), max(values)
    if high - low <= 1e-12 * max(1.0, abs(high)):
        return low - 1.0, high + 1.0
    pad = 0.05 * (high - low)
    return low - pad, high + pad


def _points(panel: _Panel, ks: Sequence[float], ys: Sequence[float]) -> str:
    return " ".join(f"{panel.px(k):.2f},{panel.py(y):.2f}" for k, y in zip(ks, ys))


def _text(parent: ET.Element, x: float, y: float, content: str, anchor: str = "start", size: int = 12):
    element = ET.SubElement(parent, 'text', x=f"{x:.2f}", y=f"{y:.2f}", fill="#333333",
                            **{'font-family': 'sans-serif', 'font-size': str(size), 'text-anchor': anchor})
    element.text = content


def _frame(svg: ET.Element, panel: _Panel, y_label: str):
    ET.SubElement(svg, 'rect', x=f"{panel.left:.2f}", y=f"{panel.top:.2f}", width=f"{panel.width:.2f}",
                  height=f"{panel.height:.2f}", fill="none", stroke="#999999")
    if panel.y_low < 0.0 < panel.y_high:
        ET.SubElement(svg, 'line', x1=f"{panel.left:.2f}", y1=f"{panel.py(0.0):.2f}",
                      x2=f"{panel.left + panel.width:.2f}", y2=f"{panel.py(0.0):.2f}",
                      stroke="#cccccc")
    _text(svg, panel.left - 6, panel.top + 10, f"{panel.y_high:.3g}", anchor="end", size=11)
    _text(svg, panel.left - 6, panel.top + panel.height, f"{panel.y_low:.3g}", anchor="end", size=11)
    _text(svg, panel.left - 45, panel.top + panel.height / 2, y_label, anchor="middle")
    _text(svg, panel.left, panel.top + panel.height + 16, "0", anchor="middle", size=11)
    _text(svg, panel.left + panel.width, panel.top + panel.height + 16, f"{panel.k_max:g}",
          anchor="middle", size=11)


def render_trajectory_svg(trajectory: Trajectory, u_bounds: Optional[Tuple[float, float]] = None,
                          title: str = "") -> str:
    """
    Render the run as SVG text.

    A run that is zero everywhere gets a single flat panel.

    Args:
        trajectory: Recorded run
        u_bounds: (u_min, u_max) drawn as dashed lines on the control panel
        title: Heading above the plot
    """
    states = trajectory.states
    controls = trajectory.controls
    k_states = np.arange(states.shape[0], dtype=np.float64)
    k_controls = np.arange(controls.shape[0], dtype=np.float64)
    k_max = float(max(1, states.shape[0] - 1))

    svg = ET.Element('svg', xmlns="http://www.w3.org/2000/svg", width=str(WIDTH), height=str(HEIGHT),
                     viewBox=f"0 0 {WIDTH} {HEIGHT}")
    ET.SubElement(svg, 'rect', x="0", y="0", width=str(WIDTH), height=str(HEIGHT), fill="#ffffff")
    if title:
        _text(svg, WIDTH / 2, 24, title, anchor="middle", size=14)

    plot_height = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    if not np.any(states) and not np.any(controls):
        panel = _Panel(MARGIN_TOP, plot_height, k_max, -1.0, 1.0)
        _frame(svg, panel, "x, u")
        ET.SubElement(svg, 'polyline', points=_points(panel, [0.0, k_max], [0.0, 0.0]),
                      fill="none", stroke=PALETTE[0], **{'stroke-width': '2'})
        _text(svg, panel.left + panel.width + 8, panel.py(0.0) + 4, "all zero")
        return ET.tostring(svg, encoding='unicode')

    panel_height = (plot_height - PANEL_GAP) / 2
    state_panel = _Panel(MARGIN_TOP, panel_height, k_max, *_range(states.ravel().tolist()))
    _frame(svg, state_panel, "x(k)")
    for i in range(states.shape[1]):
        color = PALETTE[i % len(PALETTE)]
        ET.SubElement(svg, 'polyline', points=_points(state_panel, k_states, states[:, i]),
                      fill="none", stroke=color, **{'stroke-width': '2'})
        _text(svg, state_panel.left + state_panel.width + 8, state_panel.top + 16 * (i + 1), f"x{i + 1}")

    control_values: List[float] = controls.tolist()
    if u_bounds is not None:
        control_values += list(u_bounds)
    control_panel = _Panel(MARGIN_TOP + panel_height + PANEL_GAP, panel_height, k_max, *_range(control_values))
    _frame(svg, control_panel, "u(k)")
    if u_bounds is not None:
        for bound in u_bounds:
            ET.SubElement(svg, 'line', x1=f"{control_panel.left:.2f}", y1=f"{control_panel.py(bound):.2f}",
                          x2=f"{control_panel.left + control_panel.width:.2f}",
                          y2=f"{control_panel.py(bound):.2f}", stroke="#555555",
                          **{'stroke-dasharray': '6,4'})
    if controls.shape[0]:
        ET.SubElement(svg, 'polyline', points=_points(control_panel, k_controls, controls),
                      fill="none", stroke="#000000", **{'stroke-width': '2'})
    _text(svg, WIDTH / 2, HEIGHT - 8, "k", anchor="middle")
    return ET.tostring(svg, encoding='unicode')


def write_trajectory_svg(trajectory: Trajectory, path: Union[str, Path],
                         u_bounds: Optional[Tuple[float, float]] = None, title: str = "") -> Path:
    """
    Write the SVG plot.

    Raises:
        OutputError: the file cannot be written
    """
    path = Path(path)
    text = render_trajectory_svg(trajectory, u_bounds, title)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + "\n", encoding='utf-8')
    except OSError as e:
        raise OutputError(f"cannot write SVG plot ({e.strerror})", str(path))
    logger.info(f"Wrote plot to {path}")
    return path
