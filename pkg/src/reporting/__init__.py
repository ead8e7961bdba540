"""
Result files: trajectory CSV, SVG plot and design report.
"""

from .design_report import DesignReport, write_design_report
from .svg_plot import render_trajectory_svg, write_trajectory_svg
from .trajectory_csv import TrajectoryTable, csv_header, read_trajectory_csv, write_trajectory_csv
