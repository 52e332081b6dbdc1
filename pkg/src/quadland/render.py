"""Static figure output: a 2D side view of a trajectory over the
platform and goal box.  Writes files only, never opens a window."""

import math
from typing import Optional, Sequence, Tuple

import numpy as np
from matplotlib.figure import Figure
from matplotlib.patches import Polygon as PolygonPatch, Rectangle

from .errors import ConfigError
from .landing_env import GoalBox, Platform

GLYPH_HALF_LENGTH = 0.07
GLYPH_TICK = 0.035
MAX_GLYPHS = 40


def _pose_glyph(ax, x: float, z: float, pitch: float, color: str,
                width: float):
    # body axis in the side view; positive pitch leans toward +x, matching
    # the platform top edge so a flush vehicle draws parallel to it
    dx, dz = math.cos(pitch), -math.sin(pitch)
    ax.plot([x - GLYPH_HALF_LENGTH * dx, x + GLYPH_HALF_LENGTH * dx],
            [z - GLYPH_HALF_LENGTH * dz, z + GLYPH_HALF_LENGTH * dz],
            color=color, linewidth=width, solid_capstyle="round")
    ax.plot([x, x + GLYPH_TICK * math.sin(pitch)],
            [z, z + GLYPH_TICK * math.cos(pitch)],
            color=color, linewidth=width * 0.8)


def render_overlay(columns: Sequence[str], rows: np.ndarray,
                   platform: Platform, goal_box: GoalBox, out_path: str,
                   title: Optional[str] = None):
    """Draw trajectory pose glyphs over the platform and goal box.

    ``rows`` may be empty, in which case only the scene is drawn.
    """
    for name in ("x", "z", "pitch"):
        if name not in columns:
            raise ConfigError(f"trajectory is missing a {name!r} column; "
                              "only side-view trajectories can be rendered")
    ix, iz, ip = (columns.index(n) for n in ("x", "z", "pitch"))

    fig = Figure(figsize=(7.0, 4.2))
    ax = fig.add_subplot()
    ax.add_patch(PolygonPatch(np.asarray(platform.vertices),
                              closed=True, facecolor="0.82",
                              edgecolor="0.35", linewidth=1.0, zorder=1))
    cx, cz = goal_box.center[0], goal_box.center[1]
    tx, tz = goal_box.tolerance[0], goal_box.tolerance[1]
    ax.add_patch(Rectangle((cx - tx, cz - tz), 2 * tx, 2 * tz,
                           facecolor="none", edgecolor="tab:green",
                           linestyle="--", linewidth=1.2, zorder=2))

    if rows.shape[0]:
        x, z, pitch = rows[:, ix], rows[:, iz], rows[:, ip]
        ax.plot(x, z, color="tab:blue", linewidth=0.8, alpha=0.6, zorder=3)
        stride = max(1, rows.shape[0] // MAX_GLYPHS)
        for i in range(0, rows.shape[0] - 1, stride):
            _pose_glyph(ax, x[i], z[i], pitch[i], "tab:blue", 1.1)
        _pose_glyph(ax, x[-1], z[-1], pitch[-1], "tab:red", 2.0)
        ax.plot(x[0], z[0], marker="o", color="tab:blue", markersize=4,
                zorder=4)

    ax.set_xlabel("x [m]")
    ax.set_ylabel("z [m]")
    if title:
        ax.set_title(title)
    ax.set_aspect("equal", adjustable="datalim")
    ax.margins(0.15)
    ax.grid(True, linewidth=0.3, alpha=0.5)
    fig.tight_layout()
    fig.savefig(out_path, format="svg")
