"""Static SVG figures: gridworld policy arrows and tunnel occupancy overlays.

The SVG is written by hand so output bytes depend only on the inputs. Cells and
arrows carry ``data-*`` attributes, which lets tests check content directly.
"""

from __future__ import annotations

from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .envs.gridworld import ACTION_NAMES, GridWorld
from .envs.tunnel import Tunnel

CELL = 28
TUNNEL_CELL = 12
MARGIN = 24
TITLE_HEIGHT = 20

COLOR_PALETTE = ("#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
OBSTACLE_FILL = "#333333"
EMPTY_FILL = "#ffffff"
OVERLAY_FILL = "#ffd700"
GRID_STROKE = "#bbbbbb"

# arrow tip offsets per gridworld action, in unit-cell coordinates
_ARROW_TIPS = {"up": (0.0, -0.32), "down": (0.0, 0.32), "left": (-0.32, 0.0), "right": (0.32, 0.0)}


def _fmt(x: float) -> str:
    text = f"{x:.2f}".rstrip("0").rstrip(".")
    return "0" if text == "-0" else text


def _document(width: float, height: float, body: Sequence[str], title: str) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" height="{_fmt(height)}" '
            f'viewBox="0 0 {_fmt(width)} {_fmt(height)}">')
    defs = ('<defs><marker id="tip" markerWidth="6" markerHeight="6" refX="5" refY="3" orient="auto">'
            '<path d="M0,0 L6,3 L0,6 z" fill="#000000"/></marker></defs>')
    return "\n".join([head, f"<title>{escape(title)}</title>", defs, *body, "</svg>"]) + "\n"


def policy_panel(world: GridWorld, actions: Sequence[int], x0: float, y0: float, label: str,
                 panel_id: str) -> list:
    """One arrow grid; ``actions[s]`` is the greedy action at state ``s``."""
    n = world.size
    out = [f'<g class="panel" data-panel="{escape(panel_id)}" data-goal="{world.goal_index}">',
           f'<text x="{_fmt(x0)}" y="{_fmt(y0 - 6)}" font-size="12" font-family="sans-serif">{escape(label)}</text>']
    for r in range(n):
        for c in range(n):
            x, y = x0 + c * CELL, y0 + r * CELL
            if (r, c) == world.goal:
                fill = "#7fc97f"
            elif (r, c) in world.goals:
                fill = "#dddddd"
            else:
                fill = EMPTY_FILL
            out.append(f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{CELL}" height="{CELL}" fill="{fill}" '
                       f'stroke="{GRID_STROKE}"/>')
    for r in range(n):
        for c in range(n):
            if (r, c) in world.goals:
                continue
            name = ACTION_NAMES[int(actions[world.index((r, c))])]
            dx, dy = _ARROW_TIPS[name]
            cx, cy = x0 + (c + 0.5) * CELL, y0 + (r + 0.5) * CELL
            out.append(f'<line class="arrow" data-row="{r}" data-col="{c}" data-action="{name}" '
                       f'x1="{_fmt(cx - dx * CELL)}" y1="{_fmt(cy - dy * CELL)}" '
                       f'x2="{_fmt(cx + dx * CELL)}" y2="{_fmt(cy + dy * CELL)}" '
                       f'stroke="#000000" stroke-width="1.5" marker-end="url(#tip)"/>')
    out.append("</g>")
    return out


def gridworld_policy_svg(world: GridWorld, panels: Sequence[tuple], title: str = "greedy policies") -> str:
    """Arrow grids in rows of two.

    ``panels`` holds ``(goal_index, alpha, actions)`` triples; the usual layout
    is one row per goal with the unregularized and legible policies side by side.
    """
    if not panels:
        raise ValueError("no panels to draw")
    side = world.size * CELL
    cols = 2
    rows = (len(panels) + cols - 1) // cols
    width = MARGIN + cols * (side + MARGIN)
    height = MARGIN + rows * (side + MARGIN + TITLE_HEIGHT)
    body = []
    for k, (goal, alpha, actions) in enumerate(panels):
        x0 = MARGIN + (k % cols) * (side + MARGIN)
        y0 = MARGIN + TITLE_HEIGHT + (k // cols) * (side + MARGIN + TITLE_HEIGHT)
        body += policy_panel(world.with_goal(goal), actions, x0, y0, f"goal {goal}, alpha = {_fmt(alpha)}",
                             f"goal{goal}-alpha{_fmt(alpha)}")
    return _document(width, height, body, title)


def tunnel_svg(tunnel: Tunnel, pursued: int, occupancy: Optional[np.ndarray] = None,
               title: str = "tunnel") -> str:
    """Cell grid with an occupancy overlay.

    The pursued color is drawn fully opaque, other colors faded, obstacles dark.
    ``occupancy`` (visits per episode, shape ``(W, L)``) is drawn as gold squares
    whose opacity is the visit frequency; ``None`` or all-zero draws no overlay.
    """
    w, length = tunnel.width, tunnel.length
    if occupancy is not None and np.shape(occupancy) != (w, length):
        raise ValueError(f"occupancy shape {np.shape(occupancy)} does not match tunnel {(w, length)}")
    width = 2 * MARGIN + length * TUNNEL_CELL
    height = 2 * MARGIN + w * TUNNEL_CELL + TITLE_HEIGHT
    y_top = MARGIN + TITLE_HEIGHT
    body = [f'<text x="{MARGIN}" y="{MARGIN + 8}" font-size="12" font-family="sans-serif">'
            f'{escape(title)} (pursued color {pursued})</text>', '<g class="cells">']
    for r in range(w):
        for c in range(length):
            x, y = MARGIN + c * TUNNEL_CELL, y_top + r * TUNNEL_CELL
            owners = np.nonzero(tunnel.colors[:, r, c])[0]
            if tunnel.obstacles[r, c]:
                kind, fill, opacity = "obstacle", OBSTACLE_FILL, "1"
            elif len(owners):
                k = int(owners[0])
                kind = "reward" if pursued in owners else "other"
                fill = COLOR_PALETTE[(pursued if kind == "reward" else k) % len(COLOR_PALETTE)]
                opacity = "1" if kind == "reward" else "0.35"
            else:
                kind, fill, opacity = "empty", EMPTY_FILL, "1"
            if (r, c) == tunnel.start:
                kind = "start"
            out = (f'<rect class="cell" data-row="{r}" data-col="{c}" data-kind="{kind}" x="{x}" y="{y}" '
                   f'width="{TUNNEL_CELL}" height="{TUNNEL_CELL}" fill="{fill}" fill-opacity="{opacity}" '
                   f'stroke="{GRID_STROKE}" stroke-width="0.5"/>')
            body.append(out)
    body.append("</g>")
    body.append('<g class="overlay">')
    if occupancy is not None:
        top = float(np.max(occupancy)) if np.size(occupancy) else 0.0
        for r in range(w):
            for c in range(length):
                v = float(occupancy[r, c])
                if v <= 0:
                    continue
                x, y = MARGIN + c * TUNNEL_CELL + 2, y_top + r * TUNNEL_CELL + 2
                body.append(f'<rect class="visit" data-row="{r}" data-col="{c}" data-occupancy="{v:.4f}" '
                            f'x="{x}" y="{y}" width="{TUNNEL_CELL - 4}" height="{TUNNEL_CELL - 4}" '
                            f'fill="{OVERLAY_FILL}" fill-opacity="{_fmt(min(1.0, v / top) if top else 0)}"/>')
    body.append("</g>")
    return _document(width, height, body, title)
