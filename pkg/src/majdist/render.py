"""SVG rendering of plans: one square per block, district fills, hatched majority districts."""
from __future__ import annotations

import math

import networkx as nx

from .model import Instance, Plan, district_adjacency

PALETTE = ("#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462",
           "#b3de69", "#fccde5", "#d9d9d9", "#bc80bd", "#ccebc5", "#ffed6f")
SCALE = 20.0


def district_colors(plan: Plan, inst: Instance) -> list[int]:
    """Greedy coloring of the district graph in smallest-last order (six colors on planar maps)."""
    adj, _ = district_adjacency(plan.districts, inst.graph)
    g = nx.Graph()
    g.add_nodes_from(range(len(plan.districts)))
    g.add_edges_from((a, b) for a in adj for b in adj[a] if a < b)
    coloring = nx.greedy_color(g, strategy="smallest_last")
    return [coloring[k] for k in range(len(plan.districts))]


def _color(k: int) -> str:
    if k < len(PALETTE):
        return PALETTE[k]
    hue = (k * 137.508) % 360
    return f"hsl({hue:.0f},55%,70%)"


def render_svg(plan: Plan, inst: Instance) -> str:
    flip = inst.meta.get("kind") != "grid"
    cells = []
    for bid in inst.order:
        b = inst.blocks[bid]
        side = math.sqrt(b.area)
        x, y = b.centroid
        cells.append((bid, x - side / 2, (-y if flip else y) - side / 2, side))
    xmin = min(c[1] for c in cells)
    ymin = min(c[2] for c in cells)
    xmax = max(c[1] + c[3] for c in cells)
    ymax = max(c[2] + c[3] for c in cells)
    width = (xmax - xmin) * SCALE
    height = (ymax - ymin) * SCALE

    def px(v, lo):
        return f"{(v - lo) * SCALE:.3f}".rstrip("0").rstrip(".")

    owner = plan.assignment()
    colors = district_colors(plan, inst)
    majority = [inst.is_majority(d.blocks) for d in plan.districts]
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {width:.3f} {height:.3f}">',
        "<defs>",
        '<pattern id="hatch" patternUnits="userSpaceOnUse" width="6" height="6" patternTransform="rotate(45)">',
        '<line x1="0" y1="0" x2="0" y2="6" stroke="black" stroke-width="1.5"/>',
        "</pattern>",
        "</defs>",
        '<g id="blocks">',
    ]
    for bid, x, y, side in cells:
        k = owner[bid]
        out.append(f'<rect class="cell" data-block="{bid}" data-district="{k}" x="{px(x, xmin)}" '
                   f'y="{px(y, ymin)}" width="{px(side, 0)}" height="{px(side, 0)}" '
                   f'fill="{_color(colors[k])}" stroke="#ffffff" stroke-width="0.5"/>')
    out.append("</g>")
    out.append('<g id="majority">')
    for k, d in enumerate(plan.districts):
        if not majority[k]:
            continue
        parts = []
        for bid, x, y, side in cells:
            if bid in d.blocks:
                parts.append(f"M{px(x, xmin)} {px(y, ymin)}h{px(side, 0)}v{px(side, 0)}h-{px(side, 0)}Z")
        out.append(f'<path class="hatch" data-district="{k}" d="{"".join(parts)}" fill="url(#hatch)"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
