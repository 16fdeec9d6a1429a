"""SVG figure of the environment, tree, collision samples and trajectories."""
from __future__ import annotations

import xml.etree.ElementTree as ET

import numpy as np

SCALE = 60.0
PAD = 10.0


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def render_svg(env, tree=None, trajectories=(), path=None, show_samples=True) -> str:
    """Obstacles gray, tree edges green, collision samples red, one blue polyline per run."""
    xmin, ymin, xmax, ymax = env.bounds_box
    w = (xmax - xmin) * SCALE + 2 * PAD
    h = (ymax - ymin) * SCALE + 2 * PAD

    def tx(p):
        p = np.asarray(p, dtype=float).reshape(-1, 2)
        return np.column_stack([(p[:, 0] - xmin) * SCALE + PAD, (ymax - p[:, 1]) * SCALE + PAD])

    def pts(p):
        return " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in tx(p))

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=_fmt(w), height=_fmt(h),
                     viewBox=f"0 0 {_fmt(w)} {_fmt(h)}")
    ET.SubElement(svg, "rect", x=_fmt(PAD), y=_fmt(PAD), width=_fmt(w - 2 * PAD),
                  height=_fmt(h - 2 * PAD), fill="white", stroke="black")
    g = ET.SubElement(svg, "g", id="obstacles")
    for o in env.obstacles:
        ET.SubElement(g, "polygon", points=pts(o), fill="#9a9a9a", stroke="#6a6a6a")

    if tree is not None:
        g = ET.SubElement(svg, "g", id="tree")
        for i, j in tree.edges():
            (x1, y1), (x2, y2) = tx(tree.nodes[[i, j]])
            ET.SubElement(g, "line", x1=_fmt(x1), y1=_fmt(y1), x2=_fmt(x2), y2=_fmt(y2),
                          stroke="green", **{"stroke-width": "2"})
        for x, y in tx(tree.nodes):
            ET.SubElement(g, "circle", cx=_fmt(x), cy=_fmt(y), r="3", fill="green")
        if show_samples and len(tree.collision_samples):
            g = ET.SubElement(svg, "g", id="collision-samples")
            for x, y in tx(tree.collision_samples):
                ET.SubElement(g, "circle", cx=_fmt(x), cy=_fmt(y), r="1.5", fill="red")

    g = ET.SubElement(svg, "g", id="trajectories")
    for traj in trajectories:
        P = np.asarray(traj, dtype=float).reshape(-1, 2)
        if len(P) > 2000:
            # thin long logs; always keep the end points
            keep = np.unique(np.r_[np.linspace(0, len(P) - 1, 2000).astype(int), len(P) - 1])
            P = P[keep]
        ET.SubElement(g, "polyline", points=pts(P), fill="none", stroke="blue",
                      **{"stroke-width": "2"})

    text = ET.tostring(svg, encoding="unicode")
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return text
