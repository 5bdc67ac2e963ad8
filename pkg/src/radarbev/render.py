"""Static SVG rendering of one BEV frame.

Ego +x points up the page and ego +y to the left. Raw radar points are red,
matched points green, prior footprints are outlined in a per-class colour
(dashed when the class policy excludes them), clipped radar boxes are thin
green outlines.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

from .geometry import GridSpec

RAW_COLOR = "#e41a1c"
MATCHED_COLOR = "#2ca02c"
CLASS_COLORS = {
    "car": "#1f77b4",
    "truck": "#ff7f0e",
    "bus": "#9467bd",
    "trailer": "#8c564b",
    "construction_vehicle": "#bcbd22",
    "pedestrian": "#e377c2",
    "motorcycle": "#17becf",
    "bicycle": "#7f7f7f",
    "traffic_cone": "#ffbb78",
    "barrier": "#393b79",
}


def _f(v):
    return f"{v:.3f}"


class _Canvas:
    def __init__(self, grid: GridSpec, scale: float):
        self.hr = grid.half_range
        self.scale = scale
        self.size = 2.0 * grid.half_range * scale

    def to_px(self, x, y):
        return (self.hr - y) * self.scale, (self.hr - x) * self.scale

    def rect(self, box):
        min_x, min_y, max_x, max_y = box
        left, top = self.to_px(max_x, max_y)
        return _f(left), _f(top), _f((max_y - min_y) * self.scale), _f((max_x - min_x) * self.scale)


def render_svg(bundle, priors, report: dict, grid: GridSpec, policy=None, scale: float = 8.0,
               grid_step: float = 10.24) -> str:
    """SVG text for a frame and its association report. Output is byte-deterministic."""
    cv = _Canvas(grid, scale)
    size = _f(cv.size)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f"<title>{escape(str(report.get('frame_id', '')))}</title>",
        f'<rect class="frame" x="0" y="0" width="{size}" height="{size}" fill="#ffffff" '
        f'stroke="#000000" stroke-width="1"/>',
        '<g class="grid" stroke="#dddddd" stroke-width="0.5">',
    ]
    k = 1
    while k * grid_step < 2.0 * grid.half_range - 1e-9:
        p = _f(k * grid_step * scale)
        out.append(f'<line x1="{p}" y1="0" x2="{p}" y2="{size}"/>')
        out.append(f'<line x1="0" y1="{p}" x2="{size}" y2="{p}"/>')
        k += 1
    out.append("</g>")

    out.append('<g class="priors" fill="none" stroke-width="1.5">')
    for prior in priors:
        x, y, w, h = cv.rect(prior.footprint().as_tuple())
        dash = ' stroke-dasharray="4 3"' if policy is not None and not policy.enabled(prior.class_id) else ""
        out.append(f'<rect class="prior {prior.class_id}" x="{x}" y="{y}" width="{w}" height="{h}" '
                   f'stroke="{CLASS_COLORS[prior.class_id]}"{dash}/>')
    out.append("</g>")

    pairs = report.get("pairs", [])
    out.append(f'<g class="radar-boxes" fill="none" stroke="{MATCHED_COLOR}" stroke-width="0.75">')
    for pair in pairs:
        x, y, w, h = cv.rect(pair["box"])
        out.append(f'<rect class="radar-box" x="{x}" y="{y}" width="{w}" height="{h}"/>')
    out.append("</g>")

    matched = {pair["point"] for pair in pairs}
    out.append('<g class="points">')
    for i, p in enumerate(bundle.points):
        cx, cy = cv.to_px(p.x, p.y)
        if i in matched:
            out.append(f'<circle class="matched-point" cx="{_f(cx)}" cy="{_f(cy)}" r="2" '
                       f'fill="{MATCHED_COLOR}"/>')
        else:
            out.append(f'<circle class="raw-point" cx="{_f(cx)}" cy="{_f(cy)}" r="2" fill="{RAW_COLOR}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
