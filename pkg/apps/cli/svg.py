"""
Plain-string SVG rendering of level curves in state-space coordinates.
"""

from typing import List, Sequence, Tuple

WIDTH = 640
HEIGHT = 480
MARGIN = 64
TICKS = 5

PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#17becf",
    "#8c564b",
    "#e377c2",
)


def _coordinate(value: float) -> str:
    return f"{value:.3f}"


def _label(value: float) -> str:
    return f"{value:.4g}"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


class SvgBuilder:
    """Maps a domain rectangle onto the plot area and collects elements"""

    def __init__(self, domain: dict, title: str = ""):
        self.x_min = float(domain["x_min"])
        self.x_max = float(domain["x_max"])
        self.y_min = float(domain["y_min"])
        self.y_max = float(domain["y_max"])
        self.title = title
        self.elements: List[str] = []

    def project(self, x: float, y: float) -> Tuple[float, float]:
        inner_w = WIDTH - 2 * MARGIN
        inner_h = HEIGHT - 2 * MARGIN
        px = MARGIN + (x - self.x_min) / (self.x_max - self.x_min) * inner_w
        py = HEIGHT - MARGIN - (y - self.y_min) / (self.y_max - self.y_min) * inner_h
        return px, py

    def axes(self) -> None:
        left, bottom = self.project(self.x_min, self.y_min)
        right, top = self.project(self.x_max, self.y_max)
        self.elements.append(
            f'<rect x="{_coordinate(left)}" y="{_coordinate(top)}" '
            f'width="{_coordinate(right - left)}" height="{_coordinate(bottom - top)}" '
            f'fill="none" stroke="#333333" stroke-width="1"/>'
        )
        for k in range(TICKS + 1):
            x = self.x_min + (self.x_max - self.x_min) * k / TICKS
            y = self.y_min + (self.y_max - self.y_min) * k / TICKS
            px, _ = self.project(x, self.y_min)
            _, py = self.project(self.x_min, y)
            self.elements.append(
                f'<line x1="{_coordinate(px)}" y1="{_coordinate(bottom)}" x2="{_coordinate(px)}" '
                f'y2="{_coordinate(bottom + 5)}" stroke="#333333"/>'
            )
            self.elements.append(
                f'<text x="{_coordinate(px)}" y="{_coordinate(bottom + 18)}" font-size="11" '
                f'text-anchor="middle">{_label(x)}</text>'
            )
            self.elements.append(
                f'<line x1="{_coordinate(left - 5)}" y1="{_coordinate(py)}" x2="{_coordinate(left)}" '
                f'y2="{_coordinate(py)}" stroke="#333333"/>'
            )
            self.elements.append(
                f'<text x="{_coordinate(left - 8)}" y="{_coordinate(py + 4)}" font-size="11" '
                f'text-anchor="end">{_label(y)}</text>'
            )
        self.elements.append(
            f'<text x="{_coordinate((left + right) / 2)}" y="{_coordinate(HEIGHT - 16)}" '
            f'font-size="13" text-anchor="middle">x</text>'
        )
        self.elements.append(
            f'<text x="16" y="{_coordinate((top + bottom) / 2)}" font-size="13" '
            f'text-anchor="middle">y</text>'
        )
        if self.title:
            self.elements.append(
                f'<text x="{WIDTH / 2:.3f}" y="24" font-size="14" '
                f'text-anchor="middle">{_escape(self.title)}</text>'
            )

    def level(self, index: int, level: float, polylines: Sequence[Sequence[Sequence[float]]]) -> None:
        """One path element for all polylines of a level, plus its annotation"""
        commands = []
        for polyline in polylines:
            for k, (x, y) in enumerate(polyline):
                px, py = self.project(x, y)
                commands.append(f"{'M' if k == 0 else 'L'}{_coordinate(px)} {_coordinate(py)}")
        color = PALETTE[index % len(PALETTE)]
        self.elements.append(
            f'<path d="{" ".join(commands)}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        longest = max(polylines, key=len)
        px, py = self.project(*longest[len(longest) // 2])
        self.elements.append(
            f'<text x="{_coordinate(px + 4)}" y="{_coordinate(py - 4)}" font-size="11" '
            f'fill="{color}">S={_label(level)}</text>'
        )

    def render(self) -> str:
        body = "\n".join(f"  {element}" for element in self.elements)
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">\n'
            f'  <rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>\n'
            f"{body}\n"
            f"</svg>\n"
        )


def render_levels(document: dict) -> str:
    """SVG for an adiabats.json document"""
    builder = SvgBuilder(document["domain"], title=document.get("title", ""))
    builder.axes()
    nonempty = [entry for entry in document.get("levels", []) if entry.get("polylines")]
    for index, entry in enumerate(nonempty):
        builder.level(index, entry["level"], entry["polylines"])
    return builder.render()
