"""Fixed plotting style so regenerated images are byte-identical."""

from __future__ import annotations

import json
from importlib import resources

import matplotlib

matplotlib.use("Agg")  # headless; must precede pyplot anywhere in the package

DEFAULT_STYLE_RESOURCE = "default_style.json"


def load_style(path: str | None = None) -> dict:
    if path is None:
        text = resources.files("hazardfigs").joinpath(DEFAULT_STYLE_RESOURCE).read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return json.loads(text)


def apply_style(style: dict) -> None:
    """Install rcParams plus a fixed hash salt for stable SVG ids."""
    matplotlib.rcParams.update(style.get("rcparams", {}))
    matplotlib.rcParams["svg.hashsalt"] = style.get("hashsalt", "hazardfigs")


def palette(style: dict) -> list[str]:
    return style.get("palette", ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"])


def save(fig, out_path: str, fmt: str = "svg", dpi: int = 150) -> None:
    """Write the figure without volatile metadata (no embedded dates)."""
    if fmt == "svg":
        fig.savefig(out_path, format="svg", metadata={"Date": None})
    elif fmt == "png":
        fig.savefig(out_path, format="png", dpi=dpi)
    else:
        raise ValueError(f"unsupported format {fmt!r} (use svg or png)")
