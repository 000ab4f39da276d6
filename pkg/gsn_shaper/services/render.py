"""
Image output for gsn-shaper

Scatter plots of 2D chain states over the dataset, rasterized on a
matplotlib Agg canvas and written as binary PPM (P6, 8-bit RGB).
"""
from __future__ import annotations
from pathlib import Path
from typing import Optional, Tuple
import logging

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from gsn_shaper.exceptions import ShapeError

logger = logging.getLogger(__name__)

BACKGROUND = (255, 255, 255)
OVERLAY_COLOR = (200, 200, 200)
POINT_COLOR = (31, 119, 180)
MARGIN = 0.05
POINT_PIXELS = 3
OVERLAY_PIXELS = 2


def ppm_header(width: int, height: int) -> bytes:
    return f"P6\n{width} {height}\n255\n".encode("ascii")


def encode_ppm(image: np.ndarray) -> bytes:
    """Header plus raw row-major RGB bytes of an H×W×3 uint8 array."""
    if image.ndim != 3 or image.shape[2] != 3:
        raise ShapeError("encode_ppm (H×W×3 image required)", image.shape)
    return ppm_header(image.shape[1], image.shape[0]) + np.ascontiguousarray(image, dtype=np.uint8).tobytes()


def write_ppm(path: Path, image: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_ppm(image))
    logger.debug("Wrote %dx%d image to %s", image.shape[1], image.shape[0], path)
    return path


def _extent(*clouds: np.ndarray) -> Tuple[float, float, float, float]:
    stacked = np.vstack([c for c in clouds if c is not None and c.size])
    lo, hi = stacked.min(axis=0), stacked.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    # square view so both axes share a scale
    side = span.max() * (1.0 + 2.0 * MARGIN)
    centre = (lo + hi) / 2.0
    return centre[0] - side / 2, centre[0] + side / 2, centre[1] - side / 2, centre[1] + side / 2


def _marker_area(pixels: float, dpi: float) -> float:
    """Scatter marker area in points^2 for a marker `pixels` wide."""
    return (pixels * 72.0 / dpi) ** 2


def _rgb(color: Tuple[int, int, int]) -> Tuple[float, float, float]:
    return tuple(c / 255.0 for c in color)


def scatter_image(points: np.ndarray, overlay: Optional[np.ndarray] = None, size: int = 512) -> np.ndarray:
    """size×size RGB scatter of 2D points drawn on top of an optional overlay cloud."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[1] != 2 or (overlay is not None and np.shape(overlay)[1] != 2):
        raise ShapeError("scatter (2D points required)", points.shape, np.shape(overlay))
    if size < 2:
        raise ValueError(f"image size must be at least 2, got {size}")

    # one inch at dpi = size gives exactly size pixels
    fig = Figure(figsize=(1.0, 1.0), dpi=size, facecolor=_rgb(BACKGROUND))
    canvas = FigureCanvasAgg(fig)
    ax = fig.add_axes((0.0, 0.0, 1.0, 1.0))
    ax.set_axis_off()
    x0, x1, y0, y1 = _extent(points, overlay)
    ax.set_xlim(x0, x1)
    ax.set_ylim(y0, y1)
    if overlay is not None:
        overlay = np.asarray(overlay, dtype=np.float64)
        ax.scatter(overlay[:, 0], overlay[:, 1], s=_marker_area(OVERLAY_PIXELS, size), marker="s",
                   color=_rgb(OVERLAY_COLOR), linewidths=0, antialiased=False)
    ax.scatter(points[:, 0], points[:, 1], s=_marker_area(POINT_PIXELS, size), marker="s",
               color=_rgb(POINT_COLOR), linewidths=0, antialiased=False)
    canvas.draw()
    return np.array(canvas.buffer_rgba(), dtype=np.uint8)[:, :, :3]


def scatter_ppm(points: np.ndarray, overlay: Optional[np.ndarray] = None, size: int = 512) -> bytes:
    return encode_ppm(scatter_image(points, overlay, size))
