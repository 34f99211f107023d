"""SVG overlays of predicted and annotated landmarks."""

from __future__ import annotations

import base64
import io
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
from PIL import Image

from ..exceptions import InvalidArgumentError
from ..models.landmarks import LandmarkSet
from ..models.samples import Sample

__all__ = [
    "GT_COLOR",
    "LINE_COLOR",
    "PRED_COLOR",
    "emit_overlay",
    "pixel_coords",
]

GT_COLOR = "#00ff00"
PRED_COLOR = "#ff0000"
LINE_COLOR = "#ffffff"

_SVG_NS = "http://www.w3.org/2000/svg"
_ZOOM = 8


def pixel_coords(landmarks: LandmarkSet, shape: tuple[int, int]) -> np.ndarray:
    """Map normalized landmarks to pixel-center coordinates of an image."""
    # Matches the generator's rasterization; errors scale by W, not W - 1.
    height, width = shape
    scale = np.array([width - 1, height - 1], dtype=np.float64)
    return landmarks.coords * scale


def _backdrop(sample: Sample) -> str:
    pixels = np.round(sample.image * 255.0).astype(np.uint8)
    buffer = io.BytesIO()
    Image.fromarray(pixels).save(buffer, format="PNG")
    encoded = base64.b64encode(buffer.getvalue()).decode("ascii")
    return f"data:image/png;base64,{encoded}"


def _fmt(value: float) -> str:
    return f"{value:.4f}"


def emit_overlay(
    sample: Sample,
    pred: LandmarkSet,
    path: Path,
    gt: LandmarkSet | None = None,
) -> Path:
    """Write an SVG of the image with both landmark sets.

    Annotated landmarks are green, predictions red, and a white line joins
    each annotated landmark to its prediction. Pixel ``(r, c)`` of the image
    is centered on user coordinates ``(c, r)``.

    Parameters
    ----------
    sample
        Sample to draw.
    pred
        Predicted landmarks.
    path
        SVG file to write.
    gt
        Annotation, by default the sample's own landmarks.

    Returns
    -------
    pathlib.Path
        The path written.

    Raises
    ------
    InvalidArgumentError
        Raised if there is no annotation or the landmark counts differ.
    OSError
        Raised if the file cannot be written.
    """
    gt = gt if gt is not None else sample.landmarks
    if gt is None:
        raise InvalidArgumentError(f"Sample {sample.id} has no landmarks")
    if gt.num_landmarks != pred.num_landmarks:
        msg = (
            f"Cannot overlay {pred.num_landmarks} predictions on"
            f" {gt.num_landmarks} landmarks"
        )
        raise InvalidArgumentError(msg)
    height, width = sample.image.shape
    ET.register_namespace("", _SVG_NS)
    svg = ET.Element(
        f"{{{_SVG_NS}}}svg",
        {
            "width": str(width * _ZOOM),
            "height": str(height * _ZOOM),
            "viewBox": f"-0.5 -0.5 {width} {height}",
        },
    )
    ET.SubElement(
        svg,
        f"{{{_SVG_NS}}}image",
        {
            "x": "-0.5",
            "y": "-0.5",
            "width": str(width),
            "height": str(height),
            "href": _backdrop(sample),
            "style": "image-rendering: pixelated",
        },
    )
    gt_px = pixel_coords(gt, (height, width))
    pred_px = pixel_coords(pred, (height, width))
    radius = _fmt(max(width, height) / 80)
    stroke = _fmt(max(width, height) / 200)

    lines = ET.SubElement(svg, f"{{{_SVG_NS}}}g", {"id": "correspondence"})
    for (gx, gy), (px, py) in zip(gt_px, pred_px, strict=True):
        ET.SubElement(
            lines,
            f"{{{_SVG_NS}}}line",
            {
                "x1": _fmt(gx),
                "y1": _fmt(gy),
                "x2": _fmt(px),
                "y2": _fmt(py),
                "stroke": LINE_COLOR,
                "stroke-width": stroke,
            },
        )
    for group_id, coords, color in (
        ("ground-truth", gt_px, GT_COLOR),
        ("prediction", pred_px, PRED_COLOR),
    ):
        group = ET.SubElement(svg, f"{{{_SVG_NS}}}g", {"id": group_id})
        for x, y in coords:
            ET.SubElement(
                group,
                f"{{{_SVG_NS}}}circle",
                {"cx": _fmt(x), "cy": _fmt(y), "r": radius, "fill": color},
            )

    path.parent.mkdir(parents=True, exist_ok=True)
    ET.ElementTree(svg).write(path, encoding="utf-8", xml_declaration=True)
    return path
