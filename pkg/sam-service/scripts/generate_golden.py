#!/usr/bin/env python3
"""Regenerate fixtures/golden.json from the engine's reference backend.

The service's intensity segmenter must reproduce these masks bit for bit,
which pins the wire protocol AND cross-checks the two implementations of
the flood-fill / Otsu rules against each other. Requires the segqa package.
"""

import base64
import json
from pathlib import Path

import numpy as np

from segqa.backend import ReferenceBackend
from segqa.objects import BoxPrompt, PointPrompt
from segqa.raster import Image, image_to_png_bytes, mask_to_png_bytes


def fixture_images():
    # two-tone square with a noisy-ish gradient strip
    px = np.full((20, 24), 40, np.uint8)
    px[4:14, 6:16] = 210
    px[17, :] = np.linspace(0, 255, 24).astype(np.uint8)
    yield "gray_square", Image(px)

    # RGB image: luma rounding must match across implementations
    rgb = np.zeros((16, 16, 3), np.uint8)
    rgb[:, :, 0] = 30
    rgb[:, :, 1] = 60
    rgb[:, :, 2] = 90
    rgb[5:12, 3:10] = (220, 180, 140)
    rgb[2, 2] = (255, 0, 0)
    yield "rgb_blob", Image(rgb)


def cases_for(name, image):
    h, w = image.height, image.width
    if name == "gray_square":
        return [
            ("point_in_square", PointPrompt(10, 8)),
            ("point_on_background", PointPrompt(1, 1)),
            ("box_around_square", BoxPrompt(4, 2, 18, 15)),
            ("box_tight", BoxPrompt(6, 4, 15, 13)),
            ("box_1x1", BoxPrompt(3, 3, 3, 3)),
            ("box_full_image", BoxPrompt(0, 0, w - 1, h - 1)),
        ]
    return [
        ("point_in_blob", PointPrompt(6, 8)),
        ("point_red_pixel", PointPrompt(2, 2)),
        ("box_around_blob", BoxPrompt(1, 3, 12, 13)),
    ]


def main():
    backend = ReferenceBackend(tolerance=12)
    doc = {"tolerance": 12, "images": []}
    for name, image in fixture_images():
        entry = {
            "name": name,
            "width": image.width,
            "height": image.height,
            "image_png_base64": base64.b64encode(image_to_png_bytes(image)).decode(),
            "cases": [],
        }
        for case_name, prompt in cases_for(name, image):
            if isinstance(prompt, PointPrompt):
                wire = {"type": "point", "x": prompt.x, "y": prompt.y}
                mask = backend.segment_point(image, prompt).mask
            else:
                wire = {
                    "type": "box",
                    "x_min": prompt.x_min,
                    "y_min": prompt.y_min,
                    "x_max": prompt.x_max,
                    "y_max": prompt.y_max,
                }
                mask = backend.segment_box(image, prompt).mask
            entry["cases"].append(
                {
                    "name": case_name,
                    "prompt": wire,
                    "expected_mask_png_base64": base64.b64encode(mask_to_png_bytes(mask)).decode(),
                    "expected_area": int(mask.sum()),
                }
            )
        doc["images"].append(entry)
    out = Path(__file__).parent.parent / "fixtures" / "golden.json"
    out.parent.mkdir(exist_ok=True)
    out.write_text(json.dumps(doc, indent=2) + "\n")
    print(f"wrote {out} ({sum(len(e['cases']) for e in doc['images'])} cases)")


if __name__ == "__main__":
    main()
