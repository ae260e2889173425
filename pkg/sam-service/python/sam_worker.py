#!/usr/bin/env python3
"""JSON-lines SAM worker.

Reads one request per stdin line:
    {"id": int, "image_png_base64": str,
     "prompt": {"type": "point", "x": int, "y": int}
            | {"type": "box", "x_min": int, "y_min": int,
               "x_max": int, "y_max": int}}
and answers one line per request:
    {"id": int, "mask_png_base64": str}  or  {"id": int, "error": str}

The checkpoint is loaded once. When SAM proposes multiple candidate masks,
the one with the highest predicted quality is kept. Requires the
`segment-anything` package and torch.
"""

import argparse
import base64
import io
import json
import sys

import numpy as np
from PIL import Image


def load_predictor(checkpoint, model_type, device):
    from segment_anything import SamPredictor, sam_model_registry

    sam = sam_model_registry[model_type](checkpoint=checkpoint)
    sam.to(device=device)
    return SamPredictor(sam)


def mask_to_b64(mask):
    arr = np.where(mask, np.uint8(255), np.uint8(0))
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def answer(predictor, state, request):
    raw = base64.b64decode(request["image_png_base64"])
    image = np.asarray(Image.open(io.BytesIO(raw)).convert("RGB"))
    # set_image is expensive; reuse the embedding while the image repeats
    if state.get("raw") != raw:
        predictor.set_image(image)
        state["raw"] = raw
    prompt = request["prompt"]
    if prompt["type"] == "point":
        masks, scores, _ = predictor.predict(
            point_coords=np.array([[prompt["x"], prompt["y"]]]),
            point_labels=np.array([1]),
            multimask_output=True,
        )
    else:
        box = np.array([prompt["x_min"], prompt["y_min"], prompt["x_max"], prompt["y_max"]])
        masks, scores, _ = predictor.predict(box=box[None, :], multimask_output=True)
    best = int(np.argmax(scores))
    return mask_to_b64(masks[best])


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument("--model-type", default="vit_h")
    parser.add_argument("--device", default="cpu")
    args = parser.parse_args()

    predictor = load_predictor(args.checkpoint, args.model_type, args.device)
    print(json.dumps({"ready": True}), flush=True)

    state = {}
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        request = json.loads(line)
        try:
            mask_b64 = answer(predictor, state, request)
            print(json.dumps({"id": request["id"], "mask_png_base64": mask_b64}), flush=True)
        except Exception as exc:  # report per-request failures, keep serving
            print(json.dumps({"id": request.get("id"), "error": str(exc)}), flush=True)


if __name__ == "__main__":
    main()
