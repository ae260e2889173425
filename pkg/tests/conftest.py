import sys
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

sys.path.insert(0, str(Path(__file__).parent))


def write_png(path, array):
    """Write a PNG from a numpy array (uint8 gray/RGB or uint16 gray)."""
    PILImage.fromarray(array).save(path, format="PNG")
    return path


def random_mask(rng, h, w, density=0.4):
    return rng.random((h, w)) < density


def mask_from_rows(rows):
    """Build a bool mask from strings, 'X' = true."""
    return np.array([[c == "X" for c in row] for row in rows], dtype=bool)
