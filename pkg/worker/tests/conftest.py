import json
from pathlib import Path

import cv2
import numpy as np
import pytest


def _scene(seed: int, box, size=(120, 90)):
    """A noisy background with a bright structured patch inside `box`."""
    rng = np.random.default_rng(seed)
    w, h = size
    image = rng.uniform(0.0, 0.3, size=(h, w, 3))
    x0, y0, x1, y1 = box
    yy, xx = np.mgrid[y0:y1, x0:x1]
    pattern = 0.5 + 0.5 * np.sin(xx / 3.0) * np.cos(yy / 4.0)
    image[y0:y1, x0:x1] = pattern[..., None]
    return (image * 255).astype(np.uint8)


@pytest.fixture()
def dataset(tmp_path):
    """Three images of one synthetic 'object' plus a manifest."""
    out = tmp_path / "ds"
    out.mkdir()
    box = [30, 20, 80, 60]
    records = []
    for i in range(3):
        name = f"img{i}.png"
        cv2.imwrite(str(out / name), _scene(100 + i, box))
        records.append(
            {
                "image_path": name,
                "image_id": f"img{i}",
                "object_id": 0,
                "box": [float(v) for v in box],
            }
        )
    manifest = out / "manifest.jsonl"
    manifest.write_text("".join(json.dumps(r) + "\n" for r in records))
    return manifest, records
