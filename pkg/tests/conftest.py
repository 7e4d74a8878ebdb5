import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "scripts"))

import make_demo_assets  # noqa: E402

from foldlab.datastore import AssetRegistry, RenderSettings  # noqa: E402


@pytest.fixture(scope="session")
def asset_root(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("assets")
    make_demo_assets.build(root, objects=3, backgrounds=2, occluders=2)
    return root


@pytest.fixture(scope="session")
def registry(asset_root) -> AssetRegistry:
    return AssetRegistry.load(
        asset_root / "textures",
        asset_root / "backgrounds",
        asset_root / "occluders",
    )


@pytest.fixture(scope="session")
def fast_settings() -> RenderSettings:
    """Small frames and coarse grids keep render-heavy tests quick."""
    return RenderSettings(image_size=(160, 120), grid=(8, 10))
