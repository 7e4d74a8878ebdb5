"""Asset ingestion and dataset persistence.

Datasets are directories of PNG images plus a JSON-lines manifest, one record
per sample with the sampled condition parameters embedded inline.  Generation
routes each (theta, object) pair through sheet -> fold -> render -> occlude ->
composite -> blur, with every random draw seeded by a stable hash so the
whole dataset is reproducible byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from . import blur as fx
from .conditions import Condition, ConditionParams, canonical_params
from .errors import (
    AssetMissing,
    EmptyProjection,
    InvalidArgument,
    ParseError,
    PlacementImpossible,
)
from .geometry import make_flat_sheet, sample_deformation, apply_deformation
from .metrics import Box, GroundTruth
from .render import (
    Camera,
    Sprite,
    TextureAsset,
    add_occluder,
    camera_for_pose,
    composite,
    default_camera,
    render_object,
)

_IMAGE_EXTS = {".png", ".jpg", ".jpeg", ".bmp"}


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from a tuple of hashable parts."""
    key = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big") >> 1


def load_image(path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if img is None:
        raise AssetMissing(f"cannot read image {path}")
    return img[:, :, ::-1].astype(np.float64) / 255.0


def save_image(path, image: np.ndarray) -> None:
    u8 = np.clip(np.round(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    if not cv2.imwrite(str(path), u8[:, :, ::-1]):
        raise IOError(f"failed to write {path}")


@dataclass
class AssetRegistry:
    textures: dict[int, TextureAsset]
    backgrounds: list[Path]
    occluders: list[TextureAsset] = field(default_factory=list)

    def __post_init__(self):
        if not self.textures:
            raise AssetMissing("at least one object texture is required")
        if not self.backgrounds:
            raise AssetMissing("at least one background image is required")

    @classmethod
    def load(cls, textures_dir, backgrounds_dir, occluders_dir=None,
             physical_size=(0.21, 0.297)) -> "AssetRegistry":
        textures = {}
        for i, p in enumerate(_scan(textures_dir)):
            object_id = int(p.stem) if p.stem.isdigit() else i
            textures[object_id] = TextureAsset(object_id, load_image(p), physical_size)
        backgrounds = _scan(backgrounds_dir)
        occluders = []
        if occluders_dir is not None:
            for i, p in enumerate(_scan(occluders_dir)):
                occluders.append(TextureAsset(1000 + i, load_image(p), physical_size))
        return cls(textures, backgrounds, occluders)


def _scan(directory) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise AssetMissing(f"asset directory {directory} does not exist")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in _IMAGE_EXTS)


@dataclass(frozen=True)
class RenderSettings:
    image_size: tuple[int, int] = (640, 480)
    grid: tuple[int, int] = (30, 40)
    fill: float = 0.6  # canonical object height as a fraction of image height
    pose_retries: int = 100


@dataclass(frozen=True)
class SampleRecord:
    image_path: str  # relative to the manifest directory
    image_id: str
    object_id: int
    box: Box
    theta: ConditionParams
    seed: int
    split: str = "train"
    audit: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "image_path": self.image_path,
            "image_id": self.image_id,
            "object_id": self.object_id,
            "box": self.box.to_list(),
            "theta": self.theta.to_json(),
            "seed": self.seed,
            "split": self.split,
            "audit": self.audit,
        }

    @classmethod
    def from_json(cls, rec: dict) -> "SampleRecord":
        return cls(
            rec["image_path"],
            rec["image_id"],
            int(rec["object_id"]),
            Box.from_list(rec["box"]),
            ConditionParams.from_json(rec["theta"]),
            int(rec["seed"]),
            rec.get("split", "train"),
            rec.get("audit", {}),
        )


@dataclass
class DatasetManifest:
    records: list[SampleRecord]
    root: Path | None = None  # directory image paths are relative to

    def image_path(self, record: SampleRecord) -> Path:
        base = self.root if self.root is not None else Path(".")
        return base / record.image_path

    def ground_truth(self) -> list[GroundTruth]:
        return [GroundTruth(r.image_id, r.object_id, r.box) for r in self.records]


def write_manifest(manifest: DatasetManifest, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in manifest.records:
            fh.write(json.dumps(rec.to_json()) + "\n")


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    records = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = SampleRecord.from_json(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, ParseError) as exc:
                raise ParseError(str(exc), line=lineno)
            if rec.image_id in seen:
                raise ParseError(f"duplicate image_id {rec.image_id}", line=lineno)
            seen.add(rec.image_id)
            records.append(rec)
    return DatasetManifest(records, root=path.parent)


def _resolve_render_params(theta: ConditionParams) -> dict:
    """Expand theta into the full per-condition parameter set, everything not
    targeted by theta held at its canonical value."""
    resolved = {c: canonical_params(c).payload for c in Condition}
    resolved[theta.condition] = theta.payload
    return resolved


def render_sample(
    theta: ConditionParams,
    texture: TextureAsset,
    registry: AssetRegistry,
    settings: RenderSettings,
    seed: int,
) -> tuple[np.ndarray, Box, dict]:
    """Render one sample; returns (image, tight box, audit record)."""
    p = _resolve_render_params(theta)
    pw, ph = texture.physical_size
    sheet = make_flat_sheet(pw, ph, *settings.grid)

    de = p[Condition.DEFORMATION]
    bend = float(de.get("bend_limit", np.pi / 2))
    params = sample_deformation(
        sheet, int(de["ruling_count"]), derive_seed(seed, "deform"),
        bend_range=(-bend, bend),
    )
    mesh = apply_deformation(sheet, params)

    base = default_camera(settings.image_size, sheet_height=ph, fill=settings.fill)
    po = p[Condition.POSE_CHANGE]
    li = p[Condition.LIGHTING]
    sc = p[Condition.SCALE]

    sprite = None
    rng = np.random.default_rng(derive_seed(seed, "pose-retry"))
    tdir = np.asarray(po["tdir"], dtype=float)
    for attempt in range(settings.pose_retries):
        camera = base
        if po["roll"] or po["pitch"] or po["yaw"] or po["translation"]:
            camera = camera_for_pose(
                base, po["roll"], po["pitch"], po["yaw"], po["translation"] * tdir
            )
        try:
            sprite = render_object(
                mesh, texture, camera,
                irradiance=float(li["irradiance"]), scale=float(sc["factor"]),
            )
            break
        except EmptyProjection:
            # re-draw the translation direction and try again
            tdir = rng.normal(size=3)
            tdir /= np.linalg.norm(tdir)
    if sprite is None:
        raise EmptyProjection("object never projected into view")

    eo = p[Condition.EXTERNAL_OCCLUSION]
    if eo["visibility"] < 1.0:
        if not registry.occluders:
            raise AssetMissing("occlusion scheduled but no occluder assets loaded")
        occ_rng = np.random.default_rng(derive_seed(seed, "occluder"))
        occ = registry.occluders[int(occ_rng.integers(len(registry.occluders)))]
        sprite = add_occluder(sprite, occ, float(eo["visibility"]), derive_seed(seed, "occ"))

    bg_rng = np.random.default_rng(derive_seed(seed, "background"))
    bg_path = registry.backgrounds[int(bg_rng.integers(len(registry.backgrounds)))]
    background = load_image(bg_path)
    iw, ih = settings.image_size
    if background.shape[:2] != (ih, iw):
        background = cv2.resize(background, (iw, ih), interpolation=cv2.INTER_AREA)

    sprite = _crop_sprite_to_frame(sprite, iw, ih)
    image, box = composite(sprite, background, derive_seed(seed, "place"))

    fb = p[Condition.FOCUS_BLUR]
    mb = p[Condition.MOTION_BLUR]
    if fb["kernel_pct"] > 0:
        image = fx.gaussian_blur(image, float(fb["kernel_pct"]))
    if mb["length_pct"] > 0:
        image = fx.motion_blur(image, float(mb["length_pct"]), float(mb["angle"]))

    audit = {
        "ruling_count": int(de["ruling_count"]),
        "bend_limit": bend,
        "pose": {k: po[k] for k in ("roll", "pitch", "yaw", "translation")},
        "irradiance": float(li["irradiance"]),
        "scale": float(sc["factor"]),
        "visibility": float(eo["visibility"]),
        "kernel_pct": float(fb["kernel_pct"]),
        "motion": {"length_pct": float(mb["length_pct"]), "angle": float(mb["angle"])},
        "background": bg_path.name,
    }
    return image, box, audit


def _crop_sprite_to_frame(sprite: Sprite, frame_w: int, frame_h: int) -> Sprite:
    """Center-crop an oversized sprite so composite placement stays possible."""
    ys, xs = np.nonzero(sprite.mask)
    if len(ys) == 0:
        raise EmptyProjection("sprite has no visible pixels")
    # tighten to the visible pixels first: occlusion or near-edge-on poses can
    # leave a small mask inside a much larger pixel box
    ty0, ty1 = int(ys.min()), int(ys.max()) + 1
    tx0, tx1 = int(xs.min()), int(xs.max()) + 1
    if (ty1 - ty0, tx1 - tx0) != sprite.mask.shape:
        sprite = Sprite(
            sprite.pixels[ty0:ty1, tx0:tx1].copy(),
            sprite.mask[ty0:ty1, tx0:tx1].copy(),
            (sprite.origin[0] + tx0, sprite.origin[1] + ty0),
        )
    sh, sw = sprite.mask.shape
    if sh <= frame_h and sw <= frame_w:
        return sprite
    y0 = max(0, (sh - frame_h) // 2)
    x0 = max(0, (sw - frame_w) // 2)
    y1, x1 = min(sh, y0 + frame_h), min(sw, x0 + frame_w)
    cropped = Sprite(
        sprite.pixels[y0:y1, x0:x1].copy(),
        sprite.mask[y0:y1, x0:x1].copy(),
        (sprite.origin[0] + x0, sprite.origin[1] + y0),
    )
    if not cropped.mask.any():
        raise EmptyProjection("object fully outside the frame after cropping")
    return cropped


def generate_data(
    thetas: list[ConditionParams],
    objects: list[int],
    registry: AssetRegistry,
    out_dir,
    seed: int,
    settings: RenderSettings = RenderSettings(),
    split: str = "train",
    tag: str = "",
    jobs: int = 1,
) -> DatasetManifest:
    """Render one sample per (theta, object); write images and manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for obj in objects:
        if obj not in registry.textures:
            raise AssetMissing(f"no texture for object {obj}")

    tasks = []
    for idx, theta in enumerate(thetas):
        for obj in objects:
            s = derive_seed(seed, theta.condition.value, theta.difficulty.value, tag, obj, idx)
            image_id = f"{tag + '-' if tag else ''}{theta.condition.value}-{theta.difficulty.value}-o{obj}-{idx:05d}"
            tasks.append((idx, theta, obj, s, image_id))

    def run(task):
        _, theta, obj, s, image_id = task
        image, box, audit = render_sample(
            theta, registry.textures[obj], registry, settings, s
        )
        fname = f"{image_id}.png"
        save_image(out_dir / fname, image)
        return SampleRecord(fname, image_id, obj, box, theta, s, split, audit)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(run, tasks))
    else:
        records = [run(t) for t in tasks]

    manifest = DatasetManifest(records, root=out_dir)
    write_manifest(manifest, out_dir / "manifest.jsonl")
    return manifest
