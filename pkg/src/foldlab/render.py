"""Deterministic software renderer.

Projects a textured 3-D mesh through a pinhole camera with flat Lambertian
shading (single headlight along the camera axis), injects rectangular
occluders, composites sprites onto backgrounds and emits tight bounding
boxes.  All rasters are float arrays in [0, 1]; RGB channel order.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import cv2
import numpy as np

from .errors import (
    EmptyMask,
    EmptyProjection,
    InvalidArgument,
    PlacementImpossible,
)
from .geometry import Mesh3D
from .metrics import Box

_NEAR = 0.01
# sprites larger than this multiple of the frame are treated as degenerate
_MAX_CANVAS_FACTOR = 4


@dataclass(frozen=True)
class CameraPose:
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0
    position: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Camera:
    focal: float
    principal_point: tuple[float, float]
    image_size: tuple[int, int]  # (width, height)
    pose: CameraPose = CameraPose()

    def __post_init__(self):
        if self.focal <= 0 or min(self.image_size) <= 0:
            raise InvalidArgument("focal and image dimensions must be positive")


@dataclass(frozen=True)
class TextureAsset:
    object_id: int
    pixels: np.ndarray  # (h, w, 3) float in [0, 1]
    physical_size: tuple[float, float] = (0.21, 0.297)  # meters, A4 default

    def __post_init__(self):
        if self.pixels.size == 0:
            raise InvalidArgument("empty texture raster")


@dataclass
class Sprite:
    pixels: np.ndarray  # (h, w, 4) RGBA float
    mask: np.ndarray  # (h, w) bool, true where the object itself is visible
    origin: tuple[int, int]  # (x, y) offset in the target frame


def default_camera(image_size=(640, 480), sheet_height=0.297, fill=0.6) -> Camera:
    """Camera for which a fronto-parallel sheet spans `fill` of image height."""
    w, h = image_size
    focal = 800.0 * w / 640.0
    dist = focal * sheet_height / (fill * h)
    return Camera(focal, (w / 2.0, h / 2.0), (w, h), CameraPose(position=(0.0, 0.0, -dist)))


def _euler_matrix(roll, pitch, yaw) -> np.ndarray:
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    rz = np.array([[cr, -sr, 0], [sr, cr, 0], [0, 0, 1]])
    rx = np.array([[1, 0, 0], [0, cp, -sp], [0, sp, cp]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    return ry @ rx @ rz


def camera_for_pose(base: Camera, roll, pitch, yaw, translation) -> Camera:
    """Orbit the base camera about the object center, then displace it."""
    r = _euler_matrix(roll, pitch, yaw)
    pos = r @ np.asarray(base.pose.position) + np.asarray(translation)
    return replace(base, pose=CameraPose(roll, pitch, yaw, tuple(float(x) for x in pos)))


def bbox_of_mask(mask: np.ndarray) -> Box:
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        raise EmptyMask("mask has no true pixels")
    return Box(float(xs.min()), float(ys.min()), float(xs.max() + 1), float(ys.max() + 1))


def _bilinear(texture: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    th, tw = texture.shape[:2]
    x = np.clip(u, 0.0, 1.0) * (tw - 1)
    y = np.clip(v, 0.0, 1.0) * (th - 1)
    x0 = np.clip(np.floor(x).astype(int), 0, tw - 2) if tw > 1 else np.zeros_like(x, int)
    y0 = np.clip(np.floor(y).astype(int), 0, th - 2) if th > 1 else np.zeros_like(y, int)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    x1 = np.minimum(x0 + 1, tw - 1)
    y1 = np.minimum(y0 + 1, th - 1)
    top = texture[y0, x0] * (1 - fx) + texture[y0, x1] * fx
    bot = texture[y1, x0] * (1 - fx) + texture[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def render_object(
    mesh: Mesh3D,
    texture: TextureAsset,
    camera: Camera,
    irradiance: float = 1.0,
    scale: float = 1.0,
) -> Sprite:
    """Z-buffered perspective rasterization with bilinear texturing."""
    if irradiance <= 0:
        raise InvalidArgument("irradiance must be positive")
    if scale <= 0:
        raise InvalidArgument("scale must be positive")

    verts = mesh.vertices
    centroid = verts.mean(axis=0)
    world = (verts - centroid) * scale  # object centered at origin

    r = _euler_matrix(camera.pose.roll, camera.pose.pitch, camera.pose.yaw)
    cam = (world - np.asarray(camera.pose.position)) @ r  # = R^T x, row-wise

    z = cam[:, 2]
    keep = ~np.any(z[mesh.triangles] <= _NEAR, axis=1)
    tris = mesh.triangles[keep]
    if len(tris) == 0:
        raise EmptyProjection("object entirely behind the camera")

    f = camera.focal
    cx, cy = camera.principal_point
    px = f * cam[:, 0] / z + cx
    py = f * cam[:, 1] / z + cy

    used = np.unique(tris)
    x_min = int(np.floor(px[used].min()))
    x_max = int(np.ceil(px[used].max())) + 1
    y_min = int(np.floor(py[used].min()))
    y_max = int(np.ceil(py[used].max())) + 1
    w = x_max - x_min
    h = y_max - y_min
    fw, fh = camera.image_size
    if w <= 0 or h <= 0 or w * h > _MAX_CANVAS_FACTOR**2 * fw * fh:
        raise EmptyProjection("projection empty or degenerately large")

    color = np.zeros((h, w, 3))
    zbuf = np.full((h, w), np.inf)
    covered = np.zeros((h, w), dtype=bool)

    pxl = px - x_min
    pyl = py - y_min
    inv_z = 1.0 / z
    uv_over_z = mesh.uv * inv_z[:, None]
    light = irradiance

    for tri in tris:
        i0, i1, i2 = tri
        ax, ay = pxl[i0], pyl[i0]
        bx, by = pxl[i1], pyl[i1]
        cx2, cy2 = pxl[i2], pyl[i2]
        lo_x = max(int(np.floor(min(ax, bx, cx2))), 0)
        hi_x = min(int(np.ceil(max(ax, bx, cx2))) + 1, w)
        lo_y = max(int(np.floor(min(ay, by, cy2))), 0)
        hi_y = min(int(np.ceil(max(ay, by, cy2))) + 1, h)
        if lo_x >= hi_x or lo_y >= hi_y:
            continue
        area = (bx - ax) * (cy2 - ay) - (by - ay) * (cx2 - ax)
        if abs(area) < 1e-12:
            continue
        xs = np.arange(lo_x, hi_x) + 0.5
        ys = np.arange(lo_y, hi_y) + 0.5
        gx, gy = np.meshgrid(xs, ys)
        w0 = (cx2 - bx) * (gy - by) - (cy2 - by) * (gx - bx)
        w1 = (ax - cx2) * (gy - cy2) - (ay - cy2) * (gx - cx2)
        w2 = (bx - ax) * (gy - ay) - (by - ay) * (gx - ax)
        if area > 0:
            inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
        else:
            inside = (w0 <= 0) & (w1 <= 0) & (w2 <= 0)
        if not inside.any():
            continue
        b0 = w0[inside] / area
        b1 = w1[inside] / area
        b2 = w2[inside] / area
        izp = b0 * inv_z[i0] + b1 * inv_z[i1] + b2 * inv_z[i2]
        depth = 1.0 / izp
        iy, ix = np.nonzero(inside)
        iy += lo_y
        ix += lo_x
        nearer = depth < zbuf[iy, ix] - 1e-12
        if not nearer.any():
            continue
        iy, ix = iy[nearer], ix[nearer]
        uvp = (
            np.outer(b0[nearer], uv_over_z[i0])
            + np.outer(b1[nearer], uv_over_z[i1])
            + np.outer(b2[nearer], uv_over_z[i2])
        ) * depth[nearer][:, None]
        texel = _bilinear(texture.pixels, uvp[:, 0], uvp[:, 1])
        # flat shading: headlight along the camera axis, two-sided surface
        e1 = cam[i1] - cam[i0]
        e2 = cam[i2] - cam[i0]
        n = np.cross(e1, e2)
        norm = np.linalg.norm(n)
        lambert = abs(n[2]) / norm if norm > 0 else 0.0
        zbuf[iy, ix] = depth[nearer]
        color[iy, ix] = np.clip(texel * light * lambert, 0.0, 1.0)
        covered[iy, ix] = True

    if not covered.any():
        raise EmptyProjection("no pixel covered by the projected mesh")

    box = bbox_of_mask(covered)
    sy, sx = slice(int(box.y0), int(box.y1)), slice(int(box.x0), int(box.x1))
    rgba = np.concatenate(
        [color[sy, sx], covered[sy, sx][..., None].astype(float)], axis=2
    )
    return Sprite(rgba, covered[sy, sx].copy(), (x_min + int(box.x0), y_min + int(box.y0)))


def add_occluder(
    sprite: Sprite, occluder: TextureAsset, visibility: float, rng_seed: int
) -> Sprite:
    """Paint a textured rectangle over the sprite so the visible object
    fraction lands within +-0.1 of `visibility`."""
    if not 0.0 < visibility <= 1.0:
        raise InvalidArgument("visibility must lie in (0, 1]")
    if visibility == 1.0:
        return sprite
    rng = np.random.default_rng(rng_seed)
    mask_area = int(sprite.mask.sum())
    target_occluded = (1.0 - visibility) * mask_area

    ys, xs = np.nonzero(sprite.mask)
    best = None
    area = target_occluded
    for _ in range(60):
        ar = float(rng.uniform(0.5, 2.0))
        pick = int(rng.integers(len(xs)))
        cx_p, cy_p = int(xs[pick]), int(ys[pick])
        pw = max(1, int(round(np.sqrt(area * ar))))
        ph = max(1, int(round(area / pw)))
        x0, y0 = cx_p - pw // 2, cy_p - ph // 2
        patch = np.zeros_like(sprite.mask)
        h, w = sprite.mask.shape
        px0, py0 = max(x0, 0), max(y0, 0)
        px1, py1 = min(x0 + pw, w), min(y0 + ph, h)
        if px0 < px1 and py0 < py1:
            patch[py0:py1, px0:px1] = True
        occluded = int((patch & sprite.mask).sum())
        frac = (mask_area - occluded) / mask_area
        err = abs(frac - visibility)
        if best is None or err < best[0]:
            best = (err, (x0, y0, pw, ph))
        if err <= 0.05:
            break
        # grow/shrink the patch toward the missing overlap
        if occluded > 0:
            area = min(area * target_occluded / occluded, 4.0 * mask_area)

    _, (x0, y0, pw, ph) = best
    h, w = sprite.mask.shape
    # expand the canvas so the occluder can overhang the object
    ex0, ey0 = min(x0, 0), min(y0, 0)
    ex1, ey1 = max(x0 + pw, w), max(y0 + ph, h)
    nh, nw = ey1 - ey0, ex1 - ex0
    pixels = np.zeros((nh, nw, 4))
    mask = np.zeros((nh, nw), dtype=bool)
    oy, ox = -ey0, -ex0
    pixels[oy : oy + h, ox : ox + w] = sprite.pixels
    mask[oy : oy + h, ox : ox + w] = sprite.mask

    tex = cv2.resize(
        np.asarray(occluder.pixels, dtype=np.float32),
        (pw, ph),
        interpolation=cv2.INTER_AREA,
    ).astype(np.float64)
    qy, qx = y0 + oy, x0 + ox
    pixels[qy : qy + ph, qx : qx + pw, :3] = tex
    pixels[qy : qy + ph, qx : qx + pw, 3] = 1.0
    mask[qy : qy + ph, qx : qx + pw] = False
    return Sprite(pixels, mask, (sprite.origin[0] + ex0, sprite.origin[1] + ey0))


def composite(
    sprite: Sprite, background: np.ndarray, rng_seed: int
) -> tuple[np.ndarray, Box]:
    """Alpha-over the sprite at a uniform-random position; tight object box."""
    bh, bw = background.shape[:2]
    sh, sw = sprite.mask.shape
    if sh > bh or sw > bw:
        raise PlacementImpossible(f"sprite {sw}x{sh} exceeds background {bw}x{bh}")
    if not sprite.mask.any() and sprite.pixels[..., 3].max() == 0:
        raise EmptyMask("sprite carries no visible pixels")
    rng = np.random.default_rng(rng_seed)
    x0 = int(rng.integers(0, bw - sw + 1))
    y0 = int(rng.integers(0, bh - sh + 1))
    image = np.array(background, dtype=np.float64, copy=True)
    alpha = sprite.pixels[..., 3:4]
    image[y0 : y0 + sh, x0 : x0 + sw] = (
        alpha * sprite.pixels[..., :3] + (1 - alpha) * image[y0 : y0 + sh, x0 : x0 + sw]
    )
    box = bbox_of_mask(sprite.mask)
    return image, Box(box.x0 + x0, box.y0 + y0, box.x1 + x0, box.y1 + y0)
