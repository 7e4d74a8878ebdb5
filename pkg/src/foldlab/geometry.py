"""Flat textured sheets and exactly-isometric piecewise-rigid folds.

A deformation is parameterized by straight fold lines (rulings) on the flat
sheet together with a dihedral bend angle per line.  Folding rotates
everything strictly on the far side of a line rigidly about that line's
current 3-D image, so every mesh edge keeps its flat length exactly.  To make
that true for arbitrary fold lines the sheet grid is first refined so that no
triangle straddles a line.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, SamplingExhausted

DEFAULT_GRID = (30, 40)
DEFAULT_BEND_RANGE = (-np.pi / 2, np.pi / 2)
MAX_SAMPLING_ATTEMPTS = 1000

# minimum separation between fold-line chords, as a fraction of the diagonal;
# keeps side classification numerically unambiguous during refinement
_CHORD_MARGIN = 1e-4


@dataclass(frozen=True)
class FlatSheet:
    width: float
    height: float
    grid_u: int
    grid_v: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise InvalidArgument("sheet dimensions must be positive")
        if self.grid_u < 2 or self.grid_v < 2:
            raise InvalidArgument("grid must be at least 2x2")

    @property
    def uv(self) -> np.ndarray:
        u = np.linspace(0.0, 1.0, self.grid_u)
        v = np.linspace(0.0, 1.0, self.grid_v)
        uu, vv = np.meshgrid(u, v)  # row-major: vertex (i, j) at j * grid_u + i
        return np.stack([uu.ravel(), vv.ravel()], axis=1)

    def positions(self) -> np.ndarray:
        return self.uv * np.array([self.width, self.height])

    def triangles(self) -> np.ndarray:
        tris = []
        gu = self.grid_u
        for j in range(self.grid_v - 1):
            for i in range(gu - 1):
                v00 = j * gu + i
                v10 = j * gu + i + 1
                v01 = (j + 1) * gu + i
                v11 = (j + 1) * gu + i + 1
                tris.append((v00, v10, v11))
                tris.append((v00, v11, v01))
        return np.array(tris, dtype=np.int64)


@dataclass(frozen=True)
class Ruling:
    anchor: tuple[float, float]
    direction: float  # angle of the fold line in sheet coordinates, radians
    bend: float  # dihedral rotation applied to the far side, radians

    def __post_init__(self):
        if abs(self.bend) > np.pi:
            raise InvalidArgument("bend angle must be within [-pi, pi]")

    def unit(self) -> np.ndarray:
        return np.array([np.cos(self.direction), np.sin(self.direction)])


@dataclass(frozen=True)
class DeformationParams:
    rulings: tuple[Ruling, ...]

    @property
    def region_count(self) -> int:
        return len(self.rulings) + 1


@dataclass
class Mesh3D:
    vertices: np.ndarray  # (n, 3) meters
    triangles: np.ndarray  # (m, 3) indices
    uv: np.ndarray  # (n, 2) in [0, 1]^2

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        self.uv = np.asarray(self.uv, dtype=np.float64)


def make_flat_sheet(width: float, height: float, grid_u: int, grid_v: int) -> FlatSheet:
    return FlatSheet(width, height, grid_u, grid_v)


def _signed_distance(points: np.ndarray, ruling: Ruling) -> np.ndarray:
    d = ruling.unit()
    rel = points - np.asarray(ruling.anchor)
    return d[0] * rel[..., 1] - d[1] * rel[..., 0]


def _clip_to_rect(anchor, direction, width, height):
    """Clip the infinite line anchor + t*dir to the sheet rectangle.

    Returns (p0, p1) endpoints of the chord, or None if the intersection is
    empty or degenerate.
    """
    a = np.asarray(anchor, dtype=float)
    d = np.array([np.cos(direction), np.sin(direction)])
    t_min, t_max = -np.inf, np.inf
    for axis, limit in ((0, width), (1, height)):
        if abs(d[axis]) < 1e-15:
            if a[axis] < 0 or a[axis] > limit:
                return None
        else:
            t0 = (0.0 - a[axis]) / d[axis]
            t1 = (limit - a[axis]) / d[axis]
            lo, hi = min(t0, t1), max(t0, t1)
            t_min = max(t_min, lo)
            t_max = min(t_max, hi)
    if not np.isfinite(t_min) or not np.isfinite(t_max) or t_max - t_min <= 1e-12:
        return None
    return a + t_min * d, a + t_max * d


def _segment_distance(p0, p1, q0, q1) -> float:
    """Minimum distance between two 2-D segments."""

    def point_seg(p, a, b):
        ab = b - a
        denom = float(ab @ ab)
        t = 0.0 if denom == 0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
        return float(np.linalg.norm(p - (a + t * ab)))

    d1 = p1 - p0
    d2 = q1 - q0
    cross = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(cross) > 1e-15:
        rel = q0 - p0
        t = (rel[0] * d2[1] - rel[1] * d2[0]) / cross
        u = (rel[0] * d1[1] - rel[1] * d1[0]) / cross
        if 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0:
            return 0.0
    return min(
        point_seg(p0, q0, q1),
        point_seg(p1, q0, q1),
        point_seg(q0, p0, p1),
        point_seg(q1, p0, p1),
    )


def ruling_chord(sheet: FlatSheet, ruling: Ruling):
    chord = _clip_to_rect(ruling.anchor, ruling.direction, sheet.width, sheet.height)
    if chord is None:
        raise InvalidArgument("ruling line does not cross the sheet")
    return chord


def sample_deformation(
    sheet: FlatSheet,
    ruling_count: int,
    rng_seed: int,
    bend_range: tuple[float, float] = DEFAULT_BEND_RANGE,
    max_attempts: int = MAX_SAMPLING_ATTEMPTS,
) -> DeformationParams:
    """Sample pairwise non-crossing rulings with uniform bend angles."""
    if ruling_count < 0:
        raise InvalidArgument("ruling_count must be >= 0")
    rng = np.random.default_rng(rng_seed)
    diag = float(np.hypot(sheet.width, sheet.height))
    margin = _CHORD_MARGIN * diag
    rulings: list[Ruling] = []
    chords: list[tuple[np.ndarray, np.ndarray]] = []
    for _ in range(ruling_count):
        for attempt in range(max_attempts):
            anchor = (
                float(rng.uniform(0, sheet.width)),
                float(rng.uniform(0, sheet.height)),
            )
            direction = float(rng.uniform(0, np.pi))
            bend = float(rng.uniform(*bend_range))
            chord = _clip_to_rect(anchor, direction, sheet.width, sheet.height)
            if chord is None:
                continue
            if all(_segment_distance(*chord, *c) > margin for c in chords):
                rulings.append(Ruling(anchor, direction, bend))
                chords.append(chord)
                break
        else:
            raise SamplingExhausted(
                f"no non-crossing ruling found after {max_attempts} attempts"
            )
    # process folds in a stable order along the sheet's long axis
    long_axis = 1 if sheet.height >= sheet.width else 0
    rulings.sort(key=lambda r: r.anchor[long_axis])
    return DeformationParams(tuple(rulings))


def _refine_against_line(verts2d, triangles, ruling, tol):
    """Split triangles so none straddles the ruling line strictly."""
    d = _signed_distance(verts2d, ruling)
    sign = np.where(d > tol, 1, np.where(d < -tol, -1, 0))
    tri_signs = sign[triangles]
    straddle = np.any(tri_signs > 0, axis=1) & np.any(tri_signs < 0, axis=1)
    if not np.any(straddle):
        return verts2d, triangles
    new_verts = [verts2d]
    extra = []
    split_cache: dict[tuple[int, int], int] = {}
    next_id = len(verts2d)

    def cut(i, j):
        nonlocal next_id
        key = (i, j) if i < j else (j, i)
        if key not in split_cache:
            t = d[i] / (d[i] - d[j])
            extra.append(verts2d[i] + t * (verts2d[j] - verts2d[i]))
            split_cache[key] = next_id
            next_id += 1
        return split_cache[key]

    out = list(triangles[~straddle])
    for tri in triangles[straddle]:
        s = sign[tri]
        if 0 in s:
            # one vertex on the line, other two on opposite sides
            zi = int(np.where(s == 0)[0][0])
            a, b, c = tri[zi], tri[(zi + 1) % 3], tri[(zi + 2) % 3]
            m = cut(b, c)
            out.append((a, b, m))
            out.append((a, m, c))
        else:
            # isolated vertex on one side, two on the other
            counts = {1: int(np.sum(s > 0)), -1: int(np.sum(s < 0))}
            lone_sign = 1 if counts[1] == 1 else -1
            zi = int(np.where(s == lone_sign)[0][0])
            a, b, c = tri[zi], tri[(zi + 1) % 3], tri[(zi + 2) % 3]
            mab = cut(a, b)
            mac = cut(a, c)
            out.append((a, mab, mac))
            out.append((mab, b, c))
            out.append((mab, c, mac))
    if extra:
        new_verts.append(np.array(extra))
    return np.concatenate(new_verts), np.array(out, dtype=np.int64)


def _rotate_about_axis(points, p0, p1, angle):
    k = p1 - p0
    k = k / np.linalg.norm(k)
    rel = points - p0
    cos, sin = np.cos(angle), np.sin(angle)
    return (
        p0
        + rel * cos
        + np.cross(k, rel) * sin
        + np.outer(rel @ k, k) * (1 - cos)
    )


def apply_deformation(sheet: FlatSheet, params: DeformationParams) -> Mesh3D:
    """Fold the sheet along each ruling in order; exactly isometric."""
    verts2d = sheet.positions()
    triangles = sheet.triangles()
    tol = 1e-9 * max(sheet.width, sheet.height)
    chords = [ruling_chord(sheet, r) for r in params.rulings]
    for ruling in params.rulings:
        verts2d, triangles = _refine_against_line(verts2d, triangles, ruling, tol)

    # chord endpoints ride along so each fold axis is the line's current image
    chord_pts2d = (
        np.array([p for c in chords for p in c])
        if chords
        else np.zeros((0, 2))
    )
    flat_all = np.concatenate([verts2d, chord_pts2d])
    pts3d = np.concatenate([flat_all, np.zeros((len(flat_all), 1))], axis=1)

    center = np.array([sheet.width / 2, sheet.height / 2])
    n_mesh = len(verts2d)
    for idx, ruling in enumerate(params.rulings):
        center_side = _signed_distance(center[None, :], ruling)[0]
        far = -1.0 if center_side > 0 else 1.0
        d = _signed_distance(flat_all, ruling)
        mask = d * far > tol
        axis_p0 = pts3d[n_mesh + 2 * idx].copy()
        axis_p1 = pts3d[n_mesh + 2 * idx + 1].copy()
        if mask.any():
            pts3d[mask] = _rotate_about_axis(pts3d[mask], axis_p0, axis_p1, ruling.bend)

    uv = verts2d / np.array([sheet.width, sheet.height])
    return Mesh3D(pts3d[:n_mesh], triangles, uv)


def mesh_edges(triangles: np.ndarray) -> np.ndarray:
    e = np.concatenate(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]
    )
    e.sort(axis=1)
    return np.unique(e, axis=0)


def isometry_deviation(sheet: FlatSheet, mesh: Mesh3D) -> float:
    """Max relative deviation of 3-D edge lengths from their flat lengths."""
    if len(mesh.uv) != len(mesh.vertices):
        raise InvalidArgument("uv/vertex count mismatch")
    if len(mesh.triangles) == 0 or mesh.triangles.max() >= len(mesh.vertices):
        raise InvalidArgument("triangle indices do not match the vertex set")
    if mesh.uv.min() < -1e-9 or mesh.uv.max() > 1 + 1e-9:
        raise InvalidArgument("uv coordinates outside the sheet")
    flat = mesh.uv * np.array([sheet.width, sheet.height])
    edges = mesh_edges(mesh.triangles)
    l_flat = np.linalg.norm(flat[edges[:, 0]] - flat[edges[:, 1]], axis=1)
    l_3d = np.linalg.norm(
        mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]], axis=1
    )
    valid = l_flat > 0
    if not valid.all():
        raise InvalidArgument("degenerate flat edge")
    return float(np.max(np.abs(l_3d - l_flat) / l_flat))


def export_obj(mesh: Mesh3D) -> str:
    """Wavefront OBJ text (v/vt/f records) for visual inspection."""
    lines = []
    for v in mesh.vertices:
        lines.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
    for t in mesh.uv:
        lines.append(f"vt {t[0]:.9g} {t[1]:.9g}")
    for tri in mesh.triangles:
        a, b, c = (int(i) + 1 for i in tri)
        lines.append(f"f {a}/{a} {b}/{b} {c}/{c}")
    return "\n".join(lines) + "\n"
