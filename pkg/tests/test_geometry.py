import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from foldlab.errors import InvalidArgument
from foldlab.geometry import (
    DeformationParams,
    Mesh3D,
    Ruling,
    apply_deformation,
    export_obj,
    isometry_deviation,
    make_flat_sheet,
    mesh_edges,
    ruling_chord,
    sample_deformation,
)

A4 = (0.21, 0.297)


def segments_intersect(p0, p1, q0, q1) -> bool:
    """Independent proper-intersection oracle (orientation tests)."""

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) < 1e-12 else (1 if v > 0 else -1)

    o1, o2 = orient(p0, p1, q0), orient(p0, p1, q1)
    o3, o4 = orient(q0, q1, p0), orient(q0, q1, p1)
    return o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4)


class TestFlatSheet:
    def test_minimal_grid(self):
        sheet = make_flat_sheet(*A4, 2, 2)
        assert len(sheet.uv) == 4
        assert len(sheet.triangles()) == 2
        corners = {tuple(p) for p in sheet.uv}
        assert corners == {(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)}

    def test_default_grid_counts(self):
        sheet = make_flat_sheet(*A4, 30, 40)
        assert len(sheet.uv) == 30 * 40 == 1200
        pos = sheet.positions()
        edges = mesh_edges(sheet.triangles())
        lengths = np.linalg.norm(pos[edges[:, 0]] - pos[edges[:, 1]], axis=1)
        assert (lengths > 0).all()

    def test_degenerate_grid_rejected(self):
        with pytest.raises(InvalidArgument):
            make_flat_sheet(*A4, 1, 2)

    def test_nonpositive_size_rejected(self):
        with pytest.raises(InvalidArgument):
            make_flat_sheet(0.0, 0.297, 4, 4)


class TestSampleDeformation:
    def test_zero_rulings(self):
        params = sample_deformation(make_flat_sheet(*A4, 8, 10), 0, 1)
        assert params.rulings == ()
        assert params.region_count == 1

    def test_eight_rulings_noncrossing(self):
        sheet = make_flat_sheet(*A4, 8, 10)
        params = sample_deformation(sheet, 8, 7)
        assert len(params.rulings) == 8
        assert params.region_count == 9
        chords = [ruling_chord(sheet, r) for r in params.rulings]
        for i in range(len(chords)):
            for j in range(i + 1, len(chords)):
                assert not segments_intersect(*chords[i], *chords[j])

    def test_determinism(self):
        sheet = make_flat_sheet(*A4, 8, 10)
        assert sample_deformation(sheet, 5, 99) == sample_deformation(sheet, 5, 99)

    def test_negative_count_rejected(self):
        with pytest.raises(InvalidArgument):
            sample_deformation(make_flat_sheet(*A4, 4, 4), -1, 0)


class TestApplyDeformation:
    def test_zero_rulings_planar(self):
        sheet = make_flat_sheet(*A4, 8, 10)
        mesh = apply_deformation(sheet, DeformationParams(()))
        assert np.allclose(mesh.vertices[:, 2], 0.0)
        assert np.allclose(mesh.vertices[:, :2], sheet.positions())

    def test_single_fold_dihedral(self):
        """A vertical mid-width fold at pi/2 gives two planar halves at a
        right angle, exactly isometric."""
        sheet = make_flat_sheet(*A4, 9, 11)
        ruling = Ruling((A4[0] / 2, 0.1), np.pi / 2, np.pi / 2)
        mesh = apply_deformation(sheet, DeformationParams((ruling,)))
        assert isometry_deviation(sheet, mesh) <= 1e-9
        flat = mesh.uv * np.array(A4)
        near = flat[:, 0] < A4[0] / 2 - 1e-9
        far = flat[:, 0] > A4[0] / 2 + 1e-9
        # near half stays in the z=0 plane
        assert np.abs(mesh.vertices[near, 2]).max() <= 1e-12
        # far half is planar with constant x (rotated 90 degrees about x=w/2)
        assert np.ptp(mesh.vertices[far, 0]) <= 1e-12
        v_far = mesh.vertices[far]
        assert np.abs(v_far[:, 0] - A4[0] / 2).max() <= 1e-12

    def test_canonical_two_rulings_three_regions(self):
        sheet = make_flat_sheet(*A4, 8, 10)
        params = sample_deformation(sheet, 2, 5)
        assert params.region_count == 3
        mesh = apply_deformation(sheet, params)
        assert isometry_deviation(sheet, mesh) <= 1e-6

    @hsettings(max_examples=30, deadline=None)
    @given(
        count=st.integers(min_value=0, max_value=8),
        seed=st.integers(min_value=0, max_value=2**31),
    )
    def test_isometry_property(self, count, seed):
        sheet = make_flat_sheet(*A4, 8, 10)
        params = sample_deformation(sheet, count, seed)
        mesh = apply_deformation(sheet, params)
        assert isometry_deviation(sheet, mesh) <= 1e-6


class TestIsometryDeviation:
    def _flat_mesh(self, width=0.01, height=0.01):
        sheet = make_flat_sheet(width, height, 2, 2)
        return sheet, apply_deformation(sheet, DeformationParams(()))

    def test_undeformed_zero(self):
        sheet, mesh = self._flat_mesh()
        assert isometry_deviation(sheet, mesh) == 0.0

    def test_rigid_motion_zero(self):
        sheet, mesh = self._flat_mesh()
        theta = 0.7
        rot = np.array([
            [np.cos(theta), -np.sin(theta), 0],
            [np.sin(theta), np.cos(theta), 0],
            [0, 0, 1],
        ])
        moved = Mesh3D(mesh.vertices @ rot.T + np.array([1.0, -2.0, 3.0]),
                       mesh.triangles, mesh.uv)
        assert isometry_deviation(sheet, moved) <= 1e-12

    def test_displaced_vertex_detected(self):
        # 1 mm shift along a 10 mm edge: relative deviation 0.1 >= 0.05
        sheet, mesh = self._flat_mesh(0.01, 0.01)
        verts = mesh.vertices.copy()
        verts[0, 0] -= 0.001
        assert isometry_deviation(sheet, Mesh3D(verts, mesh.triangles, mesh.uv)) >= 0.05

    def test_bad_topology_rejected(self):
        sheet, mesh = self._flat_mesh()
        bad = Mesh3D(mesh.vertices, np.array([[0, 1, 99]]), mesh.uv)
        with pytest.raises(InvalidArgument):
            isometry_deviation(sheet, bad)


def test_export_obj_roundtrip_counts():
    sheet = make_flat_sheet(*A4, 3, 3)
    mesh = apply_deformation(sheet, DeformationParams(()))
    text = export_obj(mesh)
    lines = text.strip().splitlines()
    assert sum(l.startswith("v ") for l in lines) == len(mesh.vertices)
    assert sum(l.startswith("vt ") for l in lines) == len(mesh.uv)
    assert sum(l.startswith("f ") for l in lines) == len(mesh.triangles)
