import math

import numpy as np
import pytest

from poissonctl import (
    CapacityError,
    GeometryError,
    MeshFormatError,
    generate_annulus,
    generate_disk,
    generate_disk_with_hole,
    generate_rectangle,
    load_mesh,
    quality,
    save_mesh,
)
from poissonctl.mesh import Mesh


def test_disk_area_close_to_circle(disk):
    # Polygonal boundary bites O(h^2) off the area, nothing more.
    assert abs(disk.area - math.pi) < 0.01
    assert disk.n_triangles > 0
    assert len(disk.boundary_loops()) == 1


def test_disk_quality(disk):
    q = quality(disk)
    assert q.min_angle > 25.0
    assert q.nonobtuse_fraction > 0.9
    assert q.n_triangles == disk.n_triangles


def test_boundary_vertices_on_circle(disk):
    r = np.hypot(*disk.vertices[disk.boundary].T)
    assert np.allclose(r, 1.0, atol=1e-12)


def test_boundary_ring_reflection_symmetric(disk):
    # Boundary samples come in multiples of 4, symmetric in both axes.
    ring = disk.vertices[disk.boundary]
    assert ring.shape[0] % 4 == 0
    flipped = np.round(ring * [-1.0, 1.0], 12)
    original = {tuple(p) for p in np.round(ring, 12)}
    assert all(tuple(p) in original for p in flipped)


def test_annulus_two_loops(annulus):
    loops = annulus.boundary_loops()
    assert len(loops) == 2
    assert abs(annulus.area - 3.0 * math.pi) < 0.05


def test_disk_with_hole_two_loops():
    m = generate_disk_with_hole(1.0, (0.4, 0.0), 0.25, 0.05)
    assert len(m.boundary_loops()) == 2
    exact = math.pi * (1.0 - 0.25**2)
    assert abs(m.area - exact) < 0.02


def test_rectangle_structured():
    m = generate_rectangle(1.0, 2.0, 0.25)
    assert m.area == pytest.approx(2.0, abs=1e-14)
    q = quality(m)
    assert q.nonobtuse_fraction == 1.0
    assert q.min_angle == pytest.approx(45.0)


def test_generator_argument_errors():
    with pytest.raises(GeometryError):
        generate_disk(1.0, 1.5)
    with pytest.raises(GeometryError):
        generate_disk(-1.0, 0.1)
    with pytest.raises(GeometryError):
        generate_annulus(2.0, 1.0, 0.1)
    with pytest.raises(GeometryError):
        generate_disk_with_hole(1.0, (0.9, 0.0), 0.25, 0.02)


def test_capacity_guard():
    with pytest.raises(CapacityError):
        generate_disk(1.0, 1e-4)


def test_locate_vertices_and_centroids(disk):
    tri, bary = disk.locate(disk.vertices[:10])
    assert np.allclose(bary.max(axis=1), 1.0)
    cent = disk.vertices[disk.triangles[5]].mean(axis=0)
    tri, bary = disk.locate([cent])
    assert tri[0] == 5
    assert np.allclose(bary[0], 1.0 / 3.0)


def test_locate_outside_raises(disk):
    with pytest.raises(GeometryError):
        disk.locate([(2.0, 2.0)])


def test_save_load_round_trip(tmp_path, disk):
    path = tmp_path / "mesh.txt"
    save_mesh(disk, path)
    back = load_mesh(path)
    assert np.array_equal(back.vertices, disk.vertices)
    assert np.array_equal(back.triangles, disk.triangles)
    assert np.array_equal(back.boundary, disk.boundary)
    med = float(np.median(back.edge_lengths()))
    assert back.h == pytest.approx(med)


def _write(tmp_path, text):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    return path


def test_load_rejects_bad_header(tmp_path):
    with pytest.raises(MeshFormatError) as err:
        load_mesh(_write(tmp_path, "3\n"))
    assert err.value.line == 1


def test_load_rejects_malformed_vertex(tmp_path):
    text = "3 1\n0 0 1\n1 zero 1\n0 1 1\n0 1 2\n"
    with pytest.raises(MeshFormatError) as err:
        load_mesh(_write(tmp_path, text))
    assert err.value.line == 3


def test_load_rejects_index_out_of_range(tmp_path):
    text = "3 1\n0 0 1\n1 0 1\n0 1 1\n0 1 7\n"
    with pytest.raises(MeshFormatError) as err:
        load_mesh(_write(tmp_path, text))
    assert err.value.line == 5


def test_load_rejects_wrong_line_count(tmp_path):
    text = "3 2\n0 0 1\n1 0 1\n0 1 1\n0 1 2\n"
    with pytest.raises(MeshFormatError):
        load_mesh(_write(tmp_path, text))


def test_constructor_rejects_clockwise_triangle():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    flags = np.array([True, True, True])
    with pytest.raises(MeshFormatError, match="non-positive area"):
        Mesh(verts, np.array([[0, 2, 1]]), flags, 1.0)


def test_constructor_rejects_wrong_boundary_flags():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    flags = np.array([True, True, False])
    with pytest.raises(MeshFormatError, match="boundary flags"):
        Mesh(verts, np.array([[0, 1, 2]]), flags, 1.0)


def test_constructor_rejects_duplicate_vertices():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    tris = np.array([[0, 1, 2], [3, 1, 2]])
    with pytest.raises(MeshFormatError, match="duplicate"):
        Mesh(verts, tris, np.ones(4, dtype=bool), 1.0)
