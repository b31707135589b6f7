import math

import numpy as np
import pytest

from divspec import mesh as msh
from divspec.errors import ConfigError, MeshTooCoarseError

KIND_QUALITY_FLOOR = {
    "interval": 1.0,
    "rectangle": 0.40,
    "disk": 0.35,
    "annulus_sector": 0.25,
    "hyperbolic_box": 0.40,
}


def test_interval_generate():
    m = msh.generate(msh.DomainSpec("interval"), 4)
    assert m.num_vertices == 5
    assert m.num_cells == 4
    assert list(m.boundary_vertices) == [0, 4]
    assert m.h_max == pytest.approx(0.25)


def test_square_generate():
    m = msh.generate(msh.DomainSpec("rectangle"), 2)
    assert m.num_vertices == 9
    assert m.num_cells == 8
    assert m.boundary_vertices.size == 8


def test_disk_boundary_vertices_on_circle():
    m = msh.generate(msh.DomainSpec("disk"), 9)
    r = np.linalg.norm(m.vertices[m.boundary_vertices], axis=1)
    assert np.max(np.abs(r - 1.0)) < 1e-12


def test_boundary_vertices_on_declared_boundary():
    for kind, params, res in [("interval", {}, 6), ("rectangle", {}, 4),
                              ("disk", {}, 6),
                              ("annulus_sector",
                               {"r_inner": 0.5, "r_outer": 1.5,
                                "angle_min": 0.2, "angle_max": 1.8}, 6),
                              ("hyperbolic_box", {}, 4)]:
        spec = msh.DomainSpec(kind, params)
        m = msh.generate(spec, res)
        d = msh.boundary_distance(spec, m.vertices[m.boundary_vertices])
        assert np.max(d) < 1e-12, kind


def test_positive_cell_volumes_everywhere():
    for kind, res in [("interval", 5), ("rectangle", 4), ("disk", 7),
                      ("annulus_sector", 5), ("warped_strip", 4)]:
        m = msh.generate(msh.DomainSpec(kind), res)
        assert np.all(msh.cell_volumes(m) > 0.0), kind


def test_volume_coverage():
    # polygonal domains exact; curved ones to the polygon error O(h^2)
    sq = msh.generate(msh.DomainSpec("rectangle"), 7)
    assert msh.cell_volumes(sq).sum() == pytest.approx(1.0, rel=1e-9)
    dk = msh.generate(msh.DomainSpec("disk"), 10)
    deficit = math.pi - msh.cell_volumes(dk).sum()
    assert 0.0 < deficit < 2.0 * math.pi ** 2 / (6 * 10) ** 2 * math.pi


def test_h_max_scales_with_resolution():
    for kind in ("interval", "rectangle", "disk", "annulus_sector"):
        h8 = msh.generate(msh.DomainSpec(kind), 8).h_max
        h16 = msh.generate(msh.DomainSpec(kind), 16).h_max
        assert h16 <= 0.55 * h8, kind


def test_invalid_spec_errors_name_parameter():
    with pytest.raises(ConfigError) as err:
        msh.DomainSpec("hyperbolic_box", {"ymin": 0.0})
    assert "domain.ymin" in str(err.value)
    with pytest.raises(ConfigError) as err:
        msh.DomainSpec("disk", {"radius": -2.0})
    assert "domain.radius" in str(err.value)
    with pytest.raises(ConfigError):
        msh.DomainSpec("rectangle", {"bogus": 1.0})
    with pytest.raises(ConfigError):
        msh.generate(msh.DomainSpec("interval"), 1)


# -- refinement ---------------------------------------------------------------

def test_refine_interval():
    m = msh.generate(msh.DomainSpec("interval"), 4)
    r = msh.refine(m)
    assert r.num_cells == 8
    assert r.h_max == pytest.approx(m.h_max / 2.0)


def test_refine_square_counts():
    m = msh.generate(msh.DomainSpec("rectangle"), 2)
    r = msh.refine(m)
    assert r.num_cells == 32
    assert r.h_max == pytest.approx(m.h_max / 2.0)


def test_refine_disk_snaps_boundary():
    m = msh.generate(msh.DomainSpec("disk"), 6)
    r = msh.refine(m)
    radii = np.linalg.norm(r.vertices[r.boundary_vertices], axis=1)
    assert np.max(np.abs(radii - 1.0)) < 1e-12
    assert r.num_cells == 4 * m.num_cells
    # snapping lengthens near-boundary edges by O(h^2), so the halving
    # ratio carries an O(h) correction on curved domains
    assert r.h_max <= 0.55 * m.h_max
    r2 = msh.refine(r)
    assert r2.h_max <= 0.52 * r.h_max


def test_refine_preserves_volume_straight():
    m = msh.generate(msh.DomainSpec("rectangle"), 3)
    r = msh.refine(m)
    assert abs(msh.cell_volumes(r).sum() - msh.cell_volumes(m).sum()) < 1e-12


def test_refine_annulus_sector_snaps_arcs():
    spec = msh.DomainSpec("annulus_sector",
                          {"r_inner": 0.5, "r_outer": 1.0,
                           "angle_min": 0.0, "angle_max": 1.0})
    r = msh.refine(msh.generate(spec, 6))
    d = msh.boundary_distance(spec, r.vertices[r.boundary_vertices])
    assert np.max(d) < 1e-12


def test_cell_quality_floor():
    for kind, floor in KIND_QUALITY_FLOOR.items():
        m = msh.generate(msh.DomainSpec(kind), 8)
        q = msh.cell_quality(m).min()
        assert q >= floor, f"{kind}: quality {q:.3f}"
        r = msh.refine(m)
        assert msh.cell_quality(r).min() >= 0.9 * floor, kind


# -- dof map -------------------------------------------------------------------

def test_interior_dof_map_counts():
    m = msh.generate(msh.DomainSpec("interval"), 4)
    assert msh.interior_dof_map(m).n_dof == 3
    sq = msh.generate(msh.DomainSpec("rectangle"), 2)
    assert msh.interior_dof_map(sq).n_dof == 1
    r = msh.refine(m)
    assert msh.interior_dof_map(r).n_dof == 7


def test_interior_dof_map_stable_ordering():
    m = msh.generate(msh.DomainSpec("rectangle"), 4)
    dm = msh.interior_dof_map(m)
    assert np.all(np.diff(dm.interior) > 0)
    for dof, v in enumerate(dm.interior):
        assert dm.dof_of_vertex[v] == dof
    assert np.all(dm.dof_of_vertex[m.boundary_vertices] == -1)


def test_dof_map_too_coarse():
    m = msh.generate(msh.DomainSpec("interval"), 2)
    r = msh.DomainSpec("rectangle")
    tiny = msh.generate(r, 2)
    # resolution 2 interval has one interior vertex; fake a no-interior mesh
    all_boundary = msh.SimplicialMesh(
        vertices=m.vertices, cells=m.cells,
        boundary_vertices=np.arange(m.num_vertices), dim_n=1, h_max=m.h_max,
        domain=m.domain)
    with pytest.raises(MeshTooCoarseError):
        msh.interior_dof_map(all_boundary)
    assert msh.interior_dof_map(tiny).n_dof == 1


def test_spherical_cap_radius():
    spec = msh.DomainSpec("spherical_cap", {"angle": math.pi / 3})
    m = msh.generate(spec, 5)
    r = np.linalg.norm(m.vertices[m.boundary_vertices], axis=1)
    assert np.allclose(r, math.tan(math.pi / 6), atol=1e-12)


def test_dump_format():
    m = msh.generate(msh.DomainSpec("interval"), 2)
    text = msh.dump(m)
    lines = text.strip().splitlines()
    assert lines[0] == "vertices 3"
    assert lines[4] == "cells 2"
    assert lines[7] == "boundary 2"
    assert lines[1].split()[0] == "0"
    # cells reference zero-based vertex ids
    assert lines[5].split() == ["0", "0", "1"]
