"""Simplicial meshes for the supported coordinate domains.

Generation produces structured meshes (uniform 1-D grids, criss-cross
rectangle grids, concentric-ring disk meshes, polar annulus sectors);
refinement is uniform (bisection in 1-D, red refinement in 2-D) with
boundary midpoints snapped back onto curved boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, MeshTooCoarseError

DOMAIN_KINDS = ("interval", "rectangle", "disk", "annulus_sector",
                "spherical_cap", "hyperbolic_box", "parametric_patch",
                "warped_strip")

_RECT_LIKE = ("rectangle", "hyperbolic_box", "parametric_patch", "warped_strip")

_DEFAULTS = {
    "interval": {"xmin": 0.0, "xmax": 1.0},
    "rectangle": {"xmin": 0.0, "xmax": 1.0, "ymin": 0.0, "ymax": 1.0},
    "disk": {"radius": 1.0},
    "annulus_sector": {"r_inner": 0.5, "r_outer": 1.0,
                       "angle_min": 0.0, "angle_max": math.pi / 2},
    "spherical_cap": {"angle": math.pi / 3},
    "hyperbolic_box": {"xmin": 0.0, "xmax": 1.0, "ymin": 1.0, "ymax": 2.0},
    "parametric_patch": {"xmin": 0.0, "xmax": 1.0, "ymin": 0.0, "ymax": 1.0},
    "warped_strip": {"tmin": 0.0, "tmax": 1.0, "smin": 0.0, "smax": 1.0},
}


@dataclass(frozen=True)
class DomainSpec:
    """A coordinate domain: a kind plus kind-specific real parameters."""
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in DOMAIN_KINDS:
            raise ConfigError("domain.kind", f"unknown domain kind {self.kind!r}")
        merged = dict(_DEFAULTS[self.kind])
        for key, value in self.params.items():
            if key not in merged:
                raise ConfigError(f"domain.{key}",
                                  f"not a parameter of {self.kind!r}")
            merged[key] = float(value)
        object.__setattr__(self, "params", merged)
        _validate_domain(self.kind, merged)

    @property
    def dim_n(self):
        return 1 if self.kind == "interval" else 2


def _validate_domain(kind, p):
    def positive(name, value):
        if not value > 0.0:
            raise ConfigError(f"domain.{name}", f"must be positive, got {value}")

    if kind == "interval":
        if not p["xmax"] > p["xmin"]:
            raise ConfigError("domain.xmax", "must exceed xmin")
    elif kind in _RECT_LIKE:
        lo_x, hi_x, lo_y, hi_y = _corners(kind, p)
        if not hi_x > lo_x:
            raise ConfigError("domain." + ("tmax" if kind == "warped_strip" else "xmax"),
                              "must exceed the lower corner")
        if not hi_y > lo_y:
            raise ConfigError("domain." + ("smax" if kind == "warped_strip" else "ymax"),
                              "must exceed the lower corner")
        if kind == "hyperbolic_box" and not lo_y > 0.0:
            raise ConfigError("domain.ymin",
                              "must be positive (chart degenerates at x2 = 0)")
    elif kind == "disk":
        positive("radius", p["radius"])
    elif kind == "spherical_cap":
        if not 0.0 < p["angle"] < math.pi:
            raise ConfigError("domain.angle", "cap angle must lie in (0, pi)")
    elif kind == "annulus_sector":
        positive("r_inner", p["r_inner"])
        if not p["r_outer"] > p["r_inner"]:
            raise ConfigError("domain.r_outer", "must exceed r_inner")
        span = p["angle_max"] - p["angle_min"]
        if not 0.0 < span < 2.0 * math.pi:
            raise ConfigError("domain.angle_max",
                              "angular span must lie in (0, 2*pi)")


def _corners(kind, p):
    if kind == "warped_strip":
        return p["tmin"], p["tmax"], p["smin"], p["smax"]
    return p["xmin"], p["xmax"], p["ymin"], p["ymax"]


def _disk_radius(spec):
    if spec.kind == "disk":
        return spec.params["radius"]
    # spherical cap meshed in its projective coordinate disk
    return math.tan(spec.params["angle"] / 2.0)


def domain_volume(spec):
    """Exact coordinate volume of the domain (curved boundaries included)."""
    p = spec.params
    if spec.kind == "interval":
        return p["xmax"] - p["xmin"]
    if spec.kind in _RECT_LIKE:
        lo_x, hi_x, lo_y, hi_y = _corners(spec.kind, p)
        return (hi_x - lo_x) * (hi_y - lo_y)
    if spec.kind in ("disk", "spherical_cap"):
        return math.pi * _disk_radius(spec) ** 2
    if spec.kind == "annulus_sector":
        return 0.5 * (p["angle_max"] - p["angle_min"]) * \
            (p["r_outer"] ** 2 - p["r_inner"] ** 2)
    raise ConfigError("domain.kind", f"unknown domain kind {spec.kind!r}")


@dataclass(frozen=True)
class SimplicialMesh:
    vertices: np.ndarray          # (V, n)
    cells: np.ndarray             # (C, n+1) vertex indices, positive orientation
    boundary_vertices: np.ndarray  # sorted indices
    dim_n: int
    h_max: float
    domain: DomainSpec

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_cells(self):
        return self.cells.shape[0]


def _edge_lengths(vertices, cells):
    n = vertices.shape[1]
    h = 0.0
    for i in range(n + 1):
        for j in range(i + 1, n + 1):
            d = vertices[cells[:, i]] - vertices[cells[:, j]]
            h = max(h, float(np.max(np.linalg.norm(d, axis=1))))
    return h


def cell_volumes(mesh):
    """Signed coordinate volumes; positive for a valid mesh."""
    v = mesh.vertices
    c = mesh.cells
    if mesh.dim_n == 1:
        return v[c[:, 1], 0] - v[c[:, 0], 0]
    e1 = v[c[:, 1]] - v[c[:, 0]]
    e2 = v[c[:, 2]] - v[c[:, 0]]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def _orient(vertices, cells, dim_n):
    """Flip cells so every coordinate volume is positive."""
    cells = np.array(cells, dtype=np.int64)
    if dim_n == 1:
        flip = vertices[cells[:, 1], 0] < vertices[cells[:, 0], 0]
        cells[flip] = cells[flip][:, ::-1]
    else:
        e1 = vertices[cells[:, 1]] - vertices[cells[:, 0]]
        e2 = vertices[cells[:, 2]] - vertices[cells[:, 0]]
        flip = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0] < 0.0
        cells[flip] = cells[flip][:, [0, 2, 1]]
    return cells


def _finish(vertices, cells, boundary, spec):
    vertices = np.asarray(vertices, dtype=float)
    cells = _orient(vertices, np.asarray(cells, dtype=np.int64), spec.dim_n)
    boundary = np.unique(np.asarray(boundary, dtype=np.int64))
    return SimplicialMesh(vertices=vertices, cells=cells,
                          boundary_vertices=boundary, dim_n=spec.dim_n,
                          h_max=_edge_lengths(vertices, cells), domain=spec)


def generate(spec, resolution):
    """Build a mesh with h_max of order 1/resolution.

    Boundary vertices of curved domains are placed exactly on the true
    boundary.
    """
    if resolution < 2:
        raise ConfigError("resolution", f"must be >= 2, got {resolution}")
    resolution = int(resolution)
    if spec.kind == "interval":
        return _generate_interval(spec, resolution)
    if spec.kind in _RECT_LIKE:
        return _generate_rectangle(spec, resolution)
    if spec.kind in ("disk", "spherical_cap"):
        return _generate_disk(spec, resolution)
    if spec.kind == "annulus_sector":
        return _generate_sector(spec, resolution)
    raise ConfigError("domain.kind", f"unknown domain kind {spec.kind!r}")


def _generate_interval(spec, resolution):
    a, b = spec.params["xmin"], spec.params["xmax"]
    x = np.linspace(a, b, resolution + 1)
    vertices = x[:, None]
    cells = np.column_stack([np.arange(resolution), np.arange(1, resolution + 1)])
    return _finish(vertices, cells, [0, resolution], spec)


def _generate_rectangle(spec, resolution):
    lo_x, hi_x, lo_y, hi_y = _corners(spec.kind, spec.params)
    lx, ly = hi_x - lo_x, hi_y - lo_y
    nx = resolution
    ny = max(1, round(resolution * ly / lx))
    xs = np.linspace(lo_x, hi_x, nx + 1)
    ys = np.linspace(lo_y, hi_y, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return i * (ny + 1) + j

    cells = []
    for i in range(nx):
        for j in range(ny):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            if (i + j) % 2 == 0:
                cells.append((v00, v10, v11))
                cells.append((v00, v11, v01))
            else:
                cells.append((v00, v10, v01))
                cells.append((v10, v11, v01))
    boundary = [vid(i, j) for i in range(nx + 1) for j in range(ny + 1)
                if i in (0, nx) or j in (0, ny)]
    return _finish(vertices, cells, boundary, spec)


def _generate_disk(spec, rings):
    radius = _disk_radius(spec)
    vertices = [(0.0, 0.0)]
    ring_start = [None]  # ring_start[i] = index of first vertex on ring i
    for i in range(1, rings + 1):
        ring_start.append(len(vertices))
        r = radius * i / rings
        count = 6 * i
        for j in range(count):
            theta = 2.0 * math.pi * j / count
            vertices.append((r * math.cos(theta), r * math.sin(theta)))

    def ring_vertex(i, j):
        if i == 0:
            return 0
        return ring_start[i] + j % (6 * i)

    cells = []
    for j in range(6):
        cells.append((0, ring_vertex(1, j), ring_vertex(1, j + 1)))
    for i in range(2, rings + 1):
        for s in range(6):
            outer = [ring_vertex(i, s * i + t) for t in range(i + 1)]
            inner = [ring_vertex(i - 1, s * (i - 1) + t) for t in range(i)]
            for t in range(i):
                cells.append((outer[t], outer[t + 1], inner[t]))
            for t in range(i - 1):
                cells.append((outer[t + 1], inner[t + 1], inner[t]))
    boundary = list(range(ring_start[rings], len(vertices)))
    return _finish(np.array(vertices), cells, boundary, spec)


def _generate_sector(spec, resolution):
    p = spec.params
    r0, r1 = p["r_inner"], p["r_outer"]
    t0, t1 = p["angle_min"], p["angle_max"]
    nr = resolution
    arc = (t1 - t0) * 0.5 * (r0 + r1)
    nt = max(1, round(resolution * arc / (r1 - r0)))
    rs = np.linspace(r0, r1, nr + 1)
    ts = np.linspace(t0, t1, nt + 1)
    R, T = np.meshgrid(rs, ts, indexing="ij")
    vertices = np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])

    def vid(i, j):
        return i * (nt + 1) + j

    cells = []
    for i in range(nr):
        for j in range(nt):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            if (i + j) % 2 == 0:
                cells.append((v00, v10, v11))
                cells.append((v00, v11, v01))
            else:
                cells.append((v00, v10, v01))
                cells.append((v10, v11, v01))
    boundary = [vid(i, j) for i in range(nr + 1) for j in range(nt + 1)
                if i in (0, nr) or j in (0, nt)]
    return _finish(vertices, cells, boundary, spec)


def _boundary_snapper(spec):
    """Returns f(midpoint, endpoint_a, endpoint_b) -> snapped midpoint."""
    if spec.kind in ("disk", "spherical_cap"):
        radius = _disk_radius(spec)

        def snap(mid, a, b):
            norm = math.hypot(*mid)
            return (mid[0] * radius / norm, mid[1] * radius / norm)

        return snap
    if spec.kind == "annulus_sector":
        r0 = spec.params["r_inner"]
        r1 = spec.params["r_outer"]

        def snap(mid, a, b):
            ra, rb = math.hypot(*a), math.hypot(*b)
            for r in (r0, r1):
                if abs(ra - r) < 1e-9 and abs(rb - r) < 1e-9:
                    norm = math.hypot(*mid)
                    return (mid[0] * r / norm, mid[1] * r / norm)
            return tuple(mid)

        return snap
    return lambda mid, a, b: tuple(mid)


def _boundary_edges(cells):
    """Edges incident to exactly one cell, as a set of sorted pairs."""
    count = {}
    for cell in cells:
        for i in range(len(cell)):
            for j in range(i + 1, len(cell)):
                key = (min(cell[i], cell[j]), max(cell[i], cell[j]))
                count[key] = count.get(key, 0) + 1
    return {e for e, c in count.items() if c == 1}


def refine(mesh):
    """Uniform refinement: 1-D bisection, 2-D red refinement (4 children).

    Midpoints of curved-boundary edges are snapped onto the true boundary.
    """
    if mesh.dim_n == 1:
        return _refine_interval(mesh)
    verts = [tuple(v) for v in mesh.vertices]
    boundary = set(int(b) for b in mesh.boundary_vertices)
    bnd_edges = _boundary_edges(mesh.cells)
    snap = _boundary_snapper(mesh.domain)
    midpoint_index = {}
    new_boundary = set(boundary)

    def midpoint(a, b):
        key = (min(a, b), max(a, b))
        if key in midpoint_index:
            return midpoint_index[key]
        pa, pb = mesh.vertices[a], mesh.vertices[b]
        mid = (0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1]))
        if key in bnd_edges:
            mid = snap(mid, pa, pb)
            new_boundary.add(len(verts))
        midpoint_index[key] = len(verts)
        verts.append(mid)
        return midpoint_index[key]

    cells = []
    for a, b, c in mesh.cells:
        mab, mbc, mca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        cells.extend([(a, mab, mca), (mab, b, mbc), (mca, mbc, c),
                      (mab, mbc, mca)])
    return _finish(np.array(verts), cells, sorted(new_boundary), mesh.domain)


def _refine_interval(mesh):
    verts = [float(v[0]) for v in mesh.vertices]
    cells = []
    for a, b in mesh.cells:
        mid = len(verts)
        verts.append(0.5 * (verts[a] + verts[b]))
        cells.extend([(a, mid), (mid, b)])
    vertices = np.array(verts)[:, None]
    return _finish(vertices, cells, mesh.boundary_vertices, mesh.domain)


@dataclass(frozen=True)
class DofMap:
    """Bijection between interior vertices and degree-of-freedom indices."""
    interior: np.ndarray      # dof -> vertex index, ascending
    dof_of_vertex: np.ndarray  # vertex -> dof index, -1 on the boundary

    @property
    def n_dof(self):
        return self.interior.shape[0]


def interior_dof_map(mesh):
    """Stable (vertex-index ascending) interior numbering."""
    mask = np.ones(mesh.num_vertices, dtype=bool)
    mask[mesh.boundary_vertices] = False
    interior = np.nonzero(mask)[0]
    if interior.size == 0:
        raise MeshTooCoarseError(
            "mesh has no interior vertices; increase the resolution")
    dof_of_vertex = np.full(mesh.num_vertices, -1, dtype=np.int64)
    dof_of_vertex[interior] = np.arange(interior.size)
    return DofMap(interior=interior, dof_of_vertex=dof_of_vertex)


def boundary_distance(spec, points):
    """Distance from each point to the declared domain boundary."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    p = spec.params
    if spec.kind == "interval":
        x = P[:, 0]
        return np.minimum(np.abs(x - p["xmin"]), np.abs(x - p["xmax"]))
    if spec.kind in _RECT_LIKE:
        lo_x, hi_x, lo_y, hi_y = _corners(spec.kind, p)
        dx = np.minimum(np.abs(P[:, 0] - lo_x), np.abs(P[:, 0] - hi_x))
        dy = np.minimum(np.abs(P[:, 1] - lo_y), np.abs(P[:, 1] - hi_y))
        return np.minimum(dx, dy)
    if spec.kind in ("disk", "spherical_cap"):
        return np.abs(np.linalg.norm(P, axis=1) - _disk_radius(spec))
    if spec.kind == "annulus_sector":
        r = np.linalg.norm(P, axis=1)
        theta = np.arctan2(P[:, 1], P[:, 0])
        d_inner = np.abs(r - p["r_inner"])
        d_outer = np.abs(r - p["r_outer"])
        d_angle = np.minimum(np.abs(theta - p["angle_min"]),
                             np.abs(theta - p["angle_max"])) * r
        return np.minimum(np.minimum(d_inner, d_outer), d_angle)
    raise ConfigError("domain.kind", f"unknown domain kind {spec.kind!r}")


def dump(mesh):
    """Plain-text mesh dump: vertices / cells / boundary sections."""
    lines = [f"vertices {mesh.num_vertices}"]
    for i, v in enumerate(mesh.vertices):
        lines.append(f"{i} " + " ".join(f"{x:.17g}" for x in v))
    lines.append(f"cells {mesh.num_cells}")
    for i, c in enumerate(mesh.cells):
        lines.append(f"{i} " + " ".join(str(int(v)) for v in c))
    lines.append(f"boundary {mesh.boundary_vertices.size}")
    for b in mesh.boundary_vertices:
        lines.append(str(int(b)))
    return "\n".join(lines) + "\n"


def cell_quality(mesh):
    """Inradius/circumradius per cell (1.0 for segments)."""
    if mesh.dim_n == 1:
        return np.ones(mesh.num_cells)
    v = mesh.vertices
    c = mesh.cells
    a = np.linalg.norm(v[c[:, 1]] - v[c[:, 2]], axis=1)
    b = np.linalg.norm(v[c[:, 0]] - v[c[:, 2]], axis=1)
    d = np.linalg.norm(v[c[:, 0]] - v[c[:, 1]], axis=1)
    area = np.abs(cell_volumes(mesh))
    s = 0.5 * (a + b + d)
    inradius = area / s
    circumradius = a * b * d / (4.0 * area)
    return inradius / circumradius
