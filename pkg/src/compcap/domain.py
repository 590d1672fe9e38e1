"""
Cross-section geometry, its uniform cell-centred discretization and the
adhesion data carried by the discrete boundary.

Cells are square with side ``h``.  A cell belongs to the domain when its
centre does (staircase approximation); rectangles aligned with the grid are
represented exactly.  Fields over the domain are flat arrays with one entry
per inside cell, ordered row-major (y outer, x inner).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import shapely
from scipy import ndimage

_NORMAL_TOL = 1e-12

# outward normals of the four cell faces: +x, -x, +y, -y
_FACES = ((1, 0), (-1, 0), (0, 1), (0, -1))


@dataclass(frozen=True)
class DomainSpec:
    """Shape of the cross-section.

    ``rectangle`` spans ``[0, width] x [0, height]``, ``disk`` is centred at the
    origin and ``polygon`` uses the given vertex coordinates.
    """

    shape: str
    width: float = 0.0
    height: float = 0.0
    radius: float = 0.0
    vertices: tuple[tuple[float, float], ...] = ()

    @classmethod
    def rectangle(cls, width: float, height: float) -> "DomainSpec":
        return cls("rectangle", width=float(width), height=float(height))

    @classmethod
    def disk(cls, radius: float) -> "DomainSpec":
        return cls("disk", radius=float(radius))

    @classmethod
    def polygon(cls, vertices: Sequence[Sequence[float]]) -> "DomainSpec":
        return cls("polygon", vertices=tuple((float(x), float(y)) for x, y in vertices))

    def validate(self) -> None:
        if self.shape == "rectangle":
            if not (self.width > 0 and self.height > 0):
                raise ValueError(f"degenerate rectangle {self.width} x {self.height}: sides must be positive")
        elif self.shape == "disk":
            if not self.radius > 0:
                raise ValueError(f"degenerate disk: radius {self.radius} must be positive")
        elif self.shape == "polygon":
            if len(self.vertices) < 3:
                raise ValueError("polygon needs at least 3 vertices")
            poly = shapely.Polygon(self.vertices)
            if not poly.exterior.is_simple:
                raise ValueError("polygon boundary self-intersects")
            if not poly.area > 0:
                raise ValueError("degenerate polygon: zero area")
        else:
            raise ValueError(f"unknown domain shape {self.shape!r}")

    @property
    def characteristic_length(self) -> float:
        if self.shape == "rectangle":
            return max(self.width, self.height)
        if self.shape == "disk":
            return 2.0 * self.radius
        xs, ys = zip(*self.vertices)
        return max(max(xs) - min(xs), max(ys) - min(ys))

    def exact_area(self) -> float:
        if self.shape == "rectangle":
            return self.width * self.height
        if self.shape == "disk":
            return math.pi * self.radius**2
        return float(shapely.Polygon(self.vertices).area)

    def outward_normal(self, points: np.ndarray) -> np.ndarray:
        """Outward unit normal of the smooth boundary nearest to each point."""
        points = np.atleast_2d(points)
        if self.shape == "disk":
            r = np.linalg.norm(points, axis=1, keepdims=True)
            return points / np.where(r > 0, r, 1.0)
        if self.shape == "rectangle":
            verts = [(0.0, 0.0), (self.width, 0.0), (self.width, self.height), (0.0, self.height)]
        else:
            verts = list(self.vertices)
        P = np.asarray(verts, dtype=float)
        if shapely.Polygon(verts).exterior.is_ccw is False:
            P = P[::-1]
        A, B = P, np.roll(P, -1, axis=0)
        seg = B - A
        seg_len2 = np.einsum("ij,ij->i", seg, seg)
        # distance from each point to each segment
        t = np.einsum("pij,ij->pi", points[:, None, :] - A[None], seg) / seg_len2
        t = np.clip(t, 0.0, 1.0)
        nearest = A[None] + t[..., None] * seg[None]
        dist = np.linalg.norm(points[:, None, :] - nearest, axis=2)
        k = np.argmin(dist, axis=1)
        s = seg[k]
        n = np.column_stack([s[:, 1], -s[:, 0]])
        return n / np.linalg.norm(n, axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform cell-centred grid restricted to the inside cells of a domain.

    Neighbour arrays hold the flat index of the adjacent inside cell or -1.
    Boundary edges are the faces between an inside and an outside cell; each
    carries its owning inside cell, the outward unit normal of the face, its
    length and ``normal_cos``, the cosine between the face normal and the
    outward normal of the smooth boundary (1 on grid-aligned sides).
    """

    spec: DomainSpec
    h: float
    origin: tuple[float, float]
    mask: np.ndarray
    index: np.ndarray
    ij: np.ndarray
    centers: np.ndarray
    right: np.ndarray
    left: np.ndarray
    up: np.ndarray
    down: np.ndarray
    edge_owner: np.ndarray
    edge_normal: np.ndarray
    edge_length: np.ndarray
    edge_midpoint: np.ndarray
    edge_normal_cos: np.ndarray
    component_count: int = 1

    @property
    def n_cells(self) -> int:
        return int(self.centers.shape[0])

    @property
    def n_edges(self) -> int:
        return int(self.edge_owner.shape[0])

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    @property
    def area(self) -> float:
        return self.n_cells * self.cell_area

    @property
    def perimeter(self) -> float:
        return float(self.n_edges * self.h)

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    def interior_cells(self) -> np.ndarray:
        """Cells whose four neighbours are all inside."""
        return (self.right >= 0) & (self.left >= 0) & (self.up >= 0) & (self.down >= 0)

    def to_image(self, values: np.ndarray, fill: float = np.nan) -> np.ndarray:
        img = np.full(self.mask.shape, fill, dtype=float)
        img[self.ij[:, 0], self.ij[:, 1]] = values
        return img


def build_grid(spec: DomainSpec, resolution: int) -> Grid:
    """Discretize ``spec`` with ``resolution`` cells across its characteristic length."""
    spec.validate()
    if int(resolution) != resolution or resolution < 4:
        raise ValueError(f"resolution must be an integer >= 4, got {resolution}")
    resolution = int(resolution)
    h = spec.characteristic_length / resolution

    if spec.shape == "rectangle":
        nx = round(spec.width / h)
        ny = round(spec.height / h)
        if abs(nx * h - spec.width) > 1e-9 * spec.width or abs(ny * h - spec.height) > 1e-9 * spec.height:
            raise ValueError(
                f"rectangle {spec.width} x {spec.height} is not tiled exactly by cells of side {h}; "
                "choose a resolution for which both sides are whole multiples of the cell side"
            )
        origin = (0.0, 0.0)
        mask = np.ones((ny, nx), dtype=bool)
    else:
        if spec.shape == "disk":
            xmin = ymin = -spec.radius
            nx = ny = resolution
        else:
            xs, ys = zip(*spec.vertices)
            xmin, ymin = min(xs), min(ys)
            nx = max(1, math.ceil((max(xs) - xmin) / h - 1e-12))
            ny = max(1, math.ceil((max(ys) - ymin) / h - 1e-12))
        origin = (xmin, ymin)
        X, Y = _cell_centres(origin, h, nx, ny)
        if spec.shape == "disk":
            mask = X**2 + Y**2 < spec.radius**2
        else:
            mask = shapely.contains_xy(shapely.Polygon(spec.vertices), X, Y)

    labels, count = ndimage.label(mask)
    if count == 0:
        raise ValueError("no cell centre falls inside the domain; increase the resolution")
    if count > 1:
        # stragglers joined only through corners are staircase artifacts
        sizes = np.bincount(labels.ravel())[1:]
        mask = labels == (1 + int(np.argmax(sizes)))

    return _assemble(spec, h, origin, mask, count)


def _cell_centres(origin, h, nx, ny):
    x = origin[0] + (np.arange(nx) + 0.5) * h
    y = origin[1] + (np.arange(ny) + 0.5) * h
    return np.meshgrid(x, y)


def _assemble(spec: DomainSpec, h: float, origin, mask: np.ndarray, count: int) -> Grid:
    ny, nx = mask.shape
    index = np.full(mask.shape, -1, dtype=np.int64)
    ij = np.argwhere(mask)
    index[ij[:, 0], ij[:, 1]] = np.arange(len(ij))
    X, Y = _cell_centres(origin, h, nx, ny)
    centers = np.column_stack([X[mask], Y[mask]])

    padded = np.pad(index, 1, constant_values=-1)
    r, c = ij[:, 0] + 1, ij[:, 1] + 1
    neighbours = {
        (1, 0): padded[r, c + 1],
        (-1, 0): padded[r, c - 1],
        (0, 1): padded[r + 1, c],
        (0, -1): padded[r - 1, c],
    }

    owners, normals, mids = [], [], []
    for (dx, dy) in _FACES:
        out = np.nonzero(neighbours[(dx, dy)] < 0)[0]
        owners.append(out)
        normals.append(np.tile([float(dx), float(dy)], (len(out), 1)))
        mids.append(centers[out] + 0.5 * h * np.array([dx, dy], dtype=float))
    owner = np.concatenate(owners)
    normal = np.concatenate(normals)
    mid = np.concatenate(mids)
    # deterministic edge order: by owner cell, then face
    order = np.argsort(owner, kind="stable")
    owner, normal, mid = owner[order], normal[order], mid[order]

    if spec.shape == "rectangle":
        cos = np.ones(len(owner))
    else:
        cos = np.einsum("ij,ij->i", normal, spec.outward_normal(mid))
        cos = np.clip(cos, 0.0, 1.0)

    norms = np.linalg.norm(normal, axis=1)
    assert np.all(np.abs(norms - 1.0) <= _NORMAL_TOL)

    return Grid(
        spec=spec,
        h=h,
        origin=(float(origin[0]), float(origin[1])),
        mask=mask,
        index=index,
        ij=ij,
        centers=centers,
        right=neighbours[(1, 0)],
        left=neighbours[(-1, 0)],
        up=neighbours[(0, 1)],
        down=neighbours[(0, -1)],
        edge_owner=owner,
        edge_normal=normal,
        edge_length=np.full(len(owner), h),
        edge_midpoint=mid,
        edge_normal_cos=cos,
        component_count=count,
    )


@dataclass(frozen=True, eq=False)
class BoundaryData:
    """Adhesion coefficient per boundary edge together with the margin ``a``."""

    beta: np.ndarray
    margin: float

    def __post_init__(self):
        if not 0 < self.margin <= 1:
            raise ValueError(f"margin a must lie in (0, 1], got {self.margin}")
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim != 1:
            raise ValueError("beta must be a 1-D array with one value per boundary edge")
        worst = float(np.max(np.abs(beta))) if beta.size else 0.0
        if worst > 1 - self.margin + 1e-12:
            raise ValueError(f"|beta| = {worst} exceeds 1 - a = {1 - self.margin}")
        object.__setattr__(self, "beta", beta)

    @classmethod
    def constant(cls, grid: Grid, value: float, margin: float, project: bool = True) -> "BoundaryData":
        return cls.from_function(grid, lambda mid, nrm: np.full(len(mid), float(value)), margin, project)

    @classmethod
    def from_function(
        cls,
        grid: Grid,
        fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
        margin: float,
        project: bool = True,
    ) -> "BoundaryData":
        """Sample a physical adhesion coefficient on the discrete boundary.

        ``fn(midpoints, normals)`` returns beta at the edge midpoints.  With
        ``project`` the value is multiplied by ``grid.edge_normal_cos`` so that
        the staircase sum approximates the integral over the smooth boundary.
        """
        beta = np.asarray(fn(grid.edge_midpoint, grid.edge_normal), dtype=float)
        beta = np.broadcast_to(beta, (grid.n_edges,)).copy()
        # range check on the physical value, before projection shrinks it
        cls(beta, margin)
        if project:
            beta = beta * grid.edge_normal_cos
        return cls(beta, margin)

    def check_grid(self, grid: Grid) -> None:
        if self.beta.shape[0] != grid.n_edges:
            raise ValueError(f"boundary data has {self.beta.shape[0]} edges, grid has {grid.n_edges}")


@dataclass(frozen=True, eq=False)
class Ball:
    """Cells of a grid whose centres lie in a disc, with the rim flagged.

    ``cells`` are flat grid indices; ``flagged`` marks rim cells (some
    4-neighbour outside the ball) that carry Dirichlet data.  The ``local_*``
    arrays are neighbour maps in ball-local numbering (-1 when absent).
    """

    grid: Grid
    center: tuple[float, float]
    radius: float
    cells: np.ndarray
    flagged: np.ndarray
    local_right: np.ndarray = field(repr=False)
    local_left: np.ndarray = field(repr=False)
    local_up: np.ndarray = field(repr=False)
    local_down: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return int(self.cells.shape[0])

    @property
    def free(self) -> np.ndarray:
        return ~self.flagged


def interior_ball(grid: Grid, center: Sequence[float], radius: float) -> Ball:
    """Select the cells of a ball lying in the domain with a one-cell margin."""
    radius = float(radius)
    cx, cy = float(center[0]), float(center[1])
    if not radius > 0:
        raise ValueError(f"ball radius must be positive, got {radius}")

    d = np.hypot(grid.centers[:, 0] - cx, grid.centers[:, 1] - cy)
    cells = np.nonzero(d < radius)[0]
    if cells.size == 0:
        raise ValueError("ball contains no cell centre")

    # every lattice site within radius + one cell must be an inside cell
    X, Y = _cell_centres(grid.origin, grid.h, grid.mask.shape[1], grid.mask.shape[0])
    near = np.hypot(X - cx, Y - cy) < radius + grid.h * math.sqrt(2)
    if not np.all(grid.mask[near]):
        raise ValueError(f"ball (center=({cx}, {cy}), radius={radius}) is not contained in the domain with a one-cell margin")
    # a ball reaching beyond the bounding box is also outside
    span_lo = np.array(grid.origin)
    span_hi = span_lo + grid.h * np.array(grid.mask.shape[::-1])
    if cx - radius - grid.h < span_lo[0] or cy - radius - grid.h < span_lo[1] or \
            cx + radius + grid.h > span_hi[0] or cy + radius + grid.h > span_hi[1]:
        raise ValueError(f"ball (center=({cx}, {cy}), radius={radius}) is not contained in the domain with a one-cell margin")

    local = np.full(grid.n_cells, -1, dtype=np.int64)
    local[cells] = np.arange(cells.size)

    def _map(nb):
        out = nb[cells]
        return np.where(out >= 0, local[np.maximum(out, 0)], -1)

    lr, ll, lu, ld = _map(grid.right), _map(grid.left), _map(grid.up), _map(grid.down)
    flagged = (lr < 0) | (ll < 0) | (lu < 0) | (ld < 0)
    if np.all(flagged):
        raise ValueError("ball too small: no free cell inside the flagged rim")
    return Ball(grid, (cx, cy), radius, cells, flagged, lr, ll, lu, ld)
