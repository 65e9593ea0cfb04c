"""Uniform hexahedral meshes, fat-interface subdomain partition and globs.

Subdomains are laid out on an ``n x n x n`` grid.  Along every axis a
subdomain owns ``m`` complete elements plus half of the one-element-thick
layer it shares with each neighbour, so the mesh has ``N = n*m + (n-1)``
elements per axis and the subdomain boundaries sit on element midplanes.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError

GLOB_KINDS = ("interior", "face", "edge", "vertex")
BOUNDARY_TAGS = ("d", "n", "r")


def glob_kind(n_owners: int) -> str:
    """Classify an equivalence class by the number of sharing subdomains."""
    if n_owners < 1:
        raise ValueError("a glob needs at least one owner")
    if n_owners == 1:
        return "interior"
    if n_owners == 2:
        return "face"
    if n_owners <= 4:
        return "edge"
    return "vertex"


@dataclass(frozen=True)
class MeshConfig:
    """Discretization parameters.

    Parameters
    ----------
    n : int
        Subdomains per axis.
    m : int
        Complete elements per subdomain per axis.
    p : int
        Plane waves per element.
    kappa : float or array_like
        Wave number, either one value or one value per element.
    domain : pair of 3-sequences
        Lower and upper corners of the box.
    """

    n: int
    m: int
    p: int
    kappa: float | Sequence[float] = 2 * np.pi
    domain: tuple = ((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))

    def __post_init__(self):
        for name in ("n", "m", "p"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        lo, hi = (np.asarray(c, dtype=float) for c in self.domain)
        if lo.shape != (3,) or hi.shape != (3,) or np.any(hi <= lo):
            raise ConfigError(f"invalid domain box {self.domain!r}")
        kappa = np.asarray(self.kappa, dtype=float)
        if kappa.ndim == 0:
            ok = kappa > 0
        else:
            ok = kappa.shape == (self.n_elements,) and np.all(kappa > 0)
        if not np.all(ok):
            raise ConfigError("kappa must be positive (scalar or one per element)")

    @property
    def N(self) -> int:
        return self.n * self.m + self.n - 1

    @property
    def n_elements(self) -> int:
        return self.N ** 3

    @property
    def n_dofs(self) -> int:
        return self.n_elements * self.p

    @property
    def n_subdomains(self) -> int:
        return self.n ** 3

    @property
    def spacing(self) -> np.ndarray:
        lo, hi = (np.asarray(c, dtype=float) for c in self.domain)
        return (hi - lo) / self.N

    @property
    def h(self) -> float:
        return float(self.spacing.max())


@dataclass(frozen=True)
class FaceSet:
    """Interior faces ``γ_kj`` (k < j) with the normal pointing from k to j."""

    elem_k: np.ndarray
    elem_j: np.ndarray
    axis: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __len__(self):
        return len(self.elem_k)

    @property
    def normal(self) -> np.ndarray:
        return np.eye(3)[self.axis]


@dataclass(frozen=True)
class BoundaryFaceSet:
    elem: np.ndarray
    axis: np.ndarray
    side: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    tag: np.ndarray

    def __len__(self):
        return len(self.elem)

    @property
    def normal(self) -> np.ndarray:
        return np.eye(3)[self.axis] * self.side[:, None]


@dataclass(frozen=True)
class Mesh:
    config: MeshConfig
    origin: np.ndarray
    spacing: np.ndarray
    kappa: np.ndarray
    interior_faces: FaceSet
    boundary_faces: BoundaryFaceSet

    @property
    def N(self) -> int:
        return self.config.N

    @property
    def h(self) -> float:
        return self.config.h

    @property
    def n_elements(self) -> int:
        return self.config.n_elements

    def element_index(self, triple) -> int:
        i, j, k = triple
        N = self.N
        return int(i + N * (j + N * k))

    def element_triple(self, e) -> np.ndarray:
        e = np.asarray(e)
        N = self.N
        return np.stack([e % N, (e // N) % N, e // (N * N)], axis=-1)

    def element_boxes(self, elements=None):
        """Lower and upper corners of the given (default: all) elements."""
        if elements is None:
            elements = np.arange(self.n_elements)
        t = self.element_triple(np.asarray(elements))
        lo = self.origin + t * self.spacing
        return lo, lo + self.spacing

    def subdomain_box(self, r: int):
        """Closed box of subdomain ``r`` (cut at shared-layer midplanes)."""
        cfg = self.config
        s = subdomain_triple(cfg.n, r)
        step = cfg.m + 1
        first = s * step - 0.5
        last = s * step + cfg.m + 0.5
        first = np.where(s == 0, 0.0, first)
        last = np.where(s == cfg.n - 1, float(self.N), last)
        return self.origin + first * self.spacing, self.origin + last * self.spacing

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Element index containing each point (points on faces go to the lower element)."""
        rel = (np.asarray(points, dtype=float) - self.origin) / self.spacing
        idx = np.clip(np.floor(rel).astype(int), 0, self.N - 1)
        N = self.N
        return idx[:, 0] + N * (idx[:, 1] + N * idx[:, 2])


def subdomain_triple(n: int, r) -> np.ndarray:
    r = np.asarray(r)
    return np.stack([r % n, (r // n) % n, r // (n * n)], axis=-1)


def subdomain_index(n: int, triple) -> int:
    i, j, k = triple
    return int(i + n * (j + n * k))


def build_mesh(config: MeshConfig,
               boundary_tags: Callable[[int, int], str] | None = None) -> Mesh:
    """Build the uniform element grid with its interior and boundary faces.

    ``boundary_tags(axis, side)`` returns one of ``'d'``, ``'n'``, ``'r'``;
    by default every boundary face is a Robin face.
    """
    if not isinstance(config, MeshConfig):
        raise ConfigError("build_mesh expects a MeshConfig")
    N = config.N
    h = config.spacing
    origin = np.asarray(config.domain[0], dtype=float)
    kappa = np.broadcast_to(np.asarray(config.kappa, dtype=float),
                            (config.n_elements,)).copy()

    idx = np.arange(config.n_elements)
    tri = np.stack([idx % N, (idx // N) % N, idx // (N * N)], axis=-1)
    strides = np.array([1, N, N * N])

    ek, ej, ax, flo, fhi = [], [], [], [], []
    be, bax, bside, blo, bhi, btag = [], [], [], [], [], []
    for axis in range(3):
        other = [a for a in range(3) if a != axis]
        inner = tri[:, axis] < N - 1
        k = idx[inner]
        lo = origin + tri[inner] * h
        lo[:, axis] += h[axis]
        hi = lo.copy()
        hi[:, other] += h[other]
        ek.append(k)
        ej.append(k + strides[axis])
        ax.append(np.full(len(k), axis))
        flo.append(lo)
        fhi.append(hi)
        for side, at in ((-1, 0), (1, N - 1)):
            sel = tri[:, axis] == at
            e = idx[sel]
            lo = origin + tri[sel] * h
            if side == 1:
                lo[:, axis] += h[axis]
            hi = lo.copy()
            hi[:, other] += h[other]
            tag = "r" if boundary_tags is None else boundary_tags(axis, side)
            if tag not in BOUNDARY_TAGS:
                raise ConfigError(f"unknown boundary tag {tag!r}")
            be.append(e)
            bax.append(np.full(len(e), axis))
            bside.append(np.full(len(e), side))
            blo.append(lo)
            bhi.append(hi)
            btag.append(np.full(len(e), tag))

    order = lambda arrs: np.concatenate(arrs)  # noqa: E731
    faces = FaceSet(order(ek), order(ej), order(ax), order(flo), order(fhi))
    bfaces = BoundaryFaceSet(order(be), order(bax), order(bside), order(blo),
                             order(bhi), order(btag))
    return Mesh(config, origin, h, kappa, faces, bfaces)


def axis_owners(n: int, m: int, e: int) -> list[int]:
    """Subdomains owning element layer ``e`` along one axis."""
    step = m + 1
    return [s for s in range(n) if s * step - 1 <= e <= s * step + m]


def element_owners(config: MeshConfig, element) -> set[int]:
    """Indices of the subdomains whose closure the element's interior meets.

    Along each axis the owners are the subdomains ``s`` with
    ``s*(m+1) - 1 <= e <= s*(m+1) + m``; the result is their Cartesian product.
    """
    element = tuple(int(v) for v in element)
    if len(element) != 3 or any(not 0 <= v < config.N for v in element):
        raise ConfigError(f"element {element} outside the {config.N}^3 grid")
    per_axis = [axis_owners(config.n, config.m, e) for e in element]
    return {subdomain_index(config.n, t) for t in itertools.product(*per_axis)}


@dataclass(frozen=True)
class Glob:
    index: int
    kind: str
    owners: tuple
    elements: np.ndarray
    p: int

    @property
    def dofs(self) -> np.ndarray:
        return (self.elements[:, None] * self.p + np.arange(self.p)).ravel()

    @property
    def size(self) -> int:
        return len(self.elements) * self.p


@dataclass(frozen=True)
class GlobPartition:
    """Equivalence classes of all dofs by their subdomain-neighbour sets."""

    p: int
    n_subdomains: int
    element_owners: list
    interior: list
    globs: list
    subdomain_globs: list = field(repr=False)

    def dof_owners(self, s: int) -> tuple:
        return self.element_owners[s // self.p]

    def of_kind(self, kind: str) -> list:
        return [g for g in self.globs if g.kind == kind]

    @property
    def faces(self):
        return self.of_kind("face")

    @property
    def edges(self):
        return self.of_kind("edge")

    @property
    def vertices(self):
        return self.of_kind("vertex")

    def subdomain_kind(self, r: int, kind: str) -> list[int]:
        """``M_X^(r)``: glob ids of the given kind incident to subdomain ``r``."""
        return [g for g in self.subdomain_globs[r] if self.globs[g].kind == kind]

    def subdomain_elements(self, r: int) -> np.ndarray:
        """Local element order of subdomain ``r``: interior first, then glob by glob."""
        parts = [self.interior[r]] + [self.globs[g].elements
                                      for g in self.subdomain_globs[r]]
        return np.concatenate(parts)


def classify_globs(config: MeshConfig, mesh: Mesh | None = None) -> GlobPartition:
    """Group element dofs by their owner sets and classify each group."""
    n, m, N = config.n, config.m, config.N
    per_axis = [tuple(axis_owners(n, m, e)) for e in range(N)]
    owners = []
    for k in range(N):
        for j in range(N):
            for i in range(N):
                owners.append(tuple(sorted(
                    subdomain_index(n, t) for t in
                    itertools.product(per_axis[i], per_axis[j], per_axis[k]))))

    groups: dict[tuple, list[int]] = {}
    for e, key in enumerate(owners):
        groups.setdefault(key, []).append(e)

    interior = [np.zeros(0, dtype=int) for _ in range(config.n_subdomains)]
    rank = {kind: i for i, kind in enumerate(GLOB_KINDS)}
    keyed = []
    for key, elems in groups.items():
        kind = glob_kind(len(key))
        if kind == "interior":
            interior[key[0]] = np.array(elems, dtype=int)
        else:
            keyed.append((rank[kind], key, kind, np.array(elems, dtype=int)))
    keyed.sort(key=lambda t: (t[0], t[1]))
    globs = [Glob(i, kind, key, elems, config.p)
             for i, (_, key, kind, elems) in enumerate(keyed)]
    sub_globs = [[] for _ in range(config.n_subdomains)]
    for g in globs:
        for r in g.owners:
            sub_globs[r].append(g.index)
    return GlobPartition(config.p, config.n_subdomains, owners, interior, globs,
                         sub_globs)
