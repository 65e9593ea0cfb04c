"""Plane-wave basis and assembly of the weighted least-squares forms.

All surface and volume integrals of products of plane waves are evaluated
in closed form as products of one-dimensional exponential integrals.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import MissingBoundaryData, NoValidFactorization
from .mesh import GlobPartition, Mesh

_CHUNK = 192


def direction_factors(p: int) -> tuple[int, int]:
    """Return ``(n1, n2)`` with ``n1*n2 == p`` obeying the parity rule.

    For odd ``n2`` we need ``n1`` in ``{2n2-1, 2n2, 2n2+1}``, for even ``n2``
    ``n1`` in ``{2n2-1, 2n2+1}``.  The smallest admissible ``n2`` wins.
    """
    if int(p) != p or p < 1:
        raise NoValidFactorization(f"p must be a positive integer, got {p!r}")
    for n2 in range(1, p + 1):
        if p % n2:
            continue
        n1 = p // n2
        allowed = {2 * n2 - 1, 2 * n2 + 1}
        if n2 % 2:
            allowed.add(2 * n2)
        if n1 in allowed:
            return n1, n2
    raise NoValidFactorization(f"no admissible (n1, n2) factorization of p={p}")


def wave_directions(p: int) -> np.ndarray:
    """Unit propagation directions, shape ``(p, 3)``, ordered ``l = (j-1)n1 + r``."""
    n1, n2 = direction_factors(p)
    theta = 2 * np.pi * np.arange(n1) / n1
    phi = np.pi * np.arange(n2) / n2
    th, ph = np.meshgrid(theta, phi, indexing="xy")  # rows j, columns r
    dirs = np.stack([np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), np.sin(th)],
                    axis=-1).reshape(p, 3)
    gap = np.linalg.norm(dirs[:, None] - dirs[None], axis=-1) + 2 * np.eye(p)
    if gap.min() < 1e-12:
        raise NoValidFactorization(f"p={p} produces repeated directions")
    return dirs


def exp_integral_1d(c, a, b):
    """``∫_a^b exp(i c t) dt``, vectorized; stable for small ``c (b-a)``."""
    c = np.asarray(c, dtype=float)
    length = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    mid = 0.5 * (np.asarray(a, dtype=float) + np.asarray(b, dtype=float))
    return length * np.sinc(c * length / (2 * np.pi)) * np.exp(1j * c * mid)


def oscillatory_integral(d, lo, hi):
    """``∫ exp(i d·x)`` over the axis-aligned box ``[lo, hi]``.

    Zero-length axes are treated as fixed coordinates, so a box with one
    degenerate axis is a rectangle (surface integral) and one with none is
    a volume.  Anything thinner than a rectangle integrates to zero.
    Broadcasts over leading dimensions of ``d``, ``lo`` and ``hi``.
    """
    d = np.asarray(d, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    length = hi - lo
    flat = length <= 0
    out = np.ones(np.broadcast_shapes(d.shape, lo.shape)[:-1], dtype=complex)
    for a in range(3):
        fac = np.where(flat[..., a], np.exp(1j * d[..., a] * lo[..., a]),
                       exp_integral_1d(d[..., a], lo[..., a], hi[..., a]))
        out = out * fac
    thin = flat.sum(axis=-1) > 1
    return np.where(thin, 0.0, out)


def oscillatory_rect_integral(wavevector, lo, hi) -> complex:
    """``∫_rect exp(i d·x) ds`` for a rectangle lying in a coordinate plane."""
    return complex(oscillatory_integral(wavevector, lo, hi))


@dataclass(frozen=True)
class FormWeights:
    """Least-squares weights built from the mesh size and wave numbers."""

    h: float

    def alpha(self, kappa_k, kappa_j):
        kk = np.abs(0.5 * (np.asarray(kappa_k) + np.asarray(kappa_j)))
        return 1.0 / self.h + kk

    def beta(self, kappa_k, kappa_j):
        kk = np.abs(0.5 * (np.asarray(kappa_k) + np.asarray(kappa_j)))
        return 1.0 / (self.h * kk ** 2) + 1.0 / kk

    def theta1(self, kappa):
        return 1.0 / self.h + np.abs(kappa)

    def theta2(self, kappa):
        k = np.abs(kappa)
        return 1.0 / (self.h * k ** 2) + 1.0 / k

    theta3 = theta2


@dataclass(frozen=True)
class PlaneWaveData:
    """Boundary data ``g(x) = Σ_t c_t(n) exp(i k_t·x)`` on a face with normal ``n``.

    ``amplitudes(normals)`` maps an ``(F, 3)`` array of outward normals to
    the ``(F, T)`` coefficients.
    """

    wavevectors: np.ndarray
    amplitudes: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x, normal):
        x = np.atleast_2d(x)
        normal = np.broadcast_to(np.asarray(normal, dtype=float), x.shape)
        c = self.amplitudes(normal)
        return np.sum(c * np.exp(1j * x @ self.wavevectors.T), axis=-1)


@dataclass(frozen=True)
class BoundaryData:
    dirichlet: PlaneWaveData | None = None
    neumann: PlaneWaveData | None = None
    robin: PlaneWaveData | None = None

    def for_tag(self, tag):
        data = {"d": self.dirichlet, "n": self.neumann, "r": self.robin}[tag]
        if data is None:
            raise MissingBoundaryData(f"no boundary data for tag {tag!r}")
        return data


def example_direction() -> np.ndarray:
    """Propagation direction of the benchmark plane wave."""
    v1 = np.array([np.tan(-np.pi / 10), 0.0, np.tan(np.pi / 5)])
    return v1 / np.linalg.norm(v1)


def assemble_rhs_exact(kappa: float, v0=None) -> BoundaryData:
    """Boundary data reproducing ``u(x) = exp(iκ v0·x)`` on every tag.

    The Robin data is ``(∂_n + iκ) u = iκ (1 + v0·n) u``.
    """
    v0 = example_direction() if v0 is None else np.asarray(v0, dtype=float)
    if abs(np.linalg.norm(v0) - 1) > 1e-12:
        raise ValueError("v0 must be a unit vector")
    k = np.asarray([kappa * v0])
    dot = lambda nrm: (nrm @ v0)[:, None]  # noqa: E731
    return BoundaryData(
        dirichlet=PlaneWaveData(k, lambda nrm: np.ones((len(nrm), 1), complex)),
        neumann=PlaneWaveData(k, lambda nrm: 1j * kappa * dot(nrm)),
        robin=PlaneWaveData(k, lambda nrm: 1j * kappa * (1 + dot(nrm))),
    )


def clip_faces(lo, hi, box):
    """Intersect face rectangles with a closed box; return (lo, hi, keep)."""
    blo, bhi = box
    clo = np.maximum(lo, blo)
    chi = np.minimum(hi, bhi)
    span = chi - clo
    flat = np.isclose(hi - lo, 0.0)
    keep = np.all(np.where(flat, span >= -1e-12 * np.abs(bhi - blo).max(), span > 0),
                  axis=1)
    chi = np.where(flat, clo, chi)
    return clo, chi, keep


@dataclass
class AssembledSystem:
    """Global PWLS matrix and load vector over all element dofs."""

    mesh: Mesh
    directions: np.ndarray
    weights: FormWeights
    matrix: sp.csr_matrix
    rhs: np.ndarray

    @property
    def p(self) -> int:
        return len(self.directions)


def _wavevectors(mesh: Mesh, directions, elements):
    return mesh.kappa[elements][:, None, None] * directions[None]


def _interior_blocks(mesh, directions, weights, faces_k, faces_j, axis, lo, hi):
    """Element-pair blocks ``[t, s] = a(φ_s, φ_t)`` for a batch of faces."""
    p = len(directions)
    W = np.concatenate([_wavevectors(mesh, directions, faces_k),
                        _wavevectors(mesh, directions, faces_j)], axis=1)
    normal = np.eye(3)[axis]
    sigma = np.concatenate([np.ones(p), -np.ones(p)])
    wn = np.einsum("fsa,fa->fs", W, normal)
    alpha = weights.alpha(mesh.kappa[faces_k], mesh.kappa[faces_j])
    beta = weights.beta(mesh.kappa[faces_k], mesh.kappa[faces_j])
    D = W[:, None, :, :] - W[:, :, None, :]
    I = oscillatory_integral(D, lo[:, None, None], hi[:, None, None])
    coeff = (alpha[:, None, None]
             + beta[:, None, None] * wn[:, None, :] * wn[:, :, None])
    return I * coeff * (sigma[:, None] * sigma[None, :])


def _boundary_blocks(mesh, directions, weights, elem, normal, tag, lo, hi):
    W = _wavevectors(mesh, directions, elem)
    kap = mesh.kappa[elem]
    wn = np.einsum("fsa,fa->fs", W, normal)
    D = W[:, None, :, :] - W[:, :, None, :]
    I = oscillatory_integral(D, lo[:, None, None], hi[:, None, None])
    trace = np.where((tag == "d")[:, None], 1.0, wn)
    trace = np.where((tag == "r")[:, None], wn + kap[:, None], trace)
    theta = np.where(tag == "d", weights.theta1(kap), weights.theta2(kap))
    return theta[:, None, None] * I * trace[:, None, :] * trace[:, :, None]


def _boundary_load(mesh, directions, weights, elem, normal, tag, lo, hi, data):
    """``L(φ_t)`` contributions, shape ``(F, p)``."""
    W = _wavevectors(mesh, directions, elem)
    kap = mesh.kappa[elem]
    wn = np.einsum("fsa,fa->fs", W, normal)
    out = np.zeros(W.shape[:2], dtype=complex)
    for t in ("d", "n", "r"):
        sel = tag == t
        if not sel.any():
            continue
        g = data.for_tag(t)
        amp = g.amplitudes(normal[sel])
        # conj of the test trace: 1, -i(α·n)κ, -i(κ α·n + κ)
        if t == "d":
            trace = np.ones_like(wn[sel])
            theta = weights.theta1(kap[sel])
        elif t == "n":
            trace = -1j * wn[sel]
            theta = weights.theta2(kap[sel])
        else:
            trace = -1j * (wn[sel] + kap[sel][:, None])
            theta = weights.theta3(kap[sel])
        D = g.wavevectors[None, None, :, :] - W[sel][:, :, None, :]
        I = oscillatory_integral(D, lo[sel][:, None, None], hi[sel][:, None, None])
        out[sel] = theta[:, None] * trace * np.einsum("fst,ft->fs", I, amp)
    return out


def assemble_form(mesh: Mesh, directions, elements=None, box=None,
                  weights: FormWeights | None = None) -> sp.csr_matrix:
    """Hermitian matrix of the (clipped) form over ``elements``.

    Rows and columns follow the order of ``elements`` (``p`` dofs each).
    Only faces with both elements in the list contribute, and with ``box``
    given every face is clipped to that closed box first.
    """
    weights = weights or FormWeights(mesh.h)
    directions = np.asarray(directions, dtype=float)
    p = len(directions)
    n_el = mesh.n_elements
    if elements is None:
        elements = np.arange(n_el)
    elements = np.asarray(elements, dtype=int)
    pos = np.full(n_el, -1)
    pos[elements] = np.arange(len(elements))

    rows, cols, vals = [], [], []
    local = np.arange(p)

    fi = mesh.interior_faces
    sel = (pos[fi.elem_k] >= 0) & (pos[fi.elem_j] >= 0)
    lo, hi = fi.lo[sel], fi.hi[sel]
    fk, fj, ax = fi.elem_k[sel], fi.elem_j[sel], fi.axis[sel]
    if box is not None:
        lo, hi, keep = clip_faces(lo, hi, box)
        lo, hi, fk, fj, ax = lo[keep], hi[keep], fk[keep], fj[keep], ax[keep]
    for c in range(0, len(fk), _CHUNK):
        s = slice(c, c + _CHUNK)
        blk = _interior_blocks(mesh, directions, weights, fk[s], fj[s], ax[s],
                               lo[s], hi[s])
        idx = np.concatenate([pos[fk[s]][:, None] * p + local,
                              pos[fj[s]][:, None] * p + local], axis=1)
        rows.append(np.broadcast_to(idx[:, :, None], blk.shape).ravel())
        cols.append(np.broadcast_to(idx[:, None, :], blk.shape).ravel())
        vals.append(blk.ravel())

    bf = mesh.boundary_faces
    sel = pos[bf.elem] >= 0
    lo, hi = bf.lo[sel], bf.hi[sel]
    be, nrm, tag = bf.elem[sel], bf.normal[sel], bf.tag[sel]
    if box is not None:
        lo, hi, keep = clip_faces(lo, hi, box)
        lo, hi, be, nrm, tag = lo[keep], hi[keep], be[keep], nrm[keep], tag[keep]
    for c in range(0, len(be), _CHUNK):
        s = slice(c, c + _CHUNK)
        blk = _boundary_blocks(mesh, directions, weights, be[s], nrm[s], tag[s],
                               lo[s], hi[s])
        idx = pos[be[s]][:, None] * p + local
        rows.append(np.broadcast_to(idx[:, :, None], blk.shape).ravel())
        cols.append(np.broadcast_to(idx[:, None, :], blk.shape).ravel())
        vals.append(blk.ravel())

    n = len(elements) * p
    if rows:
        A = sp.coo_matrix((np.concatenate(vals),
                           (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n, n)).tocsr()
    else:
        A = sp.csr_matrix((n, n), dtype=complex)
    A.sum_duplicates()
    return hermitian_part(A)


def hermitian_part(A):
    """``(A + Aᴴ)/2``; exactly Hermitian in floating point."""
    if sp.issparse(A):
        return ((A + A.conj().T) * 0.5).tocsr()
    return (A + A.conj().T) * 0.5


def assemble_load(mesh: Mesh, directions, data: BoundaryData,
                  weights: FormWeights | None = None) -> np.ndarray:
    weights = weights or FormWeights(mesh.h)
    directions = np.asarray(directions, dtype=float)
    p = len(directions)
    bf = mesh.boundary_faces
    b = np.zeros(mesh.n_elements * p, dtype=complex)
    for c in range(0, len(bf), _CHUNK):
        s = slice(c, c + _CHUNK)
        contrib = _boundary_load(mesh, directions, weights, bf.elem[s],
                                 bf.normal[s], bf.tag[s], bf.lo[s], bf.hi[s], data)
        idx = bf.elem[s][:, None] * p + np.arange(p)
        np.add.at(b, idx.ravel(), contrib.ravel())
    return b


def assemble_global(mesh: Mesh, directions, data: BoundaryData | None = None,
                    weights: FormWeights | None = None) -> AssembledSystem:
    """Assemble ``a(·,·)`` over all elements and ``L(·)`` from the boundary data."""
    weights = weights or FormWeights(mesh.h)
    directions = np.asarray(directions, dtype=float)
    A = assemble_form(mesh, directions, weights=weights)
    if data is None:
        b = np.zeros(A.shape[0], dtype=complex)
    else:
        b = assemble_load(mesh, directions, data, weights)
    return AssembledSystem(mesh, directions, weights, A, b)


@dataclass
class SubdomainForm:
    """The clipped form ``a_r`` of one subdomain in its local element order."""

    index: int
    elements: np.ndarray
    n_interior: int
    globs: list
    matrix: sp.csr_matrix
    box: tuple

    @property
    def n_interior_dofs(self) -> int:
        return self.matrix.shape[0] - self.n_interface_dofs

    @property
    def n_interface_dofs(self) -> int:
        p = self.matrix.shape[0] // max(len(self.elements), 1)
        return (len(self.elements) - self.n_interior) * p


def assemble_subdomain_form(mesh: Mesh, partition: GlobPartition, directions, r: int,
                            weights: FormWeights | None = None) -> SubdomainForm:
    elements = partition.subdomain_elements(r)
    box = mesh.subdomain_box(r)
    A = assemble_form(mesh, directions, elements, box=box, weights=weights)
    return SubdomainForm(r, elements, len(partition.interior[r]),
                         list(partition.subdomain_globs[r]), A, box)


def assemble_subdomain_forms(mesh: Mesh, partition: GlobPartition, directions,
                             weights: FormWeights | None = None) -> list[SubdomainForm]:
    """All clipped subdomain forms; memory grows with the number of subdomains."""
    return [assemble_subdomain_form(mesh, partition, directions, r, weights)
            for r in range(partition.n_subdomains)]


def evaluate_solution(mesh: Mesh, directions, coef, points) -> np.ndarray:
    """Evaluate the discrete plane-wave field at the given points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    p = len(directions)
    elem = mesh.locate(points)
    W = _wavevectors(mesh, directions, elem)
    waves = np.exp(1j * np.einsum("fsa,fa->fs", W, points))
    c = np.asarray(coef).reshape(-1, p)[elem]
    return np.sum(c * waves, axis=1)


def l2_relative_error(mesh: Mesh, directions, coef, kappa: float, v0=None) -> float:
    """Relative ``L²(Ω)`` distance to ``exp(iκ v0·x)``, evaluated in closed form.

    The exact wave is appended to each element's basis with coefficient -1
    and the squared error is one Gram quadratic form.  A basis wave that
    coincides with the exact one absorbs the -1 instead, so an exactly
    representable solution gives an error at rounding level rather than
    the square root of it.
    """
    v0 = example_direction() if v0 is None else np.asarray(v0, dtype=float)
    p = len(directions)
    coef = np.asarray(coef, dtype=complex).reshape(-1, p)
    lo, hi = mesh.element_boxes()
    W = _wavevectors(mesh, directions, np.arange(mesh.n_elements))
    kex = kappa * np.asarray(v0, dtype=float)
    W = np.concatenate([W, np.broadcast_to(kex, (len(W), 1, 3))], axis=1)
    coef = np.concatenate([coef, -np.ones((len(coef), 1))], axis=1)
    same = np.linalg.norm(W[:, :p] - kex, axis=-1) <= 1e-14 * max(kappa, 1.0)
    hit = same.any(axis=1)
    first = np.argmax(same, axis=1)
    coef[hit, first[hit]] -= 1.0
    coef[hit, p] = 0.0
    sq = 0.0
    for c in range(0, mesh.n_elements, _CHUNK):
        s = slice(c, c + _CHUNK)
        D = W[s][:, None, :, :] - W[s][:, :, None, :]
        G = oscillatory_integral(D, lo[s][:, None, None], hi[s][:, None, None])
        cs = coef[s]
        sq += np.real(np.einsum("ft,fts,fs->", cs.conj(), G, cs))
    exact = np.real(oscillatory_integral(np.zeros(3), mesh.origin,
                                         mesh.origin + mesh.spacing * mesh.N))
    return float(np.sqrt(max(sq, 0.0) / exact))
