"""Interior elimination, the interface Schur operator and per-glob Schur blocks."""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .assembly import FormWeights, assemble_form, hermitian_part
from .errors import SingularEliminationBlock, SingularInterior
from .mesh import GlobPartition, Mesh

PIVOT_FLOOR = 1e-12


def cholesky_checked(M, rel_floor: float = PIVOT_FLOOR, overwrite: bool = False):
    """Lower Cholesky factor of a Hermitian matrix with a relative pivot floor.

    Returns ``None`` when the matrix is not numerically positive definite,
    i.e. the factorization breaks down or some pivot ``L_ii**2`` falls below
    ``rel_floor`` times the largest diagonal entry.  With ``overwrite`` the
    input's storage may be reused for the factor.
    """
    M = np.asarray(M)
    if M.shape[0] == 0:
        return np.zeros((0, 0), dtype=complex)
    dmax = np.abs(np.diag(M)).max()
    try:
        L = sla.cholesky(M, lower=True, overwrite_a=overwrite, check_finite=False)
    except np.linalg.LinAlgError:
        return None
    piv = np.abs(np.diag(L)) ** 2
    if piv.min() <= rel_floor * dmax:
        return None
    return L


def cho_solve(L, y):
    if L.shape[0] == 0:
        return np.zeros_like(y, dtype=complex)
    z = sla.solve_triangular(L, y, lower=True, check_finite=False)
    return sla.solve_triangular(L, z, lower=True, trans="C", check_finite=False)


def schur_complement(M, keep, elim, on_singular=None):
    """``M[keep, keep] - M[keep, elim] M[elim, elim]^{-1} M[elim, keep]``.

    ``on_singular`` is an exception instance raised when the eliminated
    block fails :func:`cholesky_checked`.
    """
    M = np.asarray(M)
    keep = np.asarray(keep, dtype=int)
    elim = np.asarray(elim, dtype=int)
    S = M[np.ix_(keep, keep)]
    if len(elim) == 0:
        return hermitian_part(S.astype(complex))
    L = cholesky_checked(M[np.ix_(elim, elim)])
    if L is None:
        raise on_singular if on_singular is not None else np.linalg.LinAlgError(
            "eliminated block is not positive definite")
    X = sla.solve_triangular(L, M[np.ix_(elim, keep)], lower=True, check_finite=False)
    return hermitian_part(S - X.conj().T @ X)


class InteriorFactorization:
    """Cholesky factors of the interior blocks of every subdomain.

    Interior dofs of different subdomains never share a face, so the global
    interior block is block diagonal and each block equals the interior
    block of the local form.
    """

    def __init__(self, matrix, interior):
        matrix = sp.csr_matrix(matrix)
        self.interior = [np.asarray(i, dtype=int) for i in interior]
        self.factors = []
        for r, idx in enumerate(self.interior):
            block = matrix[idx][:, idx].toarray()
            L = cholesky_checked(block)
            if L is None:
                raise SingularInterior(r, "interior block fails the pivot floor")
            self.factors.append(L)
        self.offsets = np.cumsum([0] + [len(i) for i in self.interior])

    @property
    def n_interior(self) -> int:
        return int(self.offsets[-1])

    def solve(self, r: int, y):
        return cho_solve(self.factors[r], y)

    def solve_all(self, y):
        """Apply the block-diagonal inverse to vectors stacked in interior order."""
        out = np.empty_like(y, dtype=complex)
        for r, L in enumerate(self.factors):
            s = slice(self.offsets[r], self.offsets[r + 1])
            out[s] = cho_solve(L, y[s])
        return out


def factor_interior(matrix, interior) -> InteriorFactorization:
    return InteriorFactorization(matrix, interior)


class SchurOperator:
    """Matrix-free ``Ŝ = A_ΓΓ - A_ΓI A_II^{-1} A_IΓ`` on the interface.

    Parameters
    ----------
    matrix : sparse matrix
        Global Hermitian matrix.
    interior : list of ndarray
        Interior dofs per subdomain.
    interface : ndarray
        Interface dofs in the order used for interface vectors.
    """

    def __init__(self, matrix, interior, interface, factorization=None):
        A = sp.csr_matrix(matrix)
        self.n = A.shape[0]
        self.interface = np.asarray(interface, dtype=int)
        self.factorization = factorization or InteriorFactorization(A, interior)
        self.interior = np.concatenate(
            [np.zeros(0, dtype=int)] + list(self.factorization.interior)).astype(int)
        if len(self.interior) + len(self.interface) != self.n:
            raise ValueError("interior and interface dofs do not cover the matrix")
        self.A_gg = A[self.interface][:, self.interface].tocsr()
        self.A_gi = A[self.interface][:, self.interior].tocsr()
        self.A_ig = self.A_gi.conj().T.tocsr()

    @property
    def shape(self):
        return (len(self.interface), len(self.interface))

    def apply(self, x):
        x = np.asarray(x)
        if x.shape[0] != len(self.interface):
            raise ValueError(f"expected {len(self.interface)} interface values, "
                             f"got {x.shape[0]}")
        y = self.A_gg @ x
        if len(self.interior):
            y = y - self.A_gi @ self.factorization.solve_all(self.A_ig @ x)
        return y

    __matmul__ = apply

    def condense(self, b):
        """Interface right-hand side ``b_Γ - A_ΓI A_II^{-1} b_I``."""
        b = np.asarray(b, dtype=complex)
        rhs = b[self.interface]
        if len(self.interior):
            rhs = rhs - self.A_gi @ self.factorization.solve_all(b[self.interior])
        return rhs

    def extend(self, u_gamma, b):
        """Full solution from interface values by interior back-substitution."""
        b = np.asarray(b, dtype=complex)
        u = np.zeros(self.n, dtype=complex)
        u[self.interface] = u_gamma
        if len(self.interior):
            u[self.interior] = self.factorization.solve_all(
                b[self.interior] - self.A_ig @ u_gamma)
        return u

    def to_dense(self):
        return hermitian_part(self.apply(np.eye(len(self.interface), dtype=complex)))


def local_schur(K, n_interior: int, subdomain: int = -1):
    """Subdomain Schur complement eliminating the leading ``n_interior`` dofs."""
    n = K.shape[0]
    return schur_complement(K, np.arange(n_interior, n), np.arange(n_interior),
                            SingularInterior(subdomain, "local interior block"))


def glob_slices(sizes):
    """Consecutive slices for a list of block sizes."""
    off = np.cumsum([0] + list(sizes))
    return [slice(off[i], off[i + 1]) for i in range(len(sizes))]


def glob_block_S(S_local, slices, k: int):
    """Glob block of a subdomain Schur complement (other interface dofs held at zero)."""
    s = slices[k]
    return hermitian_part(np.asarray(S_local)[s, s])


def glob_block_Sbar(S_local, slices, k: int, glob_id=None, subdomain=None):
    """Schur complement of the subdomain Schur complement onto one glob."""
    s = slices[k]
    n = S_local.shape[0]
    keep = np.arange(s.start, s.stop)
    elim = np.setdiff1d(np.arange(n), keep)
    return schur_complement(S_local, keep, elim,
                            SingularEliminationBlock(glob_id, subdomain))


def slab_elements(mesh: Mesh, partition: GlobPartition, r: int, g: int, eta: float):
    """Elements of subdomain ``r`` whose box lies closer than ``eta`` to glob ``g``."""
    elems = partition.subdomain_elements(r)
    glob = partition.globs[g].elements
    t_all = mesh.element_triple(elems)
    t_glob = mesh.element_triple(glob)
    gap = np.abs(t_all[:, None, :] - t_glob[None, :, :]) - 1
    gap = np.maximum(gap, 0) * mesh.spacing
    dist = np.sqrt((gap ** 2).sum(axis=-1)).min(axis=1)
    return elems[dist < eta]


def economic_glob_blocks(mesh: Mesh, partition: GlobPartition, directions, r: int,
                         g: int, eta: float, weights: FormWeights | None = None):
    """``(S, Sbar)`` of glob ``g`` for subdomain ``r`` computed on a slab.

    The slab form keeps the faces with both elements in the slab together
    with their boundary faces, clipped to the subdomain.  Interior dofs of
    the subdomain inside the slab are eliminated for ``S``; for ``Sbar`` the
    slab's other interface dofs are eliminated as well.
    """
    p = len(directions)
    slab = slab_elements(mesh, partition, r, g, eta)
    glob = partition.globs[g]
    interior_r = np.isin(slab, partition.interior[r])
    in_glob = np.isin(slab, glob.elements)
    other = ~interior_r & ~in_glob
    # slab order: interior, other interface, glob (glob keeps ascending order)
    order = np.concatenate([slab[interior_r], slab[other], np.sort(slab[in_glob])])
    K = assemble_form(mesh, directions, order, box=mesh.subdomain_box(r),
                      weights=weights).toarray()
    n_i = int(interior_r.sum()) * p
    n_o = int(other.sum()) * p
    n = K.shape[0]
    S_slab = schur_complement(K, np.arange(n_i, n), np.arange(n_i),
                              SingularInterior(r, f"slab interior of glob {g}"))
    k = n - n_i - n_o
    S = hermitian_part(S_slab[n_o:, n_o:])
    Sbar = schur_complement(S_slab, np.arange(n_o, n_o + k), np.arange(n_o),
                            SingularEliminationBlock(g, r))
    return S, Sbar
