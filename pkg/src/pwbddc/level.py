"""Level-independent description of a substructured Hermitian problem.

The same BDDC machinery runs on the fine plane-wave system and on every
coarse problem of the multilevel hierarchy.  A :class:`LevelProblem` holds
just what that machinery needs: the global matrix, the globs, the interior
dofs of each subdomain and a way to build each subdomain's local matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .assembly import assemble_subdomain_form, FormWeights
from .mesh import GlobPartition, Mesh, subdomain_triple


@dataclass(frozen=True)
class LevelGlob:
    index: int
    kind: str
    owners: tuple
    dofs: np.ndarray

    @property
    def size(self) -> int:
        return len(self.dofs)


@dataclass
class LevelProblem:
    """Substructured problem on one level.

    Parameters
    ----------
    matrix : sparse matrix
        Global Hermitian matrix over all dofs of the level.
    globs : list of LevelGlob
        Interface equivalence classes, in a fixed order.
    interior : list of ndarray
        Global dof ids interior to each subdomain.
    subdomain_globs : list of list of int
        Glob ids incident to each subdomain, ascending.
    local_matrix : callable
        ``local_matrix(r)`` returns the dense local Hermitian matrix of
        subdomain ``r`` ordered as ``local_dofs(r)``.
    grid : ndarray of shape (n_subdomains, 3)
        Integer grid position of each subdomain.
    n_per_axis : int
        Subdomains per axis.
    economic_blocks : callable, optional
        ``economic_blocks(r, g)`` returns ``(S, Sbar)`` for glob ``g`` of
        subdomain ``r`` computed on a slab; ``None`` means full subdomains.
    """

    matrix: sp.csr_matrix
    globs: list
    interior: list
    subdomain_globs: list
    local_matrix: Callable[[int], np.ndarray]
    grid: np.ndarray
    n_per_axis: int
    economic_blocks: Callable | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_subdomains(self) -> int:
        return len(self.interior)

    @property
    def n_dofs(self) -> int:
        return self.matrix.shape[0]

    def local_dofs(self, r: int) -> np.ndarray:
        parts = [self.interior[r]] + [self.globs[g].dofs for g in self.subdomain_globs[r]]
        return np.concatenate(parts).astype(int)

    def interface_dofs(self) -> np.ndarray:
        if not self.globs:
            return np.zeros(0, dtype=int)
        return np.concatenate([g.dofs for g in self.globs]).astype(int)

    def interior_dofs(self) -> np.ndarray:
        if not self.interior:
            return np.zeros(0, dtype=int)
        return np.concatenate(self.interior).astype(int)

    def count(self, kind: str) -> int:
        return sum(g.size for g in self.globs if g.kind == kind)


def fine_level(mesh: Mesh, partition: GlobPartition, directions, matrix,
               weights: FormWeights | None = None, economic: bool = False,
               eta: float | None = None) -> LevelProblem:
    """Wrap the plane-wave system as the finest level of the hierarchy."""
    from .schur import economic_glob_blocks

    directions = np.asarray(directions, dtype=float)
    p = len(directions)
    globs = [LevelGlob(g.index, g.kind, g.owners, g.dofs) for g in partition.globs]
    interior = [(e[:, None] * p + np.arange(p)).ravel() for e in partition.interior]

    def local_matrix(r):
        form = assemble_subdomain_form(mesh, partition, directions, r, weights)
        return form.matrix.toarray()

    econ = None
    if economic:
        width = mesh.h if eta is None else float(eta)

        def econ(r, g):
            return economic_glob_blocks(mesh, partition, directions, r, g, width, weights)

    n = mesh.config.n
    grid = subdomain_triple(n, np.arange(partition.n_subdomains))
    return LevelProblem(sp.csr_matrix(matrix), globs, interior,
                        [list(s) for s in partition.subdomain_globs], local_matrix,
                        grid, n, econ, {"level": 0})
