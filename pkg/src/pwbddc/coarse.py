"""Adaptive primal selection: scalings, parallel sums and per-glob eigenproblems."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .assembly import hermitian_part
from .errors import EigenSolverFailure, SingularDeluxeSum
from .level import LevelProblem
from .schur import (cho_solve, cholesky_checked, glob_block_S, glob_block_Sbar,
                    glob_slices, local_schur)

SCALINGS = ("deluxe", "multiplicity")
NULL_CUTOFF = 1e-10
THETA_SLACK = 1e-12


def scaling_matrices(blocks, kind: str = "deluxe", glob=None):
    """Scaling matrices ``D^(ν)`` of one glob, in the order of ``blocks``.

    Multiplicity scaling gives ``I/|N|``; deluxe scaling gives
    ``(Σ_μ S^(μ))^{-1} S^(ν)``.  The last matrix is taken as the identity
    minus the others so the family sums to the identity up to rounding of a
    single subtraction.
    """
    if kind not in SCALINGS:
        raise ValueError(f"unknown scaling {kind!r}; expected one of {SCALINGS}")
    blocks = [np.asarray(b) for b in blocks]
    n = blocks[0].shape[0]
    k = len(blocks)
    eye = np.eye(n, dtype=complex)
    if kind == "multiplicity":
        return [eye / k for _ in range(k)]
    total = hermitian_part(sum(blocks))
    L = cholesky_checked(total)
    if L is None:
        raise SingularDeluxeSum(glob)
    D = [cho_solve(L, b.astype(complex)) for b in blocks[:-1]]
    D.append(eye - sum(D) if D else eye)
    return D


def parallel_sum(mats, cutoff: float = NULL_CUTOFF):
    """Parallel sum ``A:B = A (A+B)^+ B`` folded left to right."""
    mats = [np.asarray(m) for m in mats]
    if not mats:
        raise ValueError("parallel_sum needs at least one matrix")
    shape = mats[0].shape
    for m in mats:
        if m.shape != shape or shape[0] != shape[1]:
            raise ValueError(f"size mismatch in parallel_sum: {m.shape} vs {shape}")
    out = mats[0].astype(complex)
    for m in mats[1:]:
        total = hermitian_part(out + m)
        pinv = sla.pinvh(total, rtol=cutoff) if total.any() else total
        out = hermitian_part(out @ pinv @ m)
    return out


def build_gevp(S_blocks, Sbar_blocks, D):
    """Left and right matrices ``(A^D, B)`` of a glob eigenproblem.

    ``A^D = Σ_ν Σ_{μ≠ν} D^(μ)ᴴ S^(ν) D^(μ)`` and ``B`` is the parallel sum
    of the doubly eliminated blocks.
    """
    k = len(S_blocks)
    if len(Sbar_blocks) != k or len(D) != k:
        raise ValueError("blocks and scalings must cover the same subdomains")
    AD = np.zeros_like(np.asarray(S_blocks[0]), dtype=complex)
    for nu in range(k):
        for mu in range(k):
            if mu != nu:
                AD += D[mu].conj().T @ S_blocks[nu] @ D[mu]
    return hermitian_part(AD), parallel_sum(Sbar_blocks)


@dataclass
class GlobEigenDecomposition:
    """Eigenpairs of one glob ordered by ``|λ|``.

    ``lam`` holds 0 for directions in the joint null space of ``A^D`` and
    ``B`` and ``inf`` for null directions of ``B`` carrying ``A^D`` energy.
    The columns of ``vectors`` form a basis of the glob space.
    """

    lam: np.ndarray
    vectors: np.ndarray

    def n_dual(self, theta: float) -> int:
        return int(np.count_nonzero(np.abs(self.lam) <= theta * (1 + THETA_SLACK)))

    def split(self, theta: float) -> "GlobEigenSplit":
        k = self.n_dual(theta)
        return GlobEigenSplit(self.lam, self.vectors[:, :k], self.vectors[:, k:])


@dataclass
class GlobEigenSplit:
    lam: np.ndarray
    T_delta: np.ndarray
    T_pi: np.ndarray

    @property
    def n_delta(self) -> int:
        return self.T_delta.shape[1]

    @property
    def n_pi(self) -> int:
        return self.T_pi.shape[1]


def solve_gevp(AD, B, cutoff: float = NULL_CUTOFF, glob=None) -> GlobEigenDecomposition:
    """Solve ``A^D v = λ B v`` with a possibly singular ``B``.

    ``B`` is split into range and null space at ``cutoff`` relative to its
    largest eigenvalue.  On the null space ``A^D`` is diagonalized: directions
    with energy become primal (``λ = inf``), the rest dual (``λ = 0``).  On the
    range the ``A^D``-energy of the null directions is eliminated and a
    Hermitian-definite problem remains; its eigenvectors are B-orthogonal.
    All returned vectors have unit Euclidean norm.
    """
    try:
        AD = hermitian_part(np.asarray(AD, dtype=complex))
        B = hermitian_part(np.asarray(B, dtype=complex))
        n = AD.shape[0]
        w, U = np.linalg.eigh(B)
        scale = np.abs(w).max() if n else 0.0
        rng = w > cutoff * scale if scale > 0 else np.zeros(n, dtype=bool)
        Ur, wr, Z = U[:, rng], w[rng], U[:, ~rng]
        a_norm = np.abs(np.linalg.eigvalsh(AD)).max() if n else 0.0

        Zp = np.zeros((n, 0), dtype=complex)
        Z0 = np.zeros((n, 0), dtype=complex)
        ap = np.zeros(0)
        if Z.shape[1]:
            a, Q = np.linalg.eigh(hermitian_part(Z.conj().T @ AD @ Z))
            energetic = a > cutoff * a_norm if a_norm > 0 else np.zeros(len(a), bool)
            Zp, Z0, ap = Z @ Q[:, energetic], Z @ Q[:, ~energetic], a[energetic]

        if Ur.shape[1]:
            Ar = Ur.conj().T @ AD @ Ur
            Arp = Ur.conj().T @ AD @ Zp
            As = hermitian_part(Ar - (Arp / ap) @ Arp.conj().T)
            s = 1 / np.sqrt(wr)
            mu, Y = np.linalg.eigh(hermitian_part(s[:, None] * As * s[None, :]))
            Y = s[:, None] * Y
            V = Ur @ Y - Zp @ ((Arp.conj().T @ Y) / ap[:, None])
            order = np.argsort(np.abs(mu), kind="stable")
            mu, V = mu[order], V[:, order]
        else:
            mu, V = np.zeros(0), np.zeros((n, 0), dtype=complex)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolverFailure(glob, exc) from exc

    lam = np.concatenate([np.zeros(Z0.shape[1]), mu, np.full(Zp.shape[1], np.inf)])
    vectors = np.concatenate([Z0, V, Zp], axis=1)
    # unit columns keep the transformed matrices well scaled
    vectors = vectors / np.linalg.norm(vectors, axis=0)
    return GlobEigenDecomposition(lam, vectors)


def solve_gevp_and_split(AD, B, theta: float, glob=None) -> GlobEigenSplit:
    return solve_gevp(AD, B, glob=glob).split(theta)


@dataclass
class GlobSchurBlocks:
    """Per-(glob, subdomain) Schur blocks of one level.

    ``S`` are the full-subdomain blocks (used for deluxe scaling); ``S_eig``
    and ``Sbar_eig`` feed the eigenproblems and come from slabs in economic
    mode.
    """

    S: dict = field(default_factory=dict)
    S_eig: dict = field(default_factory=dict)
    Sbar_eig: dict = field(default_factory=dict)


def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def subdomain_glob_blocks(problem: LevelProblem, r: int, S_local=None):
    """Schur blocks of every glob of subdomain ``r`` that needs an eigenproblem."""
    gids = problem.subdomain_globs[r]
    if S_local is None:
        K = problem.local_matrix(r)
        S_local = local_schur(K, len(problem.interior[r]), r)
    slices = glob_slices([problem.globs[g].size for g in gids])
    out = {}
    for k, g in enumerate(gids):
        kind = problem.globs[g].kind
        if kind == "vertex":
            out[g] = (glob_block_S(S_local, slices, k), None, None)
            continue
        S = glob_block_S(S_local, slices, k)
        if problem.economic_blocks is not None:
            S_e, Sbar_e = problem.economic_blocks(r, g)
        else:
            S_e, Sbar_e = S, glob_block_Sbar(S_local, slices, k, g, r)
        out[g] = (S, S_e, Sbar_e)
    return out


def collect_glob_blocks(problem: LevelProblem, threads: int = 1) -> GlobSchurBlocks:
    blocks = GlobSchurBlocks()
    results = _map(lambda r: subdomain_glob_blocks(problem, r),
                   range(problem.n_subdomains), threads)
    for r, res in enumerate(results):
        for g, (S, S_e, Sbar_e) in res.items():
            blocks.S[g, r] = S
            if S_e is not None:
                blocks.S_eig[g, r] = S_e
                blocks.Sbar_eig[g, r] = Sbar_e
    return blocks


@dataclass
class GlobEigenData:
    """Scalings, eigenproblem and decomposition of one glob."""

    glob: int
    kind: str
    owners: tuple
    D: list
    AD: np.ndarray | None
    B: np.ndarray | None
    decomposition: GlobEigenDecomposition


DELUXE_BLOCKS = ("S", "Sbar")


def glob_eigen_data(problem: LevelProblem, blocks: GlobSchurBlocks,
                    scaling: str = "deluxe", threads: int = 1,
                    deluxe_blocks: str = "S") -> list[GlobEigenData]:
    """Scalings and cached eigen-decompositions for all globs of a level.

    ``deluxe_blocks="Sbar"`` builds the deluxe weights from the doubly
    eliminated blocks of the eigenproblem instead of the subdomain Schur
    blocks (vertices always use the latter).
    """
    if deluxe_blocks not in DELUXE_BLOCKS:
        raise ValueError(f"deluxe_blocks must be one of {DELUXE_BLOCKS}")

    def one(glob):
        g = glob.index
        S = [blocks.S[g, r] for r in glob.owners]
        if deluxe_blocks == "Sbar" and glob.kind != "vertex":
            S = [blocks.Sbar_eig[g, r] for r in glob.owners]
        D = scaling_matrices(S, scaling, glob=g)
        if glob.kind == "vertex":
            eye = np.eye(glob.size, dtype=complex)
            dec = GlobEigenDecomposition(np.full(glob.size, np.inf), eye)
            return GlobEigenData(g, glob.kind, glob.owners, D, None, None, dec)
        AD, B = build_gevp([blocks.S_eig[g, r] for r in glob.owners],
                           [blocks.Sbar_eig[g, r] for r in glob.owners], D)
        return GlobEigenData(g, glob.kind, glob.owners, D, AD, B,
                             solve_gevp(AD, B, glob=g))

    return _map(one, problem.globs, threads)


@dataclass
class GlobBasis:
    glob: int
    kind: str
    owners: tuple
    D: list
    T: np.ndarray
    n_delta: int

    @property
    def T_delta(self):
        return self.T[:, :self.n_delta]

    @property
    def T_pi(self):
        return self.T[:, self.n_delta:]

    @property
    def n_pi(self) -> int:
        return self.T.shape[1] - self.n_delta


@dataclass
class CoarseSpace:
    """Primal/dual change of basis for every glob and the primal numbering."""

    globs: list
    primal_offsets: np.ndarray

    @property
    def n_primal(self) -> int:
        return int(self.primal_offsets[-1])

    def primal_dofs(self, g: int) -> np.ndarray:
        return np.arange(self.primal_offsets[g], self.primal_offsets[g + 1])

    def count(self, kind: str) -> int:
        return sum(b.n_pi for b in self.globs if b.kind == kind)

    @property
    def pnumF(self) -> int:
        return self.count("face")

    @property
    def pnumE(self) -> int:
        return self.count("edge")

    @property
    def pnumV(self) -> int:
        return self.count("vertex")

    @property
    def pnum(self) -> int:
        return self.pnumF + self.pnumE + self.pnumV


def build_coarse_space(eigen_data: list[GlobEigenData], theta_f: float,
                       theta_e: float) -> CoarseSpace:
    """Select primal directions per glob: ``|λ| > Θ`` on faces and edges, all on vertices."""
    out = []
    for d in eigen_data:
        theta = {"face": theta_f, "edge": theta_e}.get(d.kind)
        n_delta = 0 if theta is None else d.decomposition.n_dual(theta)
        out.append(GlobBasis(d.glob, d.kind, d.owners, d.D, d.decomposition.vectors,
                             n_delta))
    offsets = np.cumsum([0] + [b.n_pi for b in out])
    return CoarseSpace(out, offsets)
