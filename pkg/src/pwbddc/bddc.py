"""BDDC preconditioner in the transformed primal/dual basis, PCG and multilevel recursion."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .coarse import (CoarseSpace, build_coarse_space, collect_glob_blocks,
                     glob_eigen_data, _map)
from .errors import ConfigError, NonHermitianDetected, SingularInterior
from .level import LevelGlob, LevelProblem
from .mesh import GLOB_KINDS, glob_kind
from .schur import SchurOperator, cho_solve, cholesky_checked, glob_slices, local_schur

DENSE_COARSE_LIMIT = 12000


@dataclass
class PCGResult:
    """Outcome of a preconditioned conjugate gradient run."""

    x: np.ndarray
    iterations: int
    converged: bool
    residuals: list
    alphas: list = field(repr=False, default_factory=list)
    betas: list = field(repr=False, default_factory=list)

    def lanczos_extremes(self):
        """Extreme eigenvalues of the Lanczos matrix built from the CG coefficients."""
        return lanczos_extremes(self.alphas, self.betas)


def lanczos_extremes(alphas, betas):
    k = len(alphas)
    if k == 0:
        return np.nan, np.nan
    a = np.asarray(alphas, dtype=float)
    b = np.asarray(betas[:k - 1], dtype=float)
    diag = 1 / a
    diag[1:] += b / a[:-1]
    off = np.sqrt(np.maximum(b, 0)) / a[:-1]
    ev = sla.eigh_tridiagonal(diag, off, eigvals_only=True)
    return float(ev.min()), float(ev.max())


def pcg(apply_A, apply_M, b, rtol: float = 1e-5, maxit: int = 100, x0=None,
        flexible: bool = False, hermitian_tol: float = 1e-8) -> PCGResult:
    """Preconditioned conjugate gradients for complex Hermitian positive definite systems.

    Stops once ``||r|| / ||b|| <= rtol`` or after ``maxit`` iterations.  With
    ``flexible`` the Polak-Ribiere form of ``β`` is used, which tolerates a
    preconditioner that changes between iterations.
    """
    b = np.asarray(b, dtype=complex)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=complex)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return PCGResult(np.zeros_like(b), 0, True, [0.0])
    r = b - apply_A(x) if x0 is not None else b.copy()
    res = [np.linalg.norm(r) / bnorm]
    if res[0] <= rtol:
        return PCGResult(x, 0, True, res)
    z = apply_M(r)
    p = z.copy()
    rz = np.vdot(r, z).real
    alphas, betas = [], []
    converged = False
    it = 0
    while it < maxit:
        q = apply_A(p)
        pq = np.vdot(p, q)
        if abs(pq.imag) > hermitian_tol * abs(pq):
            raise NonHermitianDetected(
                f"p^H S p = {pq:.3e} has a relative imaginary part above {hermitian_tol}")
        alpha = rz / pq.real
        x += alpha * p
        r -= alpha * q
        it += 1
        alphas.append(alpha)
        res.append(np.linalg.norm(r) / bnorm)
        if res[-1] <= rtol:
            converged = True
            break
        z_new = apply_M(r)
        rz_new = np.vdot(r, z_new).real
        beta = (np.vdot(r, z_new - z).real if flexible else rz_new) / rz
        betas.append(beta)
        p = z_new + beta * p
        z, rz = z_new, rz_new
    return PCGResult(x, it, converged, res, alphas, betas)


@dataclass
class _Subdomain:
    globs: list
    dual_slices: list
    primal: np.ndarray
    L: np.ndarray
    S_dp: np.ndarray
    G: list


class BDDCLevel:
    """BDDC preconditioner for the interface Schur complement of one level.

    Parameters
    ----------
    problem : LevelProblem
    coarse : CoarseSpace
        Primal/dual bases and scalings of every glob.
    levels : int
        Remaining number of levels including this one; ``2`` means the
        coarse problem is solved directly.
    theta_f, theta_e, scaling : coarse-space settings forwarded to deeper levels.
    coarse_rtol, maxit : inner PCG settings of deeper levels.
    threads : int
        Worker threads for per-subdomain setup.
    deluxe_blocks : {"S", "Sbar"}
        Blocks the deluxe weights are built from on deeper levels.
    """

    def __init__(self, problem: LevelProblem, coarse: CoarseSpace, levels: int = 2,
                 theta_f: float = np.inf, theta_e: float = np.inf,
                 scaling: str = "deluxe", coarse_rtol: float = 1e-2, maxit: int = 100,
                 threads: int = 1, flexible: bool = False, depth: int = 0,
                 eigen_data=None, deluxe_blocks: str = "S"):
        if levels < 2:
            raise ConfigError("at least two levels are required")
        self.problem = problem
        self.coarse = coarse
        self.levels = levels
        self.depth = depth
        self.coarse_rtol = coarse_rtol
        self.maxit = maxit
        self.flexible = flexible
        self.eigen_data = eigen_data
        self.deluxe_blocks = deluxe_blocks
        self.timings = {}
        self.inner_iterations = []

        t0 = time.perf_counter()
        self.schur = SchurOperator(problem.matrix, problem.interior,
                                   problem.interface_dofs())
        self.glob_slices = glob_slices([g.size for g in problem.globs])
        keep_local = levels > 2
        built = _map(lambda r: self._setup_subdomain(r, keep_local),
                     range(problem.n_subdomains), threads)
        self.subdomains = [b[0] for b in built]
        local_coarse = [b[1] for b in built]

        n_pi = coarse.n_primal
        self.next = None
        self._coarse_chol = None
        self._coarse_lu = None
        if levels > 2 and n_pi > 0:
            sub_problem = coarsen(problem, coarse, local_coarse,
                                  [s.primal for s in self.subdomains])
            self.coarse_matrix = sub_problem.matrix
            self.next = build_level(sub_problem, theta_f=theta_f, theta_e=theta_e,
                                    scaling=scaling, levels=levels - 1,
                                    coarse_rtol=coarse_rtol, maxit=maxit,
                                    threads=threads, flexible=flexible, depth=depth + 1,
                                    deluxe_blocks=deluxe_blocks)
        elif n_pi > 0:
            self._factor_coarse(local_coarse)
        self.timings["coarse"] = time.perf_counter() - t0

    # setup -------------------------------------------------------------
    def _setup_subdomain(self, r: int, keep_local: bool):
        problem, coarse = self.problem, self.coarse
        gids = problem.subdomain_globs[r]
        K = problem.local_matrix(r)
        S = local_schur(K, len(problem.interior[r]), r)
        del K
        slices = glob_slices([problem.globs[g].size for g in gids])
        for k, g in enumerate(gids):
            S[:, slices[k]] = S[:, slices[k]] @ coarse.globs[g].T
        for k, g in enumerate(gids):
            S[slices[k], :] = coarse.globs[g].T.conj().T @ S[slices[k], :]
        dual_idx, primal_idx, dual_slices, primal, G = [], [], [], [], []
        pos = 0
        for k, g in enumerate(gids):
            basis = coarse.globs[g]
            start = slices[k].start
            dual_idx.append(np.arange(start, start + basis.n_delta))
            primal_idx.append(np.arange(start + basis.n_delta, slices[k].stop))
            dual_slices.append(slice(pos, pos + basis.n_delta))
            pos += basis.n_delta
            primal.append(coarse.primal_dofs(g))
            owner = basis.owners.index(r)
            G.append(basis.D[owner] @ basis.T_delta)
        d = np.concatenate([np.zeros(0, int)] + dual_idx)
        q = np.concatenate([np.zeros(0, int)] + primal_idx)
        S_dd = S[np.ix_(d, d)]
        L = cholesky_checked(S_dd)
        if L is None:
            raise SingularInterior(r, "dual block of the transformed Schur complement")
        S_dp = S[np.ix_(d, q)]
        X = sla.solve_triangular(L, S_dp, lower=True) if len(d) else np.zeros((0, len(q)))
        S_c = S[np.ix_(q, q)] - X.conj().T @ X
        S_c = (S_c + S_c.conj().T) / 2
        sub = _Subdomain(list(gids), dual_slices,
                         np.concatenate([np.zeros(0, int)] + primal), L, S_dp, G)
        return sub, S_c

    def _factor_coarse(self, local_coarse):
        n = self.coarse.n_primal
        if n <= DENSE_COARSE_LIMIT:
            C = np.zeros((n, n), dtype=complex, order="F")
            for sub, S_c in zip(self.subdomains, local_coarse):
                C[np.ix_(sub.primal, sub.primal)] += S_c
            local_coarse.clear()
            self.coarse_matrix = None
            L = cholesky_checked(C, overwrite=True)
            del C
            if L is None:
                raise SingularInterior(-1, "coarse matrix")
            self._coarse_chol = L
        else:
            self.coarse_matrix = assemble_coarse(self.subdomains, local_coarse, n)
            local_coarse.clear()
            self._coarse_lu = spla.splu(self.coarse_matrix.tocsc())

    # application -------------------------------------------------------
    @property
    def n_interface(self) -> int:
        return len(self.schur.interface)

    def coarse_solve(self, f):
        if self._coarse_chol is not None:
            return cho_solve(self._coarse_chol, f)
        if self._coarse_lu is not None:
            return self._coarse_lu.solve(np.ascontiguousarray(f))
        if self.next is None:
            return np.zeros_like(f)
        if f.ndim == 2:
            return np.stack([self.coarse_solve(f[:, j]) for j in range(f.shape[1])],
                            axis=1)
        u, res = self.next.solve(f, rtol=self.coarse_rtol, maxit=self.maxit)
        self.inner_iterations.append(res.iterations)
        return u

    def restrict_dual(self, g):
        """``J^H g``: per-subdomain dual loads and the primal load."""
        dual = []
        for sub in self.subdomains:
            parts = [sub.G[k].conj().T @ g[self.glob_slices[gid]]
                     for k, gid in enumerate(sub.globs)]
            dual.append(np.concatenate(parts) if parts else np.zeros((0,) + g.shape[1:]))
        f_pi = np.zeros((self.coarse.n_primal,) + g.shape[1:], dtype=complex)
        for gid, basis in enumerate(self.coarse.globs):
            f_pi[self.coarse.primal_dofs(gid)] = basis.T_pi.conj().T @ g[self.glob_slices[gid]]
        return dual, f_pi

    def assemble(self, dual, u_pi):
        """``J``: interface vector from per-subdomain dual and global primal parts."""
        shape = (self.n_interface,) + u_pi.shape[1:]
        u = np.zeros(shape, dtype=complex)
        for gid, basis in enumerate(self.coarse.globs):
            u[self.glob_slices[gid]] += basis.T_pi @ u_pi[self.coarse.primal_dofs(gid)]
        for sub, ud in zip(self.subdomains, dual):
            for k, gid in enumerate(sub.globs):
                u[self.glob_slices[gid]] += sub.G[k] @ ud[sub.dual_slices[k]]
        return u

    def apply(self, g):
        """Apply the preconditioner to an interface vector (or columns of a matrix)."""
        g = np.asarray(g, dtype=complex)
        dual, f_pi = self.restrict_dual(g)
        ys = []
        for sub, f in zip(self.subdomains, dual):
            y = cho_solve(sub.L, f)
            ys.append(y)
            f_pi[sub.primal] -= sub.S_dp.conj().T @ y
        u_pi = self.coarse_solve(f_pi)
        u_dual = [y - cho_solve(sub.L, sub.S_dp @ u_pi[sub.primal])
                  for sub, y in zip(self.subdomains, ys)]
        return self.assemble(u_dual, u_pi)

    __call__ = apply

    def solve(self, b, rtol: float = 1e-5, maxit: int = 100, x0=None):
        """Solve the full level system ``A u = b`` by interface PCG and back-substitution."""
        bhat = self.schur.condense(b)
        if self.n_interface == 0:
            return self.schur.extend(bhat, b), PCGResult(bhat, 0, True, [0.0])
        res = pcg(self.schur.apply, self.apply, bhat, rtol, maxit, flexible=self.flexible)
        return self.schur.extend(res.x, b), res

    # averaging operators (oracle checks) -------------------------------
    def restrict_interface(self, u):
        """``R̃_Γ``: coordinates of an interface vector in the transformed basis."""
        dual = []
        coords = [np.linalg.solve(b.T, u[self.glob_slices[g]])
                  for g, b in enumerate(self.coarse.globs)]
        for sub in self.subdomains:
            parts = [coords[gid][:self.coarse.globs[gid].n_delta] for gid in sub.globs]
            dual.append(np.concatenate(parts) if parts else np.zeros(0, complex))
        u_pi = np.concatenate([np.zeros(0, complex)] + [
            coords[g][b.n_delta:] for g, b in enumerate(self.coarse.globs)])
        return dual, u_pi

    def average(self, dual, u_pi):
        """``E_D`` on the partially assembled space."""
        return self.restrict_interface(self.assemble(dual, u_pi))

    def jump(self, dual, u_pi):
        """``P_D = I - E_D`` mapped to original glob coordinates per subdomain.

        Averaging in original coordinates can move the primal coordinates
        too, so both the dual and the primal differences are mapped back.
        """
        avg_dual, avg_pi = self.average(dual, u_pi)
        diff_pi = u_pi - avg_pi
        out = []
        for sub, w, a in zip(self.subdomains, dual, avg_dual):
            diff = w - a
            vals = {}
            for k, gid in enumerate(sub.globs):
                basis = self.coarse.globs[gid]
                vals[gid] = (basis.T_delta @ diff[sub.dual_slices[k]]
                             + basis.T_pi @ diff_pi[self.coarse.primal_dofs(gid)])
            out.append(vals)
        return out

    def jump_explicit(self, dual):
        """``Σ_{s≠r} D^(s) T_Δ (w^(r) - w^(s))`` per subdomain and glob."""
        where = {}
        for r, sub in enumerate(self.subdomains):
            for k, gid in enumerate(sub.globs):
                where[r, gid] = dual[r][sub.dual_slices[k]]
        out = []
        for r, sub in enumerate(self.subdomains):
            vals = {}
            for gid in sub.globs:
                basis = self.coarse.globs[gid]
                acc = np.zeros(basis.T.shape[0], dtype=complex)
                for j, s in enumerate(basis.owners):
                    if s != r:
                        acc += basis.D[j] @ (basis.T_delta @ (where[r, gid] - where[s, gid]))
                vals[gid] = acc
            out.append(vals)
        return out

    def random_partial(self, rng):
        dual = [rng.standard_normal(s.L.shape[0]) + 1j * rng.standard_normal(s.L.shape[0])
                for s in self.subdomains]
        n = self.coarse.n_primal
        return dual, rng.standard_normal(n) + 1j * rng.standard_normal(n)

    # reporting -----------------------------------------------------------
    def primal_counts(self):
        """``[(pnum, pnumF, pnumE, pnumV)]`` from this level down."""
        c = self.coarse
        out = [(c.pnum, c.pnumF, c.pnumE, c.pnumV)]
        if self.next is not None:
            out += self.next.primal_counts()
        return out


def assemble_coarse(subdomains, local_coarse, n):
    rows, cols, vals = [], [], []
    for sub, S_c in zip(subdomains, local_coarse):
        P = sub.primal
        rows.append(np.repeat(P, len(P)))
        cols.append(np.tile(P, len(P)))
        vals.append(S_c.ravel())
    if not rows:
        return sp.csr_matrix((n, n), dtype=complex)
    C = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    C.sum_duplicates()
    return ((C + C.conj().T) * 0.5).tocsr()


def coarsen(problem: LevelProblem, coarse: CoarseSpace, local_coarse, primal,
            merge: int = 2) -> LevelProblem:
    """Coarse level whose subdomains merge ``merge³`` neighbouring subdomains.

    The dofs are the primal unknowns of ``problem``; a coarse dof is shared
    by the coarse subdomains containing any owner of its fine glob.
    """
    n = problem.n_per_axis
    if n % merge:
        raise ConfigError(f"{n} subdomains per axis cannot be merged by {merge}")
    nc = n // merge
    cgrid = problem.grid // merge
    parent = cgrid[:, 0] + nc * (cgrid[:, 1] + nc * cgrid[:, 2])
    n_coarse_sub = nc ** 3

    groups: dict[tuple, list] = {}
    for gid, basis in enumerate(coarse.globs):
        key = tuple(sorted({int(parent[r]) for r in basis.owners}))
        groups.setdefault(key, []).extend(coarse.primal_dofs(gid).tolist())
    rank = {kind: i for i, kind in enumerate(GLOB_KINDS)}
    interior = [np.zeros(0, dtype=int) for _ in range(n_coarse_sub)]
    keyed = []
    for key, dofs in groups.items():
        kind = glob_kind(len(key))
        dofs = np.sort(np.asarray(dofs, dtype=int))
        if kind == "interior":
            interior[key[0]] = dofs
        else:
            keyed.append((rank[kind], key, kind, dofs))
    keyed.sort(key=lambda t: (t[0], t[1]))
    globs = [LevelGlob(i, kind, key, dofs) for i, (_, key, kind, dofs) in enumerate(keyed)]
    sub_globs = [[] for _ in range(n_coarse_sub)]
    for g in globs:
        for R in g.owners:
            sub_globs[R].append(g.index)

    matrix = assemble_coarse([_Primal(P) for P in primal], local_coarse, coarse.n_primal)
    children = [np.flatnonzero(parent == R) for R in range(n_coarse_sub)]
    local_coarse = list(local_coarse)
    primal = list(primal)

    coarse_problem = LevelProblem(matrix, globs, interior, sub_globs, None,
                                  np.stack([np.arange(n_coarse_sub) % nc,
                                            (np.arange(n_coarse_sub) // nc) % nc,
                                            np.arange(n_coarse_sub) // (nc * nc)], axis=1),
                                  nc, None, {"level": problem.meta.get("level", 0) + 1})

    def local_matrix(R):
        dofs = coarse_problem.local_dofs(R)
        pos = np.full(coarse.n_primal, -1)
        pos[dofs] = np.arange(len(dofs))
        A = np.zeros((len(dofs), len(dofs)), dtype=complex)
        for r in children[R]:
            idx = pos[primal[r]]
            A[np.ix_(idx, idx)] += local_coarse[r]
        return (A + A.conj().T) / 2

    coarse_problem.local_matrix = local_matrix
    return coarse_problem


@dataclass
class _Primal:
    primal: np.ndarray


def build_level(problem: LevelProblem, *, theta_f: float, theta_e: float,
                scaling: str = "deluxe", levels: int = 2, coarse_rtol: float = 1e-2,
                maxit: int = 100, threads: int = 1, flexible: bool = False,
                depth: int = 0, eigen_data=None, deluxe_blocks: str = "S") -> BDDCLevel:
    """Adaptive coarse space plus BDDC preconditioner for one level (and those below).

    Passing ``eigen_data`` from an earlier build with the same scaling skips
    the eigenproblems, so tolerance sweeps only redo the cheap selection.
    """
    t0 = time.perf_counter()
    if eigen_data is None:
        blocks = collect_glob_blocks(problem, threads)
        eigen_data = glob_eigen_data(problem, blocks, scaling, threads, deluxe_blocks)
        del blocks
    coarse = build_coarse_space(eigen_data, theta_f, theta_e)
    t_eig = time.perf_counter() - t0
    level = BDDCLevel(problem, coarse, levels, theta_f, theta_e, scaling, coarse_rtol,
                      maxit, threads, flexible, depth, eigen_data, deluxe_blocks)
    level.timings["eigen"] = t_eig
    return level
