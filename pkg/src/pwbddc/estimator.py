"""Estimator-style front ends: the preconditioner and the full Helmholtz solver."""
from __future__ import annotations

import time

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .assembly import (assemble_global, assemble_rhs_exact, evaluate_solution,
                       example_direction, l2_relative_error, wave_directions)
from .bddc import build_level
from .coarse import DELUXE_BLOCKS, SCALINGS
from .config import parse_kappa, parse_theta
from .level import LevelProblem, fine_level
from .mesh import MeshConfig, build_mesh, classify_globs
from .validation import (check_choice, check_complex_array, check_points,
                         check_positive_float, check_positive_int, check_unit_vector)


class AdaptiveBDDC(TransformerMixin, BaseEstimator):
    """Adaptive BDDC preconditioner for a substructured Hermitian problem.

    ``fit`` takes a :class:`~pwbddc.level.LevelProblem`, solves the glob
    eigenproblems and builds the (possibly multilevel) preconditioner.
    ``transform`` applies the preconditioner to interface vectors given as
    rows, and ``solve`` runs the interface PCG plus back-substitution.

    Parameters
    ----------
    theta_f, theta_e : float
        Face and edge tolerances; eigenvectors with ``|λ|`` above them
        become primal.
    scaling : {"deluxe", "multiplicity"}
    levels : int
        Total number of levels; ``2`` is the classical two-level method.
    rtol, maxit : float, int
        Outer PCG stopping rule.
    coarse_rtol : float
        Relative tolerance of the inner PCG on intermediate levels.
    flexible : bool
        Use the flexible CG update (helps with inexact coarse solves).
    threads : int
        Worker threads for per-subdomain setup work.
    deluxe_blocks : {"S", "Sbar"}
        Build the deluxe weights of faces and edges from the subdomain Schur
        blocks (default) or from the doubly eliminated blocks of the glob
        eigenproblems.
    """

    def __init__(self, theta_f=12.0, theta_e=1000.0, scaling="deluxe", levels=2,
                 rtol=1e-5, coarse_rtol=1e-2, maxit=100, flexible=False, threads=1,
                 deluxe_blocks="S"):
        self.theta_f = theta_f
        self.theta_e = theta_e
        self.scaling = scaling
        self.levels = levels
        self.rtol = rtol
        self.coarse_rtol = coarse_rtol
        self.maxit = maxit
        self.flexible = flexible
        self.threads = threads
        self.deluxe_blocks = deluxe_blocks

    def _validate(self):
        check_positive_float(self.theta_f, "theta_f", allow_inf=True)
        check_positive_float(self.theta_e, "theta_e", allow_inf=True)
        check_choice(self.scaling, "scaling", SCALINGS)
        if check_positive_int(self.levels, "levels") < 2:
            raise ValueError("levels must be at least 2")
        check_positive_float(self.rtol, "rtol")
        check_positive_float(self.coarse_rtol, "coarse_rtol")
        check_positive_int(self.maxit, "maxit")
        check_positive_int(self.threads, "threads")
        check_choice(self.deluxe_blocks, "deluxe_blocks", DELUXE_BLOCKS)

    def fit(self, X, y=None, eigen_data=None):
        """Build the preconditioner for ``X`` (a LevelProblem).

        ``eigen_data`` from an earlier fit with the same problem and scaling
        skips the eigenproblems.
        """
        if not isinstance(X, LevelProblem):
            raise TypeError("AdaptiveBDDC.fit expects a LevelProblem")
        self._validate()
        self.level_ = build_level(X, theta_f=float(self.theta_f),
                                  theta_e=float(self.theta_e), scaling=self.scaling,
                                  levels=self.levels, coarse_rtol=self.coarse_rtol,
                                  maxit=self.maxit, threads=self.threads,
                                  flexible=self.flexible, eigen_data=eigen_data,
                                  deluxe_blocks=self.deluxe_blocks)
        self.eigen_data_ = self.level_.eigen_data
        self.n_interface_ = self.level_.n_interface
        self.primal_counts_ = self.level_.primal_counts()
        return self

    def transform(self, X):
        """Apply the preconditioner to each row of ``X``."""
        check_is_fitted(self, "level_")
        X = check_complex_array(X, "X", 2, self.n_interface_)
        return self.level_.apply(X.T).T

    def apply_schur(self, X):
        """Apply the interface Schur complement to each row of ``X``."""
        check_is_fitted(self, "level_")
        X = check_complex_array(X, "X", 2, self.n_interface_)
        return self.level_.schur.apply(X.T).T

    def solve(self, b):
        """Solve the full level system; returns ``(u, PCGResult)``."""
        check_is_fitted(self, "level_")
        b = check_complex_array(b, "b", 1)
        return self.level_.solve(b, rtol=self.rtol, maxit=self.maxit)


class PlaneWaveHelmholtz(BaseEstimator):
    """Plane-wave least-squares Helmholtz solver on the unit cube with adaptive BDDC.

    ``fit`` discretizes the all-Robin problem whose exact solution is the
    plane wave ``exp(iκ v0·x)``, solves it and records a report.  ``predict``
    evaluates the discrete field at points.  Changing only the tolerances
    between fits reuses the assembled system and the glob eigenproblems.

    Parameters
    ----------
    kappa : float or str
        Wave number; strings such as ``"8pi"`` are accepted.
    p, n, m : int
        Plane waves per element, subdomains per axis, complete elements per
        subdomain per axis.
    v0 : array_like of shape (3,), optional
        Propagation direction of the exact solution.
    theta_f, theta_e : float or str
        Tolerances; expressions in ``m`` such as ``"4m"`` or ``"1+log(m)"``.
    economic : bool
        Solve the eigenproblems on slabs of width ``eta`` (default ``h``).
    Other parameters are forwarded to :class:`AdaptiveBDDC`.
    """

    def __init__(self, kappa="8pi", p=28, n=4, m=2, v0=None, theta_f="4m",
                 theta_e=1000.0, scaling="deluxe", economic=True, eta=None, levels=2,
                 rtol=1e-5, coarse_rtol=1e-2, maxit=100, flexible=False, threads=1,
                 deluxe_blocks="S"):
        self.kappa = kappa
        self.p = p
        self.n = n
        self.m = m
        self.v0 = v0
        self.theta_f = theta_f
        self.theta_e = theta_e
        self.scaling = scaling
        self.economic = economic
        self.eta = eta
        self.levels = levels
        self.rtol = rtol
        self.coarse_rtol = coarse_rtol
        self.maxit = maxit
        self.flexible = flexible
        self.threads = threads
        self.deluxe_blocks = deluxe_blocks

    def _discretization_key(self):
        v0 = None if self.v0 is None else tuple(np.asarray(self.v0, dtype=float))
        return (parse_kappa(self.kappa), self.p, self.n, self.m, v0)

    def _eigen_key(self):
        return self._discretization_key() + (self.scaling, bool(self.economic), self.eta,
                                            self.deluxe_blocks)

    def fit(self, X=None, y=None):
        """Assemble, build the preconditioner and solve.  ``X`` and ``y`` are ignored."""
        kappa = parse_kappa(self.kappa)
        p = check_positive_int(self.p, "p")
        n = check_positive_int(self.n, "n")
        m = check_positive_int(self.m, "m")
        v0 = example_direction() if self.v0 is None else check_unit_vector(self.v0)
        theta_f = parse_theta(self.theta_f, m)
        theta_e = parse_theta(self.theta_e, m)
        if self.eta is not None:
            check_positive_float(self.eta, "eta")
        cache = getattr(self, "_cache", {})
        t_start = time.perf_counter()

        if cache.get("disc_key") != self._discretization_key():
            t0 = time.perf_counter()
            config = MeshConfig(n, m, p, kappa)
            mesh = build_mesh(config)
            partition = classify_globs(config, mesh)
            directions = wave_directions(p)
            system = assemble_global(mesh, directions, assemble_rhs_exact(kappa, v0))
            cache = {"disc_key": self._discretization_key(), "mesh": mesh,
                     "partition": partition, "directions": directions, "system": system,
                     "seconds_assembly": time.perf_counter() - t0}
        mesh, partition = cache["mesh"], cache["partition"]
        directions, system = cache["directions"], cache["system"]

        problem = fine_level(mesh, partition, directions, system.matrix,
                             economic=self.economic, eta=self.eta)
        eigen_data = cache.get("eigen") if cache.get("eigen_key") == self._eigen_key() else None
        pre = AdaptiveBDDC(theta_f, theta_e, self.scaling, self.levels, self.rtol,
                           self.coarse_rtol, self.maxit, self.flexible, self.threads,
                           self.deluxe_blocks)
        pre.fit(problem, eigen_data=eigen_data)
        cache["eigen"], cache["eigen_key"] = pre.eigen_data_, self._eigen_key()
        self._cache = cache

        t0 = time.perf_counter()
        coef, result = pre.solve(system.rhs)
        t_pcg = time.perf_counter() - t0

        b = system.rhs
        residual = np.linalg.norm(b - system.matrix @ coef) / np.linalg.norm(b)
        lam_min, lam_max = result.lanczos_extremes()
        counts = pre.primal_counts_
        level = pre.level_
        self.mesh_ = mesh
        self.partition_ = partition
        self.directions_ = directions
        self.system_ = system
        self.preconditioner_ = pre
        self.result_ = result
        self.coef_ = coef
        self.err_ = l2_relative_error(mesh, directions, coef, kappa, v0)
        self.report_ = {
            "iter": int(result.iterations),
            "converged": bool(result.converged),
            "lambda_min": lam_min,
            "lambda_max": lam_max,
            "cond": lam_max / lam_min if lam_min and lam_min > 0 else float("nan"),
            "pnum": counts[0][0],
            "pnumF": counts[0][1],
            "pnumE": counts[0][2],
            "pnumV": counts[0][3],
            "pnum_levels": [c[0] for c in counts],
            "pnumF_levels": [c[1] for c in counts],
            "pnumE_levels": [c[2] for c in counts],
            "coarse_dofs": counts[-1][0],
            "inner_iterations": _inner_iterations(level),
            "err": self.err_,
            "residual": float(residual),
            "relative_residuals": [float(r) for r in result.residuals],
            "n_dofs": int(system.matrix.shape[0]),
            "n_interface": int(level.n_interface),
            "seconds_assembly": cache["seconds_assembly"],
            "seconds_eigen": level.timings.get("eigen", 0.0),
            "seconds_coarse": level.timings.get("coarse", 0.0),
            "seconds_pcg": t_pcg,
            "seconds_total": time.perf_counter() - t_start + cache["seconds_assembly"],
        }
        return self

    def predict(self, X):
        """Discrete field values at the points ``X`` of shape ``(n_samples, 3)``."""
        check_is_fitted(self, "coef_")
        X = check_points(X)
        return evaluate_solution(self.mesh_, self.directions_, self.coef_, X)

    def score(self, X=None, y=None):
        """Negative relative ``L²`` error against the exact plane wave."""
        check_is_fitted(self, "err_")
        return -self.err_


def _inner_iterations(level):
    out = []
    while level is not None and level.next is not None:
        out.append(list(level.inner_iterations))
        level = level.next
    return out
