import numpy as np
import pytest
import scipy.sparse as sp

from pwbddc.assembly import assemble_global, wave_directions
from pwbddc.errors import SingularInterior
from pwbddc.level import fine_level
from pwbddc.mesh import MeshConfig, build_mesh, classify_globs
from pwbddc.schur import (SchurOperator, cho_solve, cholesky_checked, economic_glob_blocks,
                          glob_block_S, glob_block_Sbar, glob_slices, local_schur,
                          schur_complement, slab_elements)


def random_hpd(rng, n, shift=0.1):
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return X @ X.conj().T + shift * np.eye(n)


def tiny_setup(m=1, economic=False):
    cfg = MeshConfig(2, m, 6, 2 * np.pi)
    mesh = build_mesh(cfg)
    part = classify_globs(cfg, mesh)
    dirs = wave_directions(6)
    sys = assemble_global(mesh, dirs)
    return mesh, part, dirs, fine_level(mesh, part, dirs, sys.matrix, economic=economic)


def test_cholesky_solve_residual(rng):
    A = random_hpd(rng, 30)
    L = cholesky_checked(A)
    b = rng.standard_normal(30) + 0j
    x = cho_solve(L, b)
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_cholesky_rejects_singular():
    A = np.diag([1.0, 1e-15, 2.0]).astype(complex)
    assert cholesky_checked(A) is None
    assert cholesky_checked(np.zeros((0, 0))) is not None


def test_schur_complement_matches_block_formula(rng):
    M = random_hpd(rng, 12)
    keep, elim = np.arange(4), np.arange(4, 12)
    S = schur_complement(M, keep, elim)
    ref = M[:4, :4] - M[:4, 4:] @ np.linalg.solve(M[4:, 4:], M[4:, :4])
    assert np.abs(S - ref).max() <= 1e-10 * np.abs(ref).max()


def test_schur_complement_singular_block():
    M = np.eye(3, dtype=complex)
    M[2, 2] = 0
    with pytest.raises(SingularInterior):
        schur_complement(M, [0], [1, 2], on_singular=SingularInterior(0))
    with pytest.raises(SingularInterior):
        local_schur(M[::-1, ::-1], 2, subdomain=0)


def test_schur_operator_matches_dense(tiny):
    assert tiny.schur_mismatch <= 1e-9
    S = tiny.S
    assert np.abs(S - S.conj().T).max() <= 1e-10 * np.abs(S).max()
    assert np.linalg.eigvalsh(S).min() > 0


def test_interior_solve_matches_dense_inverse(rng):
    *_, problem = tiny_setup()
    op = SchurOperator(problem.matrix, problem.interior, problem.interface_dofs())
    A = problem.matrix.toarray()
    J = problem.interior_dofs()
    y = rng.standard_normal(len(J)) + 1j * rng.standard_normal(len(J))
    ref = np.linalg.solve(A[np.ix_(J, J)], y)
    got = op.factorization.solve_all(y)
    assert np.linalg.norm(got - ref) <= 1e-9 * np.linalg.norm(ref)


def test_condense_and_extend_solve_the_system(rng):
    *_, problem = tiny_setup()
    A = problem.matrix
    op = SchurOperator(A, problem.interior, problem.interface_dofs())
    b = rng.standard_normal(A.shape[0]) + 1j * rng.standard_normal(A.shape[0])
    u_gamma = np.linalg.solve(op.to_dense(), op.condense(b))
    u = op.extend(u_gamma, b)
    assert np.linalg.norm(A @ u - b) <= 1e-9 * np.linalg.norm(b)


def test_no_interior_dofs_gives_gamma_block(rng):
    A = sp.csr_matrix(random_hpd(rng, 8))
    op = SchurOperator(A, [np.zeros(0, dtype=int)], np.arange(8))
    x = rng.standard_normal(8) + 0j
    np.testing.assert_allclose(op.apply(x), A @ x, atol=1e-12)


def test_local_schur_without_interior(rng):
    K = random_hpd(rng, 5)
    np.testing.assert_allclose(local_schur(K, 0), K)


def test_single_glob_double_elimination_is_identity(rng):
    S = random_hpd(rng, 6)
    sl = glob_slices([6])
    np.testing.assert_allclose(glob_block_Sbar(S, sl, 0), glob_block_S(S, sl, 0))


def test_double_elimination_below_block(rng):
    S = random_hpd(rng, 10)
    sl = glob_slices([4, 6])
    Sb = glob_block_Sbar(S, sl, 0)
    gap = np.linalg.eigvalsh(glob_block_S(S, sl, 0) - Sb).min()
    assert gap >= -1e-10
    ref = S[:4, :4] - S[:4, 4:] @ np.linalg.solve(S[4:, 4:], S[4:, :4])
    np.testing.assert_allclose(Sb, ref, atol=1e-10)


def test_slab_width():
    mesh, part, _, _ = tiny_setup(m=3)
    face = part.faces[0]
    r = face.owners[0]
    thin = slab_elements(mesh, part, r, face.index, 0.5 * mesh.h)
    wide = slab_elements(mesh, part, r, face.index, 10.0)
    assert set(face.elements) <= set(thin)
    assert len(thin) < len(wide) == len(part.subdomain_elements(r))


def test_economic_blocks_hermitian_psd():
    mesh, part, dirs, problem = tiny_setup(m=2, economic=True)
    for g in (part.faces[0], part.edges[0]):
        r = g.owners[0]
        S, Sbar = economic_glob_blocks(mesh, part, dirs, r, g.index, mesh.h)
        assert S.shape == Sbar.shape == (g.size, g.size)
        for M in (S, Sbar):
            assert np.abs(M - M.conj().T).max() <= 1e-12 * np.abs(M).max()
        assert np.linalg.eigvalsh(S - Sbar).min() >= -1e-9 * np.abs(S).max()
        assert np.linalg.eigvalsh(Sbar).min() >= -1e-9 * np.abs(S).max()
