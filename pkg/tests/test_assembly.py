import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial.legendre import leggauss

from pwbddc.assembly import (BoundaryData, assemble_form, assemble_global, assemble_load,
                             assemble_rhs_exact, assemble_subdomain_form, clip_faces,
                             direction_factors, evaluate_solution, example_direction,
                             exp_integral_1d, l2_relative_error, oscillatory_integral,
                             wave_directions)
from pwbddc.errors import MissingBoundaryData, NoValidFactorization
from pwbddc.mesh import MeshConfig, build_mesh, classify_globs


def gauss_box(lo, hi, order=12):
    """Tensor Gauss-Legendre nodes and weights on a box (no degenerate axes)."""
    t, w = leggauss(order)
    axes = [0.5 * (h - l) * t + 0.5 * (h + l) for l, h in zip(lo, hi)]
    wts = [0.5 * (h - l) * w for l, h in zip(lo, hi)]
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    W = np.einsum("i,j,k->ijk", *wts).ravel()
    return X, W


@pytest.mark.parametrize("p, factors", [(6, (3, 2)), (15, (5, 3)), (18, (6, 3)),
                                        (28, (7, 4))])
def test_direction_factors(p, factors):
    assert direction_factors(p) == factors


@pytest.mark.parametrize("p", [72, 7, 0])
def test_no_factorization(p):
    with pytest.raises(NoValidFactorization):
        wave_directions(p)


def test_directions_unit_and_distinct():
    d = wave_directions(28)
    assert d.shape == (28, 3)
    assert np.allclose(np.linalg.norm(d, axis=1), 1.0)
    assert np.allclose(wave_directions(18)[0], [1, 0, 0])
    gaps = np.linalg.norm(d[:, None] - d[None], axis=-1) + 2 * np.eye(28)
    assert gaps.min() > 0.1


def test_integral_examples():
    assert oscillatory_integral(np.zeros(3), [0, 0, 0], [1, 1, 0]) == pytest.approx(1.0)
    assert exp_integral_1d(np.pi, 0.0, 1.0) == pytest.approx(2j / np.pi, abs=1e-15)
    # tiny c falls back smoothly to the length
    assert exp_integral_1d(1e-14, 0.0, 2.0) == pytest.approx(2.0)


def test_thin_box_integrates_to_zero():
    assert oscillatory_integral([1.0, 2.0, 3.0], [0, 0, 0], [1, 0, 0]) == 0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 31), axis=st.integers(0, 2))
def test_rectangle_integral_matches_quadrature(seed, axis):
    rng = np.random.default_rng(seed)
    d = rng.uniform(-30, 30, 3)
    lo = rng.uniform(-1, 1, 3)
    hi = lo + rng.uniform(0.05, 0.5, 3)
    hi[axis] = lo[axis]
    t, w = leggauss(20)
    other = [a for a in range(3) if a != axis]
    u = [0.5 * (hi[a] - lo[a]) * t + 0.5 * (hi[a] + lo[a]) for a in other]
    U, V = np.meshgrid(*u, indexing="ij")
    X = np.empty(U.shape + (3,))
    X[..., axis] = lo[axis]
    X[..., other[0]], X[..., other[1]] = U, V
    W = np.outer(w, w) * np.prod([0.5 * (hi[a] - lo[a]) for a in other])
    ref = np.sum(W * np.exp(1j * X @ d))
    assert abs(oscillatory_integral(d, lo, hi) - ref) <= 1e-12 * max(abs(ref), 1e-3)


def test_matrix_exactly_hermitian_and_pd():
    mesh = build_mesh(MeshConfig(2, 1, 6, 2 * np.pi))
    A = assemble_global(mesh, wave_directions(6)).matrix
    assert abs(A - A.conj().T).max() == 0
    assert np.linalg.eigvalsh(A.toarray()).min() > 0


def test_sparse_matches_quadrature_assembly(tiny):
    assert tiny.assembly_mismatch <= 1e-10
    assert tiny.rhs_mismatch <= 1e-10


def test_frozen_tiny_system():
    mesh = build_mesh(MeshConfig(2, 1, 6, 2 * np.pi))
    sys = assemble_global(mesh, wave_directions(6), assemble_rhs_exact(2 * np.pi))
    assert sys.matrix.nnz == 4860
    np.testing.assert_allclose(sys.matrix.diagonal()[:3].real,
                               [6.1887902, 7.49663546, 11.06973515], rtol=1e-8)
    assert np.linalg.norm(sys.rhs) == pytest.approx(26.30032940408152, rel=1e-12)


def test_single_subdomain_form_is_global_form():
    cfg = MeshConfig(1, 3, 6, 2 * np.pi)
    mesh = build_mesh(cfg)
    dirs = wave_directions(6)
    part = classify_globs(cfg, mesh)
    local = assemble_subdomain_form(mesh, part, dirs, 0).matrix
    A = assemble_global(mesh, dirs).matrix
    assert abs(local - A).max() == 0


def test_local_forms_tile_global_form():
    cfg = MeshConfig(2, 1, 6, 2 * np.pi)
    mesh = build_mesh(cfg)
    dirs = wave_directions(6)
    part = classify_globs(cfg, mesh)
    A = assemble_global(mesh, dirs).matrix.toarray()
    total = np.zeros_like(A)
    for r in range(8):
        form = assemble_subdomain_form(mesh, part, dirs, r)
        dofs = (form.elements[:, None] * 6 + np.arange(6)).ravel()
        total[np.ix_(dofs, dofs)] += form.matrix.toarray()
    assert np.abs(total - A).max() <= 1e-10 * np.abs(A).max()


def test_shared_face_splits_in_halves():
    mesh = build_mesh(MeshConfig(2, 1, 6))
    f = mesh.interior_faces
    k, j = mesh.element_index((1, 0, 0)), mesh.element_index((1, 1, 0))
    i = np.flatnonzero((f.elem_k == k) & (f.elem_j == j))[0]
    lo, hi = f.lo[i:i + 1], f.hi[i:i + 1]
    full = np.prod((hi - lo)[0][[0, 2]])
    areas = []
    for r in range(8):
        clo, chi, keep = clip_faces(lo, hi, mesh.subdomain_box(r))
        if keep[0]:
            areas.append(np.prod((chi - clo)[0][[0, 2]]))
    assert len(areas) == 2
    assert abs(sum(areas) - full) <= 1e-14
    assert areas[0] == pytest.approx(full / 2, abs=1e-15)


def test_face_inside_one_subdomain_is_unclipped():
    mesh = build_mesh(MeshConfig(2, 2, 6))
    f = mesh.interior_faces
    lo, hi = f.lo[:1], f.hi[:1]  # between elements (0,0,0) and (1,0,0)
    hits = [r for r in range(8) if clip_faces(lo, hi, mesh.subdomain_box(r))[2][0]]
    assert hits == [0]
    clo, chi, _ = clip_faces(lo, hi, mesh.subdomain_box(0))
    assert np.array_equal(clo, lo) and np.array_equal(chi, hi)


def test_robin_data():
    kappa = 3.0
    v0 = example_direction()
    g = assemble_rhs_exact(kappa, v0).robin
    x = np.array([[0.2, 0.4, 0.1]])
    u = np.exp(1j * kappa * x @ v0)
    perp = np.cross(v0, [0, 1, 0])
    perp /= np.linalg.norm(perp)
    assert g(x, perp) == pytest.approx(1j * kappa * u)
    assert g(x, v0) == pytest.approx(2j * kappa * u)


def test_example_direction():
    v = np.array([np.tan(-np.pi / 10), 0, np.tan(np.pi / 5)])
    np.testing.assert_allclose(example_direction(), v / np.linalg.norm(v))


def test_missing_boundary_data():
    mesh = build_mesh(MeshConfig(1, 1, 6))
    with pytest.raises(MissingBoundaryData):
        assemble_load(mesh, wave_directions(6), BoundaryData())


def test_l2_error_zero_solution():
    mesh = build_mesh(MeshConfig(2, 1, 6, 2 * np.pi))
    assert l2_relative_error(mesh, wave_directions(6), np.zeros(27 * 6), 2 * np.pi) \
        == pytest.approx(1.0, abs=1e-14)


def test_l2_error_exactly_representable():
    mesh = build_mesh(MeshConfig(1, 1, 28, 2 * np.pi))
    dirs = wave_directions(28)
    sys = assemble_global(mesh, dirs, assemble_rhs_exact(2 * np.pi, dirs[5]))
    coef = np.linalg.solve(sys.matrix.toarray(), sys.rhs)
    assert abs(coef[5] - 1) < 1e-10
    assert l2_relative_error(mesh, dirs, coef, 2 * np.pi, dirs[5]) <= 1e-12


def test_l2_error_matches_quadrature(rng):
    kappa = 2 * np.pi
    mesh = build_mesh(MeshConfig(2, 1, 6, kappa))
    dirs = wave_directions(6)
    coef = rng.standard_normal(27 * 6) + 1j * rng.standard_normal(27 * 6)
    lo, hi = mesh.element_boxes()
    v0 = example_direction()
    sq = 0.0
    for e in range(27):
        X, W = gauss_box(lo[e], hi[e])
        diff = evaluate_solution(mesh, dirs, coef, X) - np.exp(1j * kappa * X @ v0)
        sq += np.sum(W * np.abs(diff) ** 2)
    assert l2_relative_error(mesh, dirs, coef, kappa) == pytest.approx(np.sqrt(sq),
                                                                       rel=1e-10)


def test_single_element_solve_near_best_approximation():
    # one element of size 1 cannot resolve the wave to 1e-6 with 28 waves; the
    # least-squares solution must still be close to the best L2 approximation
    kappa = 2 * np.pi
    mesh = build_mesh(MeshConfig(1, 1, 28, kappa))
    dirs = wave_directions(28)
    sys = assemble_global(mesh, dirs, assemble_rhs_exact(kappa))
    A = sys.matrix.toarray()
    assert np.allclose(A, A.conj().T, atol=0)
    assert np.linalg.eigvalsh(A).min() > 0
    coef = np.linalg.solve(A, sys.rhs)
    err = l2_relative_error(mesh, dirs, coef, kappa)
    K = kappa * dirs
    G = oscillatory_integral(K[None] - K[:, None], np.zeros(3), np.ones(3))
    f = oscillatory_integral(kappa * example_direction() - K, np.zeros(3), np.ones(3))
    best = np.linalg.lstsq(G, f, rcond=1e-13)[0]
    best_err = l2_relative_error(mesh, dirs, best, kappa)
    assert err == pytest.approx(0.10679225581709, rel=1e-6)
    assert best_err <= err <= 1.2 * best_err


def test_form_over_element_subset():
    mesh = build_mesh(MeshConfig(2, 1, 6, 2 * np.pi))
    dirs = wave_directions(6)
    A = assemble_global(mesh, dirs).matrix.toarray()
    elems = np.array([1, 0])  # neighbours along x, listed out of order
    sub = assemble_form(mesh, dirs, elems).toarray()
    assert sub.shape == (12, 12)
    assert np.abs(A[:6, 6:12]).max() > 0
    np.testing.assert_allclose(sub[6:, :6], A[:6, 6:12], atol=1e-13)
