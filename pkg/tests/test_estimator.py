import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from pwbddc import AdaptiveBDDC, PlaneWaveHelmholtz
from pwbddc.assembly import assemble_global, example_direction, wave_directions
from pwbddc.level import fine_level
from pwbddc.mesh import MeshConfig, build_mesh, classify_globs

TINY = dict(kappa="2pi", p=6, n=2, m=1, theta_f=1000, theta_e=1000)


@pytest.fixture(scope="module")
def fitted():
    return PlaneWaveHelmholtz(**TINY).fit()


def tiny_problem():
    cfg = MeshConfig(2, 1, 6, 2 * np.pi)
    mesh = build_mesh(cfg)
    part = classify_globs(cfg, mesh)
    dirs = wave_directions(6)
    return fine_level(mesh, part, dirs, assemble_global(mesh, dirs).matrix)


def test_params_round_trip():
    est = PlaneWaveHelmholtz(**TINY)
    params = est.get_params()
    assert params["theta_f"] == 1000 and params["scaling"] == "deluxe"
    other = clone(est)
    assert other.get_params() == params
    assert not hasattr(other, "report_")


def test_report(fitted):
    r = fitted.report_
    for key in ("iter", "lambda_min", "lambda_max", "cond", "pnum", "pnumF", "pnumE",
                "pnumV", "err", "seconds_assembly", "seconds_eigen", "seconds_coarse",
                "seconds_pcg", "seconds_total"):
        assert key in r
    assert r["converged"] and r["iter"] == 9
    assert r["pnum"] == r["pnumV"] == 6
    assert r["lambda_min"] >= 1 - 1e-6
    assert r["residual"] <= 5e-5
    assert r["err"] == pytest.approx(0.0643983, rel=1e-4)
    assert fitted.score() == -r["err"]


def test_predict(fitted):
    pts = np.array([[0.1, 0.2, 0.3], [0.9, 0.5, 0.5]])
    vals = fitted.predict(pts)
    assert vals.shape == (2,)
    exact = np.exp(2j * np.pi * pts @ example_direction())
    assert np.all(np.abs(vals - exact) < 0.2)
    with pytest.raises(ValueError):
        fitted.predict(np.zeros((2, 2)))


def test_not_fitted():
    with pytest.raises(NotFittedError):
        PlaneWaveHelmholtz().predict(np.zeros((1, 3)))


def test_refit_reuses_eigenproblems(fitted):
    est = clone(fitted).fit()
    first = est._cache["eigen"]
    est.set_params(theta_f=2, theta_e=2).fit()
    assert est._cache["eigen"] is first
    assert est.report_["pnum"] > 6
    est.set_params(scaling="multiplicity").fit()
    assert est._cache["eigen"] is not first


def test_invalid_params():
    with pytest.raises(ValueError):
        PlaneWaveHelmholtz(**dict(TINY, scaling="none")).fit()
    with pytest.raises(ValueError):
        PlaneWaveHelmholtz(**dict(TINY, v0=[1, 1, 0])).fit()


def test_adaptive_bddc_transform_matches_apply():
    problem = tiny_problem()
    pre = AdaptiveBDDC(theta_f=1000, theta_e=1000).fit(problem)
    n = pre.n_interface_
    rng = np.random.default_rng(0)
    X = rng.standard_normal((3, n)) + 1j * rng.standard_normal((3, n))
    Y = pre.transform(X)
    assert Y.shape == (3, n)
    np.testing.assert_allclose(Y[1], pre.level_.apply(X[1]), atol=1e-12)
    SX = pre.apply_schur(X)
    assert np.vdot(X[0], SX[0]).real > 0
    with pytest.raises(ValueError):
        pre.transform(np.zeros((1, n + 1)))


def test_adaptive_bddc_rejects_other_input():
    with pytest.raises(TypeError):
        AdaptiveBDDC().fit(np.eye(3))
    with pytest.raises(ValueError):
        AdaptiveBDDC(levels=1).fit(tiny_problem())


def test_deluxe_from_eliminated_blocks():
    est = PlaneWaveHelmholtz(**dict(TINY, theta_f=2, theta_e=2, deluxe_blocks="Sbar")).fit()
    base = PlaneWaveHelmholtz(**dict(TINY, theta_f=2, theta_e=2)).fit()
    r = est.report_
    assert r["converged"] and r["lambda_min"] >= 1 - 1e-6
    assert r["err"] == pytest.approx(base.report_["err"], rel=1e-3)
    for d in est._cache["eigen"]:
        np.testing.assert_allclose(sum(d.D), np.eye(d.D[0].shape[0]), atol=1e-12)
    with pytest.raises(ValueError):
        PlaneWaveHelmholtz(**dict(TINY, deluxe_blocks="T")).fit()
