import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pwbddc.errors import ConfigError
from pwbddc.mesh import (MeshConfig, axis_owners, build_mesh, classify_globs,
                         element_owners, glob_kind)


def kinds(partition):
    return [len(partition.of_kind(k)) for k in ("face", "edge", "vertex")]


@pytest.mark.parametrize("n, m, N", [(3, 3, 11), (4, 2, 11), (1, 1, 1), (2, 1, 3)])
def test_elements_per_axis(n, m, N):
    cfg = MeshConfig(n, m, 6)
    assert cfg.N == N
    assert cfg.n_elements == N ** 3


def test_owner_examples():
    cfg = MeshConfig(2, 1, 6)
    assert element_owners(cfg, (0, 0, 0)) == {0}
    assert len(element_owners(cfg, (1, 0, 0))) == 2
    assert element_owners(cfg, (1, 1, 1)) == set(range(8))


def test_owner_rule_per_axis():
    # n=3, m=2: layers 2 and 5 are shared, the rest belong to one subdomain
    assert [axis_owners(3, 2, e) for e in range(8)] == [
        [0], [0], [0, 1], [1], [1], [1, 2], [2], [2]]


def test_owner_outside_grid():
    with pytest.raises(ConfigError):
        element_owners(MeshConfig(2, 1, 6), (3, 0, 0))


@pytest.mark.parametrize("k, kind", [(1, "interior"), (2, "face"), (3, "edge"),
                                     (4, "edge"), (5, "vertex"), (8, "vertex")])
def test_glob_kind(k, kind):
    assert glob_kind(k) == kind


def test_glob_counts_three_by_three():
    cfg = MeshConfig(3, 3, 18)
    part = classify_globs(cfg)
    assert kinds(part) == [54, 36, 8]
    assert sum(g.size for g in part.edges) == 1944
    assert sum(g.size for g in part.vertices) == 144
    assert {g.size for g in part.edges} == {54}


def test_vertex_dofs_four_by_two():
    part = classify_globs(MeshConfig(4, 2, 18))
    assert len(part.vertices) == 27
    assert sum(g.size for g in part.vertices) == 486


def test_single_subdomain_has_no_globs():
    part = classify_globs(MeshConfig(1, 3, 6))
    assert part.globs == []
    assert len(part.interior[0]) == 27


def test_tiny_partition():
    part = classify_globs(MeshConfig(2, 1, 6))
    assert kinds(part) == [12, 6, 1]
    assert [len(i) for i in part.interior] == [1] * 8
    assert all(len(g.owners) == 4 for g in part.edges)


@settings(max_examples=15, deadline=None)
@given(n=st.integers(1, 4), m=st.integers(1, 3))
def test_globs_partition_the_dofs(n, m):
    cfg = MeshConfig(n, m, 3)
    part = classify_globs(cfg)
    dofs = np.concatenate([g.dofs for g in part.globs] +
                          [(e[:, None] * 3 + np.arange(3)).ravel() for e in part.interior])
    assert np.array_equal(np.sort(dofs), np.arange(cfg.n_dofs))
    for r in range(cfg.n_subdomains):
        for g in part.subdomain_globs[r]:
            assert r in part.globs[g].owners


@settings(max_examples=10, deadline=None)
@given(n=st.integers(1, 4), m=st.integers(1, 3))
def test_subdomain_boxes_tile_the_cube(n, m):
    mesh = build_mesh(MeshConfig(n, m, 3))
    vol = sum(np.prod(hi - lo) for lo, hi in map(mesh.subdomain_box, range(n ** 3)))
    assert vol == pytest.approx(1.0, abs=1e-13)


def test_faces_counted_once():
    mesh = build_mesh(MeshConfig(2, 1, 6))
    assert len(mesh.interior_faces) == 3 * 3 * 3 * 2
    assert len(mesh.boundary_faces) == 6 * 9
    assert np.all(mesh.interior_faces.elem_k < mesh.interior_faces.elem_j)


def test_locate_round_trip():
    mesh = build_mesh(MeshConfig(2, 2, 6))
    lo, hi = mesh.element_boxes()
    centers = 0.5 * (lo + hi)
    assert np.array_equal(mesh.locate(centers), np.arange(mesh.n_elements))


@pytest.mark.parametrize("bad", [dict(n=0), dict(m=-1), dict(p=2.5),
                                 dict(kappa=-1.0), dict(domain=((0, 0, 0), (1, 0, 1)))])
def test_invalid_config(bad):
    args = dict(n=2, m=1, p=6)
    args.update(bad)
    with pytest.raises(ConfigError):
        MeshConfig(**args)


def test_unknown_boundary_tag():
    with pytest.raises(ConfigError):
        build_mesh(MeshConfig(1, 1, 6), boundary_tags=lambda axis, side: "x")
