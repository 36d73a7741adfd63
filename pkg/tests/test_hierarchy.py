import math

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings

from hierlap.errors import (
    DivergenceError, InvalidDegreeError, LevelRangeError, NoiseRangeError,
    PreconditionError,
)
from hierlap.hierarchy import (
    BallRef, LeafFunction, apply_laplacian, auto_tail_depth, ball_eigenvalue,
    build_coupling, build_lattice, draw_field, eigenfunction, geodesic, measure,
    perturbed_eigenvalue, verify_homogeneity,
)
from hierlap.noise import NoiseSpec

PRESETS = [("qp", {"p": 2, "alpha": 1.0}), ("qp", {"p": 3, "alpha": 0.4}),
           ("powerlaw", {"q": 2.0, "delta": 1.5}),
           ("powerlaw", {"q": 3.0, "delta": 2.5, "kappa0": 0.7})]

lattices = st.lists(st.integers(2, 3), min_size=1, max_size=5).flatmap(
    lambda d: st.tuples(st.just(d), st.integers(0, len(d)), st.integers(0, 3)))


def test_build_lattice_counts():
    lat = build_lattice((2, 2, 2), 3, 2)
    assert lat.v_N == 8
    assert lat.count(0) == 8
    assert lat.count(2) == 2
    lat = build_lattice((2, 3), 2, 0)
    assert lat.v_N == 6
    assert lat.count(1) == 3


def test_build_lattice_rejects_degree_one():
    with pytest.raises(InvalidDegreeError):
        build_lattice((2, 1, 2), 3)


def test_measure():
    assert measure(build_lattice((2, 3), 2), 2) == 6
    assert measure(build_lattice((2, 3), 2), 0) == 1
    assert measure(build_lattice((2, 2, 2), 3), 3) == 8


def test_geodesic_examples():
    lat = build_lattice((2, 2), 2, 1)
    assert geodesic(lat, BallRef(0, 3)) == [(0, 3), (1, 1), (2, 0), (3, 0)]
    assert geodesic(lat, BallRef(2, 0)) == [(2, 0), (3, 0)]
    with pytest.raises(LevelRangeError):
        geodesic(lat, BallRef(0, 5))


@given(lattices)
def test_lattice_invariants(spec):
    degrees, N, K = spec
    lat = build_lattice(degrees, N, K)
    for k in range(N + 1):
        assert lat.count(k) * lat.volumes[k] == lat.v_N
        assert lat.volumes[k] >= 2**k
    for i in range(lat.v_N):
        path = geodesic(lat, BallRef(0, i))
        assert len(path) == N + K + 1
        assert [b.level for b in path] == list(range(N + K + 1))
        if len(path) > 1:
            assert geodesic(lat, path[1]) == path[1:]


def test_qp_coupling_values():
    lat = build_lattice([2] * 3, 3, 5)
    sch = build_coupling("qp", lat, p=2, alpha=1)
    assert sch.lam0 == 2.0
    assert sch.eigenvalue(1) == 1.0
    assert np.allclose(sch.a[:3], [0.5, 0.25, 0.125], rtol=0, atol=1e-15)
    assert abs(sch.a.sum() + sch.tail_weight - 1.0) <= 1e-12


@pytest.mark.parametrize("preset,params", PRESETS)
def test_scheme_invariants(preset, params):
    lat = build_lattice([2] * 4, 4, 6)
    sch = build_coupling(preset, lat, **params)
    assert np.all(sch.c > 0)
    assert np.all(np.diff(sch.lam) < 0)
    assert np.allclose(sch.lam[:-1] - sch.lam[1:], sch.c[:-1], rtol=1e-14, atol=0)
    assert abs(sch.a.sum() + sch.tail_weight - 1.0) <= 1e-12


def test_divergent_powerlaw():
    with pytest.raises(DivergenceError):
        build_coupling("powerlaw", build_lattice([2], 1), q=2, delta=0, kappa0=1)


def test_homogeneity_certificates():
    lat = build_lattice([2] * 4, 4, 4)
    cert = verify_homogeneity(build_coupling("qp", lat, p=2, alpha=1))
    assert cert.delta == 2.0 and cert.kappa == pytest.approx(1.0, abs=1e-12)
    cert = verify_homogeneity(build_coupling("qp", lat, p=2, alpha=0.5))
    assert cert.delta == 1.0 and cert.theorem_applies
    cert = verify_homogeneity(build_coupling("qp", lat, p=2, alpha=0.25))
    assert cert.delta == 0.5 and not cert.theorem_applies


def test_eigenfunction_examples():
    f = eigenfunction(build_lattice((2, 2), 2), BallRef(0, 0))
    assert np.allclose(f.values, [0.5, -0.5, 0, 0])
    f = eigenfunction(build_lattice((3, 2), 2), BallRef(1, 0))
    third = 1 / 3 - 1 / 6
    assert np.allclose(f.values, [third] * 3 + [-1 / 6] * 3)
    assert abs(f.values.sum()) < 1e-15


def test_unperturbed_laplacian_uses_parent_eigenvalue():
    lat = build_lattice((2, 2), 2, 3)
    sch = build_coupling("qp", lat, p=2, alpha=1)
    f = eigenfunction(lat, BallRef(0, 0))
    out = apply_laplacian(lat, sch, f)
    assert np.allclose(out.values, 1.0 * f.values, rtol=0, atol=1e-15)
    zero = LeafFunction(np.zeros(4), 2)
    assert np.all(apply_laplacian(lat, sch, zero).values == 0)


def test_laplacian_requires_mean_zero():
    lat = build_lattice((2, 2), 2)
    sch = build_coupling("qp", lat, p=2, alpha=1)
    with pytest.raises(PreconditionError):
        apply_laplacian(lat, sch, LeafFunction(np.ones(4), 2))


@settings(max_examples=40, deadline=None)
@given(lattices, st.sampled_from(PRESETS), st.integers(0, 2**32 - 1))
def test_perturbed_eigen_relation(spec, preset, seed):
    degrees, N, K = spec
    if N == 0:
        return
    lat = build_lattice(degrees, N, K)
    sch = build_coupling(preset[0], lat, **preset[1])
    fld = draw_field(lat, NoiseSpec("uniform", 0.9), seed)
    for level in range(N):
        for idx in range(lat.count(level)):
            ball = BallRef(level, idx)
            f = eigenfunction(lat, ball)
            lam = ball_eigenvalue(lat, sch, fld, lat.parent(ball))
            # independent oracle: geodesic sum of perturbed couplings
            oracle = sum(sch.c[b.level] * (1 + fld[b.level][b.index])
                         for b in geodesic(lat, lat.parent(ball))) + sch.eigenvalue(lat.top + 1)
            assert lam == pytest.approx(oracle, rel=1e-14)
            out = apply_laplacian(lat, sch, f, fld)
            err = np.max(np.abs(out.values - lam * f.values)) / np.max(np.abs(lam * f.values))
            assert err <= 1e-12


def test_perturbed_eigenvalue():
    lat = build_lattice([2] * 2, 2, 2)
    sch = build_coupling("qp", lat, p=2, alpha=1)
    assert perturbed_eigenvalue(sch, [0] * 5) == 2.0
    assert perturbed_eigenvalue(sch, [0, 0.3, 0, 0, 0]) == pytest.approx(2.15, abs=1e-15)
    with pytest.raises(NoiseRangeError):
        perturbed_eigenvalue(sch, [1.0, 0, 0, 0, 0])


def test_auto_tail_depth_certifies_truncation():
    r = 2 ** -0.5
    K = auto_tail_depth(r, 1e-12)
    assert r ** (2 * K) <= 1e-12 < r ** (2 * (K - 1))
    assert auto_tail_depth(1e-3) == 2


def test_field_values_out_of_range_are_rejected():
    lat = build_lattice((2,), 1, 0)
    sch = build_coupling("qp", lat, p=2, alpha=1)
    bad = (np.array([0.0, 1.2]), np.array([0.0]))
    with pytest.raises(NoiseRangeError):
        apply_laplacian(lat, sch, eigenfunction(lat, BallRef(0, 0)), bad)
    assert math.isfinite(ball_eigenvalue(lat, sch, None, BallRef(1, 0)))
