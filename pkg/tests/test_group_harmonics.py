import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mlspectral import group_harmonics as gh
from mlspectral.errors import InvalidParameter, ResolutionTooLow, TruncationInsufficient

SPECS = [
    gh.GroupSpec.torus(1, 6),
    gh.GroupSpec.torus(2, 4),
    gh.GroupSpec.su2(4),
    gh.GroupSpec.su2(5, "SubLaplacian"),
]


def test_torus_dual():
    dual = gh.enumerate_dual(gh.GroupSpec.torus(1, 2))
    assert [p.index for p in dual] == [(-2,), (-1,), (0,), (1,), (2,)]
    assert [p.eigenvalues[0] for p in dual] == [4, 1, 0, 1, 4]


def test_su2_dual_spin_one():
    lap = gh.enumerate_dual(gh.GroupSpec.su2(2))[2]
    assert lap.dim == 3 and lap.eigenvalues == (2.0, 2.0, 2.0)
    sub = gh.enumerate_dual(gh.GroupSpec.su2(2, "SubLaplacian"))[2]
    assert sub.eigenvalues == (1.0, 2.0, 1.0)


@pytest.mark.parametrize("two_l", range(0, 9))
def test_sublaplacian_closed_form_matches_generators(two_l):
    closed = np.sort(gh.enumerate_dual(gh.GroupSpec.su2(max(two_l, 1), "SubLaplacian"))[two_l].eigenvalues)
    assert np.max(np.abs(closed - np.sort(gh.sublaplacian_oracle(two_l)))) <= 1e-8


def test_spin_matrices_commutator():
    for tl in (1, 2, 5):
        jx, jy, jz = gh.spin_matrices(tl)
        np.testing.assert_allclose(jx @ jy - jy @ jx, 1j * jz, atol=1e-12)
        l = tl / 2
        np.testing.assert_allclose(jx @ jx + jy @ jy + jz @ jz, l * (l + 1) * np.eye(tl + 1), atol=1e-12)


def test_wigner_d_unitary_with_small_d_moduli():
    rng = np.random.default_rng(3)
    for tl in (1, 3, 4):
        a, b, c = rng.uniform(0, 2 * np.pi, 3)
        D = gh.wigner_D(tl, np.array([a]), np.array([b]), np.array([c]))[0]
        np.testing.assert_allclose(D @ D.conj().T, np.eye(tl + 1), atol=1e-12)
        d = gh.wigner_small_d(tl, np.array([b]))[0]
        np.testing.assert_allclose(np.abs(d), np.abs(D), atol=1e-12)


def test_torus_forward_examples():
    spec = gh.GroupSpec.torus(1, 4)
    grid = gh.make_grid(spec)
    F = gh.forward_transform(gh.GridFunction.from_callable(grid, lambda x: np.exp(1j * x)))
    expect = gh.basis_field(spec, (1,), 0, 0)
    assert np.max(np.abs(F.data - expect.data)) <= 1e-12
    spec2 = gh.GroupSpec.torus(2, 3)
    G = gh.forward_transform(gh.GridFunction.from_callable(gh.make_grid(spec2), lambda x, y: np.ones_like(x)))
    assert np.max(np.abs(G.data - gh.basis_field(spec2, (0, 0), 0, 0).data)) <= 1e-12


def test_su2_peter_weyl_element():
    spec = gh.GroupSpec.su2(2)
    grid = gh.make_grid(spec)
    a, b, c = (m.ravel() for m in grid.mesh())
    f = gh.GridFunction(grid, math.sqrt(2) * gh.wigner_D(1, a, b, c)[:, 0, 0])
    assert gh.lq_norm(f, 2) == pytest.approx(1.0, abs=1e-12)
    F = gh.forward_transform(f)
    hs = [np.linalg.norm(B) for B in F.blocks()]
    assert hs[1] == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert max(hs[0], hs[2]) <= 1e-12


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.label())
def test_round_trip_and_plancherel(spec):
    F = gh.random_field(spec, np.random.default_rng(7))
    f = gh.inverse_transform(F)
    back = gh.forward_transform(f)
    assert np.max(np.abs(back.data - F.data)) <= 1e-10
    assert gh.lq_norm(f, 2) == pytest.approx(gh.plancherel_norm(F), rel=1e-10)
    # an oversampled grid integrates the same band-limited data
    big = gh.make_grid(spec, tuple(2 * s for s in gh.nyquist_size(spec)))
    assert np.max(np.abs(gh.forward_transform(gh.inverse_transform(F, big)).data - F.data)) <= 1e-10


def test_inverse_of_trivial_coefficient_is_constant():
    for spec in SPECS:
        trivial = (0,) * spec.n if spec.is_torus else (0,)
        f = gh.inverse_transform(gh.basis_field(spec, trivial, 0, 0))
        assert np.max(np.abs(f.samples - 1.0)) <= 1e-12


def test_under_resolved_grid_raises():
    spec = gh.GroupSpec.su2(4)
    with pytest.raises(ResolutionTooLow):
        gh.inverse_transform(gh.SpectralField.zeros(spec), gh.make_grid(spec, (5, 5, 5)))


def test_norm_examples():
    spec = gh.GroupSpec.torus(1, 3)
    assert gh.plancherel_norm(gh.SpectralField.zeros(spec)) == 0.0
    assert gh.plancherel_norm(gh.basis_field(spec, (2,), 0, 0)) == 1.0
    su2 = gh.GroupSpec.su2(3)
    e = gh.basis_field(su2, (2,), 1, 2, 1 / math.sqrt(3))
    assert gh.plancherel_norm(e) == pytest.approx(1.0, abs=1e-15)
    for beta in (0.5, 1.0, 3.0):
        assert gh.sobolev_norm(gh.basis_field(spec, (2,), 0, 0), beta) == pytest.approx(5 ** (beta / 2))
    grid = gh.make_grid(spec, (64,))
    assert gh.lq_norm(gh.GridFunction.from_callable(grid, lambda x: 2 * np.cos(x)), 4) == pytest.approx(6**0.25, rel=1e-13)
    for q in (1, 2, 3.5, np.inf):
        assert gh.lq_norm(gh.GridFunction.from_callable(grid, lambda x: np.exp(1j * x)), q) == pytest.approx(1.0)
        assert gh.lq_norm(gh.GridFunction.from_callable(grid, lambda x: 0 * x - 2.5), q) == pytest.approx(2.5)
    with pytest.raises(InvalidParameter):
        gh.lq_norm(gh.GridFunction.from_callable(grid, np.cos), 0.5)


@given(st.integers(0, 2**32 - 1), st.sampled_from(range(len(SPECS))))
def test_sobolev_beta_two_is_scaled_plancherel(seed, k):
    spec = SPECS[k]
    F = gh.random_field(spec, np.random.default_rng(seed))
    scaled = F.with_data(F.data * (1 + F.entry_eigenvalues))
    assert gh.sobolev_norm(F, 2.0) == pytest.approx(gh.plancherel_norm(scaled), rel=1e-12)
    assert gh.sobolev_norm(F, 0.0) == pytest.approx(gh.plancherel_norm(F), rel=1e-14)


@given(st.integers(0, 2**32 - 1), st.sampled_from(range(len(SPECS))))
def test_hausdorff_young_endpoint(seed, k):
    spec = SPECS[k]
    f = gh.inverse_transform(gh.random_field(spec, np.random.default_rng(seed)))
    assert gh.linf_dual_norm(gh.forward_transform(f)) <= gh.lq_norm(f, 1) * (1 + 1e-12)


def test_counting_examples():
    assert gh.counting_function(gh.GroupSpec.torus(1, 8), 10) == 7
    assert gh.counting_function(gh.GroupSpec.torus(2, 8), 5) == 13
    assert gh.counting_function(gh.GroupSpec.su2(4), 2.1) == 14
    with pytest.raises(TruncationInsufficient):
        gh.counting_function(gh.GroupSpec.torus(1, 2), 10)


def _brute_count(spec, s):
    return sum(sum(1 for mu in p.eigenvalues if mu < s) * p.dim for p in gh.enumerate_dual(spec))


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.label())
def test_counting_matches_enumeration(spec):
    for s in np.linspace(0.3, gh.counting_limit(spec), 23):
        assert gh.counting_function(spec, s) == _brute_count(spec, s)


@given(st.floats(0.01, 60.0), st.floats(0.01, 60.0))
def test_counting_nondecreasing(s1, s2):
    spec = gh.GroupSpec.torus(2, 8)
    lo, hi = sorted((s1, s2))
    assert gh.counting_function(spec, lo) <= gh.counting_function(spec, hi)


def test_serialization_round_trip():
    for spec in SPECS:
        F = gh.random_field(spec, np.random.default_rng(11))
        text = gh.dumps_field(F)
        assert text.startswith("# mlspectral SpectralField v1")
        G = gh.loads_field(text)
        assert G.spec == spec and np.array_equal(G.data, F.data)


def test_serialization_rejects_garbage():
    with pytest.raises(InvalidParameter):
        gh.loads_field("not a field\n")
