import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from nlalloc.actuation import (
    Actuation,
    compose,
    fixed_time,
    log_quantizer,
    make_actuation,
    power_sign,
    robust_laplace,
    robust_uniform,
    saturation,
    uniform_quantizer,
    verify_sign_preserving,
)
from nlalloc.errors import ParameterError

# one parameterization of every shipped variant
VARIANTS = [
    make_actuation("identity"),
    make_actuation("power_sign", mu=0.5),
    make_actuation("power_sign", mu=2.0),
    make_actuation("power_sign", mu=0.0),
    make_actuation("fixed_time", mu1=0.7, mu2=1.4),
    make_actuation("uniform_quantizer", delta=1.0),
    make_actuation("log_quantizer", delta=1.0),
    make_actuation("robust_uniform", eps=0.5, threshold=1.0),
    make_actuation("robust_laplace", eps=0.5),
    make_actuation("saturation", kappa=1.0),
    compose(make_actuation("saturation", kappa=1.0), make_actuation("power_sign", mu=2.0)),
    compose(make_actuation("saturation", kappa=2.0), make_actuation("log_quantizer", delta=0.5)),
]
IDS = [str(g) for g in VARIANTS]

# exact zeros or magnitudes in [1e-6, 1e4]; far smaller inputs underflow
# to zero under power_sign(mu > 1), which says nothing about the map itself
_entries = st.one_of(
    st.just(0.0),
    st.tuples(st.sampled_from([-1.0, 1.0]), st.floats(1e-6, 1e4)).map(lambda sm: sm[0] * sm[1]),
)
vectors = hnp.arrays(np.float64, st.integers(1, 5), elements=_entries)


class TestExamples:
    def test_power_sign(self):
        assert power_sign(4.0, 0.5) == pytest.approx(2.0)
        np.testing.assert_allclose(power_sign([3.0, 4.0], 2.0), [15.0, 20.0])
        for mu in (0.0, 0.5, 1.0, 3.0):
            assert np.all(power_sign(np.zeros(3), mu) == 0)

    def test_fixed_time(self):
        assert fixed_time(1.0, 0.5, 2.0) == pytest.approx(2.0)
        assert fixed_time(0.0, 0.5, 2.0) == 0.0
        assert fixed_time(-1.0, 0.5, 2.0) == pytest.approx(-2.0)

    def test_log_quantizer(self):
        assert log_quantizer(1.4, 1.0) == pytest.approx(1.0)
        assert log_quantizer(5.0, 1.0) == pytest.approx(np.e ** 2)
        assert log_quantizer(-5.0, 1.0) == pytest.approx(-np.e ** 2)
        assert log_quantizer(0.0, 1.0) == 0.0

    def test_uniform_quantizer(self):
        np.testing.assert_array_equal(uniform_quantizer([0.4, 1.6, -1.6], 1.0), [0.0, 2.0, -2.0])
        # ties go to the even level
        np.testing.assert_array_equal(uniform_quantizer([0.5, 1.5, 2.5, -0.5], 1.0), [0.0, 2.0, 2.0, -0.0])

    def test_robust_uniform(self):
        np.testing.assert_array_equal(robust_uniform([2.0, 0.5, -2.0], 0.5, 1.0), [1.0, 0.0, -1.0])

    def test_robust_laplace(self):
        assert robust_laplace(7.0, 0.5) == 1.0
        assert robust_laplace(0.0, 0.5) == 0.0
        assert robust_laplace(-0.1, 0.25) == -0.5

    def test_saturation(self):
        np.testing.assert_array_equal(saturation([0.5, 3.0, -3.0], 1.0), [0.5, 1.0, -1.0])

    def test_compose_identity_outer(self):
        g = make_actuation("fixed_time", mu1=0.3, mu2=1.7)
        h = compose(make_actuation("identity"), g)
        z = np.random.default_rng(0).normal(size=(100, 3))
        np.testing.assert_array_equal(h(z), g(z))

    def test_compose_saturated_power(self):
        h = compose(make_actuation("saturation", kappa=1.0), make_actuation("power_sign", mu=2.0))
        assert h(np.array([2.0]))[0] == 1.0


class TestParameters:
    @pytest.mark.parametrize(
        "kind,params",
        [
            ("power_sign", {"mu": -0.1}),
            ("fixed_time", {"mu1": 1.0, "mu2": 1.4}),
            ("fixed_time", {"mu1": 0.0, "mu2": 1.4}),
            ("log_quantizer", {"delta": 0.0}),
            ("robust_uniform", {"eps": 1.0, "threshold": 1.0}),
            ("robust_uniform", {"eps": 0.5, "threshold": 0.0}),
            ("robust_laplace", {"eps": 1.5}),
            ("saturation", {"kappa": -1.0}),
            ("saturation", {}),
            ("nonsense", {}),
        ],
    )
    def test_rejected(self, kind, params):
        with pytest.raises(ParameterError):
            make_actuation(kind, **params)

    def test_aliases(self):
        assert make_actuation("linear") == make_actuation("identity")
        assert make_actuation("robust_uniform", eps=0.5, d=2.0) == make_actuation("robust_uniform", eps=0.5, threshold=2.0)

    def test_spec_roundtrip(self):
        for g in VARIANTS:
            if g.kind != "composition":
                assert Actuation.from_spec(g.spec()) == g
        assert Actuation.from_spec("kind=saturation kappa=1.0") == make_actuation("saturation", kappa=1.0)

    def test_bad_spec(self):
        with pytest.raises(ParameterError):
            Actuation.from_spec("kappa=1.0")
        with pytest.raises(ParameterError):
            Actuation.from_spec("kind=saturation kappa=abc")

    def test_bounds(self):
        assert make_actuation("saturation", kappa=2.0).bound() == 2.0
        assert make_actuation("robust_laplace", eps=0.5).bound() == 1.0
        assert make_actuation("robust_uniform", eps=0.5, threshold=2.0).bound() == 0.5
        assert make_actuation("identity").bound() == np.inf

    def test_flags(self):
        assert make_actuation("fixed_time", mu1=0.7, mu2=1.4).sublinear
        assert not make_actuation("saturation", kappa=1).sublinear
        assert not make_actuation("uniform_quantizer", delta=1).strict
        assert make_actuation("uniform_quantizer", delta=1).dead_zone() == 0.5
        assert make_actuation("log_quantizer", delta=1).dead_zone() == 0.0


class TestVerifier:
    def test_saturation_strict(self):
        r = verify_sign_preserving(make_actuation("saturation", kappa=1.0), seed=0)
        assert r.ok and r.strict

    def test_robust_uniform_dead_zone(self):
        r = verify_sign_preserving(make_actuation("robust_uniform", eps=0.5, threshold=1.0), seed=0)
        assert r.odd_ok and r.zero_ok and r.sign_ok
        assert not r.strict

    def test_broken_double(self):
        r = verify_sign_preserving(lambda z: np.asarray(z) + 1.0, seed=0)
        assert not r.odd_ok
        assert not r.ok

    def test_needs_samples(self):
        with pytest.raises(ParameterError):
            verify_sign_preserving(make_actuation("identity"), n_samples=0)

    @pytest.mark.parametrize("g", VARIANTS, ids=IDS)
    def test_all_variants(self, g):
        r = verify_sign_preserving(g, n_samples=2000, seed=1)
        assert r.ok
        assert r.strict == g.strict


class TestProperties:
    @pytest.mark.parametrize("g", VARIANTS, ids=IDS)
    @settings(max_examples=100, deadline=None)
    @given(z=vectors)
    def test_odd_exact(self, g, z):
        np.testing.assert_array_equal(g(-z), -g(z))

    @pytest.mark.parametrize("g", VARIANTS, ids=IDS)
    @settings(max_examples=100, deadline=None)
    @given(z=vectors)
    def test_sign_and_inner_product(self, g, z):
        gz = g(z)
        assert np.all(np.sign(gz) * np.sign(z) >= 0)
        assert float(z @ gz) >= 0
        if g.strict:
            nz = z != 0
            assert np.all(np.sign(gz[nz]) == np.sign(z[nz]))

    @pytest.mark.parametrize("g", VARIANTS, ids=IDS)
    def test_zero_maps_to_zero(self, g):
        assert np.all(g(np.zeros(4)) == 0)

    @settings(max_examples=100, deadline=None)
    @given(z=vectors, kappa=st.floats(1e-3, 1e3), eps=st.floats(1e-3, 0.999), th=st.floats(1e-3, 1e3))
    def test_boundedness(self, z, kappa, eps, th):
        assert np.max(np.abs(saturation(z, kappa))) <= kappa
        assert np.max(np.abs(robust_laplace(z, eps))) <= 2 * eps
        assert np.max(np.abs(robust_uniform(z, eps, th))) <= (1 - eps) / (eps * th)

    @settings(max_examples=100, deadline=None)
    @given(z=hnp.arrays(np.float64, (7, 3), elements=st.floats(-100, 100)))
    def test_batched_rows_match_single(self, z):
        for g in VARIANTS:
            batched = g(z)
            for k in range(z.shape[0]):
                np.testing.assert_array_equal(batched[k], g(z[k]))
