import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from aniso3d.gain import (
    Cardioid,
    Donut,
    Isotropic,
    MultiLobe,
    NarrowLobe,
    OrientationSet,
    Sector,
    UnsupportedClosedForm,
    gain_at,
    half_max_solid_angle,
    pattern_from_dict,
    pattern_to_dict,
    s_functional,
    s_functional_closed,
    s_functional_quadrature,
    verify_normalization,
)
from aniso3d.specfn import DomainError
from aniso3d.thomson import thomson_points

FOUR_PI = 4 * math.pi


def _scipy_s(pattern, eta):
    """Independent oracle: scipy's QUADPACK on the same integrand."""
    lo, hi = pattern.support()
    f = lambda t: math.sin(t) * float(pattern.gain_theta(np.array(t))) ** (3 / eta)
    pts = [p for p in pattern.breakpoints() if lo < p < hi] or None
    return integrate.quad(f, lo, hi, points=pts, epsabs=1e-14, epsrel=1e-13, limit=500)[0]


def _unit(theta, phi=0.0):
    return np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])


class TestGainAt:
    def test_isotropic_everywhere(self):
        for d in np.random.default_rng(1).normal(size=(10, 3)):
            assert gain_at(Isotropic(), d / np.linalg.norm(d)) == 1.0

    def test_cardioid_front_and_back(self):
        assert gain_at(Cardioid(1.0), _unit(0.0)) == pytest.approx(2.0)
        assert gain_at(Cardioid(1.0), _unit(math.pi)) == pytest.approx(0.0, abs=1e-15)

    def test_narrow_lobe_edge(self):
        assert gain_at(NarrowLobe(2.0), _unit(math.pi / 4)) == pytest.approx(0.0, abs=1e-12)

    def test_requires_unit_vector(self):
        with pytest.raises(DomainError):
            gain_at(Isotropic(), [1.0, 1.0, 0.0])

    def test_multilobe_peaks_on_its_axes(self):
        dirs = thomson_points(4)
        pat = MultiLobe(4, 2.0, dirs)
        for v in dirs.vectors:
            assert gain_at(pat, v) == pytest.approx(pat.lobe_level)


class TestNormalization:
    @pytest.mark.parametrize(
        "pattern",
        [Isotropic(), Sector(0.5), NarrowLobe(3.0), NarrowLobe(1.0), Cardioid(0.3), Donut(7.5)],
        ids=repr,
    )
    def test_four_pi(self, pattern):
        assert verify_normalization(pattern) == pytest.approx(FOUR_PI, rel=1e-10)

    def test_sector_analytic(self):
        # 2 pi csc^2(pi/4) (1 - cos(pi/2)) = 4 pi
        assert 2 * math.pi * Sector(0.5).level * (1 - math.cos(math.pi / 2)) == pytest.approx(FOUR_PI)

    def test_narrow_lobe_analytic_antiderivative(self):
        lam = 3.0
        lobe = (lam * math.sin(math.pi / (2 * lam)) - 1) / (lam**2 - 1)
        assert 2 * math.pi * NarrowLobe(lam).amplitude * lobe == pytest.approx(FOUR_PI, rel=1e-14)

    def test_cosine_lobe_amplitude_is_continuous_at_one(self):
        assert NarrowLobe(1.0).amplitude == 4.0
        assert NarrowLobe(1.0 + 1e-9).amplitude == pytest.approx(4.0, rel=1e-8)

    @pytest.mark.parametrize("sectorized", [False, True])
    def test_multilobe(self, sectorized):
        pat = MultiLobe(6, 3.0, thomson_points(6), sectorized)
        assert verify_normalization(pat) == pytest.approx(FOUR_PI, rel=1e-10)

    def test_multilobe_by_brute_force_on_the_sphere(self):
        # full-sphere product rule on the summed gain, no per-lobe shortcut
        pat = MultiLobe(6, 3.0, thomson_points(6))
        x, w = np.polynomial.legendre.leggauss(1500)
        phi = np.linspace(0.0, 2 * math.pi, 1500, endpoint=False)
        s = np.sqrt(1 - x**2)
        d = np.stack([np.outer(s, np.cos(phi)), np.outer(s, np.sin(phi)), np.outer(x, np.ones_like(phi))], -1)
        val = (pat.gain(d) * w[:, None]).sum() * (2 * math.pi / phi.size)
        assert val == pytest.approx(FOUR_PI, rel=1e-4)


class TestConnectivityFunctional:
    @pytest.mark.parametrize("eta", [2.0, 3.0, 4.5, 6.0])
    def test_isotropic(self, eta):
        assert s_functional_quadrature(Isotropic(), eta) == pytest.approx(2.0, rel=1e-12)

    @pytest.mark.parametrize(
        "pattern", [Cardioid(0.7), Donut(3.0), NarrowLobe(2.5), Sector(0.2)], ids=repr
    )
    def test_eta_three_is_two(self, pattern):
        assert s_functional_quadrature(pattern, 3.0) == pytest.approx(2.0, abs=1e-9)

    def test_sector_half_at_eta_two(self):
        assert s_functional_closed(Sector(0.5), 2.0) == pytest.approx(2 * math.sqrt(2), rel=1e-14)
        assert s_functional_quadrature(Sector(0.5), 2.0) == pytest.approx(2 * math.sqrt(2), rel=1e-10)

    def test_cardioid_full(self):
        expected = 2 ** (1 + 1.5) / (1 + 1.5)
        assert expected == pytest.approx(2.2627417, abs=1e-7)
        assert s_functional_closed(Cardioid(1.0), 2.0) == pytest.approx(expected, rel=1e-14)

    def test_cardioid_zero_is_isotropic(self):
        for eta in (2.0, 5.0):
            assert s_functional_closed(Cardioid(0.0), eta) == 2.0

    def test_cardioid_small_epsilon_is_stable(self):
        assert s_functional_closed(Cardioid(1e-12), 2.0) == pytest.approx(2.0, rel=1e-10)

    def test_donut_m2_eta2_against_scipy(self):
        oracle = _scipy_s(Donut(2.0), 2.0)
        assert oracle == pytest.approx(2.1643, abs=5e-5)
        assert s_functional_closed(Donut(2.0), 2.0) == pytest.approx(oracle, rel=1e-10)

    @pytest.mark.parametrize("eta", [2.0, 2.5, 4.0, 6.0])
    @pytest.mark.parametrize("pattern", [Cardioid(0.4), Donut(6.0), Sector(0.3), NarrowLobe(2.0)], ids=repr)
    def test_quadrature_matches_scipy(self, pattern, eta):
        assert s_functional_quadrature(pattern, eta) == pytest.approx(_scipy_s(pattern, eta), rel=1e-9)

    def test_narrow_lobe_has_no_closed_form(self):
        with pytest.raises(UnsupportedClosedForm):
            s_functional_closed(NarrowLobe(2.0), 2.0)
        value, method = s_functional(NarrowLobe(2.0), 2.0)
        assert method == "quadrature"
        assert value == pytest.approx(_scipy_s(NarrowLobe(2.0), 2.0), rel=1e-9)

    def test_method_tag(self):
        assert s_functional(Donut(2.0), 2.0)[1] == "closed"

    @pytest.mark.parametrize("eta", [2.0, 6.0])
    def test_multilobe_scaling(self, eta):
        one = s_functional_quadrature(MultiLobe(1, 2.0, OrientationSet([[0, 0, 1]])), eta)
        for n in (2, 4, 8):
            lam = max(2.0, math.sqrt(n * math.pi) / 3)
            pat = MultiLobe(n, lam, thomson_points(n))
            single = s_functional_quadrature(pat.single_lobe(), eta)
            assert s_functional_quadrature(pat, eta) == pytest.approx(n ** (1 - 3 / eta) * single, rel=1e-9)
        assert one == pytest.approx(s_functional_quadrature(NarrowLobe(2.0), eta), rel=1e-12)

    def test_bad_eta(self):
        with pytest.raises(DomainError):
            s_functional_quadrature(Isotropic(), 0.0)


def test_sector_monotonicity_direction():
    nus = np.linspace(0.05, 1.0, 20)
    low = [s_functional_closed(Sector(nu), 2.0) for nu in nus]
    high = [s_functional_closed(Sector(nu), 6.0) for nu in nus]
    assert np.all(np.diff(low) < 0)
    assert np.all(np.diff(high) > 0)


class TestHalfMax:
    def test_isotropic(self):
        assert half_max_solid_angle(Isotropic()) == pytest.approx(FOUR_PI)

    def test_narrow_lobe(self):
        expected = FOUR_PI * math.sin(math.pi / 12) ** 2
        assert expected == pytest.approx(0.8418, abs=1e-4)
        assert half_max_solid_angle(NarrowLobe(2.0)) == pytest.approx(expected, rel=1e-12)

    def test_donut_asymptotics(self):
        asym = math.sqrt(32 * math.pi**2 * math.log(2) / 1e4)
        assert half_max_solid_angle(Donut(1e4)) == pytest.approx(asym, rel=0.05)

    def test_sector_is_its_cap(self):
        nu = 0.1
        assert half_max_solid_angle(Sector(nu)) == pytest.approx(2 * math.pi * (1 - math.cos(nu * math.pi)), rel=1e-12)

    def test_cardioid_half_max_is_analytic(self):
        # 1 + eps cos t >= (1 + eps)/2  <=>  cos t >= (eps - 1)/(2 eps)
        eps = 0.8
        c = (eps - 1) / (2 * eps)
        assert half_max_solid_angle(Cardioid(eps)) == pytest.approx(2 * math.pi * (1 - c), rel=1e-12)


class TestValidation:
    @pytest.mark.parametrize(
        "factory",
        [lambda: Cardioid(1.5), lambda: Cardioid(-0.1), lambda: Donut(0.0), lambda: NarrowLobe(0.9),
         lambda: Sector(0.0), lambda: Sector(1.1)],
    )
    def test_bad_parameters(self, factory):
        with pytest.raises(DomainError):
            factory()

    def test_multilobe_overlap_bound(self):
        with pytest.raises(DomainError):
            MultiLobe(20, 1.5, OrientationSet.normalized(np.random.default_rng(0).normal(size=(20, 3))))

    def test_multilobe_needs_matching_directions(self):
        with pytest.raises(DomainError):
            MultiLobe(3, 2.0, thomson_points(4))

    def test_orientation_set_unit_norm(self):
        with pytest.raises(DomainError):
            OrientationSet([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
        s = OrientationSet.normalized([[3.0, 0, 0], [0, 0, -2.0]])
        assert np.allclose(np.linalg.norm(s.vectors, axis=1), 1.0, atol=1e-12)
        assert not s.vectors.flags.writeable

    def test_thomson_lobes_are_disjoint_at_bound(self):
        for n in (4, 6, 12):
            lam = math.sqrt(n * math.pi) / 3
            pat = MultiLobe(n, max(lam, 1.0), thomson_points(n), sectorized=True)
            assert pat.lobes_disjoint()


class TestSerialization:
    @pytest.mark.parametrize(
        "pattern",
        [Isotropic(), Cardioid(0.25), Donut(3.0), NarrowLobe(2.0), Sector(0.4),
         MultiLobe(4, 2.0, thomson_points(4), sectorized=True)],
        ids=lambda p: p.kind,
    )
    def test_round_trip_through_json(self, pattern):
        text = json.dumps(pattern_to_dict(pattern))
        back = pattern_from_dict(json.loads(text))
        assert back == pattern

    def test_field_names(self):
        assert pattern_to_dict(NarrowLobe(2.0)) == {"type": "narrow", "lambda": 2.0}
        assert pattern_to_dict(Donut(2.0)) == {"type": "donut", "m": 2.0}

    def test_unknown_type(self):
        with pytest.raises(DomainError):
            pattern_from_dict({"type": "yagi"})

    def test_missing_field(self):
        with pytest.raises(KeyError):
            pattern_from_dict({"type": "sector"})


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(1.0, 8.0))
def test_cardioid_closed_matches_quadrature(eps, eta):
    c = Cardioid(eps)
    assert s_functional_closed(c, eta) == pytest.approx(s_functional_quadrature(c, eta), rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 200.0), st.floats(1.0, 8.0))
def test_donut_closed_matches_quadrature(m, eta):
    d = Donut(m)
    assert s_functional_closed(d, eta) == pytest.approx(s_functional_quadrature(d, eta), rel=1e-8)
