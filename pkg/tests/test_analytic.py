import math

import numpy as np
import pytest
from scipy import integrate

from aniso3d.analytic import (
    CORNER_SOLID_ANGLES,
    PathLossModel,
    boundary_mass_isotropic,
    fit_scaling_exponent,
    homogeneous_mass,
    mean_degree_and_pair_probability,
    pfc_homogeneous,
    pfc_homogeneous_raw,
    radial_prefactor,
)
from aniso3d.gain import Cardioid, Donut, Isotropic, NarrowLobe, Sector
from aniso3d.specfn import DomainError


def _direct_mass(tx, rx, model):
    """Unseparated triple integral: node j's position (r, theta) and orientation theta_j.

    Axial symmetry of both patterns reduces the six-dimensional average to
    three dimensions; the partner's azimuth integrates out trivially.
    """
    b, eta = model.beta, model.eta

    def inner(tj, r, t):
        q = float(tx.gain_theta(np.array(t))) * float(rx.gain_theta(np.array(tj)))
        if q <= 0:
            return 0.0
        return 0.5 * math.sin(tj) * r * r * math.exp(-b * r**eta / q) * 2 * math.pi * math.sin(t)

    rmax = (tx.max_gain() * rx.max_gain() * 40 / b) ** (1 / eta)
    val, _ = integrate.tplquad(inner, 0, math.pi, 0, rmax, 0, math.pi, epsabs=1e-11, epsrel=1e-9)
    return val


class TestHomogeneousMass:
    def test_isotropic_eta3(self):
        res = homogeneous_mass(Isotropic(), Isotropic(), PathLossModel(3, 1))
        assert res.mass == pytest.approx(4 * math.pi / 3, rel=1e-14)
        assert res.method == "closed"
        assert float(res) == res.mass

    def test_isotropic_eta2_is_gaussian_integral(self):
        oracle = integrate.quad(lambda r: 4 * math.pi * r * r * math.exp(-r * r), 0, np.inf)[0]
        assert oracle == pytest.approx(math.pi**1.5, rel=1e-12)
        res = homogeneous_mass(Isotropic(), Isotropic(), PathLossModel(2, 1))
        assert res.mass == pytest.approx(oracle, rel=1e-12)

    def test_cardioid_eta3_invariance(self):
        res = homogeneous_mass(Cardioid(1.0), Cardioid(1.0), PathLossModel(3, 1))
        assert res.mass == pytest.approx(4 * math.pi / 3, rel=1e-12)

    def test_narrow_lobe_reports_quadrature(self):
        assert homogeneous_mass(NarrowLobe(2), Isotropic(), PathLossModel(2, 1)).method == "quadrature"

    @pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
    @pytest.mark.parametrize(
        "tx, rx, eta, beta",
        [
            (Cardioid(0.5), Cardioid(0.5), 2.0, 1.0),
            (Donut(2.0), Isotropic(), 4.0, 2.0),
            (Cardioid(1.0), Donut(1.0), 2.5, 0.5),
        ],
        ids=["cardioid-cardioid", "donut-iso", "cardioid-donut"],
    )
    def test_separation_against_direct_quadrature(self, tx, rx, eta, beta):
        model = PathLossModel(eta, beta)
        assert homogeneous_mass(tx, rx, model).mass == pytest.approx(_direct_mass(tx, rx, model), rel=1e-6)

    def test_beta_scaling(self):
        m1 = homogeneous_mass(Donut(3), Donut(3), PathLossModel(2.5, 1.0)).mass
        m2 = homogeneous_mass(Donut(3), Donut(3), PathLossModel(2.5, 4.0)).mass
        assert m2 == pytest.approx(m1 * 4.0 ** (-3 / 2.5), rel=1e-13)

    @pytest.mark.parametrize("eta", [2.0, 3.5, 6.0])
    def test_product_structure(self, eta):
        model = PathLossModel(eta, 1.0)
        a, b, iso = Cardioid(0.6), Donut(4.0), Isotropic()
        m = lambda x, y: homogeneous_mass(x, y, model).mass
        assert m(a, b) * m(iso, iso) == pytest.approx(m(a, iso) * m(iso, b), rel=1e-9)

    @pytest.mark.parametrize("nu", [0.1, 0.5, 0.9])
    def test_mixed_links_lose_below_eta3_and_win_order_reverses_above(self, nu):
        sec, iso = Sector(nu), Isotropic()
        low = PathLossModel(2.0, 1.0)
        m = lambda x, y, mod: homogeneous_mass(x, y, mod).mass
        assert m(sec, sec, low) > m(sec, iso, low) > m(iso, iso, low)
        high = PathLossModel(5.0, 1.0)
        assert m(sec, sec, high) < m(sec, iso, high) < m(iso, iso, high)

    def test_model_validation(self):
        with pytest.raises(DomainError):
            PathLossModel(0.0, 1.0)
        with pytest.raises(DomainError):
            PathLossModel(2.0, -1.0)

    def test_link_probability_and_range(self):
        model = PathLossModel(2.0, 1.0)
        assert model.link_probability(1.0, 1.0) == pytest.approx(math.exp(-1))
        assert model.link_probability(0.0, 1.0) == 1.0
        assert model.link_probability(0.5, 0.0) == 0.0
        r0 = model.connection_range(4.0)
        assert model.link_probability(r0, 4.0) == pytest.approx(math.exp(-1))

    def test_radial_prefactor(self):
        assert radial_prefactor(PathLossModel(3, 1)) == pytest.approx(1 / 3)


class TestDegreeAndFullConnectivity:
    def test_mean_degree(self):
        est = mean_degree_and_pair_probability(4 * math.pi / 3, rho=0.1, volume=1000, n_nodes=100)
        assert est.mu == pytest.approx(0.41888, abs=1e-5)
        assert est.mu_finite == pytest.approx(0.41469, abs=1e-5)
        assert est.p2 == pytest.approx(4 * math.pi / 3 / 1000)

    def test_zero_mass(self):
        est = mean_degree_and_pair_probability(0.0, rho=0.1, volume=1000, n_nodes=100)
        assert est.mu == 0 and est.p2 == 0

    def test_validation(self):
        with pytest.raises(DomainError):
            mean_degree_and_pair_probability(1.0, rho=0.0, volume=1.0, n_nodes=10)
        with pytest.raises(DomainError):
            mean_degree_and_pair_probability(1.0, rho=1.0, volume=1.0, n_nodes=1)

    def test_pfc_limits(self):
        assert pfc_homogeneous(100, 1.0, 1e6) == 1.0
        assert pfc_homogeneous(100, 1.0, math.log(100)) == pytest.approx(0.0, abs=1e-14)
        assert pfc_homogeneous(100, 1.0, math.log(1000)) == pytest.approx(0.9, rel=1e-12)

    def test_pfc_clamped_but_raw_is_not(self):
        assert pfc_homogeneous(100, 1.0, 0.1) == 0.0
        assert pfc_homogeneous_raw(100, 1.0, 0.1) < 0


class TestBoundaryMass:
    def test_bulk_equals_homogeneous(self):
        bulk = boundary_mass_isotropic(PathLossModel(3, 1), 4 * math.pi)
        assert bulk == pytest.approx(homogeneous_mass(Isotropic(), Isotropic(), PathLossModel(3, 1)).mass)

    def test_corner(self):
        assert boundary_mass_isotropic(PathLossModel(3, 1), math.pi / 2) == pytest.approx(math.pi / 6, rel=1e-14)

    def test_linear_in_solid_angle(self):
        model = PathLossModel(2.7, 0.3)
        half = boundary_mass_isotropic(model, CORNER_SOLID_ANGLES["surface"])
        assert half == 0.5 * boundary_mass_isotropic(model, CORNER_SOLID_ANGLES["bulk"])

    def test_range(self):
        with pytest.raises(DomainError):
            boundary_mass_isotropic(PathLossModel(), 0.0)
        with pytest.raises(DomainError):
            boundary_mass_isotropic(PathLossModel(), 13.0)


class TestScalingFit:
    @pytest.mark.parametrize("eta", [2.0, 3.0, 6.0])
    def test_sector_slope(self, eta):
        slope = fit_scaling_exponent("sector", eta, np.linspace(0.02, 0.1, 9))
        assert slope == pytest.approx(1 - 3 / eta, abs=0.02)

    def test_mass_slope_is_twice(self):
        slope = fit_scaling_exponent("sector", 2.0, np.linspace(0.02, 0.1, 9), quantity="mass")
        assert slope == pytest.approx(2 - 6 / 2.0, abs=0.05)

    def test_validation(self):
        with pytest.raises(DomainError):
            fit_scaling_exponent("sector", 2.0, [0.1, 0.2])
        with pytest.raises(DomainError):
            fit_scaling_exponent("yagi", 2.0, [0.1] * 5)
        with pytest.raises(DomainError):
            fit_scaling_exponent("sector", 2.0, [0.1, 0.2, 0.3, 0.4, 0.5], quantity="degree")
