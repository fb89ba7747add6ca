import math

import numpy as np
import pytest

from smallball import (
    SpectrumError,
    TailDescriptor,
    bogoliubov_spectrum,
    discrete_total_mass,
    fou_density_step,
    fou_spectrum,
    fou_tail,
    integrated_bridge_spectrum,
    model_from_json,
)
from smallball.spectra import ou_spectral_density

# 12-digit gamma table on (1, 3), frozen from a high-precision evaluation,
# guarding the host gamma routine the tail constants rely on
GAMMA_TABLE = {
    1.25: 0.906402477055,
    1.50: 0.886226925453,
    1.75: 0.919062526849,
    2.00: 1.000000000000,
    2.25: 1.133003096319,
    2.50: 1.329340388179,
    2.75: 1.608359421986,
}


def test_gamma_fixture():
    for x, val in GAMMA_TABLE.items():
        assert math.gamma(x) == pytest.approx(val, abs=5e-13)


class TestTailDescriptor:
    def test_rejects_bad_exponent(self):
        with pytest.raises(SpectrumError):
            TailDescriptor(1.0, 1.0, 1.0)

    def test_rejects_zero_mass(self):
        with pytest.raises(SpectrumError):
            TailDescriptor(2.0, 0.0, 0.0)

    def test_symmetric_flag(self):
        assert TailDescriptor(2.0, 1.0, 1.0).symmetric
        assert not TailDescriptor(2.0, 0.0, 1.0).symmetric


class TestBogoliubov:
    def test_mass_at_zero(self):
        spec = bogoliubov_spectrum(1.0)
        assert spec.masses(np.array([0]))[0] == 1.0

    def test_mass_at_one(self):
        # 1/(1 + 4 pi^2), direct arithmetic
        spec = bogoliubov_spectrum(1.0)
        assert spec.masses(np.array([1]))[0] == pytest.approx(0.0247045230319, rel=1e-10)

    def test_tail_constant(self):
        spec = bogoliubov_spectrum(1.0)
        assert spec.tail.r == 2.0
        assert spec.tail.m_plus == pytest.approx(1.0 / (2 * np.pi) ** 2, rel=1e-14)

    def test_rejects_nonpositive_omega(self):
        with pytest.raises(SpectrumError):
            bogoliubov_spectrum(0.0)

    def test_even(self):
        spec = bogoliubov_spectrum(2.5)
        ks = np.arange(1, 50)
        assert np.array_equal(spec.masses(ks), spec.masses(-ks))

    def test_declared_tail_holds_numerically(self):
        bogoliubov_spectrum(1.0).check_tail()


class TestIntegratedBridge:
    def test_m1_k1(self):
        spec = integrated_bridge_spectrum(1)
        assert spec.masses(np.array([1]))[0] == pytest.approx((2 * np.pi) ** -2, rel=1e-14)

    def test_m2_k2(self):
        spec = integrated_bridge_spectrum(2)
        assert spec.masses(np.array([2]))[0] == pytest.approx((4 * np.pi) ** -4, rel=1e-14)

    def test_zero_mode_empty(self):
        assert integrated_bridge_spectrum(1).masses(np.array([0]))[0] == 0.0

    def test_rejects_m0(self):
        with pytest.raises(SpectrumError):
            integrated_bridge_spectrum(0)

    def test_declared_tail_holds_numerically(self):
        integrated_bridge_spectrum(2).check_tail()


class TestFouTail:
    def test_half(self):
        tail = fou_tail(0.5)
        assert tail.r == 2.0
        assert tail.m_plus == pytest.approx(1.0 / (2 * np.pi), rel=1e-12)

    def test_three_halves_same_constant(self):
        tail = fou_tail(1.5)
        assert tail.r == 4.0
        assert tail.m_plus == pytest.approx(1.0 / (2 * np.pi), rel=1e-12)

    def test_quarter(self):
        # Gamma(3/2) sin(pi/4) / (2 pi), via the frozen gamma fixture
        tail = fou_tail(0.25)
        expected = GAMMA_TABLE[1.50] * math.sin(math.pi / 4) / (2 * math.pi)
        assert tail.r == 1.5
        assert tail.m_plus == pytest.approx(expected, rel=1e-11)

    def test_rejects_integer_level(self):
        with pytest.raises(SpectrumError):
            fou_tail(2.0)

    def test_ou_density_tail_cross_check(self):
        # |u|^2 m(u) -> 1/(2 pi) for the exact OU density
        u = 1e3
        assert u**2 * ou_spectral_density(u) == pytest.approx(1 / (2 * np.pi), rel=1e-2)


class TestFouDensityStep:
    def test_unit_parent_h1(self):
        stepped = fou_density_step(lambda u: np.ones_like(u), 1.0)
        assert stepped(np.array([0.0]))[0] == 1.0

    def test_unit_parent_h2(self):
        stepped = fou_density_step(lambda u: np.ones_like(u), 2.0)
        assert stepped(np.array([2.0]))[0] == pytest.approx(1.0 / 8.0, rel=1e-14)

    def test_ou_one_step_tail(self):
        # one step from the OU base: m_{3/2}(u) ~ (1/2pi) |u|^{-4} at u = 1e3
        stepped = fou_density_step(ou_spectral_density, 1.5)
        u = 1e3
        ratio = u**4 * stepped(np.array([u]))[0] * 2 * np.pi
        assert ratio == pytest.approx(1.0, rel=1e-2)

    def test_pointwise_decrease_and_nonnegativity(self):
        rng = np.random.default_rng(7)
        us = rng.uniform(-20, 20, size=200)
        parent = ou_spectral_density
        stepped = fou_density_step(parent, 1.5)
        assert np.all(stepped(us) > 0)
        assert np.all(stepped(us) < parent(us))


class TestFouSpectrum:
    def test_half_is_exact_ou(self):
        spec = fou_spectrum(0.5)
        assert spec.density_available
        u = np.array([0.0, 1.0, 5.0])
        np.testing.assert_allclose(spec.density_values(u), ou_spectral_density(u), rtol=1e-14)

    def test_half_kernel_closed_form(self):
        spec = fou_spectrum(0.5)
        s = np.array([0.0, 0.3, 2.0])
        np.testing.assert_allclose(spec.kernel(s), np.exp(-np.abs(s) / 2), rtol=1e-14)

    def test_kernel_at_zero_matches_density_mass(self):
        # K(0) = int m for the composed level 3/2
        spec = fou_spectrum(1.5)
        total = spec.total_mass(horizon=1e7)
        assert spec.kernel(0.0) == pytest.approx(total.value, rel=1e-6)

    def test_level_three_halves_tail(self):
        spec = fou_spectrum(1.5)
        spec.check_tail(horizon=1e4)

    def test_other_fraction_tail_only(self):
        spec = fou_spectrum(0.25)
        assert not spec.density_available


class TestTotalMass:
    def test_single_atom(self):
        spec = model_from_json({"kind": "discrete_table", "entries": [[0, 1.0]],
                                "tail": {"r": 2.0, "m_minus": 1.0, "m_plus": 1.0}})
        res = discrete_total_mass(spec)
        assert res.value == 1.0

    def test_bogoliubov_closed_form(self):
        # sum_k 1/(1 + (2 pi k)^2) = coth(1/2)/2, summed independently in
        # high precision
        res = discrete_total_mass(bogoliubov_spectrum(1.0))
        assert res.value == pytest.approx(1.081976706869326, abs=res.tail_bound + 1e-12)
        assert res.converged

    def test_bridge_basel(self):
        # 2 (2 pi)^{-2} zeta(2) = 1/12
        res = discrete_total_mass(integrated_bridge_spectrum(1))
        assert res.value == pytest.approx(1.0 / 12.0, abs=res.tail_bound + 1e-12)

    def test_tail_bound_scales(self):
        res = discrete_total_mass(bogoliubov_spectrum(1.0))
        assert 0 < res.tail_bound < 1e-5


class TestJsonInterface:
    def test_bogoliubov_roundtrip(self):
        spec = model_from_json({"kind": "bogoliubov", "omega": 2.0})
        assert spec.name == "bogoliubov(omega=2.0)"

    def test_unknown_kind(self):
        with pytest.raises(SpectrumError):
            model_from_json({"kind": "nope"})

    def test_missing_parameter(self):
        with pytest.raises(SpectrumError):
            model_from_json({"kind": "bogoliubov"})

    def test_tail_only(self):
        spec = model_from_json({"kind": "tail_only", "r": 3.0, "m_minus": 0.0,
                                "m_plus": 2.0})
        assert not spec.density_available
        assert spec.tail.m_plus == 2.0

    def test_density_table_interpolation_and_extension(self):
        us = np.linspace(-50, 50, 2001)
        doc = {"kind": "density_table",
               "entries": [[float(u), float(ou_spectral_density(u))] for u in us],
               "tail": {"r": 2.0, "m_minus": 1 / (2 * np.pi), "m_plus": 1 / (2 * np.pi)}}
        spec = model_from_json(doc)
        assert spec.density_values(0.0) == pytest.approx(ou_spectral_density(0.0), rel=1e-4)
        # outside the table the declared power tail takes over
        assert spec.density_values(100.0) == pytest.approx(1 / (2 * np.pi) / 1e4, rel=1e-12)
