import itertools
import logging
import math

import numpy as np
import pytest
from scipy import integrate

from polaring.errors import ConfigError
from polaring.model.bath import build_phonon_bath, reversed_momentum_index
from polaring.spectroscopy.lineshape import BathLineshapeParams, lineshape_factors, lineshape_g, matsubara_sum
from polaring.spectroscopy.response import (
    ResponseGrid,
    average_responses,
    build_amplitude_table,
    orientation_factor,
    orientation_tensor,
    response_functions,
    table_config,
)
from polaring.spectroscopy.spectrum import (
    Spectrum2D,
    diagonal_antidiagonal_widths,
    fwhm,
    linear_absorption,
    peak_position,
    realization_responses,
    spectrum_2d,
)
from polaring.units import CM1_TO_RAD_PER_FS

STEP = 2.0
N_POINTS = 101
PAD = 4
# a two-level gap that falls exactly on the padded frequency grid
GAP_RAD = 2.0 * math.pi * 10 / (PAD * N_POINTS * STEP)
GAP_CM1 = GAP_RAD / CM1_TO_RAD_PER_FS

NO_BATH = BathLineshapeParams(lambda0=0.0)


def _unit_vectors(n, seed):
    v = np.random.default_rng(seed).normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1)[:, None]


@pytest.fixture(scope="module")
def two_level_table():
    grid_max = (N_POINTS - 1) * STEP
    return build_amplitude_table(np.array([[GAP_CM1]]), build_phonon_bath(1, S=0.0), table_config(2 * grid_max, STEP))


@pytest.fixture(scope="module")
def two_level(two_level_table):
    grid = np.arange(N_POINTS) * STEP
    return response_functions(two_level_table, np.array([[0.0, 0.0, 1.0]]), NO_BATH, 0.0, grid, grid)


class TestLineshape:
    def test_zero_at_origin(self):
        assert lineshape_g(0.0, BathLineshapeParams()) == 0.0

    @pytest.mark.parametrize("t", [10.0, 50.0, 200.0])
    def test_imaginary_part(self, t):
        p = BathLineshapeParams()
        lam, gamma = p.lambda_rad, p.gamma_rad
        expected = -(lam / gamma) * (math.exp(-gamma * t) + gamma * t - 1.0)
        assert lineshape_g(t, p).imag == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("t", [10.0, 50.0, 100.0])
    def test_real_part_matches_spectral_integral(self, t):
        p = BathLineshapeParams()
        lam, gamma, beta = p.lambda_rad, p.gamma_rad, p.beta

        def h(w):
            return 2.0 * lam * gamma / (math.pi * w * (w * w + gamma * gamma) * math.tanh(0.5 * beta * w))

        cut = 1.0
        near, _ = integrate.quad(
            lambda w: h(w) * (1.0 - math.cos(w * t)), 0.0, cut, limit=2000, epsabs=1e-13, epsrel=1e-11
        )
        tail, _ = integrate.quad(h, cut, np.inf, epsabs=1e-13, epsrel=1e-11)
        tail_cos, _ = integrate.quad(h, cut, np.inf, weight="cos", wvar=t)
        assert lineshape_g(t, p).real == pytest.approx(near + tail - tail_cos, rel=1e-5)

    def test_array_and_scalar(self):
        p = BathLineshapeParams()
        values = lineshape_g(np.array([5.0, 20.0]), p)
        assert values.shape == (2,)
        assert values[1] == pytest.approx(lineshape_g(20.0, p))

    def test_negative_time(self):
        with pytest.raises(ValueError):
            lineshape_g(-1.0, BathLineshapeParams())

    def test_no_bath(self):
        assert np.all(lineshape_g(np.linspace(0.0, 100.0, 5), NO_BATH) == 0.0)
        assert lineshape_factors(10.0, 5.0, 20.0, NO_BATH) == (1.0, 1.0, 1.0, 1.0)

    def test_factors_trivial_at_origin(self):
        assert lineshape_factors(0.0, 0.0, 0.0, BathLineshapeParams()) == pytest.approx((1.0, 1.0, 1.0, 1.0))

    def test_factors_decay(self):
        f = lineshape_factors(np.array([0.0, 100.0]), 0.0, np.array([0.0, 100.0]), BathLineshapeParams())
        assert all(abs(x[1]) < abs(x[0]) for x in f)

    def test_matsubara_cap_warns(self, caplog):
        p = BathLineshapeParams(matsubara_tol=1e-30, matsubara_max=3)
        with caplog.at_level(logging.WARNING):
            _, used, _ = matsubara_sum(np.array([10.0]), p)
        assert used == 3
        assert "capped" in caplog.text

    @pytest.mark.parametrize(
        "kwargs",
        [{"lambda0": -1.0}, {"gamma0": 0.0}, {"temperature": 0.0}, {"matsubara_tol": 0.0}, {"matsubara_max": 0}],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            BathLineshapeParams(**kwargs)


class TestOrientation:
    def test_tensor_matches_factor_and_is_symmetric(self):
        d = _unit_vectors(4, 0)
        c = orientation_tensor(d)
        assert c[1, 2, 3, 0] == pytest.approx(orientation_factor(d, 1, 2, 3, 0))
        for perm in itertools.permutations(range(4)):
            assert np.allclose(c, c.transpose(perm))

    def test_parallel_dipoles(self):
        d = np.tile([0.0, 0.0, 1.0], (2, 1))
        assert orientation_factor(d, 0, 1, 0, 1) == pytest.approx(1.0 / 5.0)

    def test_isotropic_average(self):
        d = _unit_vectors(4, 1)
        e = _unit_vectors(400_000, 2)
        projections = e @ d.T
        sampled = np.mean(np.prod(projections, axis=1))
        assert orientation_factor(d, 0, 1, 2, 3) == pytest.approx(sampled, abs=2e-3)


class TestResponse:
    def test_two_level_pathways(self, two_level):
        eps = GAP_RAD
        tau, t = np.meshgrid(two_level.tau_grid, two_level.t_grid, indexing="ij")
        rephasing = np.exp(1j * eps * (tau - t)) / 5.0
        nonrephasing = np.exp(-1j * eps * (tau + t)) / 5.0
        assert np.allclose(two_level.r2, rephasing, atol=1e-9)
        assert np.allclose(two_level.r3, rephasing, atol=1e-9)
        assert np.allclose(two_level.r1, nonrephasing, atol=1e-9)
        assert np.allclose(two_level.r4, nonrephasing, atol=1e-9)

    def test_trimer_matches_eigenbasis(self, trimer):
        bath = build_phonon_bath(3, S=0.0)
        p = BathLineshapeParams()
        dipoles = _unit_vectors(3, 5)
        grid = np.arange(0.0, 22.0, STEP)
        t_w = 10.0
        table = build_amplitude_table(trimer, bath, table_config(2 * grid[-1] + t_w, STEP))
        got = response_functions(table, dipoles, p, t_w, grid, grid)

        energies, vectors = np.linalg.eigh(trimer * CM1_TO_RAD_PER_FS)

        def u(time):
            return (vectors * np.exp(-1j * energies * time)) @ vectors.T

        c = orientation_tensor(dipoles)
        for i, tau in enumerate(grid):
            for j, t in enumerate(grid):
                times = ((t_w, tau + t_w + t), (tau + t_w, t_w + t), (tau, t), (-t, tau))
                factors = lineshape_factors(tau, t_w, t, p)
                for r, (t1, t2), f in zip((got.r1, got.r2, got.r3, got.r4), times, factors):
                    expected = np.einsum("abcd,ba,cd->", c, u(t1).conj(), u(t2)) * f
                    assert r[i, j] == pytest.approx(expected, abs=1e-8)

    def test_displaced_sum_matches_naive_quadruple_sum(self, make_ring):
        n = 4
        model = make_ring(n, 300.0, energies=[0.0, 50.0, -30.0, 10.0])
        bath = build_phonon_bath(n, S=0.5)
        p = BathLineshapeParams()
        dipoles = _unit_vectors(n, 8)
        grid = np.arange(0.0, 8.0, STEP)
        t_w = 4.0
        table = build_amplitude_table(model, bath, table_config(2 * grid[-1] + t_w, STEP))
        assert table.displaced
        got = response_functions(table, dipoles, p, t_w, grid, grid)

        rev = reversed_momentum_index(n)

        def at(time):
            i = int(round(abs(time) / STEP))
            alpha, lam = table.alpha_table[:, :, i], table.lambda_table[:, :, :, i]
            if time < 0:
                return alpha.conj(), lam[:, :, rev].conj()
            return alpha, lam

        c = orientation_tensor(dipoles)
        omega = table.omega_q
        for i, tau in enumerate(grid):
            for j, t in enumerate(grid):
                pathways = (
                    (t_w, tau + t_w + t, t),
                    (tau + t_w, t_w + t, t),
                    (tau, t, t_w + t),
                    (-t, tau, -t_w),
                )
                factors = lineshape_factors(tau, t_w, t, p)
                for r, (t1, t2, t_ph), f in zip((got.r1, got.r2, got.r3, got.r4), pathways, factors):
                    a1, l1 = at(t1)
                    a2, l2 = at(t2)
                    phase = np.exp(1j * omega * t_ph)
                    total = 0.0j
                    for m, m1, m2, m3 in itertools.product(range(n), repeat=4):
                        bra, ket = l1[m, m1], l2[m3, m2]
                        total += (
                            c[m, m1, m2, m3]
                            * a1[m, m1].conjugate()
                            * a2[m3, m2]
                            * np.exp(-0.5 * np.sum(np.abs(bra) ** 2) - 0.5 * np.sum(np.abs(ket) ** 2))
                            * np.exp(np.sum(bra.conj() * ket * phase))
                        )
                    assert r[i, j] == pytest.approx(total * f, rel=1e-10, abs=1e-13)

    def test_average_responses(self, two_level):
        doubled = ResponseGrid(
            two_level.tau_grid, two_level.t_grid, 0.0,
            2 * two_level.r1, 2 * two_level.r2, 2 * two_level.r3, 2 * two_level.r4, n_members=3,
        )
        mean = average_responses([two_level, doubled])
        assert mean.n_members == 4
        assert np.allclose(mean.r3, 1.75 * two_level.r3)
        with pytest.raises(ValueError):
            average_responses([])

    def test_grid_validation(self, two_level_table):
        dipole = np.array([[1.0, 0.0, 0.0]])
        grid = np.arange(5) * STEP
        with pytest.raises(ValueError, match="uniform"):
            response_functions(two_level_table, dipole, NO_BATH, 0.0, np.array([0.0, 2.0, 6.0]), grid)
        with pytest.raises(ValueError, match="waiting time"):
            response_functions(two_level_table, dipole, NO_BATH, -2.0, grid, grid)
        with pytest.raises(ValueError, match="not covered"):
            response_functions(two_level_table, dipole, NO_BATH, 0.0, grid, np.arange(500) * STEP)
        with pytest.raises(ValueError, match="dipoles"):
            response_functions(two_level_table, np.zeros((2, 3)), NO_BATH, 0.0, grid, grid)

    def test_table_config(self):
        cfg = table_config(25.0, 2.0)
        assert cfg.record_stride == 40
        assert cfg.t_max == pytest.approx(26.0)
        with pytest.raises(ValueError):
            table_config(10.0, 0.07)


class TestSpectrum:
    def test_two_level_peak_on_diagonal(self, two_level):
        expected = GAP_CM1 / 1670.0
        for kind in ("rephasing", "nonrephasing", "total"):
            spectrum = spectrum_2d(two_level, kind, pad=PAD)
            assert peak_position(spectrum) == pytest.approx((expected, expected), abs=1e-9)

    def test_crop(self, two_level):
        spectrum = spectrum_2d(two_level, pad=PAD, omega_max=1.0)
        assert np.all(np.abs(spectrum.omega_tau) <= 1.0)
        full = spectrum_2d(two_level, pad=PAD, omega_max=None)
        assert full.intensity.shape == (PAD * N_POINTS, PAD * N_POINTS)

    def test_absorption(self, two_level):
        spectrum = spectrum_2d(two_level, pad=PAD)
        absorption = linear_absorption(spectrum)
        assert absorption.max() == pytest.approx(1.0)
        assert spectrum.omega_t[np.argmax(absorption)] == pytest.approx(GAP_CM1 / 1670.0, abs=1e-9)

    def test_absorption_needs_zero_waiting_time(self):
        spectrum = Spectrum2D(np.arange(3.0), np.arange(3.0), np.ones((3, 3)), t_w=100.0)
        with pytest.raises(ValueError, match="T_w = 0"):
            linear_absorption(spectrum)

    def test_invalid_arguments(self, two_level):
        with pytest.raises(ValueError, match="unknown spectrum kind"):
            spectrum_2d(two_level, "absolute")
        with pytest.raises(ValueError):
            spectrum_2d(two_level, pad=0)

    def test_gaussian_fwhm(self):
        x = np.linspace(-5.0, 5.0, 2001)
        sigma = 0.7
        expected = 2.0 * math.sqrt(2.0 * math.log(2.0)) * sigma
        assert fwhm(x, np.exp(-0.5 * (x / sigma) ** 2)) == pytest.approx(expected, rel=1e-4)

    def test_fwhm_needs_both_edges(self):
        x = np.linspace(0.0, 1.0, 11)
        with pytest.raises(ValueError):
            fwhm(x, np.exp(-x))
        with pytest.raises(ValueError):
            fwhm(x, -np.ones_like(x))

    def test_isotropic_peak_widths(self):
        w = np.linspace(-2.0, 2.0, 401)
        x, y = np.meshgrid(w, w, indexing="ij")
        sigma = 0.2
        spectrum = Spectrum2D(w, w, np.exp(-0.5 * (x**2 + y**2) / sigma**2))
        diagonal, anti = diagonal_antidiagonal_widths(spectrum)
        expected = 2.0 * math.sqrt(2.0 * math.log(2.0)) * sigma
        assert diagonal == pytest.approx(expected, rel=1e-2)
        assert anti == pytest.approx(expected, rel=1e-2)

    def test_elongated_peak(self):
        w = np.linspace(-2.0, 2.0, 401)
        x, y = np.meshgrid(w, w, indexing="ij")
        along = (x + y) / math.sqrt(2.0)
        across = (x - y) / math.sqrt(2.0)
        spectrum = Spectrum2D(w, w, np.exp(-0.5 * (along / 0.4) ** 2 - 0.5 * (across / 0.1) ** 2))
        diagonal, anti = diagonal_antidiagonal_widths(spectrum)
        assert diagonal > 3.0 * anti

    def test_realization_responses(self):
        bath = build_phonon_bath(2, S=0.0)
        model = np.array([[0.0, 200.0], [200.0, 0.0]])
        grids = realization_responses(model, bath, _unit_vectors(2, 4), NO_BATH, t_ws=(0.0, 10.0), t_max=20.0)
        assert [g.t_w for g in grids] == [0.0, 10.0]
        assert grids[0].r1.shape == (11, 11)
