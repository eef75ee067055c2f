import math

import numpy as np
import pytest

from polaring.errors import ModelError
from polaring.model.bath import build_phonon_bath, momentum_grid, reversed_momentum_index
from polaring.model.disorder import DisorderKind, DisorderSpec, sample_disorder
from polaring.model.exciton import CouplingParams, ExcitonMatrix, build_exciton_matrix, dipole_coupling
from polaring.model.geometry import build_geometry
from polaring.units import CM1_TO_RAD_PER_FS


def _angle_deg(a, b):
    return math.degrees(math.acos(np.clip(np.dot(a, b), -1.0, 1.0)))


class TestGeometry:
    def test_sites_on_circle(self, geometry):
        assert np.allclose(np.linalg.norm(geometry.positions[:, :2], axis=1), 23.0)
        assert np.allclose(geometry.positions[:, 2], 0.0)
        assert geometry.angular_positions[0] == pytest.approx(0.0)

    def test_neighbour_distances_alternate(self, geometry):
        d = np.linalg.norm(np.roll(geometry.positions, -1, axis=0) - geometry.positions, axis=1)
        assert d[0::2] == pytest.approx(np.full(8, 9.1), abs=0.1)
        assert d[1::2] == pytest.approx(np.full(8, 8.9), abs=0.1)
        assert np.all(d[0::2] > d[1::2])

    def test_dipole_angles(self, geometry):
        d = geometry.dipoles
        assert np.allclose(np.linalg.norm(d, axis=1), 1.0)
        for i in range(0, 16, 2):
            assert _angle_deg(d[i], d[i + 1]) == pytest.approx(167.5, abs=1e-6)
            assert _angle_deg(d[i + 1], d[(i + 2) % 16]) == pytest.approx(147.5, abs=1e-6)

    def test_chord_and_arc_distances(self, geometry):
        chord = geometry.chord_distances_nm(8)
        arc = geometry.arc_distances_nm(8)
        assert chord[8] == 0.0 and arc[8] == 0.0
        assert chord[0] == pytest.approx(4.6)
        assert arc[0] == pytest.approx(2.3 * math.pi)
        assert np.all(arc >= chord - 1e-12)

    @pytest.mark.parametrize("n", [3, 2, 15])
    def test_bad_site_count(self, n):
        with pytest.raises(ModelError):
            build_geometry(n_sites=n)

    def test_chords_longer_than_ring(self):
        with pytest.raises(ModelError, match="circumference"):
            build_geometry(radius=5.0)


class TestExcitonMatrix:
    def test_symmetric_with_zero_diagonal(self, clean_model):
        k = clean_model.k
        assert k.shape == (16, 16)
        assert np.array_equal(k, k.T)
        assert np.all(np.diag(k) == 0.0)

    def test_bond_alternation(self, clean_model):
        k = clean_model.k
        for i in range(16):
            expected = 594.0 if i % 2 == 0 else 491.0
            assert k[i, (i + 1) % 16] == expected

    def test_long_range_dipole_coupling(self, geometry, clean_model):
        d, r = geometry.dipoles, geometry.positions
        vec = r[3] - r[0]
        dist = np.linalg.norm(vec)
        expected = 640725.0 * (d[0] @ d[3] / dist**3 - 3.0 * (d[0] @ vec) * (d[3] @ vec) / dist**5)
        assert clean_model.k[0, 3] == pytest.approx(expected, rel=1e-12)
        assert np.allclose(dipole_coupling(geometry, 640725.0), dipole_coupling(geometry, 640725.0).T)

    def test_disorder_shifts(self, geometry):
        site = np.arange(16.0)
        bond = np.full(16, 10.0)
        model = build_exciton_matrix(geometry, shifts=(site, bond))
        assert np.array_equal(np.diag(model.k), site)
        assert model.k[0, 1] == 604.0
        assert model.k[15, 0] == 501.0

    def test_baseline_and_shift(self, geometry):
        model = build_exciton_matrix(geometry, CouplingParams(site_energy_baseline=12500.0))
        assert np.all(np.diag(model.k) == 12500.0)
        assert model.baseline == 12500.0
        shifted = model.shifted(-12500.0)
        assert np.all(np.diag(shifted.k) == 0.0)
        assert shifted.baseline == 0.0

    def test_rejects_asymmetric(self):
        with pytest.raises(ModelError, match="symmetric"):
            ExcitonMatrix(np.array([[0.0, 1.0], [2.0, 0.0]]))

    def test_rejects_non_finite(self):
        with pytest.raises(ModelError):
            ExcitonMatrix(np.array([[np.nan, 0.0], [0.0, 0.0]]))

    def test_wrong_shift_length(self, geometry):
        with pytest.raises(ModelError):
            build_exciton_matrix(geometry, shifts=(np.zeros(15), np.zeros(16)))

    def test_rad_per_fs(self, clean_model):
        assert clean_model.in_rad_per_fs()[0, 1] == pytest.approx(594.0 * CM1_TO_RAD_PER_FS)

    def test_mean_coupling(self):
        assert CouplingParams().mean_coupling == 542.5


class TestDisorder:
    def test_reproducible(self):
        spec = DisorderSpec(sigma_e=100.0, sigma_j=50.0, seed=7, realization_index=3)
        a = sample_disorder(spec, 16)
        b = sample_disorder(spec, 16)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_realizations_differ(self):
        spec = DisorderSpec(sigma_e=100.0, seed=7)
        first, _ = sample_disorder(spec, 16)
        second, _ = sample_disorder(spec.for_realization(1), 16)
        assert not np.array_equal(first, second)

    def test_streams_independent_of_other_width(self):
        # site shifts must not depend on whether bonds are disordered
        only_sites, _ = sample_disorder(DisorderSpec(sigma_e=100.0, seed=3), 16)
        both, _ = sample_disorder(DisorderSpec(sigma_e=100.0, sigma_j=80.0, seed=3), 16)
        assert np.array_equal(only_sites, both)

    def test_statistics(self):
        n = 200_000
        site, bond = sample_disorder(DisorderSpec(sigma_e=100.0, sigma_j=100.0, seed=11), n)
        assert np.mean(site) == pytest.approx(0.0, abs=5 * 100.0 / math.sqrt(n))
        assert np.std(site) == pytest.approx(100.0, rel=0.01)
        assert abs(np.corrcoef(site, bond)[0, 1]) < 5.0 / math.sqrt(n)

    def test_clean_is_zero(self):
        site, bond = sample_disorder(DisorderSpec(), 16)
        assert np.all(site == 0.0) and np.all(bond == 0.0)

    def test_negative_width_rejected(self):
        with pytest.raises(ValueError):
            DisorderSpec(sigma_e=-1.0)

    @pytest.mark.parametrize(
        "kind, expected",
        [
            (DisorderKind.DIAGONAL, (300.0, 0.0)),
            (DisorderKind.OFF_DIAGONAL, (0.0, 300.0)),
            (DisorderKind.BOTH, (300.0, 300.0)),
            ("off_diagonal", (0.0, 300.0)),
        ],
    )
    def test_of_kind(self, kind, expected):
        spec = DisorderSpec.of_kind(kind, 300.0)
        assert (spec.sigma_e, spec.sigma_j) == expected


class TestPhononBath:
    def test_momentum_grid(self):
        q = momentum_grid(16)
        assert q[-1] == pytest.approx(math.pi)
        assert q[7] == pytest.approx(0.0)
        assert np.allclose(np.diff(q), 2 * math.pi / 16)

    @pytest.mark.parametrize("n", [5, 16])
    def test_reversed_index(self, n):
        q = momentum_grid(n)
        rev = reversed_momentum_index(n)
        assert np.allclose(np.exp(1j * q[rev]), np.exp(-1j * q))

    def test_dispersion_range(self, bath):
        assert bath.omega_q.min() == pytest.approx(1670.0 * 0.5)
        assert bath.omega_q.max() == pytest.approx(1670.0 * 1.5)

    @pytest.mark.parametrize("s, w", [(0.5, 0.5), (1.5, 0.2), (1.0, 0.9)])
    def test_reorganization_energy(self, s, w):
        bath = build_phonon_bath(16, W=w, S=s)
        assert bath.reorganization_energy == pytest.approx(s * 1670.0, rel=1e-12)
        assert np.all(bath.g_q > 0.0)

    def test_couplings_even_in_q(self, bath):
        rev = reversed_momentum_index(16)
        assert np.allclose(bath.g_q, bath.g_q[rev])
        assert np.allclose(bath.omega_q, bath.omega_q[rev])

    def test_einstein_limit(self):
        bath = build_phonon_bath(16, W=0.0, S=0.5)
        assert np.allclose(bath.omega_q, 1670.0)
        assert np.allclose(bath.g_q**2, 0.5)

    def test_uncoupled(self, uncoupled_bath):
        assert not uncoupled_bath.is_coupled
        assert uncoupled_bath.reorganization_energy == 0.0

    def test_spectral_density_support(self, bath):
        inside = bath.spectral_density(np.array([1670.0]))
        outside = bath.spectral_density(np.array([600.0, 2600.0]))
        assert inside[0] > 0.0
        assert np.all(outside == 0.0)

    @pytest.mark.parametrize("kwargs", [{"W": 1.5}, {"S": -0.1}, {"omega0": 0.0}])
    def test_invalid(self, kwargs):
        with pytest.raises(ModelError):
            build_phonon_bath(16, **kwargs)
