import json
import math

import numpy as np
import pytest

from qwalk2d.coins import CoinParams, cclass_coin, grover_coin, grover_params, phase_gate, su2_matrix
from qwalk2d.errors import InconsistencyError, InvalidParameterError
from qwalk2d.spectrum import (
    MomentumGrid,
    band_structure,
    bands_csv,
    circular_distance,
    eigenphases,
    flat_band_check,
    gap_report_json,
    gap_widths,
    shift_diag,
    spectral_match,
    splitstep_u,
    u_tilde,
    wrap_phase,
)

PI = math.pi


def random_params(rng, phi=None):
    a = rng.uniform(-PI, PI, 7)
    if phi is not None:
        a[6] = phi
    return CoinParams.from_angles(*a)


def dft_coin():
    n = np.arange(4)
    return np.exp(2j * np.pi * np.outer(n, n) / 4) / 2


class TestShift:
    def test_origin(self):
        np.testing.assert_array_equal(shift_diag(0, 0), np.eye(4))

    def test_pi(self):
        np.testing.assert_allclose(shift_diag(PI, 0), np.diag([-1, 1, 1, -1]), atol=1e-15)

    def test_unitary(self):
        d = shift_diag(0.37, -2.1)
        np.testing.assert_allclose(d @ d.conj().T, np.eye(4), atol=1e-15)


class TestUTilde:
    def test_contains_plus_minus_one(self):
        rng = np.random.default_rng(0)
        c = cclass_coin(random_params(rng))
        lam = np.linalg.eigvals(u_tilde(c, 0.81, -1.7))
        assert np.min(np.abs(lam - 1)) < 1e-12
        assert np.min(np.abs(lam + 1)) < 1e-12

    def test_grover_at_origin(self):
        np.testing.assert_array_equal(u_tilde(grover_coin(), 0.0, 0.0), grover_coin())

    def test_determinant(self):
        rng = np.random.default_rng(1)
        c = cclass_coin(random_params(rng))
        k, l = 0.4, 2.2
        assert np.linalg.det(u_tilde(c, k, l)) == pytest.approx(np.linalg.det(shift_diag(k, l)) * np.linalg.det(c))

    def test_broadcast(self):
        c = grover_coin()
        ks = np.array([0.1, 0.2])
        ls = np.array([0.3, -0.4])
        u = u_tilde(c, ks, ls)
        np.testing.assert_allclose(u[1], shift_diag(0.2, -0.4) @ c, atol=1e-15)


class TestBandStructure:
    def test_grid_points(self):
        g = MomentumGrid(4, 6)
        np.testing.assert_allclose(g.k, [-PI, -PI / 2, 0, PI / 2])
        assert 0.0 in g.l

    def test_grover_flat_bands(self):
        bs = band_structure(grover_coin(), MomentumGrid(32, 32))
        assert bs.flat_deviation < 1e-12
        assert bs.flat.sum(axis=-1).min() == 2

    def test_random_cclass_flat(self):
        rng = np.random.default_rng(2)
        ok, dev = flat_band_check(cclass_coin(random_params(rng)), MomentumGrid(64, 64), 1e-10)
        assert ok and dev < 1e-10

    def test_single_point_matches_direct(self):
        rng = np.random.default_rng(3)
        c = cclass_coin(random_params(rng))
        bs = band_structure(c, MomentumGrid(2, 2))
        direct = np.sort(wrap_phase(np.angle(np.linalg.eigvals(shift_diag(0.0, 0.0) @ c))))
        np.testing.assert_allclose(bs.omega[1, 1], direct, atol=1e-12)

    def test_sorted_and_unit_modulus(self):
        rng = np.random.default_rng(4)
        bs = band_structure(cclass_coin(random_params(rng)), MomentumGrid(8, 8))
        assert np.all(np.diff(bs.omega, axis=-1) >= 0)
        assert np.all(bs.omega > -PI) and np.all(bs.omega <= PI)

    def test_dft_coin_not_flat(self):
        ok, dev = flat_band_check(dft_coin(), MomentumGrid(16, 16), 1e-10)
        assert not ok
        # oracle: at a generic point no eigenvalue of the 4x4 block equals +-1
        lam = np.linalg.eigvals(shift_diag(0.3, 1.1) @ dft_coin())
        assert min(np.abs(lam - 1).min(), np.abs(lam + 1).min()) > 1e-3
        assert dev > 1e-3

    def test_zero_tolerance_fails(self):
        ok, _ = flat_band_check(cclass_coin(CoinParams.from_angles(0.3, 0.2, 0.4, 1.0, -0.5, 0.9, 0.1)),
                                MomentumGrid(8, 8), 0.0)
        assert not ok

    def test_negative_tolerance_rejected(self):
        with pytest.raises(InvalidParameterError):
            flat_band_check(grover_coin(), MomentumGrid(4, 4), -1.0)

    def test_periodicity_at_seam(self):
        rng = np.random.default_rng(5)
        c = cclass_coin(random_params(rng))
        for l in (-2.0, 0.5):
            a = eigenphases(u_tilde(c, -PI, l))
            b = eigenphases(u_tilde(c, PI, l))
            np.testing.assert_allclose(np.sort(np.exp(1j * a)), np.sort(np.exp(1j * b)), atol=1e-12)

    def test_nonflat_pair_sums_to_zero(self):
        rng = np.random.default_rng(6)
        for phi in (0.0, 1.3):
            bs = band_structure(cclass_coin(random_params(rng, phi)), MomentumGrid(16, 16))
            nf = bs.nonflat
            assert np.abs(wrap_phase(nf[..., 0] + nf[..., 1])).max() < 1e-10


class TestGaps:
    def test_gapless_on_diagonal(self):
        for d in (0.2, PI / 4, 1.0, 2.5):
            g0, gp = gap_widths(band_structure(cclass_coin(grover_params(d)), MomentumGrid(64, 64)))
            assert g0 < 1e-6 and gp < 1e-6

    def test_gapped_strong_trapping(self):
        p = grover_params().replace(delta1=PI / 10, delta2=4 * PI / 10)
        g0, gp = gap_widths(band_structure(cclass_coin(p), MomentumGrid(64, 64)))
        assert g0 > 0.5 and gp > 0.5

    def test_swap_coin_gapless(self):
        # coin W: eigenvalues e^{-ik}, e^{ik} (L, R decouple) and +-1 from the D-U block
        c = cclass_coin(CoinParams.from_angles(0, 0, 0, 0, 0, 0, 0))
        g = MomentumGrid(16, 16)
        bs = band_structure(c, g)
        K, _ = g.mesh()
        closed = np.sort(np.stack([-K, K], axis=-1), axis=-1)
        nf = np.sort(bs.nonflat, axis=-1)
        assert circular_distance(nf, closed).max() < 1e-12
        g0, gp = gap_widths(bs)
        assert g0 < 1e-12 and gp < 1e-12

    def test_non_trapping_coin_rejected(self):
        with pytest.raises(InconsistencyError):
            gap_widths(band_structure(dft_coin(), MomentumGrid(8, 8)))

    def test_exports(self):
        bs = band_structure(grover_coin(), MomentumGrid(4, 4))
        rows = bands_csv(bs).splitlines()
        assert rows[0].split(",")[:3] == ["k", "l", "omega1"]
        assert len(rows) == 17
        rep = json.loads(gap_report_json(bs))
        assert set(rep) >= {"gap0", "gapPi", "tol", "grid"}


class TestSplitStep:
    def test_identity(self):
        np.testing.assert_allclose(splitstep_u(np.eye(2), np.eye(2), 0, 0), np.eye(2), atol=1e-15)

    def test_unitary(self):
        rng = np.random.default_rng(7)
        p = random_params(rng)
        u = splitstep_u(su2_matrix(p.c1), su2_matrix(p.c2), 0.3, -1.2)
        np.testing.assert_allclose(u @ u.conj().T, np.eye(2), atol=1e-14)

    def test_plus_minus_pair_iff_unit_determinant(self):
        rng = np.random.default_rng(8)
        p = random_params(rng)
        c1, c2 = su2_matrix(p.c1), su2_matrix(p.c2)
        w = np.angle(np.linalg.eigvals(splitstep_u(c1, c2, 0.7, 0.2)))
        assert abs(wrap_phase(w.sum())) < 1e-12
        chi = 0.9
        w = np.angle(np.linalg.eigvals(splitstep_u(np.exp(1j * chi / 2) * c1, c2, 0.7, 0.2)))
        assert abs(wrap_phase(w.sum()) - chi) < 1e-12


class TestSpectralMatch:
    def test_random_phi_zero(self):
        rng = np.random.default_rng(9)
        for _ in range(5):
            assert spectral_match(random_params(rng, 0.0), MomentumGrid(32, 32)) < 1e-10

    def test_phi_enters_by_conjugation(self):
        # U_phi = P U_0 P^dagger, so the spectrum cannot depend on phi
        rng = np.random.default_rng(10)
        p = random_params(rng, 0.0)
        q = p.replace(phi=PI)
        for k, l in [(0.3, 1.2), (-2.0, 0.4)]:
            u0 = u_tilde(cclass_coin(p), k, l)
            up = u_tilde(cclass_coin(q), k, l)
            np.testing.assert_allclose(up, phase_gate(PI) @ u0 @ phase_gate(-PI), atol=1e-14)
        assert spectral_match(q, MomentumGrid(32, 32)) < 1e-10

    def test_identity_blocks(self):
        p = CoinParams.from_angles(0, 0, 0, 0, 0, 0, 0)
        g = MomentumGrid(8, 8)
        assert spectral_match(p, g) < 1e-12
        # split-step with identity coins: eigenphases are +-k
        for k in g.k:
            w = np.sort(np.angle(np.linalg.eigvals(splitstep_u(np.eye(2), np.eye(2), k, 0.3))))
            np.testing.assert_allclose(np.sort(circular_distance(w, 0)), [abs(k)] * 2, atol=1e-12)
