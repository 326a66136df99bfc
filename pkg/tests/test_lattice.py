import numpy as np
import pytest

from qwalk2d.coins import CoinParams, cclass_coin, grover_coin, swap_gate
from qwalk2d.errors import ConfigError, InvalidParameterError, InvalidStateError
from qwalk2d.lattice import (
    CoinField,
    Torus,
    dump_state_csv,
    evolve,
    load_state_csv,
    localized_state,
    norm,
    plane_wave,
    position_distribution,
    step,
    translate,
)
from qwalk2d.spectrum import u_tilde


def random_state(rng, t):
    psi = rng.normal(size=(t.L, t.M, 4)) + 1j * rng.normal(size=(t.L, t.M, 4))
    return psi / np.linalg.norm(psi)


def random_coin(rng):
    return cclass_coin(CoinParams.from_angles(*rng.uniform(-np.pi, np.pi, 7)))


def dense_step_matrix(t, coin):
    """Explicit (4LM x 4LM) walk operator built from the displacement table."""
    n = t.L * t.M * 4
    idx = lambda x, y, c: ((x % t.L) * t.M + (y % t.M)) * 4 + c
    moves = [(-1, 0), (0, -1), (0, 1), (1, 0)]
    u = np.zeros((n, n), dtype=complex)
    for x in range(t.L):
        for y in range(t.M):
            for c_in in range(4):
                for c_out in range(4):
                    dx, dy = moves[c_out]
                    u[idx(x + dx, y + dy, c_out), idx(x, y, c_in)] += coin[c_out, c_in]
    return u


class TestTorus:
    @pytest.mark.parametrize("L,M", [(1, 5), (5, 1), (0, 0)])
    def test_minimum_size(self, L, M):
        with pytest.raises(ConfigError):
            Torus(L, M)


class TestLocalizedState:
    def test_basis_state(self):
        t = Torus(5, 4)
        psi = localized_state(t, (0, 0), [1, 0, 0, 0])
        assert norm(psi) == 1
        assert np.count_nonzero(psi) == 1

    def test_grover_escaping_vector(self):
        psi = localized_state(Torus(5, 5), (2, 2), np.array([1, -1, -1, 1]) / 2)
        assert abs(norm(psi) - 1) < 1e-15

    def test_non_unit_rejected(self):
        with pytest.raises(InvalidStateError):
            localized_state(Torus(5, 5), (0, 0), [0.9, 0, 0, 0])


class TestStep:
    def test_swap_coin_moves_left(self):
        t = Torus(6, 5)
        psi = localized_state(t, (3, 2), [1, 0, 0, 0])
        out = step(psi, swap_gate())
        assert out[2, 2, 0] == 1
        assert np.count_nonzero(out) == 1

    @pytest.mark.parametrize("c,site", [(1, (3, 1)), (2, (3, 3)), (3, (4, 2))])
    def test_displacement_table(self, c, site):
        t = Torus(6, 5)
        v = np.zeros(4)
        v[c] = 1
        out = step(localized_state(t, (3, 2), v), np.eye(4))
        assert out[site + (c,)] == 1

    def test_matches_dense_operator(self):
        rng = np.random.default_rng(1)
        t = Torus(4, 3)
        coin = random_coin(rng)
        psi = random_state(rng, t)
        dense = dense_step_matrix(t, coin) @ psi.reshape(-1)
        np.testing.assert_allclose(step(psi, coin).reshape(-1), dense, atol=1e-14)

    def test_norm_over_100_steps(self):
        rng = np.random.default_rng(2)
        t = Torus(9, 7)
        psi = evolve(random_state(rng, t), random_coin(rng), 100)
        assert abs(norm(psi) - 1) < 1e-10

    def test_norm_drift_1000_steps(self):
        rng = np.random.default_rng(3)
        t = Torus(12, 10)
        psi = evolve(random_state(rng, t), random_coin(rng), 1000)
        assert abs(norm(psi) - 1) < 1e-9

    def test_plane_wave_eigenvector(self):
        rng = np.random.default_rng(4)
        t = Torus(8, 6)
        coin = random_coin(rng)
        k, l = 2 * np.pi * 3 / t.L, 2 * np.pi * 5 / t.M
        lam, vecs = np.linalg.eig(u_tilde(coin, k, l))
        for j in range(4):
            psi = plane_wave(t, k, l, vecs[:, j])
            np.testing.assert_allclose(step(psi, coin), lam[j] * psi, atol=1e-10)

    def test_translation_covariance(self):
        rng = np.random.default_rng(5)
        t = Torus(7, 9)
        coin = random_coin(rng)
        psi = random_state(rng, t)
        a = evolve(translate(psi, 2, -3), coin, 15)
        b = translate(evolve(psi, coin, 15), 2, -3)
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_inhomogeneous_field_matches_full_array(self):
        rng = np.random.default_rng(6)
        t = Torus(5, 4)
        bulk, special = random_coin(rng), random_coin(rng)
        cf = CoinField(bulk, {(1, 2): special})
        arr = np.broadcast_to(bulk, (5, 4, 4, 4)).copy()
        arr[1, 2] = special
        psi = random_state(rng, t)
        np.testing.assert_allclose(step(psi, cf), step(psi, CoinField.from_array(arr)), atol=1e-14)

    def test_non_unitary_coin_rejected(self):
        with pytest.raises(InvalidParameterError):
            CoinField(2 * np.eye(4))

    def test_batch_axis(self):
        rng = np.random.default_rng(8)
        t = Torus(5, 5)
        coin = random_coin(rng)
        batch = np.stack([random_state(rng, t) for _ in range(3)])
        out = step(batch, coin)
        for i in range(3):
            np.testing.assert_array_equal(out[i], step(batch[i], coin))


class TestEvolve:
    def test_zero_steps_identity(self):
        rng = np.random.default_rng(9)
        t = Torus(4, 4)
        psi = random_state(rng, t)
        out = evolve(psi, grover_coin(), 0)
        np.testing.assert_array_equal(out, psi)
        assert out is not psi

    def test_negative_steps_rejected(self):
        with pytest.raises(InvalidParameterError):
            evolve(np.zeros((3, 3, 4)), grover_coin(), -1)

    def test_performance_case(self):
        t = Torus(10, 80)
        psi = localized_state(t, (0, 0), [1, 0, 0, 0])
        out = evolve(psi, grover_coin(), 40)
        assert abs(norm(out) - 1) < 1e-12


class TestDistribution:
    def test_localized_delta(self):
        t = Torus(5, 6)
        p = position_distribution(localized_state(t, (2, 3), [0, 0.6, 0.8j, 0]))
        assert p[2, 3] == pytest.approx(1.0)
        assert p.sum() == pytest.approx(1.0)

    def test_grover_trapping(self):
        t = Torus(41, 41)
        psi = evolve(localized_state(t, (0, 0), [1, 0, 0, 0]), grover_coin(), 40)
        p = position_distribution(psi)
        assert abs(p.sum() - 1) < 1e-10
        assert p[0, 0] > 0.1


def test_state_csv_round_trip():
    rng = np.random.default_rng(10)
    t = Torus(3, 4)
    psi = random_state(rng, t)
    text = dump_state_csv(psi, steps=7)
    assert text.splitlines()[0] == "# L=3 M=4 steps=7"
    assert text.splitlines()[1].startswith("x,y,re_L,im_L")
    # y outermost, x inner
    assert [r.split(",")[:2] for r in text.splitlines()[2:5]] == [["0", "0"], ["1", "0"], ["2", "0"]]
    back, steps = load_state_csv(text)
    assert steps == 7
    np.testing.assert_array_equal(back, psi)
