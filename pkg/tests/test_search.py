import json
import math

import numpy as np
import pytest

from qwalk2d.coins import cclass_coin, transformed_grover_params
from qwalk2d.errors import ConfigError
from qwalk2d.lattice import CoinField, Torus, norm, step
from qwalk2d.search import (
    SearchConfig,
    build_search_coinfield,
    compare_search,
    comparison_json,
    measuring_time,
    run_search,
    uniform_state,
)

MODIFIED = transformed_grover_params(31 * math.pi / 90)


@pytest.fixture(scope="module")
def long_torus():
    t = Torus(10, 80)
    return compare_search(SearchConfig(t, transformed_grover_params()), SearchConfig(t, MODIFIED))


def test_measuring_time():
    assert measuring_time(Torus(10, 80)) == 40
    assert measuring_time(Torus(20, 20)) == 28


def test_transformed_grover_on_long_torus(long_torus):
    assert long_torus["pA_at_T"] == pytest.approx(0.0616, abs=5e-4)


def test_modified_coin_on_long_torus(long_torus):
    assert long_torus["pB_at_T"] == pytest.approx(0.0827, abs=5e-4)
    assert long_torus["ratio"] == pytest.approx(0.0827 / 0.0616, rel=0.02)


def test_trace_starts_uniform(long_torus):
    assert long_torus["trace_a"][0] == pytest.approx(1 / 800, abs=1e-15)
    assert len(long_torus["trace_a"]) == 41


def test_comparison_json(long_torus):
    d = json.loads(comparison_json(long_torus))
    assert d["config_a"]["T"] == 40
    assert "trace_a" not in d


def test_square_torus_amplifies():
    t = Torus(20, 20)
    run = run_search(SearchConfig(t, transformed_grover_params()))
    assert run.at_measuring_time > 10 / t.sites


def test_translation_covariance():
    t = Torus(10, 16)
    a = run_search(SearchConfig(t, MODIFIED, (0, 0), steps=30))
    b = run_search(SearchConfig(t, MODIFIED, (3, 7), steps=30))
    np.testing.assert_allclose(a.probability, b.probability, atol=1e-14)


def test_unmarked_baseline_flat():
    # the uniform state is a +1 eigenvector of any homogeneous coin whose rows sum to one
    t = Torus(8, 12)
    cfg = SearchConfig(t, transformed_grover_params(), steps=20)
    run = run_search(cfg, CoinField(cclass_coin(cfg.coin)))
    np.testing.assert_allclose(run.probability, 1 / t.sites, atol=1e-14)


def test_norm_preserved():
    t = Torus(10, 14)
    cf = build_search_coinfield(SearchConfig(t, MODIFIED, (4, 5)))
    psi = uniform_state(t)
    for _ in range(200):
        psi = step(psi, cf)
    assert abs(norm(psi) - 1) < 1e-10


def test_trace_beyond_measuring_time():
    run = run_search(SearchConfig(Torus(10, 80), MODIFIED, steps=80))
    assert len(run.probability) == 81
    assert run.at_measuring_time == pytest.approx(0.0827, abs=5e-4)
    rows = run.to_csv().splitlines()
    assert rows[0] == "t,p_marked" and len(rows) == 82


class TestSearchErrors:
    def test_marked_outside(self):
        with pytest.raises(ConfigError, match="marked"):
            SearchConfig(Torus(4, 4), MODIFIED, (4, 0))

    def test_steps_shorter_than_T(self):
        with pytest.raises(ConfigError):
            run_search(SearchConfig(Torus(4, 4), MODIFIED, steps=2))

    def test_compare_needs_same_torus(self):
        with pytest.raises(ConfigError):
            compare_search(SearchConfig(Torus(4, 4), MODIFIED), SearchConfig(Torus(4, 5), MODIFIED))
