"""Spatial search for a single marked vertex on an L x M torus."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .coins import CoinParams, cclass_coin, marked_coin
from .errors import ConfigError
from .lattice import CoinField, Torus, step

__all__ = [
    "SearchConfig",
    "SearchRun",
    "measuring_time",
    "build_search_coinfield",
    "uniform_state",
    "run_search",
    "compare_search",
]


def measuring_time(t: Torus) -> int:
    """round(sqrt(2 L M)); 40 for the 10 x 80 torus."""
    return max(1, round(math.sqrt(2 * t.L * t.M)))


@dataclass(frozen=True)
class SearchConfig:
    """
    Search setup. ``steps`` is the trace length and defaults to the
    measuring time; pass a larger value to follow the curve beyond it.
    """

    torus: Torus
    coin: CoinParams
    marked: tuple[int, int] = (0, 0)
    measure_at: int | None = None
    steps: int | None = None

    def __post_init__(self) -> None:
        if not self.torus.contains(*self.marked):
            raise ConfigError(
                f"marked vertex {self.marked} outside {self.torus.L}x{self.torus.M} torus", field="marked"
            )
        if self.measure_at is not None and self.measure_at < 1:
            raise ConfigError("measuring time must be >= 1", field="measure_at")
        if self.steps is not None and self.steps < 0:
            raise ConfigError("steps must be >= 0", field="steps")

    @property
    def T(self) -> int:
        return self.measure_at if self.measure_at is not None else measuring_time(self.torus)

    @property
    def n_steps(self) -> int:
        return self.steps if self.steps is not None else self.T


@dataclass
class SearchRun:
    config: SearchConfig
    probability: NDArray[np.float64]  # marked-vertex probability at t = 0..n_steps

    @property
    def at_measuring_time(self) -> float:
        return float(self.probability[self.config.T])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "p_marked"])
        for t, p in enumerate(self.probability):
            w.writerow([t, repr(float(p))])
        return buf.getvalue()


def build_search_coinfield(cfg: SearchConfig) -> CoinField:
    """Bulk coin everywhere, -sigma_x (x) sigma_x at the marked vertex."""
    return CoinField(cclass_coin(cfg.coin), {tuple(cfg.marked): marked_coin()})


def uniform_state(t: Torus) -> NDArray[np.complex128]:
    """Equal superposition of all L*M*4 basis states."""
    return np.full((t.L, t.M, 4), 1.0 / math.sqrt(4 * t.sites), dtype=np.complex128)


def run_search(cfg: SearchConfig, coin_field: CoinField | None = None) -> SearchRun:
    """
    Evolve the uniform state and record the marked-vertex probability each step.

    ``coin_field`` overrides the default search field (used to check the
    unmarked baseline).
    """
    cf = coin_field or build_search_coinfield(cfg)
    if cfg.n_steps < cfg.T:
        raise ConfigError(f"steps ({cfg.n_steps}) shorter than measuring time ({cfg.T})", field="steps")
    psi = uniform_state(cfg.torus)
    x, y = cfg.marked
    probs = np.empty(cfg.n_steps + 1)
    for t in range(cfg.n_steps + 1):
        probs[t] = float(np.sum(np.abs(psi[x, y]) ** 2))
        if t < cfg.n_steps:
            psi = step(psi, cf)
    return SearchRun(cfg, probs)


def compare_search(a: SearchConfig, b: SearchConfig) -> dict:
    """
    Run two searches on the same torus and marked vertex.

    Returns a report with both traces and pB / pA at the measuring time.
    """
    if a.torus != b.torus:
        raise ConfigError(f"tori differ: {a.torus} vs {b.torus}", field="torus")
    if tuple(a.marked) != tuple(b.marked):
        raise ConfigError("marked vertices differ", field="marked")
    ra, rb = run_search(a), run_search(b)
    pa, pb = ra.at_measuring_time, rb.at_measuring_time
    return {
        "config_a": _config_dict(a),
        "config_b": _config_dict(b),
        "pA_at_T": pa,
        "pB_at_T": pb,
        "ratio": pb / pa,
        "trace_a": ra.probability.tolist(),
        "trace_b": rb.probability.tolist(),
    }


def _config_dict(cfg: SearchConfig) -> dict:
    return {
        "L": cfg.torus.L,
        "M": cfg.torus.M,
        "coin": cfg.coin.to_dict(),
        "marked": list(cfg.marked),
        "T": cfg.T,
        "steps": cfg.n_steps,
    }


def comparison_json(report: dict) -> str:
    keys = ("config_a", "config_b", "pA_at_T", "pB_at_T", "ratio")
    return json.dumps({k: report[k] for k in keys}, indent=2, sort_keys=True)
