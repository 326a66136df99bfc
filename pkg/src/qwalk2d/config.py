"""
Experiment configuration: JSON parsing, validation and execution.

A config is a JSON object with an ``experiment`` key naming one of
``spectrum``, ``trapmap``, ``topomap``, ``evolve``, ``search`` or
``spectral-match``. Coin blocks are flat objects with the keys alpha1,
beta1, delta1, alpha2, beta2, delta2 and phi, all in radians. Every
field is validated before any computation starts; unknown keys are
rejected.
"""

from __future__ import annotations

import json
import math
import os
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .coins import COIN_KEYS, CoinParams, cclass_coin
from .errors import ConfigError, InvalidParameterError, QWalkError
from .lattice import Torus, dump_state_csv, evolve, localized_state, position_distribution
from .search import SearchConfig, comparison_json, compare_search, measuring_time, run_search
from .spectrum import MomentumGrid, band_structure, bands_csv, flat_band_check, gap_report_json, spectral_match
from .topology import StripConfig, TopoSettings, detect_edge_states, strip_spectrum, topo_map
from .trapping import trap_map

__all__ = ["ExperimentConfig", "parse_config", "run_experiment", "EXPERIMENTS", "DEFAULTS_VERSION"]

DEFAULTS_VERSION = 1
PI = math.pi
HALF_PI = math.pi / 2
SLICE = {"alpha1": HALF_PI, "beta1": HALF_PI, "alpha2": HALF_PI, "beta2": HALF_PI, "phi": PI}
DELTA_GRID = {"start": 0.0, "stop": PI, "n": 46}


@dataclass
class ExperimentConfig:
    kind: str
    params: dict[str, Any]
    out: str | None = None
    raw: dict[str, Any] = field(default_factory=dict)

    def echo(self) -> dict[str, Any]:
        """Normalized config with all defaults filled, JSON-serializable."""
        d = {"experiment": self.kind, **self.params}
        if self.out is not None:
            d["out"] = self.out
        return d


# field validators ----------------------------------------------------------


def _number(v: Any, name: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"expected a finite number, got {v!r}", field=name)
    return float(v)


def _integer(v: Any, name: str, lo: int | None = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"expected an integer, got {v!r}", field=name)
    if lo is not None and v < lo:
        raise ConfigError(f"must be >= {lo}, got {v}", field=name)
    return v


def _pair(v: Any, name: str, lo: int | None = None) -> list[int]:
    if not isinstance(v, list) or len(v) != 2:
        raise ConfigError(f"expected a list of two integers, got {v!r}", field=name)
    return [_integer(x, f"{name}[{i}]", lo) for i, x in enumerate(v)]


def _object(v: Any, name: str, allowed: set[str]) -> dict:
    if not isinstance(v, dict):
        raise ConfigError(f"expected an object, got {v!r}", field=name)
    unknown = set(v) - allowed
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} (angles are radians only)", field=name)
    return v


def _coin(v: Any, name: str) -> dict[str, float]:
    obj = _object(v, name, set(COIN_KEYS))
    missing = [k for k in COIN_KEYS if k not in obj]
    if missing:
        raise ConfigError(f"missing keys {missing}", field=name)
    out = {k: _number(obj[k], f"{name}.{k}") for k in COIN_KEYS}
    try:
        CoinParams.from_dict(out)
    except InvalidParameterError as exc:
        raise ConfigError(str(exc), field=name) from exc
    return out


def _fixed(v: Any, name: str) -> dict[str, float]:
    keys = {"alpha1", "beta1", "alpha2", "beta2", "phi"}
    obj = _object(v, name, keys)
    out = dict(SLICE)
    out.update({k: _number(x, f"{name}.{k}") for k, x in obj.items()})
    return out


def _delta_grid(v: Any, name: str) -> dict[str, float]:
    obj = _object(v, name, {"start", "stop", "n"})
    out = dict(DELTA_GRID)
    for k in ("start", "stop"):
        if k in obj:
            out[k] = _number(obj[k], f"{name}.{k}")
    if "n" in obj:
        out["n"] = _integer(obj["n"], f"{name}.n", 1)
    return out


def _delta_pair(v: Any, name: str, default: tuple[float, float]) -> dict[str, float]:
    obj = _object(v, name, {"delta1", "delta2"})
    return {
        "delta1": _number(obj.get("delta1", default[0]), f"{name}.delta1"),
        "delta2": _number(obj.get("delta2", default[1]), f"{name}.delta2"),
    }


def _coin_state(v: Any, name: str) -> list[list[float]]:
    if not isinstance(v, list) or len(v) != 4:
        raise ConfigError("expected 4 components, each a number or [re, im]", field=name)
    out = []
    for i, c in enumerate(v):
        if isinstance(c, list):
            if len(c) != 2:
                raise ConfigError("complex components are [re, im]", field=f"{name}[{i}]")
            out.append([_number(c[0], f"{name}[{i}]"), _number(c[1], f"{name}[{i}]")])
        else:
            out.append([_number(c, f"{name}[{i}]"), 0.0])
    nrm = math.sqrt(sum(a * a + b * b for a, b in out))
    if abs(nrm - 1.0) > 1e-12:
        raise ConfigError(f"coin state must have unit norm, got {nrm:.15g}", field=name)
    return out


# per-experiment schemas ------------------------------------------------------


def _parse_spectrum(d: dict) -> dict:
    _object(d, "config", {"coin", "grid", "tol"})
    if "coin" not in d:
        raise ConfigError("required", field="coin")
    tol = _number(d.get("tol", 1e-10), "tol")
    if tol <= 0:
        raise ConfigError("must be > 0", field="tol")
    return {"coin": _coin(d["coin"], "coin"), "grid": _pair(d.get("grid", [64, 64]), "grid", 2), "tol": tol}


def _parse_trapmap(d: dict) -> dict:
    _object(d, "config", {"fixed", "delta1", "delta2", "T", "torus"})
    p = {
        "fixed": _fixed(d.get("fixed", {}), "fixed"),
        "delta1": _delta_grid(d.get("delta1", {}), "delta1"),
        "delta2": _delta_grid(d.get("delta2", {}), "delta2"),
        "T": _integer(d.get("T", 40), "T", 0),
        "torus": _pair(d.get("torus", [81, 81]), "torus", 2),
    }
    if min(p["torus"]) <= p["T"]:
        raise ConfigError(f"min(L, M) must exceed T={p['T']} to avoid wraparound", field="torus")
    return p


def _parse_topomap(d: dict) -> dict:
    _object(d, "config", {"fixed", "delta1", "delta2", "reference", "partner", "strip", "map"})
    strip = _object(d.get("strip", {}), "strip", {"width_a", "width_b", "nk"})
    settings = _object(d.get("map", {}), "map", set(TopoSettings.__dataclass_fields__))
    map_p = {}
    for k, v in settings.items():
        if isinstance(getattr(TopoSettings(), k), int):
            map_p[k] = _integer(v, f"map.{k}", 1)
        else:
            map_p[k] = _number(v, f"map.{k}")
    return {
        "fixed": _fixed(d.get("fixed", {}), "fixed"),
        "delta1": _delta_grid(d.get("delta1", {}), "delta1"),
        "delta2": _delta_grid(d.get("delta2", {}), "delta2"),
        "reference": _delta_pair(d.get("reference", {}), "reference", (PI / 10, 4 * PI / 10)),
        "partner": _delta_pair(d.get("partner", {}), "partner", (4 * PI / 10, PI / 10)),
        "strip": {
            "width_a": _integer(strip.get("width_a", 20), "strip.width_a", 4),
            "width_b": _integer(strip.get("width_b", 20), "strip.width_b", 4),
            "nk": _integer(strip.get("nk", 201), "strip.nk", 2),
        },
        "map": map_p,
    }


def _parse_evolve(d: dict) -> dict:
    _object(d, "config", {"coin", "torus", "x0", "coin_state", "steps"})
    for req in ("coin", "coin_state"):
        if req not in d:
            raise ConfigError("required", field=req)
    p = {
        "coin": _coin(d["coin"], "coin"),
        "torus": _pair(d.get("torus", [41, 41]), "torus", 2),
        "x0": _pair(d.get("x0", [0, 0]), "x0"),
        "coin_state": _coin_state(d["coin_state"], "coin_state"),
        "steps": _integer(d.get("steps", 40), "steps", 0),
    }
    L, M = p["torus"]
    if not (0 <= p["x0"][0] < L and 0 <= p["x0"][1] < M):
        raise ConfigError("outside torus", field="x0")
    return p


def _parse_search(d: dict) -> dict:
    _object(d, "config", {"L", "M", "coin", "marked", "T", "steps", "compare_coin"})
    for req in ("L", "M", "coin"):
        if req not in d:
            raise ConfigError("required", field=req)
    L, M = _integer(d["L"], "L", 2), _integer(d["M"], "M", 2)
    T = _integer(d.get("T", measuring_time(Torus(L, M))), "T", 1)
    p = {
        "L": L,
        "M": M,
        "coin": _coin(d["coin"], "coin"),
        "marked": _pair(d.get("marked", [0, 0]), "marked"),
        "T": T,
        "steps": _integer(d.get("steps", 2 * T), "steps", 0),
    }
    if not (0 <= p["marked"][0] < L and 0 <= p["marked"][1] < M):
        raise ConfigError("outside torus", field="marked")
    if p["steps"] < T:
        raise ConfigError(f"must be >= T={T}", field="steps")
    if "compare_coin" in d:
        p["compare_coin"] = _coin(d["compare_coin"], "compare_coin")
    return p


def _parse_spectral_match(d: dict) -> dict:
    _object(d, "config", {"coin", "random", "grid", "seed"})
    p = {
        "grid": _pair(d.get("grid", [32, 32]), "grid", 2),
        "random": _integer(d.get("random", 0), "random", 0),
        "seed": _integer(d.get("seed", 0), "seed", 0),
    }
    if "coin" in d:
        p["coin"] = _coin(d["coin"], "coin")
    if "coin" not in p and p["random"] == 0:
        raise ConfigError("give a coin block or a positive number of random coins", field="random")
    return p


EXPERIMENTS: dict[str, Callable[[dict], dict]] = {
    "spectrum": _parse_spectrum,
    "trapmap": _parse_trapmap,
    "topomap": _parse_topomap,
    "evolve": _parse_evolve,
    "search": _parse_search,
    "spectral-match": _parse_spectral_match,
}


def parse_config(text: str) -> ExperimentConfig:
    """
    Parse and validate a JSON experiment config, filling defaults.

    Raises
    ------
    ConfigError
        On malformed JSON (message carries line and column) or on any
        semantic violation (message names the offending field).
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}",
                          field="json") from exc
    if not isinstance(raw, dict):
        raise ConfigError("top level must be an object", field="json")
    kind = raw.get("experiment")
    if kind not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {kind!r}; expected one of {sorted(EXPERIMENTS)}",
                          field="experiment")
    out = raw.get("out")
    if out is not None and not isinstance(out, str):
        raise ConfigError("expected a path string", field="out")
    body = {k: v for k, v in raw.items() if k not in ("experiment", "out")}
    return ExperimentConfig(kind, EXPERIMENTS[kind](body), out, raw)


# execution ---------------------------------------------------------------------


def _linspace(g: dict) -> np.ndarray:
    return np.linspace(g["start"], g["stop"], g["n"])


def _slice_coin(fixed: dict, d1: float, d2: float) -> CoinParams:
    return CoinParams.from_angles(fixed["alpha1"], fixed["beta1"], d1, fixed["alpha2"],
                                  fixed["beta2"], d2, fixed["phi"])


def _run_spectrum(p: dict, threads: int, seed: int) -> dict[str, str]:
    coin = cclass_coin(CoinParams.from_dict(p["coin"]))
    bs = band_structure(coin, MomentumGrid(*p["grid"]))
    return {"bands.csv": bands_csv(bs), "gaps.json": gap_report_json(bs)}


def _run_trapmap(p: dict, threads: int, seed: int) -> dict[str, str]:
    base = _slice_coin(p["fixed"], 0.0, 0.0)
    tm = trap_map(_linspace(p["delta1"]), _linspace(p["delta2"]), base, p["T"], Torus(*p["torus"]), threads)
    return {"trapmap.csv": tm.to_csv(), "trapmap_meta.json": json.dumps(tm.metadata(), indent=2, sort_keys=True)}


def _run_topomap(p: dict, threads: int, seed: int) -> dict[str, str]:
    fixed = p["fixed"]
    ref = _slice_coin(fixed, p["reference"]["delta1"], p["reference"]["delta2"])
    partner = _slice_coin(fixed, p["partner"]["delta1"], p["partner"]["delta2"])
    cfg = StripConfig(ref, partner, p["strip"]["width_a"], p["strip"]["width_b"])
    sp = strip_spectrum(cfg, p["strip"]["nk"], threads)
    edges = detect_edge_states(sp)
    lines = ["k,omega,interface,velocity_sign,weight,gap"]
    lines += [f"{e.k!r},{e.omega!r},{e.interface},{e.velocity_sign},{e.weight!r},{e.gap}" for e in edges]
    tm = topo_map(_linspace(p["delta1"]), _linspace(p["delta2"]), ref, ref,
                  TopoSettings(**p["map"]), threads)
    return {
        "strip_spectrum.csv": sp.to_csv(),
        "edge_states.csv": "\n".join(lines) + "\n",
        "topomap.csv": tm.to_csv(),
    }


def _run_evolve(p: dict, threads: int, seed: int) -> dict[str, str]:
    t = Torus(*p["torus"])
    vec = [complex(a, b) for a, b in p["coin_state"]]
    psi = localized_state(t, tuple(p["x0"]), vec)
    psi = evolve(psi, cclass_coin(CoinParams.from_dict(p["coin"])), p["steps"])
    prob = position_distribution(psi)
    rows = ["x,y,p"] + [f"{x},{y},{float(prob[x, y])!r}" for y in range(t.M) for x in range(t.L)]
    return {"state.csv": dump_state_csv(psi, p["steps"]), "distribution.csv": "\n".join(rows) + "\n"}


def _run_search(p: dict, threads: int, seed: int) -> dict[str, str]:
    t = Torus(p["L"], p["M"])
    a = SearchConfig(t, CoinParams.from_dict(p["coin"]), tuple(p["marked"]), p["T"], p["steps"])
    if "compare_coin" not in p:
        return {"search.csv": run_search(a).to_csv()}
    b = SearchConfig(t, CoinParams.from_dict(p["compare_coin"]), tuple(p["marked"]), p["T"], p["steps"])
    report = compare_search(a, b)
    return {
        "search.csv": run_search(a).to_csv(),
        "search_b.csv": run_search(b).to_csv(),
        "compare.json": comparison_json(report),
    }


def _run_spectral_match(p: dict, threads: int, seed: int) -> dict[str, str]:
    grid = MomentumGrid(*p["grid"])
    coins = []
    if "coin" in p:
        coins.append(CoinParams.from_dict(p["coin"]))
    rng = np.random.default_rng(seed)
    for _ in range(p["random"]):
        coins.append(CoinParams.from_angles(*rng.uniform(-PI, PI, 7)))
    results = []
    for c in coins:
        ok, dev = flat_band_check(cclass_coin(c), grid, 1e-10)
        results.append({"coin": c.to_dict(), "max_deviation": spectral_match(c, grid), "flat_bands": ok})
    report = {"grid": p["grid"], "seed": seed, "results": results,
              "max_deviation": max(r["max_deviation"] for r in results)}
    return {"spectral_match.json": json.dumps(report, indent=2, sort_keys=True)}


_RUNNERS = {
    "spectrum": _run_spectrum,
    "trapmap": _run_trapmap,
    "topomap": _run_topomap,
    "evolve": _run_evolve,
    "search": _run_search,
    "spectral-match": _run_spectral_match,
}


def run_experiment(cfg: ExperimentConfig, out_dir: str | os.PathLike | None = None,
                   threads: int = 1, seed: int | None = None) -> list[Path]:
    """
    Run one experiment and write its data files plus ``metadata.json``.

    Data files depend only on the config (and seed), never on ``threads``.
    Returns the written paths.
    """
    out = Path(out_dir or cfg.out or ".")
    if seed is None:
        seed = cfg.params.get("seed", 0)
    start = time.perf_counter()
    files = _RUNNERS[cfg.kind](cfg.params, max(1, int(threads)), seed)
    wall = time.perf_counter() - start
    meta = {
        "config": cfg.echo(),
        "seed": seed,
        "wall_time_s": wall,
        "defaults_version": DEFAULTS_VERSION,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "outputs": sorted(files),
    }
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in sorted(files.items()):
        path = out / name
        path.write_text(text)
        written.append(path)
    meta_path = out / "metadata.json"
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    written.append(meta_path)
    return written


def is_validation_error(exc: BaseException) -> bool:
    return isinstance(exc, (ConfigError, InvalidParameterError)) or (
        isinstance(exc, QWalkError) and isinstance(exc, ValueError)
    )
