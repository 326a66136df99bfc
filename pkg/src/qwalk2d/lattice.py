"""
Real-space evolution of walks on an L x M torus.

A walk state is a complex array of shape ``(..., L, M, 4)`` indexed as
``psi[x, y, c]`` with c in (L, D, U, R). Leading axes are treated as a
batch, so several states can be evolved in one call.

One step applies the local coin and then the conditional shift
L -> (x-1, y), D -> (x, y-1), U -> (x, y+1), R -> (x+1, y), which is the
real-space form of Diag(e^{-ik}, e^{-il}, e^{il}, e^{ik}) under the
transform psi(k, l) = sum_xy e^{i(kx + ly)} psi(x, y).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

import numpy as np
from numpy.typing import NDArray

from .coins import unitarity_residual
from .errors import ConfigError, InvalidParameterError, InvalidStateError

__all__ = [
    "Torus",
    "CoinField",
    "localized_state",
    "step",
    "evolve",
    "position_distribution",
    "norm",
    "plane_wave",
    "translate",
    "dump_state_csv",
    "load_state_csv",
]

DISPLACEMENTS = ((-1, 0), (0, -1), (0, 1), (1, 0))


@dataclass(frozen=True)
class Torus:
    """Periodic L x M lattice; L is the x extent, M the y extent."""

    L: int
    M: int

    def __post_init__(self) -> None:
        for name, v in (("L", self.L), ("M", self.M)):
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 2:
                raise ConfigError(f"must be an integer >= 2, got {v!r}", field=name)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.L, self.M)

    @property
    def sites(self) -> int:
        return self.L * self.M

    def wrap(self, x: int, y: int) -> tuple[int, int]:
        return (x % self.L, y % self.M)

    def contains(self, x: int, y: int) -> bool:
        return 0 <= x < self.L and 0 <= y < self.M


@dataclass
class CoinField:
    """
    Site-dependent coins: a default matrix plus per-site overrides.

    ``overrides`` maps (x, y) to a 4x4 unitary. An explicit full field can be
    given instead as an array of shape (L, M, 4, 4) via ``from_array``.
    """

    default: NDArray[np.complex128]
    overrides: dict[tuple[int, int], NDArray[np.complex128]] = field(default_factory=dict)
    array: NDArray[np.complex128] | None = None

    def __post_init__(self) -> None:
        self.default = np.asarray(self.default, dtype=np.complex128)
        mats = [self.default, *self.overrides.values()]
        for m in mats:
            if m.shape != (4, 4) or unitarity_residual(m) > 1e-10:
                raise InvalidParameterError("coin field entries must be 4x4 unitaries")
        self.overrides = {
            (int(x), int(y)): np.asarray(m, dtype=np.complex128) for (x, y), m in self.overrides.items()
        }

    @classmethod
    def homogeneous(cls, coin: NDArray) -> "CoinField":
        return cls(coin)

    @classmethod
    def from_array(cls, coins: NDArray) -> "CoinField":
        coins = np.asarray(coins, dtype=np.complex128)
        if coins.ndim != 4 or coins.shape[-2:] != (4, 4):
            raise InvalidParameterError("coin array must have shape (L, M, 4, 4)")
        eye = np.eye(4)
        res = np.abs(np.einsum("xyji,xyjk->xyik", coins.conj(), coins) - eye).max()
        if res > 1e-10:
            raise InvalidParameterError("coin array contains a non-unitary entry")
        return cls(coins[0, 0], array=coins)

    @property
    def is_homogeneous(self) -> bool:
        return self.array is None and not self.overrides

    def at(self, x: int, y: int) -> NDArray[np.complex128]:
        if self.array is not None:
            return self.array[x, y]
        return self.overrides.get((x, y), self.default)

    def apply(self, psi: NDArray[np.complex128]) -> NDArray[np.complex128]:
        """Apply the local coins; writes into a fresh buffer."""
        if self.array is not None:
            if psi.shape[-3:-1] != self.array.shape[:2]:
                raise InvalidStateError("coin array and state have different lattice shapes")
            return np.einsum("xyij,...xyj->...xyi", self.array, psi)
        out = psi @ self.default.T
        L, M = psi.shape[-3:-1]
        for (x, y), m in self.overrides.items():
            if not (0 <= x < L and 0 <= y < M):
                raise ConfigError(f"override site {(x, y)} outside {L}x{M} torus", field="coin field")
            out[..., x, y, :] = psi[..., x, y, :] @ m.T
        return out


CoinLike = Union[CoinField, NDArray]


def _as_field(cf: CoinLike) -> CoinField:
    if isinstance(cf, CoinField):
        return cf
    arr = np.asarray(cf)
    if arr.shape == (4, 4):
        return CoinField(arr)
    return CoinField.from_array(arr)


def localized_state(
    t: Torus, x0: tuple[int, int], coin_vec: Iterable[complex], atol: float = 1e-12
) -> NDArray[np.complex128]:
    """
    Return |x0> (x) coin_vec on the torus.

    Raises
    ------
    InvalidStateError
        If coin_vec is not a unit 4-vector within ``atol``.
    """
    v = np.asarray(list(coin_vec), dtype=np.complex128)
    if v.shape != (4,):
        raise InvalidStateError(f"coin vector must have 4 components, got shape {v.shape}")
    n = np.linalg.norm(v)
    if not np.isfinite(n) or abs(n - 1.0) > atol:
        raise InvalidStateError(f"coin vector must have unit norm, got {n:.15g}")
    psi = np.zeros((t.L, t.M, 4), dtype=np.complex128)
    x, y = t.wrap(*x0)
    psi[x, y] = v
    return psi


def _shift(phi: NDArray[np.complex128]) -> NDArray[np.complex128]:
    out = np.empty_like(phi)
    for c, (dx, dy) in enumerate(DISPLACEMENTS):
        axis = -3 if dx else -2
        out[..., c] = np.roll(phi[..., c], dx or dy, axis=axis + 1)
    return out


def step(psi: NDArray[np.complex128], cf: CoinLike) -> NDArray[np.complex128]:
    """One walk step U = S (I (x) C): local coins, then the conditional shift."""
    psi = np.asarray(psi, dtype=np.complex128)
    return _shift(_as_field(cf).apply(psi))


def evolve(psi: NDArray[np.complex128], cf: CoinLike, steps: int) -> NDArray[np.complex128]:
    """Apply ``steps`` walk steps; steps = 0 returns a copy of the input."""
    if isinstance(steps, bool) or not isinstance(steps, (int, np.integer)) or steps < 0:
        raise InvalidParameterError(f"steps must be a non-negative integer, got {steps!r}")
    field_ = _as_field(cf)
    out = np.array(psi, dtype=np.complex128, copy=True)
    for _ in range(steps):
        out = _shift(field_.apply(out))
    return out


def position_distribution(psi: NDArray[np.complex128]) -> NDArray[np.float64]:
    """p(x, y) = sum_c |psi(x, y, c)|^2."""
    return np.sum(np.abs(psi) ** 2, axis=-1)


def norm(psi: NDArray[np.complex128]) -> float:
    return float(np.sqrt(np.sum(np.abs(psi) ** 2)))


def plane_wave(t: Torus, k: float, l: float, v: Iterable[complex]) -> NDArray[np.complex128]:
    """
    Return e^{-i(kx + ly)} v / sqrt(LM).

    With the Fourier convention above this is the state whose only
    momentum component sits at (k, l); k and l must be multiples of
    2 pi / L and 2 pi / M for it to be periodic.
    """
    v = np.asarray(list(v), dtype=np.complex128)
    x = np.arange(t.L)[:, None]
    y = np.arange(t.M)[None, :]
    phase = np.exp(-1j * (k * x + l * y)) / np.sqrt(t.sites)
    return phase[:, :, None] * v[None, None, :]


def translate(psi: NDArray[np.complex128], dx: int, dy: int) -> NDArray[np.complex128]:
    return np.roll(psi, (dx, dy), axis=(-3, -2))


def dump_state_csv(psi: NDArray[np.complex128], steps: int = 0) -> str:
    """
    Serialize a state as CSV text.

    The first line is ``# L=<L> M=<M> steps=<t>``; then a header row and one
    row per site with y outermost and x inner, coin components (L, D, U, R)
    as real/imaginary pairs.
    """
    psi = np.asarray(psi)
    L, M = psi.shape[:2]
    buf = io.StringIO()
    buf.write(f"# L={L} M={M} steps={steps}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "re_L", "im_L", "re_D", "im_D", "re_U", "im_U", "re_R", "im_R"])
    for y in range(M):
        for x in range(L):
            row = [x, y]
            for a in psi[x, y]:
                row += [repr(float(a.real)), repr(float(a.imag))]
            w.writerow(row)
    return buf.getvalue()


def load_state_csv(text: str) -> tuple[NDArray[np.complex128], int]:
    """Inverse of :func:`dump_state_csv`; returns (state, steps)."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise InvalidStateError("missing '# L=.. M=.. steps=..' header line")
    meta: Mapping[str, str] = dict(tok.split("=") for tok in lines[0][1:].split())
    L, M, steps = int(meta["L"]), int(meta["M"]), int(meta["steps"])
    psi = np.zeros((L, M, 4), dtype=np.complex128)
    reader = csv.reader(lines[2:])
    for row in reader:
        x, y = int(row[0]), int(row[1])
        vals = [float(s) for s in row[2:]]
        psi[x, y] = np.array(vals[0::2]) + 1j * np.array(vals[1::2])
    return psi, steps
