"""
Momentum-space one-step operators and quasi-energy bands.

For a homogeneous coin C the walk decouples into 4x4 blocks
U(k, l) = Diag(e^{-ik}, e^{-il}, e^{il}, e^{ik}) C. Quasi-energies are the
eigenphases omega in (-pi, pi] of these blocks.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .coins import CoinParams, cclass_coin, su2_matrix
from .errors import InconsistencyError, InvalidParameterError, NumericalError

__all__ = [
    "MomentumGrid",
    "BandStructure",
    "shift_diag",
    "u_tilde",
    "eigenphases",
    "band_structure",
    "flat_band_check",
    "gap_widths",
    "splitstep_u",
    "spectral_match",
    "circular_distance",
    "wrap_phase",
    "bands_csv",
    "gap_report_json",
]

FLAT_TOL = 1e-8


def wrap_phase(w: NDArray | float) -> NDArray:
    """Map angles onto the branch (-pi, pi]."""
    w = np.asarray(w, dtype=float)
    w = np.mod(w + np.pi, 2 * np.pi) - np.pi
    return np.where(w <= -np.pi, w + 2 * np.pi, w)


def circular_distance(a: NDArray | float, b: NDArray | float) -> NDArray:
    d = np.abs(np.mod(np.asarray(a) - np.asarray(b) + np.pi, 2 * np.pi) - np.pi)
    return d


@dataclass(frozen=True)
class MomentumGrid:
    """Uniform grid k_a = 2 pi a / nk - pi, l_b = 2 pi b / nl - pi."""

    nk: int = 64
    nl: int = 64

    def __post_init__(self) -> None:
        for name, v in (("nk", self.nk), ("nl", self.nl)):
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise InvalidParameterError(f"{name} must be a positive integer, got {v!r}")

    @property
    def k(self) -> NDArray[np.float64]:
        return 2 * np.pi * np.arange(self.nk) / self.nk - np.pi

    @property
    def l(self) -> NDArray[np.float64]:
        return 2 * np.pi * np.arange(self.nl) / self.nl - np.pi

    def mesh(self) -> tuple[NDArray, NDArray]:
        return np.meshgrid(self.k, self.l, indexing="ij")


@dataclass
class BandStructure:
    """
    Eigenphases on a momentum grid.

    omega has shape (nk, nl, 4), sorted ascending at each point; ``flat`` is a
    boolean mask of the same shape marking the two eigenvalues assigned to
    +1 and -1, and ``flat_deviation`` is the largest distance of those
    eigenvalues from +-1 over the grid.
    """

    grid: MomentumGrid
    omega: NDArray[np.float64]
    flat: NDArray[np.bool_]
    flat_deviation: float

    @property
    def nonflat(self) -> NDArray[np.float64]:
        """The two remaining eigenphases per grid point, shape (nk, nl, 2)."""
        return self.omega[~self.flat].reshape(self.omega.shape[:-1] + (2,))


def shift_diag(k: float, l: float) -> NDArray[np.complex128]:
    """Return Diag(e^{-ik}, e^{-il}, e^{il}, e^{ik})."""
    return np.diag(np.exp(1j * np.array([-k, -l, l, k], dtype=float)))


def _shift_phases(k: NDArray, l: NDArray) -> NDArray[np.complex128]:
    k = np.asarray(k, dtype=float)
    l = np.asarray(l, dtype=float)
    return np.exp(1j * np.stack([-k, -l, l, k], axis=-1))


def u_tilde(c: NDArray, k: float | NDArray, l: float | NDArray) -> NDArray[np.complex128]:
    """D(k, l) C; broadcasts over array-valued k and l."""
    c = np.asarray(c, dtype=np.complex128)
    return _shift_phases(k, l)[..., :, None] * c


def eigenphases(u: NDArray) -> NDArray[np.float64]:
    """Sorted eigenphases in (-pi, pi] of one or a stack of unitaries."""
    return np.sort(wrap_phase(np.angle(np.linalg.eigvals(u))), axis=-1)


def _flat_assignment(lam: NDArray[np.complex128]) -> tuple[NDArray[np.bool_], NDArray[np.float64]]:
    """Label the eigenvalue closest to +1 and, among the rest, the one closest to -1."""
    d_plus = np.abs(lam - 1.0)
    i_plus = np.argmin(d_plus, axis=-1)
    d_minus = np.abs(lam + 1.0)
    np.put_along_axis(d_minus, i_plus[..., None], np.inf, axis=-1)
    i_minus = np.argmin(d_minus, axis=-1)
    flat = np.zeros(lam.shape, dtype=bool)
    np.put_along_axis(flat, i_plus[..., None], True, axis=-1)
    np.put_along_axis(flat, i_minus[..., None], True, axis=-1)
    dev = np.maximum(
        np.take_along_axis(np.abs(lam - 1.0), i_plus[..., None], axis=-1)[..., 0],
        np.take_along_axis(np.abs(lam + 1.0), i_minus[..., None], axis=-1)[..., 0],
    )
    return flat, dev


def band_structure(c: NDArray, g: MomentumGrid | None = None) -> BandStructure:
    """
    Diagonalize U(k, l) at every grid point.

    Raises
    ------
    NumericalError
        If the eigen-solver fails; the message names the grid point.
    """
    g = g or MomentumGrid()
    K, L = g.mesh()
    u = u_tilde(c, K, L)
    try:
        lam = np.linalg.eigvals(u)
    except np.linalg.LinAlgError as exc:
        for a in range(g.nk):
            for b in range(g.nl):
                try:
                    np.linalg.eigvals(u[a, b])
                except np.linalg.LinAlgError:
                    raise NumericalError(
                        f"eigen-solver failed at k={g.k[a]:.17g}, l={g.l[b]:.17g}"
                    ) from exc
        raise NumericalError(str(exc)) from exc
    if not np.all(np.isfinite(lam)):
        raise NumericalError("non-finite eigenvalue in band structure")
    omega = wrap_phase(np.angle(lam))
    order = np.argsort(omega, axis=-1, kind="stable")
    omega = np.take_along_axis(omega, order, axis=-1)
    lam = np.take_along_axis(lam, order, axis=-1)
    flat, dev = _flat_assignment(lam)
    return BandStructure(g, omega, flat, float(dev.max()))


def flat_band_check(c: NDArray, g: MomentumGrid | None = None, tol: float = 1e-10) -> tuple[bool, float]:
    """
    Test for momentum-independent eigenvalues +1 and -1.

    Returns (passed, max deviation). The comparison is strict, so tol = 0
    fails whenever round-off leaves any nonzero deviation.
    """
    if tol < 0:
        raise InvalidParameterError(f"tol must be non-negative, got {tol}")
    bs = band_structure(c, g)
    return bs.flat_deviation < tol, bs.flat_deviation


def gap_widths(b: BandStructure, tol: float = FLAT_TOL) -> tuple[float, float]:
    """
    Minimal circular distance of the non-flat bands from 0 and from pi.

    Raises
    ------
    InconsistencyError
        If the flat bands at +-1 are not present within ``tol``.
    """
    if b.flat_deviation > tol:
        raise InconsistencyError(
            f"flat bands not found: deviation {b.flat_deviation:.3g} exceeds {tol:.3g}"
        )
    w = b.nonflat
    gap0 = float(circular_distance(w, 0.0).min())
    gap_pi = float(circular_distance(w, np.pi).min())
    return gap0, gap_pi


def splitstep_u(c1: NDArray, c2: NDArray, k: float, l: float) -> NDArray[np.complex128]:
    """Diag(e^{-i(k-l)/2}, e^{i(k-l)/2}) C2 Diag(e^{-i(k+l)/2}, e^{i(k+l)/2}) C1."""
    a = np.diag(np.exp(1j * np.array([-(k - l) / 2, (k - l) / 2])))
    b = np.diag(np.exp(1j * np.array([-(k + l) / 2, (k + l) / 2])))
    return a @ np.asarray(c2) @ b @ np.asarray(c1)


def _pair_distance(a: NDArray, b: NDArray) -> NDArray:
    """Multiset distance between phase pairs, shape (..., 2) each."""
    straight = np.maximum(circular_distance(a[..., 0], b[..., 0]), circular_distance(a[..., 1], b[..., 1]))
    crossed = np.maximum(circular_distance(a[..., 0], b[..., 1]), circular_distance(a[..., 1], b[..., 0]))
    return np.minimum(straight, crossed)


def spectral_match(p: CoinParams, g: MomentumGrid | None = None) -> float:
    """
    Compare the split-step walk with the non-flat bands of the coin ``p``.

    Returns the largest circular distance between the two eigenphase
    pairs over the grid. The controlled phase enters the 4x4 operator only
    through a site-local conjugation, so any ``p.phi`` is accepted.
    """
    g = g or MomentumGrid(32, 32)
    bs = band_structure(cclass_coin(p), g)
    if bs.flat_deviation > FLAT_TOL:
        raise InconsistencyError(f"flat bands not found (deviation {bs.flat_deviation:.3g})")
    c1, c2 = su2_matrix(p.c1), su2_matrix(p.c2)
    K, L = g.mesh()
    half_m = (K - L) / 2
    half_p = (K + L) / 2
    a = np.exp(1j * np.stack([-half_m, half_m], axis=-1))
    b = np.exp(1j * np.stack([-half_p, half_p], axis=-1))
    us = a[..., :, None] * c2 @ (b[..., :, None] * c1)
    split = wrap_phase(np.angle(np.linalg.eigvals(us)))
    return float(_pair_distance(bs.nonflat, split).max())


def bands_csv(b: BandStructure) -> str:
    """CSV rows (k, l, omega1..omega4, flat1..flat4)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "l", "omega1", "omega2", "omega3", "omega4", "flat1", "flat2", "flat3", "flat4"])
    for a, k in enumerate(b.grid.k):
        for c, l in enumerate(b.grid.l):
            w.writerow(
                [repr(float(k)), repr(float(l))]
                + [repr(float(x)) for x in b.omega[a, c]]
                + [int(f) for f in b.flat[a, c]]
            )
    return buf.getvalue()


def gap_report_json(b: BandStructure, tol: float = FLAT_TOL) -> str:
    gap0, gap_pi = gap_widths(b, tol)
    return json.dumps(
        {"gap0": gap0, "gapPi": gap_pi, "tol": tol, "grid": [b.grid.nk, b.grid.nl],
         "flat_deviation": b.flat_deviation},
        indent=2,
        sort_keys=True,
    )


def slice_gap_closing(delta1: float, delta2: float) -> float:
    """|cos 2 delta1 - cos 2 delta2|; zero on the gap-closing (weak trapping) lines."""
    return abs(math.cos(2 * delta1) - math.cos(2 * delta2))
