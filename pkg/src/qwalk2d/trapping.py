"""
Localized flat-band eigenstates, revivals, escaping states and return probabilities.

The return probability after T steps for an initial state |0> (x) c is the
quadratic form c^dagger M(T) c with M = A^dagger A, where column j of A is
the origin amplitude of the walk started from |0> (x) e_j. Its smallest
eigenvalue is therefore the exact minimum over all localized initial
coin states.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .coins import CoinParams, cclass_coin
from .errors import InvalidParameterError, NotWeaklyTrappingError, UnsupportedBranchError, WraparoundError
from .lattice import CoinField, Torus, evolve

__all__ = [
    "stationary_state",
    "revival_state",
    "return_matrix",
    "min_return_probability",
    "escaping_state",
    "TrapMap",
    "trap_map",
    "WEAK_TRAPPING_TOL",
]

WEAK_TRAPPING_TOL = 1e-9


def _check_sign(sign: int) -> int:
    if sign not in (1, -1):
        raise InvalidParameterError(f"sign must be +1 or -1, got {sign!r}")
    return sign


def stationary_state(p: CoinParams, t: Torus, x: int, y: int, sign: int) -> NDArray[np.complex128]:
    """
    Flat-band eigenstate with eigenvalue ``sign`` on the plaquette with corner (x, y).

    The state occupies (x, y), (x, y+1), (x+1, y) and (x+1, y+1); one walk
    step multiplies it by ``sign``.
    """
    s = _check_sign(sign)
    a1, b1, d1 = p.c1.alpha, p.c1.beta, p.c1.delta
    a2, b2, d2 = p.c2.alpha, p.c2.beta, p.c2.delta
    phi = p.phi

    def e(theta: float) -> complex:
        return complex(math.cos(theta), math.sin(theta))

    psi = np.zeros((t.L, t.M, 4), dtype=np.complex128)
    psi[t.wrap(x, y)] += [-e(-b1) * math.sin(d1), -e(-a1) * math.cos(d1), 0, 0]
    psi[t.wrap(x, y + 1)] += s * np.array([-e(-b2) * math.sin(d2), 0, -e(-a2) * math.cos(d2), 0])
    psi[t.wrap(x + 1, y)] += s * np.array([0, e(a2) * math.cos(d2), 0, -e(b2 + phi) * math.sin(d2)])
    psi[t.wrap(x + 1, y + 1)] += [0, 0, e(a1) * math.cos(d1), -e(b1 + phi) * math.sin(d1)]
    psi *= 0.5
    return psi / np.linalg.norm(psi)


def revival_state(p: CoinParams, t: Torus, x: int, y: int, sign: int) -> NDArray[np.complex128]:
    """(|psi_+> + sign |psi_->)/sqrt(2); returns to itself after two steps."""
    s = _check_sign(sign)
    psi = stationary_state(p, t, x, y, 1) + s * stationary_state(p, t, x, y, -1)
    return psi / np.linalg.norm(psi)


def _check_light_cone(t: Torus, steps: int) -> None:
    # a closed path that winds the torus needs at least min(L, M) steps
    if min(t.L, t.M) <= steps:
        raise WraparoundError(
            f"torus {t.L}x{t.M} too small for {steps} steps; need min(L, M) > {steps}",
            field="torus",
        )


def return_matrix(c: NDArray, steps: int, t: Torus) -> NDArray[np.complex128]:
    """
    Gram matrix M(T) of origin amplitudes after ``steps`` steps.

    Parameters
    ----------
    c : array_like
        4x4 coin, homogeneous over the lattice.
    steps : int
        Number of steps T.
    t : Torus
        Must satisfy min(L, M) > T so that no returning path winds around.

    Returns
    -------
    NDArray[np.complex128]
        Hermitian positive semidefinite 4x4 matrix; c^dagger M c is the
        T-step return probability of |0> (x) c.
    """
    _check_light_cone(t, steps)
    psi = np.zeros((4, t.L, t.M, 4), dtype=np.complex128)
    for j in range(4):
        psi[j, 0, 0, j] = 1.0
    psi = evolve(psi, CoinField(c), steps)
    amp = psi[:, 0, 0, :].T  # column j: origin amplitude from e_j
    m = amp.conj().T @ amp
    return (m + m.conj().T) / 2


def min_return_probability(c: NDArray, steps: int, t: Torus) -> tuple[float, NDArray[np.complex128]]:
    """
    Smallest T-step return probability over localized initial coin states.

    Returns the smallest eigenvalue of :func:`return_matrix` and a unit
    eigenvector, phase-fixed so that its largest component is real positive.
    """
    w, v = np.linalg.eigh(return_matrix(c, steps, t))
    vec = v[:, 0]
    j = int(np.argmax(np.abs(vec)))
    vec = vec * (abs(vec[j]) / vec[j])
    vec[j] = abs(vec[j])
    return max(float(w[0]), 0.0), vec


def escaping_state(p: CoinParams, tol: float = WEAK_TRAPPING_TOL) -> NDArray[np.complex128]:
    """
    Localized coin state that avoids trapping when cos 2 delta1 = cos 2 delta2.

    Only the branch delta2 = delta1 + n pi has a closed form.

    Raises
    ------
    NotWeaklyTrappingError
        If |cos 2 delta1 - cos 2 delta2| > tol.
    UnsupportedBranchError
        If the coin sits on the delta2 = -delta1 + n pi branch only; use the
        minimizer of :func:`min_return_probability` there.
    """
    a1, b1, d1 = p.c1.alpha, p.c1.beta, p.c1.delta
    a2, b2, d2 = p.c2.alpha, p.c2.beta, p.c2.delta
    if abs(math.cos(2 * d1) - math.cos(2 * d2)) > tol:
        raise NotWeaklyTrappingError(
            f"cos(2*delta1) != cos(2*delta2) for delta1={d1!r}, delta2={d2!r}: strongly trapping coin"
        )
    n = (d2 - d1) / math.pi
    if abs(n - round(n)) > 1e-9:
        raise UnsupportedBranchError(
            "delta2 = -delta1 + n*pi branch has no closed-form escaping state; "
            "use min_return_probability for the numerical minimizer"
        )

    def e(theta: float) -> complex:
        return complex(math.cos(theta), math.sin(theta))

    return np.array(
        [
            e(-b1) * math.cos(d1),
            -e(-a1) * math.sin(d1),
            -e(-(a2 + b1 - b2)) * math.sin(d1),
            -e(-(a1 + a2 - b2 - p.phi)) * math.cos(d1),
        ],
        dtype=np.complex128,
    ) / math.sqrt(2)


@dataclass
class TrapMap:
    """Minimum return probability over a (delta1, delta2) grid; values[i, j] at (delta1[i], delta2[j])."""

    delta1: NDArray[np.float64]
    delta2: NDArray[np.float64]
    values: NDArray[np.float64]
    steps: int
    torus: Torus
    base: CoinParams

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["delta1", "delta2", "min_prob"])
        for i, d1 in enumerate(self.delta1):
            for j, d2 in enumerate(self.delta2):
                w.writerow([repr(float(d1)), repr(float(d2)), repr(float(self.values[i, j]))])
        return buf.getvalue()

    def metadata(self) -> dict:
        return {
            "steps": self.steps,
            "torus": [self.torus.L, self.torus.M],
            "fixed": {k: v for k, v in self.base.to_dict().items() if k not in ("delta1", "delta2")},
            "tolerance": WEAK_TRAPPING_TOL,
            "grid": [len(self.delta1), len(self.delta2)],
        }


def trap_map(
    delta1: NDArray,
    delta2: NDArray,
    base: CoinParams,
    steps: int = 40,
    t: Torus | None = None,
    threads: int = 1,
) -> TrapMap:
    """
    Evaluate :func:`min_return_probability` over a (delta1, delta2) grid.

    ``base`` supplies the fixed alpha, beta and phi. Grid points are
    independent; results are assembled by index, so ``threads`` does not
    change the output.
    """
    t = t or Torus(81, 81)
    _check_light_cone(t, steps)
    d1s = np.asarray(delta1, dtype=float)
    d2s = np.asarray(delta2, dtype=float)
    jobs = [(i, j) for i in range(len(d1s)) for j in range(len(d2s))]

    def point(ij: tuple[int, int]) -> float:
        i, j = ij
        coin = cclass_coin(base.replace(delta1=float(d1s[i]), delta2=float(d2s[j])))
        return min_return_probability(coin, steps, t)[0]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            vals = list(ex.map(point, jobs))
    else:
        vals = [point(ij) for ij in jobs]
    values = np.array(vals, dtype=float).reshape(len(d1s), len(d2s))
    return TrapMap(d1s, d2s, values, steps, t, base)
