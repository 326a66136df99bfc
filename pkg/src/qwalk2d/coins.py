"""
Coin operators for two-dimensional walks on the square lattice.

All 4x4 matrices act on the coin space ordered (L, D, U, R), identified
with the two-qubit basis (|00>, |01>, |10>, |11>). The first qubit is the
left Kronecker factor.

Available operators
-------------------
- su2_matrix(p): 2x2 SU(2) block with angles (alpha, beta, delta)
- swap_gate(): two-qubit SWAP, exchanges D and U
- phase_gate(phi): controlled phase Diag(1, 1, 1, e^{i phi})
- tensor_product(a, b): Kronecker product in the (L, D, U, R) ordering
- cclass_coin(p): the trapping coin P(phi) (C1 x C2) P(-phi) W
- grover_coin(): 4x4 Grover diffusion coin
- marked_coin(): -sigma_x x sigma_x, used at the marked vertex of a search
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from numpy.typing import NDArray

from .errors import InvalidParameterError

__all__ = [
    "SU2Params",
    "CoinParams",
    "PAULI_X",
    "su2_matrix",
    "swap_gate",
    "phase_gate",
    "tensor_product",
    "cclass_coin",
    "grover_coin",
    "marked_coin",
    "is_unitary",
    "unitarity_residual",
    "grover_params",
    "transformed_grover_params",
]

PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)

COIN_KEYS = ("alpha1", "beta1", "delta1", "alpha2", "beta2", "delta2", "phi")


def _check_finite(**angles: float) -> None:
    for name, value in angles.items():
        try:
            ok = math.isfinite(value)
        except TypeError:
            ok = False
        if not ok:
            raise InvalidParameterError(f"{name} must be a finite real, got {value!r}")


@dataclass(frozen=True)
class SU2Params:
    """Angles of one SU(2) block, in radians."""

    alpha: float
    beta: float
    delta: float

    def __post_init__(self) -> None:
        _check_finite(alpha=self.alpha, beta=self.beta, delta=self.delta)

    def matrix(self) -> NDArray[np.complex128]:
        return su2_matrix(self)


@dataclass(frozen=True)
class CoinParams:
    """
    The seven real parameters of a trapping coin.

    Angles are kept exactly as given (no wrapping), so that the produced
    matrix is reproducible bit for bit.
    """

    c1: SU2Params
    c2: SU2Params
    phi: float = 0.0

    def __post_init__(self) -> None:
        _check_finite(phi=self.phi)

    @classmethod
    def from_angles(
        cls,
        alpha1: float,
        beta1: float,
        delta1: float,
        alpha2: float,
        beta2: float,
        delta2: float,
        phi: float,
    ) -> "CoinParams":
        return cls(SU2Params(alpha1, beta1, delta1), SU2Params(alpha2, beta2, delta2), phi)

    @classmethod
    def from_dict(cls, data: Mapping[str, float]) -> "CoinParams":
        """Build from the flat JSON object {alpha1, beta1, delta1, alpha2, beta2, delta2, phi}."""
        unknown = set(data) - set(COIN_KEYS)
        if unknown:
            raise InvalidParameterError(
                f"unknown coin keys {sorted(unknown)}; expected {list(COIN_KEYS)} (radians)"
            )
        missing = [k for k in COIN_KEYS if k not in data]
        if missing:
            raise InvalidParameterError(f"missing coin keys {missing}")
        values = {}
        for key in COIN_KEYS:
            v = data[key]
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise InvalidParameterError(f"{key} must be a number, got {v!r}")
            values[key] = float(v)
        return cls.from_angles(**values)

    def to_dict(self) -> dict[str, float]:
        return {
            "alpha1": self.c1.alpha,
            "beta1": self.c1.beta,
            "delta1": self.c1.delta,
            "alpha2": self.c2.alpha,
            "beta2": self.c2.beta,
            "delta2": self.c2.delta,
            "phi": self.phi,
        }

    def replace(self, **angles: float) -> "CoinParams":
        """Return a copy with some of the flat angles replaced."""
        d = self.to_dict()
        unknown = set(angles) - set(COIN_KEYS)
        if unknown:
            raise InvalidParameterError(f"unknown coin keys {sorted(unknown)}")
        d.update(angles)
        return CoinParams.from_angles(**d)

    def matrix(self) -> NDArray[np.complex128]:
        return cclass_coin(self)


def su2_matrix(p: SU2Params) -> NDArray[np.complex128]:
    """
    Return [[e^{-ia} cos d, -e^{-ib} sin d], [e^{ib} sin d, e^{ia} cos d]].

    The determinant is cos^2 d + sin^2 d = 1 for every choice of angles.
    """
    _check_finite(alpha=p.alpha, beta=p.beta, delta=p.delta)
    c, s = math.cos(p.delta), math.sin(p.delta)
    ea = complex(math.cos(p.alpha), math.sin(p.alpha))
    eb = complex(math.cos(p.beta), math.sin(p.beta))
    return np.array(
        [[ea.conjugate() * c, -eb.conjugate() * s], [eb * s, ea * c]],
        dtype=np.complex128,
    )


def swap_gate() -> NDArray[np.complex128]:
    """Return W = |L><L| + |D><U| + |U><D| + |R><R|."""
    return np.eye(4, dtype=np.complex128)[[0, 2, 1, 3]]


def phase_gate(phi: float) -> NDArray[np.complex128]:
    """Return the controlled phase gate Diag(1, 1, 1, e^{i phi})."""
    _check_finite(phi=phi)
    return np.diag([1.0, 1.0, 1.0, complex(math.cos(phi), math.sin(phi))]).astype(np.complex128)


def tensor_product(a: NDArray, b: NDArray) -> NDArray[np.complex128]:
    """Kronecker product a (x) b; a acts on the first qubit."""
    return np.kron(np.asarray(a, dtype=np.complex128), np.asarray(b, dtype=np.complex128))


def cclass_coin(p: CoinParams) -> NDArray[np.complex128]:
    """
    Return the trapping coin P(phi) (C1 (x) C2) P(-phi) W.

    Parameters
    ----------
    p : CoinParams
        The two SU(2) angle triples and the controlled-phase angle.

    Returns
    -------
    NDArray[np.complex128]
        4x4 unitary in the (L, D, U, R) basis. Every walk driven by this
        coin has momentum-independent eigenvalues +1 and -1.
    """
    local = tensor_product(su2_matrix(p.c1), su2_matrix(p.c2))
    return phase_gate(p.phi) @ local @ phase_gate(-p.phi) @ swap_gate()


def grover_coin() -> NDArray[np.complex128]:
    """Return the 4x4 Grover diffusion coin, entries 1/2 - delta_ij."""
    return np.full((4, 4), 0.5, dtype=np.complex128) - np.eye(4, dtype=np.complex128)


def marked_coin() -> NDArray[np.complex128]:
    """Return -sigma_x (x) sigma_x."""
    return -tensor_product(PAULI_X, PAULI_X)


def unitarity_residual(m: NDArray) -> float:
    """Max-norm of M^dagger M - I."""
    m = np.asarray(m)
    return float(np.abs(m.conj().T @ m - np.eye(m.shape[0])).max())


def is_unitary(m: NDArray, atol: float = 1e-12) -> bool:
    return unitarity_residual(m) <= atol


def grover_params(delta: float = math.pi / 4) -> CoinParams:
    """Real slice alpha = beta = pi/2, phi = pi; delta1 = delta2 = pi/4 gives the Grover coin."""
    h = math.pi / 2
    return CoinParams.from_angles(h, h, delta, h, h, delta, math.pi)


def transformed_grover_params(delta: float = math.pi / 4) -> CoinParams:
    """
    alpha1 = beta2 = pi/2, alpha2 = beta1 = -pi/2, phi = pi.

    delta = pi/4 yields C_G (sigma_x (x) sigma_x), the standard search coin.
    """
    h = math.pi / 2
    return CoinParams.from_angles(h, -h, delta, -h, h, delta, math.pi)
