"""
Strip geometry with two contacted bulk regions and edge-state detection.

The strip keeps the x momentum k as a good quantum number. The transverse
coordinate y runs over N = width_a + width_b sites with periodic wrap:
region A occupies y in [0, width_a), region B the rest. Interface 1 sits
between y = width_a - 1 and width_a, interface 2 between y = N - 1 and 0.
Basis index of the strip operator is 4 * y + c.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .coins import CoinParams, cclass_coin
from .errors import ConfigError, NoGapError, NumericalError
from .lattice import CoinField, evolve
from .spectrum import MomentumGrid, band_structure, gap_widths, wrap_phase

__all__ = [
    "StripConfig",
    "StripSpectrum",
    "EdgeState",
    "strip_operator",
    "eig_unitary",
    "strip_spectrum",
    "trace_branches",
    "branch_velocity",
    "detect_edge_states",
    "interface_distance",
    "edge_flow",
    "TopoSettings",
    "TopoMap",
    "topo_map",
    "edge_packet_probe",
]

FLAT_TOL = 1e-8
_CAYLEY_SHIFTS = (0.4142135623730951, 1.7320508075688772, -2.23606797749979, 2.6457513110645907)


@dataclass(frozen=True)
class StripConfig:
    coin_a: CoinParams
    coin_b: CoinParams
    width_a: int = 20
    width_b: int = 20

    def __post_init__(self) -> None:
        for name in ("width_a", "width_b"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 4:
                raise ConfigError(f"must be an integer >= 4, got {v!r}", field=name)

    @property
    def n_sites(self) -> int:
        return self.width_a + self.width_b


def strip_operator(coin_a: NDArray, coin_b: NDArray, width_a: int, width_b: int, k: float) -> NDArray[np.complex128]:
    """
    One-step operator of the strip at x momentum k.

    Coins act first (A on region A, B on region B); then L and R pick up the
    phases e^{-ik} and e^{ik}, D moves y -> y-1 and U moves y -> y+1.
    """
    n = width_a + width_b
    coins = np.empty((n, 4, 4), dtype=np.complex128)
    coins[:width_a] = coin_a
    coins[width_a:] = coin_b
    u = np.zeros((n, 4, n, 4), dtype=np.complex128)
    ys = np.arange(n)
    u[ys, 0, ys, :] = np.exp(-1j * k) * coins[:, 0, :]
    u[ys, 3, ys, :] = np.exp(1j * k) * coins[:, 3, :]
    u[(ys - 1) % n, 1, ys, :] = coins[:, 1, :]
    u[(ys + 1) % n, 2, ys, :] = coins[:, 2, :]
    return u.reshape(4 * n, 4 * n)


def eig_unitary(u: NDArray, atol: float = 1e-9) -> tuple[NDArray[np.float64], NDArray[np.complex128]]:
    """
    Eigenphases (sorted, in (-pi, pi]) and orthonormal eigenvectors of a unitary.

    Uses the Cayley transform H = i (1 + V)^{-1} (1 - V), V = e^{-i theta} u,
    which is Hermitian with the same eigenvectors, so a Hermitian solver
    applies. theta is retried when the transform is ill conditioned.
    """
    n = u.shape[0]
    eye = np.eye(n)
    for theta in _CAYLEY_SHIFTS:
        v = np.exp(-1j * theta) * u
        try:
            h = 1j * np.linalg.solve(eye + v, eye - v)
        except np.linalg.LinAlgError:
            continue
        h = (h + h.conj().T) / 2
        t, vecs = np.linalg.eigh(h)
        omega = wrap_phase(2 * np.arctan(t) + theta)
        lam = np.exp(1j * omega)
        if np.abs(u @ vecs - vecs * lam).max() < atol:
            order = np.argsort(omega, kind="stable")
            return omega[order], vecs[:, order]
    raise NumericalError("unitary eigen-decomposition did not converge")


def interface_distance(width_a: int, width_b: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Distance of each transverse site from interface 1 and from interface 2."""
    n = width_a + width_b
    ys = np.arange(n, dtype=float)
    d1 = np.abs(ys - (width_a - 0.5))
    d1 = np.minimum(d1, n - d1)
    d2 = np.abs(ys + 0.5)
    d2 = np.minimum(d2, n - d2)
    return d1, d2


@dataclass
class StripSpectrum:
    """
    Strip eigen-decomposition over a list of k values.

    omega: (nk, dim); vectors: (nk, dim, dim) with eigenvectors in columns;
    profile: (nk, N, dim) transverse weights; velocity: (nk, dim) group
    velocity d omega / d k from the Hellmann-Feynman identity.
    """

    config: StripConfig
    k: NDArray[np.float64]
    omega: NDArray[np.float64]
    vectors: NDArray[np.complex128]
    profile: NDArray[np.float64]
    velocity: NDArray[np.float64]

    def interface_weight(self, interface: int, within: int = 4) -> NDArray[np.float64]:
        """Weight on sites closer than ``within`` to the given interface, shape (nk, dim)."""
        d1, d2 = interface_distance(self.config.width_a, self.config.width_b)
        mask = (d1 if interface == 1 else d2) < within
        return self.profile[:, mask, :].sum(axis=1)

    def to_csv(self, within: int = 4) -> str:
        """CSV rows (k, omega, interface_weight, interface, branch_id)."""
        w1 = self.interface_weight(1, within)
        w2 = self.interface_weight(2, within)
        branch = trace_branches(self)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "omega", "interface_weight", "interface", "branch_id"])
        for i, k in enumerate(self.k):
            for j in range(self.omega.shape[1]):
                iface = 1 if w1[i, j] >= w2[i, j] else 2
                w.writerow([repr(float(k)), repr(float(self.omega[i, j])),
                            repr(float(max(w1[i, j], w2[i, j]))), iface, int(branch[i, j])])
        return buf.getvalue()


def _velocity(vecs: NDArray[np.complex128]) -> NDArray[np.float64]:
    pw = np.abs(vecs) ** 2
    return pw[3::4].sum(axis=0) - pw[0::4].sum(axis=0)


def _decompose(cfg: StripConfig, ca: NDArray, cb: NDArray, k: float):
    u = strip_operator(ca, cb, cfg.width_a, cfg.width_b, k)
    try:
        omega, vecs = eig_unitary(u)
    except NumericalError as exc:
        raise NumericalError(f"strip eigen-solver failed at k={k:.17g}") from exc
    return omega, vecs


def strip_spectrum(cfg: StripConfig, ks: NDArray | int = 201, threads: int = 1) -> StripSpectrum:
    """Diagonalize the strip at each k; an integer gives a uniform grid on [-pi, pi]."""
    if isinstance(ks, (int, np.integer)):
        ks = np.linspace(-np.pi, np.pi, int(ks))
    ks = np.asarray(ks, dtype=float)
    ca, cb = cclass_coin(cfg.coin_a), cclass_coin(cfg.coin_b)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(lambda k: _decompose(cfg, ca, cb, k), ks))
    else:
        parts = [_decompose(cfg, ca, cb, k) for k in ks]
    omega = np.stack([p[0] for p in parts])
    vecs = np.stack([p[1] for p in parts])
    n = cfg.n_sites
    pw = np.abs(vecs) ** 2
    profile = pw.reshape(len(ks), n, 4, -1).sum(axis=2)
    velocity = np.stack([_velocity(v) for v in vecs])
    return StripSpectrum(cfg, ks, omega, vecs, profile, velocity)


def _match(ov: NDArray[np.float64], dw: NDArray[np.float64]) -> NDArray[np.intp]:
    """Greedy assignment of rows to columns by overlap, ties broken by |d omega|."""
    n = ov.shape[0]
    match = np.full(n, -1, dtype=np.intp)
    used = np.zeros(n, dtype=bool)
    rows = np.argmax(ov, axis=1)
    dominant = ov[np.arange(n), rows] > 0.5
    match[dominant] = rows[dominant]
    used[rows[dominant]] = True
    free_r = np.flatnonzero(~dominant)
    free_c = np.flatnonzero(~used)
    if free_r.size:
        sub = ov[np.ix_(free_r, free_c)]
        subd = dw[np.ix_(free_r, free_c)]
        order = np.lexsort((subd.ravel(), -sub.ravel()))
        r_done = np.zeros(free_r.size, dtype=bool)
        c_done = np.zeros(free_c.size, dtype=bool)
        left = free_r.size
        for flat in order:
            i, j = divmod(int(flat), free_c.size)
            if r_done[i] or c_done[j]:
                continue
            match[free_r[i]] = free_c[j]
            r_done[i] = c_done[j] = True
            left -= 1
            if not left:
                break
    return match


def trace_branches(sp: StripSpectrum) -> NDArray[np.intp]:
    """
    Branch labels (nk, dim): states at adjacent k linked by largest eigenvector overlap.

    Labels are assigned at the first k and carried forward.
    """
    nk, dim = sp.omega.shape
    labels = np.empty((nk, dim), dtype=np.intp)
    labels[0] = np.arange(dim)
    for i in range(nk - 1):
        ov = np.abs(sp.vectors[i].conj().T @ sp.vectors[i + 1]) ** 2
        dw = np.abs(wrap_phase(sp.omega[i][:, None] - sp.omega[i + 1][None, :]))
        m = _match(ov, dw)
        labels[i + 1, m] = labels[i]
    return labels


def branch_velocity(sp: StripSpectrum, labels: NDArray[np.intp] | None = None) -> NDArray[np.float64]:
    """Finite-difference d omega / d k along traced branches (central where possible)."""
    labels = trace_branches(sp) if labels is None else labels
    nk, dim = sp.omega.shape
    pos = np.empty((nk, dim), dtype=np.intp)
    for i in range(nk):
        pos[i, labels[i]] = np.arange(dim)
    # omega of branch b at each k, shape (nk, dim)
    traced = np.take_along_axis(sp.omega, pos, axis=1)
    out_b = np.empty_like(traced)
    for i in range(nk):
        lo, hi = max(i - 1, 0), min(i + 1, nk - 1)
        out_b[i] = wrap_phase(traced[hi] - traced[lo]) / (sp.k[hi] - sp.k[lo])
    vel = np.empty_like(out_b)
    for i in range(nk):
        vel[i] = out_b[i, labels[i]]
    return vel


@dataclass(frozen=True)
class EdgeState:
    k: float
    omega: float
    interface: int
    velocity_sign: int
    velocity: float
    weight: float
    gap: str


def _bulk_gaps(cfg: StripConfig, grid: MomentumGrid) -> tuple[float, float]:
    ga = gap_widths(band_structure(cclass_coin(cfg.coin_a), grid))
    gb = gap_widths(band_structure(cclass_coin(cfg.coin_b), grid))
    return min(ga[0], gb[0]), min(ga[1], gb[1])


def detect_edge_states(
    sp: StripSpectrum,
    gaps: tuple[float, float] | None = None,
    threshold: float = 0.9,
    within: int = 4,
    flat_tol: float = FLAT_TOL,
    min_gap: float = 1e-6,
) -> list[EdgeState]:
    """
    Interface-localized states with quasi-energy inside both bulk gaps.

    Parameters
    ----------
    sp : StripSpectrum
    gaps : (gap0, gapPi), optional
        Common bulk gaps around 0 and pi; computed from both coins on a
        64x64 momentum grid when omitted.
    threshold : float
        Minimal weight within ``within`` sites of one interface.

    Raises
    ------
    NoGapError
        If either common bulk gap is below ``min_gap``.
    """
    if gaps is None:
        gaps = _bulk_gaps(sp.config, MomentumGrid(64, 64))
    g0, gp = gaps
    if min(g0, gp) < min_gap:
        raise NoGapError(f"bulk gap too small for edge detection: gap0={g0:.3g}, gapPi={gp:.3g}")
    a = np.abs(sp.omega)
    in0 = (a > flat_tol) & (a < g0)
    inp = (np.pi - a > flat_tol) & (np.pi - a < gp)
    w1 = sp.interface_weight(1, within)
    w2 = sp.interface_weight(2, within)
    found = []
    for i, j in zip(*np.nonzero(in0 | inp)):
        if w1[i, j] > threshold:
            iface, wt = 1, w1[i, j]
        elif w2[i, j] > threshold:
            iface, wt = 2, w2[i, j]
        else:
            continue
        v = float(sp.velocity[i, j])
        found.append(
            EdgeState(float(sp.k[i]), float(sp.omega[i, j]), iface, int(np.sign(v)), v,
                      float(wt), "0" if in0[i, j] else "pi")
        )
    return found


def _is_real(m: NDArray) -> bool:
    return float(np.abs(np.imag(m)).max()) < 1e-14


def edge_flow(
    coin_a: NDArray,
    coin_b: NDArray,
    width_a: int,
    width_b: int,
    nk: int,
    gaps: tuple[float, float],
    window: tuple[float, float] = (0.15, 0.85),
) -> tuple[float, float]:
    """
    Net number of chiral branches at interface 1, per gap.

    A branch crossing the energy window [a, b] contributes
    integral v dk = +-(b - a), so sum(v) dk / (b - a) over interface-1 states
    in the window counts branches with their direction. Windows are taken
    on both sides of the flat band (|omega| in [a, b]), then averaged.
    Returns (flow around 0, flow around pi).
    """
    d1, d2 = interface_distance(width_a, width_b)
    side1 = np.repeat(d1 < d2, 4)
    dk = 2 * np.pi / nk
    ks = (np.arange(nk) + 0.5) * dk - np.pi
    symmetric = _is_real(coin_a) and _is_real(coin_b) and nk % 2 == 0
    if symmetric:
        # U(-k) = conj U(k): phases flip sign, velocities and profiles are unchanged
        ks = ks[nk // 2:]
    lims = [(window[0] * g, window[1] * g) for g in gaps]
    acc = [0.0, 0.0]
    for k in ks:
        omega, vecs = eig_unitary(strip_operator(coin_a, coin_b, width_a, width_b, k))
        pw = np.abs(vecs) ** 2
        on1 = pw[side1].sum(axis=0) > 0.5
        vel = pw[3::4].sum(axis=0) - pw[0::4].sum(axis=0)
        a = np.abs(omega)
        for g, (lo, hi) in enumerate(lims):
            dist = a if g == 0 else np.pi - a
            sel = on1 & (dist > lo) & (dist < hi)
            acc[g] += float(vel[sel].sum())
    scale = 2.0 if symmetric else 1.0
    return tuple(scale * acc[g] * dk / (2 * (hi - lo)) for g, (lo, hi) in enumerate(lims))


@dataclass(frozen=True)
class TopoSettings:
    """
    Resolution policy of the topological map.

    Region widths scale as width_factor / gap (a few localization lengths)
    and the number of k samples as k_factor / gap, both clamped. Points
    whose common gap is below ``min_gap`` cannot be resolved by strips of
    at most ``max_width`` sites and are flagged -1. A phase boundary
    changes the flow by two, so |flow| >= ``flow_threshold`` marks a point
    as distinct.
    """

    min_gap: float = 0.05
    width_factor: float = 4.0
    min_width: int = 6
    max_width: int = 40
    k_factor: float = 12.0
    min_nk: int = 32
    max_nk: int = 160
    band_grid: int = 64
    flow_threshold: float = 1.0

    def width(self, gap: float) -> int:
        return int(min(max(math.ceil(self.width_factor / gap), self.min_width), self.max_width))

    def nk(self, gap: float) -> int:
        n = int(min(max(math.ceil(self.k_factor / gap), self.min_nk), self.max_nk))
        return n + (n % 2)


@dataclass
class TopoMap:
    """flag[i, j] at (delta1[i], delta2[j]): 1 distinct from reference, 0 same, -1 unresolved."""

    delta1: NDArray[np.float64]
    delta2: NDArray[np.float64]
    flag: NDArray[np.int8]
    flow0: NDArray[np.float64]
    flow_pi: NDArray[np.float64]
    gap: NDArray[np.float64]
    reference: CoinParams
    settings: TopoSettings = field(default_factory=TopoSettings)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["delta1", "delta2", "phase_flag", "flow0", "flowPi", "gap"])
        for i, d1 in enumerate(self.delta1):
            for j, d2 in enumerate(self.delta2):
                w.writerow([repr(float(d1)), repr(float(d2)), int(self.flag[i, j]),
                            repr(float(self.flow0[i, j])), repr(float(self.flow_pi[i, j])),
                            repr(float(self.gap[i, j]))])
        return buf.getvalue()


def topo_map(
    delta1: NDArray,
    delta2: NDArray,
    reference: CoinParams,
    base: CoinParams | None = None,
    settings: TopoSettings | None = None,
    threads: int = 1,
) -> TopoMap:
    """
    Classify (delta1, delta2) coins against ``reference`` by interface chirality.

    Each grid coin takes alpha, beta and phi from ``base`` (default: the
    reference). A strip pairs the reference (region A) with the grid coin
    (region B); the point is marked distinct when the rounded net edge
    flow at the interface reaches ``settings.flow_threshold`` in either gap.
    """
    settings = settings or TopoSettings()
    base = base or reference
    d1s = np.asarray(delta1, dtype=float)
    d2s = np.asarray(delta2, dtype=float)
    grid = MomentumGrid(settings.band_grid, settings.band_grid)
    ref_m = cclass_coin(reference)
    ref_gaps = gap_widths(band_structure(ref_m, grid))
    jobs = [(i, j) for i in range(len(d1s)) for j in range(len(d2s))]

    def point(ij):
        i, j = ij
        p = base.replace(delta1=float(d1s[i]), delta2=float(d2s[j]))
        m = cclass_coin(p)
        g = gap_widths(band_structure(m, grid))
        gaps = (min(g[0], ref_gaps[0]), min(g[1], ref_gaps[1]))
        gmin = min(gaps)
        if gmin < settings.min_gap:
            return -1, math.nan, math.nan, gmin
        f0, fp = edge_flow(ref_m, m, settings.width(min(ref_gaps)), settings.width(gmin),
                           settings.nk(gmin), gaps)
        distinct = max(abs(f0), abs(fp)) >= settings.flow_threshold
        return int(distinct), f0, fp, gmin

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            res = list(ex.map(point, jobs))
    else:
        res = [point(ij) for ij in jobs]
    shape = (len(d1s), len(d2s))
    flag = np.array([r[0] for r in res], dtype=np.int8).reshape(shape)
    f0 = np.array([r[1] for r in res]).reshape(shape)
    fp = np.array([r[2] for r in res]).reshape(shape)
    gap = np.array([r[3] for r in res]).reshape(shape)
    return TopoMap(d1s, d2s, flag, f0, fp, gap, reference, settings)


def edge_packet_probe(
    cfg: StripConfig,
    length: int = 64,
    mode: int = 5,
    steps: int = 50,
    noise: float = 0.05,
    seed: int = 0,
    within: int = 4,
    sigma: float = 6.0,
) -> tuple[float, float]:
    """
    Propagate an interface-1 wave packet through a noisy two-region torus.

    The packet is the in-gap interface-1 eigenvector at k = 2 pi mode / length
    (the one with the largest interface weight), times a Gaussian envelope
    in x. Every site's coin angles are perturbed uniformly within +-noise.
    Returns (interface-1 weight after ``steps``, centre-of-mass shift in x).
    """
    n = cfg.n_sites
    k0 = 2 * np.pi * mode / length
    omega, vecs = eig_unitary(strip_operator(cclass_coin(cfg.coin_a), cclass_coin(cfg.coin_b),
                                             cfg.width_a, cfg.width_b, k0))
    d1, _ = interface_distance(cfg.width_a, cfg.width_b)
    near = np.repeat(d1 < within, 4)
    a = np.abs(omega)
    nonflat = (a > FLAT_TOL) & (np.pi - a > FLAT_TOL)
    w = (np.abs(vecs[near]) ** 2).sum(axis=0) * nonflat
    v = vecs[:, int(np.argmax(w))].reshape(n, 4)

    x = np.arange(length)
    x0 = length / 2
    env = np.exp(-((x - x0) ** 2) / (4 * sigma**2)) * np.exp(-1j * k0 * x)
    psi = env[:, None, None] * v[None, :, :]
    psi /= np.linalg.norm(psi)

    rng = np.random.default_rng(seed)
    coins = np.empty((length, n, 4, 4), dtype=np.complex128)
    for y in range(n):
        base = cfg.coin_a if y < cfg.width_a else cfg.coin_b
        d = base.to_dict()
        for xi in range(length):
            eps = rng.uniform(-noise, noise, size=7)
            coins[xi, y] = cclass_coin(CoinParams.from_angles(*(d[k] + e for k, e in zip(d, eps))))
    out = evolve(psi, CoinField.from_array(coins), steps)
    prob = (np.abs(out) ** 2).sum(axis=2)
    weight = float(prob[:, d1 < within].sum())

    def com(p):
        px = p.sum(axis=1)
        ang = np.angle(np.sum(px * np.exp(2j * np.pi * x / length)))
        return ang * length / (2 * np.pi)

    p0 = (np.abs(psi) ** 2).sum(axis=2)
    shift = (com(prob) - com(p0) + length / 2) % length - length / 2
    return weight, float(shift)
