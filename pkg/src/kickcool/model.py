"""Phonon populations and the resonant qubit-kick map acting on them.

The resonator state is a probability vector over number states 0..n_max.
A kick couples the mode to a freshly reset two-level system for a time tau
at resonance; tracing the qubit out moves population between neighbouring
levels only, with weights set by the pulse area theta = g*tau.  Both the
kick and thermal damping preserve diagonality, so populations are the
complete state.

All rates and angular frequencies are in SI units (1/s, rad/s).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import InitVar, dataclass

import numpy as np

from .errors import TruncationOverflowWarning, ValidityWarning

TAIL_TOL = 1e-12
NEG_CLAMP = -1e-12
SUM_TOL = 1e-9


@dataclass(frozen=True)
class PhononDistribution:
    """Probability distribution over phonon number states 0..n_max.

    Entries in (-1e-12, 0) are treated as rounding noise: they are clamped
    to zero and the vector is renormalized.  Anything more negative raises,
    since that signals a bug rather than floating-point dust.  A tail entry
    at the top level above ``tail_tol`` triggers a truncation warning unless
    the producing operation already reported it.
    """

    populations: np.ndarray
    tail_tol: float = TAIL_TOL
    check_tail: InitVar[bool] = True

    def __post_init__(self, check_tail: bool) -> None:
        p = np.array(self.populations, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("populations must be a 1-d vector of length >= 2")
        if not np.all(np.isfinite(p)):
            raise ValueError("populations contain non-finite entries")
        lowest = p.min()
        if lowest < NEG_CLAMP:
            raise ValueError(
                f"population entry {lowest:.3e} is below the clamp threshold "
                f"{NEG_CLAMP:.0e}; this signals a bug, not rounding"
            )
        if lowest < 0.0:
            p = np.maximum(p, 0.0)
            p /= p.sum()
        total = p.sum()
        if abs(total - 1.0) > SUM_TOL:
            raise ValueError(f"populations sum to {total!r}, not 1 within {SUM_TOL:.0e}")
        if check_tail and p[-1] > self.tail_tol:
            warnings.warn(
                f"top-level population {p[-1]:.3e} exceeds tail tolerance "
                f"{self.tail_tol:.0e}; increase n_max",
                TruncationOverflowWarning,
                stacklevel=3,
            )
        p.setflags(write=False)
        object.__setattr__(self, "populations", p)

    @property
    def n_max(self) -> int:
        return self.populations.size - 1

    @property
    def p0(self) -> float:
        return float(self.populations[0])


@dataclass(frozen=True)
class KickMap:
    """Per-level transfer weights of one qubit kick with pulse area theta.

    ce2[n] = sin^2(theta*sqrt(n+1)) is the swap weight of the (n, n+1) pair;
    cg2[n] = cos^2(theta*sqrt(n)) is the survival weight of level n under a
    ground-state qubit.  p_e is the probability that the qubit enters the
    kick excited, which runs the same swap upward (phonon emission).
    """

    ce2: np.ndarray
    cg2: np.ndarray
    p_e: float
    theta: float

    def __post_init__(self) -> None:
        for name in ("ce2", "cg2"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.ce2.shape != self.cg2.shape:
            raise ValueError("ce2 and cg2 must have equal length")

    @property
    def n_max(self) -> int:
        return self.ce2.size - 1


@dataclass(frozen=True)
class ProtocolParams:
    """Model-level protocol parameters.

    g      : qubit-resonator coupling (rad/s)
    tau    : kick duration (s)
    r_a    : kick repetition rate (1/s)
    kappa  : resonator energy decay rate (1/s)
    n_th   : mean thermal phonon number of the environment
    p_e    : probability the qubit enters a kick in its excited state

    Zero r_a or kappa is accepted so that pure-damping and damping-free
    limits can be exercised.  Warns when the coarse-graining assumptions
    r_a*tau <= 0.5 and kappa*tau <= 0.01 are violated.
    """

    g: float
    tau: float
    r_a: float
    kappa: float
    n_th: float
    p_e: float = 0.0

    def __post_init__(self) -> None:
        if self.g <= 0 or self.tau <= 0:
            raise ValueError("g and tau must be positive")
        if self.r_a < 0 or self.kappa < 0:
            raise ValueError("r_a and kappa must be non-negative")
        if self.n_th < 0:
            raise ValueError("n_th must be non-negative")
        if not 0.0 <= self.p_e <= 1.0:
            raise ValueError("p_e must lie in [0, 1]")
        if self.r_a * self.tau > 0.5:
            warnings.warn(
                f"r_a*tau = {self.r_a * self.tau:.3g} > 0.5: kick duty cycle is "
                "not short against the repetition period",
                ValidityWarning,
                stacklevel=3,
            )
        if self.kappa * self.tau > 0.01:
            warnings.warn(
                f"kappa*tau = {self.kappa * self.tau:.3g} > 0.01: damping during "
                "the kick is not negligible",
                ValidityWarning,
                stacklevel=3,
            )

    @property
    def theta(self) -> float:
        """Pulse area g*tau."""
        return self.g * self.tau

    @property
    def ra_over_kappa(self) -> float:
        return self.r_a / self.kappa if self.kappa > 0 else math.inf


def build_kick_map(g: float, tau: float, p_e: float, n_max: int) -> KickMap:
    """Tabulate the kick transfer weights for levels 0..n_max."""
    if g <= 0 or tau <= 0:
        raise ValueError("g and tau must be positive")
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if not 0.0 <= p_e <= 1.0:
        raise ValueError("p_e must lie in [0, 1]")
    theta = g * tau
    n = np.arange(n_max + 1)
    ce2 = np.sin(theta * np.sqrt(n + 1.0)) ** 2
    cg2 = np.cos(theta * np.sqrt(n.astype(float))) ** 2
    return KickMap(ce2=ce2, cg2=cg2, p_e=float(p_e), theta=theta)


def _kick_vector(p: np.ndarray, kick: KickMap) -> np.ndarray:
    """Apply one kick to a raw population vector (no validation)."""
    down = kick.cg2 * p
    down[:-1] += kick.ce2[:-1] * p[1:]
    if kick.p_e == 0.0:
        return down
    # excited branch: survival cos^2(theta*sqrt(n+1)) = 1 - ce2[n]; the top
    # level has no partner above and is left untouched (reflecting edge).
    up = (1.0 - kick.ce2) * p
    up[-1] = p[-1]
    up[1:] += kick.ce2[:-1] * p[:-1]
    return (1.0 - kick.p_e) * down + kick.p_e * up


def kick_matrix(kick: KickMap) -> np.ndarray:
    """Dense column-stochastic matrix M of the kick acting on populations."""
    size = kick.n_max + 1
    idx = np.arange(size - 1)
    m = np.zeros((size, size))
    m[np.arange(size), np.arange(size)] = (1.0 - kick.p_e) * kick.cg2
    m[-1, -1] += kick.p_e  # reflecting top level in the excited branch
    m[np.arange(size - 1), np.arange(size - 1)] += kick.p_e * (1.0 - kick.ce2[:-1])
    m[idx, idx + 1] += (1.0 - kick.p_e) * kick.ce2[:-1]
    m[idx + 1, idx] += kick.p_e * kick.ce2[:-1]
    return m


def apply_kick(dist: PhononDistribution, kick: KickMap) -> PhononDistribution:
    """One kick on a population vector.

    p'_n = (1-p_e) [cg2[n] p_n + ce2[n] p_{n+1}]
         +    p_e  [(1-ce2[n]) p_n + ce2[n-1] p_{n-1}]

    Probability is conserved exactly up to rounding; the result is
    renormalized only if the drift exceeds 1e-12, in which case the drift
    is reported.  With p_e > 0 the upward branch can push mass into the top
    level, which is reported as truncation overflow.
    """
    p = dist.populations
    if kick.n_max != dist.n_max:
        raise ValueError(
            f"kick sized for n_max={kick.n_max} applied to distribution with "
            f"n_max={dist.n_max}"
        )
    out = _kick_vector(p, kick)
    if kick.p_e > 0.0:
        inflow_top = kick.p_e * kick.ce2[-2] * p[-2]
        if inflow_top > dist.tail_tol:
            warnings.warn(
                f"excited-qubit branch moved {inflow_top:.3e} into the top level; "
                "truncation is too tight for this kick",
                TruncationOverflowWarning,
                stacklevel=2,
            )
    drift = out.sum() - p.sum()
    if abs(drift) > 1e-12:
        warnings.warn(
            f"kick changed total probability by {drift:.3e}; renormalizing",
            ValidityWarning,
            stacklevel=2,
        )
        out /= out.sum()
    return PhononDistribution(out, tail_tol=dist.tail_tol, check_tail=False)


def mean_phonon(dist: PhononDistribution) -> float:
    """Mean phonon number sum_n n*p_n."""
    p = dist.populations
    return float(np.arange(p.size) @ p)


def thermal_distribution(
    n_th: float, n_max: int, tail_tol: float = TAIL_TOL
) -> PhononDistribution:
    """Thermal (geometric) distribution p_n ~ [n_th/(n_th+1)]^n on 0..n_max."""
    if n_th < 0:
        raise ValueError("n_th must be non-negative")
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    q = n_th / (n_th + 1.0)
    if q > 0 and q**n_max > tail_tol:
        warnings.warn(
            f"thermal tail ratio {q**n_max:.3e} at n_max={n_max} exceeds "
            f"{tail_tol:.0e}; increase n_max",
            TruncationOverflowWarning,
            stacklevel=2,
        )
    p = q ** np.arange(n_max + 1, dtype=float)
    p /= p.sum()
    return PhononDistribution(p, tail_tol=tail_tol, check_tail=False)


def number_state(n: int, n_max: int) -> PhononDistribution:
    """All population in a single number state n."""
    if not 0 <= n <= n_max:
        raise ValueError("need 0 <= n <= n_max")
    p = np.zeros(n_max + 1)
    p[n] = 1.0
    return PhononDistribution(p, check_tail=(n != n_max))


def default_n_max(n_th: float, tail_tol: float = TAIL_TOL) -> int:
    """Truncation size keeping the thermal tail ratio below tail_tol.

    Starts at max(60, ceil(20 + 12*n_th)) and grows by 50% until the
    thermal weight ratio [n_th/(n_th+1)]**n_max is below tail_tol, the
    same condition thermal_distribution warns on.
    """
    if n_th < 0:
        raise ValueError("n_th must be non-negative")
    n = max(60, math.ceil(20.0 + 12.0 * n_th))
    q = n_th / (n_th + 1.0)
    if q == 0.0:
        return n
    while q**n > tail_tol:
        n = math.ceil(1.5 * n)
    return n
