"""Result records shared by the ITF and XXZ kernels."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

# exp() underflows to a subnormal/zero below this
LOG_UNDERFLOW = -745.0


def materialize(log_f: float) -> float:
    """Return exp(log_f), or 0.0 when it would underflow."""
    if log_f <= LOG_UNDERFLOW:
        return 0.0
    return math.exp(log_f)


@dataclass(frozen=True)
class RgLevel:
    """One RG level of a fidelity trajectory.

    ``coupling`` is the flowed central coupling, ``coupling_minus`` and
    ``coupling_plus`` the independently flowed perturbed couplings. ``blocks``
    is the number of blocks at this level whose overlaps enter the product.
    """

    level: int
    coupling: float
    coupling_minus: float
    coupling_plus: float
    J: float
    blocks: int
    log_overlap: float

    @property
    def log_contribution(self) -> float:
        return self.blocks * self.log_overlap


@dataclass(frozen=True)
class RgTrace:
    levels: tuple[RgLevel, ...]
    ell: int
    block_size: int

    @property
    def n_sites(self) -> int:
        return self.block_size ** (self.ell + 1)

    @property
    def log_f(self) -> float:
        return math.fsum(lv.log_contribution for lv in self.levels)


@dataclass(frozen=True)
class FidelityResult:
    """Ground-state fidelity with its log retained.

    ``f`` is 0.0 when ``log_f`` is below the double-precision underflow
    threshold; ``log_f`` is always exact up to rounding.
    """

    log_f: float
    f: float
    n_delta: float
    ell: int | None
    n_sites: int
    trace: RgTrace | None = field(default=None, compare=False, repr=False)

    @classmethod
    def from_log(cls, log_f: float, n_sites: int, delta: float, ell: int | None,
                 trace: RgTrace | None = None) -> "FidelityResult":
        return cls(log_f=log_f, f=materialize(log_f), n_delta=n_sites * abs(delta),
                   ell=ell, n_sites=n_sites, trace=trace)

    @property
    def one_minus_f(self) -> float:
        """1 − f evaluated without cancellation."""
        return -math.expm1(self.log_f)
