"""Closed-form QRG kernels for the quantum-group symmetric XXZ chain.

On the critical line ``|Δ| <= 1`` the deformation parameter is a pure phase,
``q = e^{iθ}`` with ``Δ = cos θ``. Three-site blocks keep the doublet

    |φ₁⟩ = −C₊|++−⟩ + (C₊ + C₋)|+−+⟩ − C₋|−++⟩
    |φ₂⟩ = −C₊|+−−⟩ + (C₊ + C₋)|−+−⟩ − C₋|−−+⟩

with ``C± = e^{±iθ/2} / √(2Δ+4)``. The anisotropy does not flow, so the
per-block overlap ω is the same at every level.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

from .errors import DomainError, PoleError
from .results import FidelityResult, RgLevel, RgTrace

BLOCK_SIZE = 3
SQRT2 = math.sqrt(2.0)
OMEGA_BRANCHES = ("signed-cos", "radical-abs")


@dataclass(frozen=True)
class XxzCouplings:
    J: float
    delta: float
    theta: float = field(init=False)

    def __post_init__(self):
        if not (self.J > 0 and math.isfinite(self.J)):
            raise DomainError(f"XXZ requires finite J > 0, got J={self.J!r}")
        _check_aniso(self.delta)
        object.__setattr__(self, "theta", math.acos(self.delta))

    @property
    def q(self) -> complex:
        return cmath.exp(1j * self.theta)

    @property
    def a_plus(self) -> float:
        return math.cos(self.theta)

    @property
    def a_minus(self) -> complex:
        return 1j * math.sin(self.theta)


@dataclass(frozen=True)
class XxzBlockState:
    c_plus: complex
    c_minus: complex
    mid: complex

    @property
    def amplitudes(self) -> tuple[complex, complex, complex]:
        """Coefficients of |φ₁⟩ on (|++−⟩, |+−+⟩, |−++⟩)."""
        return (-self.c_plus, self.mid, -self.c_minus)


@dataclass(frozen=True)
class Divergence:
    """Tagged divergence of χ at ``|Δ| = 1``: χ ≈ rate / (1 − Δ²) nearby."""

    at: float
    rate: float

    value = math.inf


def _check_aniso(delta: float, name: str = "Delta") -> float:
    delta = float(delta)
    if not abs(delta) <= 1.0:
        raise DomainError(f"XXZ is restricted to |{name}| <= 1, got {name}={delta!r}")
    return delta


def _check_sites(n_sites: int) -> int:
    if isinstance(n_sites, bool) or int(n_sites) != n_sites or n_sites < 2:
        raise DomainError(f"XXZ chain length must be an integer N >= 2, got N={n_sites!r}")
    return int(n_sites)


def sites_from_ell(ell: int) -> int:
    if isinstance(ell, bool) or int(ell) != ell or ell < 0:
        raise DomainError(f"level count must be a non-negative integer, got {ell!r}")
    return BLOCK_SIZE ** (int(ell) + 1)


def ell_from_sites(n_sites: int) -> int | None:
    """ℓ with N = 3^(ℓ+1), or None when N is not block-aligned."""
    n = _check_sites(n_sites)
    ell = -1
    while n % BLOCK_SIZE == 0:
        n //= BLOCK_SIZE
        ell += 1
    return ell if n == 1 and ell >= 0 else None


def xxz_rg_step(c: XxzCouplings) -> XxzCouplings:
    """``Δ → Δ`` and ``J → J·[(2Δ+2) / (2(2Δ+1))]²``; pole at Δ = −1/2."""
    denom = 2.0 * (2.0 * c.delta + 1.0)
    if denom == 0.0:
        raise PoleError("renormalized J diverges at Delta = -1/2")
    out = XxzCouplings(J=c.J * ((2.0 * c.delta + 2.0) / denom) ** 2, delta=c.delta)
    # keep θ bitwise identical to the input
    object.__setattr__(out, "theta", c.theta)
    return out


def xxz_block_state(delta: float) -> XxzBlockState:
    delta = _check_aniso(delta)
    theta = math.acos(delta)
    norm = math.sqrt(2.0 * delta + 4.0)
    return XxzBlockState(
        c_plus=cmath.exp(0.5j * theta) / norm,
        c_minus=cmath.exp(-0.5j * theta) / norm,
        mid=complex(2.0 * math.cos(0.5 * theta) / norm, 0.0),
    )


def xxz_pair_omega(delta_a: float, delta_b: float, branch: str = "signed-cos") -> float:
    """ln ω for the block states at anisotropies ``delta_a`` and ``delta_b``."""
    da = _check_aniso(delta_a, "Delta_-")
    db = _check_aniso(delta_b, "Delta_+")
    if branch not in OMEGA_BRANCHES:
        raise ValueError(f"unknown omega branch {branch!r}; expected one of {OMEGA_BRANCHES}")
    if da == db and branch == "signed-cos":
        return 0.0
    denom = 2.0 * math.sqrt((2.0 + da) * (2.0 + db))
    if branch == "signed-cos":
        ta, tb = math.acos(da), math.acos(db)
        u = 4.0 * math.cos(0.5 * (tb - ta)) + 2.0 * math.cos(0.5 * (tb + ta))
        # overlap of normalized states; clip rounding above 1
        return min(0.0, math.log(u / denom))
    root = math.sqrt((1.0 - da * da) * (1.0 - db * db))
    u = SQRT2 * (2.0 * math.sqrt(1.0 + da * db + root)
                 + math.sqrt(max(0.0, 1.0 + da * db - root)))
    return math.log(u / denom)


def xxz_omega(delta_aniso: float, delta: float, branch: str = "signed-cos") -> float:
    """ln ω⁽⁰⁾(Δ, δ) with ω = u / (2√((2+Δ₋)(2+Δ₊))).

    The default branch writes ``u = 4cos((θ₊−θ₋)/2) + 2cos((θ₊+θ₋)/2)``
    with ``θ± = arccos(Δ±)``. ``branch="radical-abs"`` evaluates the nested
    square roots literally; the two agree for Δ >= 0 and the radical form
    gives ω > 1 for Δ < 0.
    """
    delta_aniso, delta = float(delta_aniso), float(delta)
    return xxz_pair_omega(delta_aniso - delta, delta_aniso + delta, branch)


def xxz_fidelity(delta_aniso: float, delta: float, n_sites: int) -> FidelityResult:
    """GSF ``exp(((N−1)/2) ln ω)`` for an open chain of N sites."""
    n = _check_sites(n_sites)
    log_omega = xxz_omega(delta_aniso, delta)
    return FidelityResult.from_log(0.5 * (n - 1) * log_omega, n, delta, ell_from_sites(n))


def xxz_pair_fidelity(delta_a: float, delta_b: float, n_sites: int) -> FidelityResult:
    n = _check_sites(n_sites)
    log_omega = xxz_pair_omega(delta_a, delta_b)
    return FidelityResult.from_log(0.5 * (n - 1) * log_omega, n, delta_b - delta_a,
                                   ell_from_sites(n))


def xxz_trace(delta_aniso: float, delta: float, ell: int, J: float = 1.0) -> RgTrace:
    """Level-by-level accumulation on N = 3^(ℓ+1) sites.

    The pole of the J flow at Δ = −1/2 is reported as ``J = nan`` past the
    first level rather than raised, since the fidelity does not use J.
    """
    n_sites = sites_from_ell(ell)
    couplings = XxzCouplings(J=J, delta=delta_aniso)
    d_minus, d_plus = couplings.delta - delta, couplings.delta + delta
    log_omega = xxz_omega(couplings.delta, delta)
    levels = []
    J_level = couplings.J
    for j in range(ell + 1):
        levels.append(RgLevel(level=j, coupling=couplings.delta, coupling_minus=d_minus,
                              coupling_plus=d_plus, J=J_level,
                              blocks=n_sites // BLOCK_SIZE ** (j + 1), log_overlap=log_omega))
        try:
            J_level = xxz_rg_step(XxzCouplings(J=J_level, delta=couplings.delta)).J
        except DomainError:
            J_level = math.nan
    return RgTrace(levels=tuple(levels), ell=ell, block_size=BLOCK_SIZE)


def xxz_susceptibility(delta_aniso: float, n_sites: int) -> float | Divergence:
    """χ = 6(N−1) / [(1−Δ²)(2Δ+4)²]; a :class:`Divergence` at |Δ| = 1."""
    d = _check_aniso(delta_aniso)
    n = _check_sites(n_sites)
    rate = 6.0 * (n - 1) / (2.0 * d + 4.0) ** 2
    if abs(d) == 1.0:
        return Divergence(at=d, rate=rate)
    return rate / (1.0 - d * d)
