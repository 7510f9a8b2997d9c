"""Closed-form QRG kernels for the transverse-field Ising (ITF) chain.

The chain ``H = -J Σ_i (σᶻ_i σᶻ_{i+1} + g σˣ_i)`` is coarse-grained with
two-site blocks. The doublet kept per block has amplitudes

    A(g) = s / √(1+s²),   B(g) = 1 / √(1+s²),   s = g + √(1+g²),

which is the same as ``A = cos θ``, ``B = sin θ`` with
``θ(g) = π/4 − arctan(g)/2``. Overlaps are evaluated from angle differences
and flowed couplings are carried as logarithms, ``ln g^(j) = 2^j ln g``, so
that trajectories with ``g^(j)`` far outside the double range stay finite.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import DomainError
from .results import FidelityResult, RgLevel, RgTrace

SQRT2 = math.sqrt(2.0)

#: lim_{δ→0} lim_{N→∞} f at g = 1, equal to A(1) = cos(π/8)
THERMO_LIMIT_CRITICAL = (1.0 + SQRT2) / math.sqrt(4.0 + 2.0 * SQRT2)

BLOCK_SIZE = 2
MAX_ELL = 500
_LOG_MAX = 709.78


@dataclass(frozen=True)
class ItfCouplings:
    J: float
    g: float

    def __post_init__(self):
        if not (self.J > 0 and math.isfinite(self.J)):
            raise DomainError(f"ITF requires finite J > 0, got J={self.J!r}")
        if not self.g >= 0:
            raise DomainError(f"ITF requires g >= 0, got g={self.g!r}")


@dataclass(frozen=True)
class ItfBlockState:
    """Amplitudes of the two degenerate block ground states.

    |φ₁⟩ = A|↑↑⟩ + B|↓↓⟩ and |φ₂⟩ = A|↑↓⟩ + B|↓↑⟩ in the σˣ eigenbasis.
    """

    s: float
    A: float
    B: float


class FixedPoint(str, enum.Enum):
    STABLE_ZERO = "stable_zero"
    UNSTABLE_CRITICAL = "unstable_critical"
    STABLE_INFINITY = "stable_infinity"
    FLOWING = "flowing"


@dataclass(frozen=True)
class ItfSusceptibility:
    """Fidelity susceptibility χ with its per-level breakdown.

    ``boundary`` is the contribution of the final single block and ``bulk``
    holds the remaining level contributions in level order.
    """

    chi: float
    boundary: float
    bulk: tuple[float, ...]
    mode: str
    g: float
    ell: int

    @property
    def n_sites(self) -> int:
        return BLOCK_SIZE ** (self.ell + 1)

    @property
    def reference_boundary(self) -> float:
        """N²/32, a common normalization of the critical boundary term; for comparison only."""
        return self.n_sites ** 2 / 32.0


CHI_MODES = ("fd-calibrated", "printed")


# -- log-space helpers ------------------------------------------------------

def _log(x: float) -> float:
    return -math.inf if x == 0 else math.log(x)


def _exp(x: float) -> float:
    return math.inf if x > _LOG_MAX else math.exp(x)


def _power(base: float, scale: float, log_value: float) -> float:
    # base**scale directly when representable, so exact fixed points stay exact
    try:
        return base ** scale
    except OverflowError:
        return _exp(log_value)


def _log1p_exp(x: float) -> float:
    """ln(1 + e^x) without overflow."""
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def _atan_exp_shifted(log_g: float) -> float:
    # arctan(g) - π/4, written through tanh so that g = e^L may overflow
    return math.atan(math.tanh(0.5 * log_g))


def _log_overlap_from_logs(log_a: float, log_b: float) -> float:
    """ln[A(a)A(b) + B(a)B(b)] for couplings given by their logarithms."""
    half_angle = 0.25 * (_atan_exp_shifted(log_b) - _atan_exp_shifted(log_a))
    return math.log1p(-2.0 * math.sin(half_angle) ** 2)


def _log_d_from_log(log_g: float) -> float:
    # D(g) = 1 / (4 (1+g²)²)
    return -math.log(4.0) - 2.0 * _log1p_exp(2.0 * log_g)


def _check_g(g: float, name: str = "g") -> float:
    g = float(g)
    if not (g >= 0 and math.isfinite(g)):
        raise DomainError(f"ITF requires finite {name} >= 0, got {name}={g!r}")
    return g


def _check_ell(ell: int) -> int:
    if isinstance(ell, bool) or int(ell) != ell or not 1 <= ell <= MAX_ELL:
        raise DomainError(f"level count must be an integer in [1, {MAX_ELL}], got {ell!r}")
    return int(ell)


def sites_from_ell(ell: int) -> int:
    return BLOCK_SIZE ** (_check_ell(ell) + 1)


def ell_from_sites(n_sites: int) -> int:
    """Inverse of :func:`sites_from_ell`; rejects sizes that are not 2^(ℓ+1)."""
    n = int(n_sites)
    if n != n_sites or n < 4 or n & (n - 1):
        raise DomainError(f"ITF chain length must be 2^(ell+1) with ell >= 1, got N={n_sites!r}")
    return n.bit_length() - 2


# -- flow and block quantities ----------------------------------------------

def itf_rg_step(c: ItfCouplings) -> ItfCouplings:
    """One Kadanoff step: ``g → g²`` and ``J → J·2s/(1+s²)``.

    ``2s/(1+s²)`` equals ``1/√(1+g²)``; the latter form is used because it
    stays finite for any g.
    """
    return ItfCouplings(J=c.J / math.hypot(1.0, c.g), g=c.g * c.g)


def itf_block_state(g: float) -> ItfBlockState:
    g = _check_g(g)
    s = g + math.hypot(1.0, g)
    norm = math.hypot(1.0, s)
    return ItfBlockState(s=s, A=s / norm, B=1.0 / norm)


def itf_block_state_derivative(g: float) -> tuple[float, float]:
    """Analytic ``(∂A/∂g, ∂B/∂g)``."""
    g = _check_g(g)
    s = g + math.hypot(1.0, g)
    ds = 1.0 + g / math.hypot(1.0, g)
    denom = (1.0 + s * s) ** 1.5
    return ds / denom, -s * ds / denom


def itf_d_factor(g: float) -> float:
    """D(g) = s² / [(1+g²)(1+s²)²], the squared norm of the block-state derivative."""
    g = _check_g(g)
    s = g + math.hypot(1.0, g)
    ratio = 1.0 / (s + 1.0 / s)  # s/(1+s²)
    return ratio * ratio / (1.0 + g * g)


def itf_block_overlap(g: float, delta: float) -> float:
    """Log of the single-block overlap ⟨φᵢ(g−δ)|φᵢ(g+δ)⟩ (identical for i = 1, 2)."""
    g = _check_g(g)
    delta = float(delta)
    if g - abs(delta) < 0:
        raise DomainError(f"ITF requires g - |delta| >= 0, got g={g!r}, delta={delta!r}")
    return _log_overlap_from_logs(_log(g - delta), _log(g + delta))


# -- fidelity ---------------------------------------------------------------

def _trace_pair(g_a: float, g_b: float, ell: int, J: float) -> RgTrace:
    n_sites = BLOCK_SIZE ** (ell + 1)
    log_a, log_b = _log(g_a), _log(g_b)
    g_c = 0.5 * (g_a + g_b)
    log_c = _log(g_c)
    levels = []
    J_level = J
    for j in range(ell + 1):
        scale = float(2 ** j)
        la, lb, lc = scale * log_a, scale * log_b, scale * log_c
        if math.isnan(la) or math.isnan(lb):
            raise DomainError(f"flowed couplings left the g >= 0 domain at level {j}")
        g_level = _power(g_c, scale, lc)
        levels.append(RgLevel(
            level=j,
            coupling=g_level,
            coupling_minus=_power(g_a, scale, la),
            coupling_plus=_power(g_b, scale, lb),
            J=J_level,
            blocks=n_sites >> (j + 1),
            log_overlap=_log_overlap_from_logs(la, lb),
        ))
        J_level = J_level / math.hypot(1.0, g_level)
    return RgTrace(levels=tuple(levels), ell=ell, block_size=BLOCK_SIZE)


def itf_pair_fidelity(g_a: float, g_b: float, ell: int, J: float = 1.0) -> FidelityResult:
    """GSF between the ground states at ``g_a`` and ``g_b`` on N = 2^(ℓ+1) sites.

    ``n_delta`` of the result uses the separation ``|g_b − g_a|``.
    """
    g_a, g_b = _check_g(g_a, "g_a"), _check_g(g_b, "g_b")
    ell = _check_ell(ell)
    ItfCouplings(J=J, g=g_a)
    trace = _trace_pair(g_a, g_b, ell, J)
    return FidelityResult.from_log(trace.log_f, trace.n_sites, g_b - g_a, ell, trace)


def itf_fidelity(g: float, delta: float, ell: int, J: float = 1.0) -> FidelityResult:
    """GSF ``⟨Φ₀(g−δ)|Φ₀(g+δ)⟩`` on a ring of N = 2^(ℓ+1) sites.

    The product over levels is accumulated as
    ``ln f = Σ_{j=0}^{ℓ} (N / 2^(j+1)) · ln ω_j``, where level j uses the
    couplings ``(g ± δ)^(2^j)`` flowed independently and the last term is the
    single remaining block.

    Parameters
    ----------
    g : float
        Transverse-field ratio, ``g >= 0``.
    delta : float
        Perturbation; requires ``g - |delta| >= 0``.
    ell : int
        Number of RG iterations.
    J : float
        Energy scale; only recorded in the trace.
    """
    g = _check_g(g)
    delta = float(delta)
    ell = _check_ell(ell)
    if g - abs(delta) < 0:
        raise DomainError(f"ITF requires g - |delta| >= 0, got g={g!r}, delta={delta!r}")
    ItfCouplings(J=J, g=g)
    trace = _trace_pair(g - delta, g + delta, ell, J)
    return FidelityResult.from_log(trace.log_f, trace.n_sites, delta, ell, trace)


def itf_fidelity_thermo_limit(g: float) -> float:
    """Pointwise thermodynamic limit of the GSF; exact comparison ``g == 1``."""
    g = _check_g(g)
    return THERMO_LIMIT_CRITICAL if g == 1.0 else 1.0


def itf_fidelity_thermo_limit_near(g: float, tol: float) -> float:
    """Variant of :func:`itf_fidelity_thermo_limit` with a tolerance window, for plots."""
    g = _check_g(g)
    return THERMO_LIMIT_CRITICAL if abs(g - 1.0) <= tol else 1.0


# -- susceptibility ---------------------------------------------------------

def _chi_fd_calibrated(g: float, ell: int) -> tuple[float, tuple[float, ...]]:
    n_sites = BLOCK_SIZE ** (ell + 1)
    log_g = _log(g)
    terms = []
    for j in range(ell + 1):
        scale = 2 ** j
        if j == 0:
            log_chain = 0.0
        elif g == 0:
            terms.append(0.0)
            continue
        else:
            # d g^(j) / dg = 2^j g^(2^j - 1)
            log_chain = j * math.log(2.0) + (scale - 1) * log_g
        log_term = (math.log(n_sites >> (j + 1)) + math.log(4.0)
                    + _log_d_from_log(scale * log_g) + 2.0 * log_chain)
        terms.append(_exp(log_term))
    return terms[-1], tuple(terms[:-1])


def _chi_printed(g: float, ell: int) -> tuple[float, tuple[float, ...]]:
    n_sites = BLOCK_SIZE ** (ell + 1)
    log_g = _log(g)
    log_prod = 0.0 if ell == 0 else ((2 ** ell - 1) * log_g if g > 0 else -math.inf)
    boundary = n_sites * _exp(_log_d_from_log(2 ** ell * log_g) + log_prod)
    bulk = tuple(n_sites * _exp(_log_d_from_log(2 ** j * log_g)) / 2.0 ** (j - 1)
                 for j in range(1, ell + 1))
    return boundary, bulk


def itf_susceptibility(g: float, ell: int, mode: str = "fd-calibrated") -> ItfSusceptibility:
    """Fidelity susceptibility χ defined by ``f ≈ 1 − (δ²/2) χ``.

    ``mode="fd-calibrated"`` (default) is the exact second-order coefficient
    of :func:`itf_fidelity`: level j contributes
    ``(N/2^(j+1)) · 4 D(g^(j)) · (dg^(j)/dg)²``.
    ``mode="printed"`` evaluates the closed boundary-term-plus-D-sum
    expression as written; it does not agree with the finite-difference
    susceptibility and is kept for comparison.
    """
    g = _check_g(g)
    ell = _check_ell(ell)
    if mode == "fd-calibrated":
        boundary, bulk = _chi_fd_calibrated(g, ell)
    elif mode == "printed":
        boundary, bulk = _chi_printed(g, ell)
    else:
        raise ValueError(f"unknown chi mode {mode!r}; expected one of {CHI_MODES}")
    chi = math.fsum(bulk) + boundary
    return ItfSusceptibility(chi=chi, boundary=boundary, bulk=bulk, mode=mode, g=g, ell=ell)


def itf_classify_fixed_point(g: float, tolerance: float = 1e-12,
                             max_iter: int = 128) -> FixedPoint:
    """Classify g by the fixed point of ``g → g²`` it reaches."""
    g = float(g)
    if not g >= 0:
        raise DomainError(f"ITF requires g >= 0, got g={g!r}")
    if abs(g - 1.0) <= tolerance:
        return FixedPoint.UNSTABLE_CRITICAL
    for _ in range(max_iter):
        if g <= tolerance:
            return FixedPoint.STABLE_ZERO
        if g >= 1.0 / tolerance:
            return FixedPoint.STABLE_INFINITY
        g = g * g
    return FixedPoint.FLOWING
