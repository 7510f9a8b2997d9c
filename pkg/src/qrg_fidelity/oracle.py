"""Exact-diagonalization ground truth at desk scale.

Dense Hamiltonians for the ITF ring and the quantum-group XXZ chain, block
embeddings obtained by numerical diagonalization, and checks of the block
identities the QRG kernels rely on. Basis convention: the computational basis
is the σᶻ eigenbasis with site 1 as the most significant bit, ``|0⟩ = |+⟩``.

The XXZ boundary term ``−a₋(σᶻ_i − σᶻ_{i+1})`` has imaginary ``a₋`` on the
critical line, so those Hamiltonians are complex symmetric rather than
Hermitian. Their spectra are real, their right eigenvectors are used as block
states, and the projected Hamiltonian uses the matching left eigenvectors
(the transpose), which is what reproduces the renormalized couplings.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from . import itf, xxz
from .errors import DegeneracyError, DomainError, PoleError, SizeGuardError

MAX_DIM = 2 ** 14
DENSE_DIM_LIMIT = 2 ** 12
# Lanczos accelerator for ITF ground states above this dimension
ITERATIVE_DIM = 2 ** 10
ITERATIVE_K = 6
MODELS = ("itf", "xxz")

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1j], [1j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2.0)

# tolerances of the identity checks
TOL_DEGENERACY = 1e-10
TOL_ISOMETRY = 1e-12
TOL_SCALAR_OMEGA = 1e-10
TOL_DIAG_AGREEMENT = 1e-12
TOL_DERIVATIVE = 1e-6
TOL_RENORMALIZED = 1e-10
FD_STEP = 1e-5


@dataclass(frozen=True, eq=False)
class DenseOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator must be square, got shape {m.shape}")
        dim = m.shape[0]
        if dim & (dim - 1) or dim < 2:
            raise ValueError(f"operator dimension must be 2^n, got {dim}")
        if dim > MAX_DIM:
            raise SizeGuardError(f"operator dimension {dim} exceeds guard {MAX_DIM}")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_sites(self) -> int:
        return self.dim.bit_length() - 1

    def hermiticity_error(self) -> float:
        return float(np.abs(self.matrix - self.matrix.conj().T).max())

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return self.hermiticity_error() <= tol

    def spectrum(self) -> np.ndarray:
        """Eigenvalues sorted by real part (complex for non-Hermitian operators)."""
        if self.is_hermitian():
            return np.linalg.eigvalsh(self.matrix)
        w = sla.eigvals(self.matrix)
        return w[np.argsort(w.real, kind="stable")]


def site_operator(op: np.ndarray, site: int, n_sites: int) -> sp.csr_matrix:
    """``op`` acting on ``site`` (0-based) of an ``n_sites`` chain."""
    left = sp.identity(2 ** site, format="csr")
    right = sp.identity(2 ** (n_sites - site - 1), format="csr")
    return sp.kron(sp.kron(left, sp.csr_matrix(op)), right, format="csr")


def _itf_sparse(J: float, g: float, n_sites: int, periodic: bool = True) -> sp.csr_matrix:
    # the i = 1..N sum is taken literally, so a 2-site ring has a doubled bond
    n_bonds = n_sites if periodic else n_sites - 1
    zs = [site_operator(SIGMA_Z, i, n_sites) for i in range(n_sites)]
    h = sp.csr_matrix((2 ** n_sites, 2 ** n_sites), dtype=complex)
    for i in range(n_bonds):
        h = h + zs[i] @ zs[(i + 1) % n_sites]
    for i in range(n_sites):
        h = h + g * site_operator(SIGMA_X, i, n_sites)
    return (-J * h).tocsr()


def _xxz_sparse(J: float, delta: float, n_sites: int) -> sp.csr_matrix:
    c = xxz.XxzCouplings(J=J, delta=delta)
    ops = {name: [site_operator(m, i, n_sites) for i in range(n_sites)]
           for name, m in (("x", SIGMA_X), ("y", SIGMA_Y), ("z", SIGMA_Z))}
    x, y, z = ops["x"], ops["y"], ops["z"]
    h = sp.csr_matrix((2 ** n_sites, 2 ** n_sites), dtype=complex)
    for i in range(n_sites - 1):
        h = h + (x[i] @ x[i + 1] + y[i] @ y[i + 1] + c.a_plus * (z[i] @ z[i + 1])
                 - c.a_minus * (z[i] - z[i + 1]))
    return (J * h).tocsr()


def _check_itf(J: float, g: float) -> None:
    itf.ItfCouplings(J=J, g=g)


def build_itf_hamiltonian(J: float, g: float, n_sites: int,
                          boundary: str = "periodic") -> DenseOperator:
    """``H = −J Σ_i (σᶻ_i σᶻ_{i+1} + g σˣ_i)`` with site N+1 ≡ 1."""
    if boundary != "periodic":
        raise ValueError(f"only periodic ITF rings are supported, got {boundary!r}")
    if not 3 <= n_sites <= 14:
        raise SizeGuardError(f"ITF ring needs 3 <= N <= 14, got N={n_sites}")
    _check_itf(J, g)
    return DenseOperator(_itf_sparse(J, g, n_sites).real.toarray())


def build_itf_block(J: float, g: float) -> DenseOperator:
    """Two-site block ``−J(σᶻ₁σᶻ₂ + g σˣ₁)``; the site-2 field belongs to H^BB."""
    _check_itf(J, g)
    h = site_operator(SIGMA_Z, 0, 2) @ site_operator(SIGMA_Z, 1, 2) + g * site_operator(SIGMA_X, 0, 2)
    return DenseOperator((-J * h).real.toarray())


def build_xxz_hamiltonian(J: float, delta: float, n_sites: int,
                          boundary: str = "open-with-surface-term") -> DenseOperator:
    """``H = J Σ_i h_{i,i+1}`` on an open chain, with the quantum-group surface term."""
    if boundary != "open-with-surface-term":
        raise ValueError(f"unsupported XXZ boundary {boundary!r}")
    if not 3 <= n_sites <= 12:
        raise SizeGuardError(f"XXZ chain needs 3 <= N <= 12, got N={n_sites}")
    return DenseOperator(_xxz_sparse(J, delta, n_sites).toarray())


def build_xxz_block(J: float, delta: float) -> DenseOperator:
    return DenseOperator(_xxz_sparse(J, delta, 3).toarray())


# -- block embeddings --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    """Block embedding ``T_I = |φ₁⟩⟨⇑| + |φ₂⟩⟨⇓|``.

    ``states`` holds |φ₁⟩, |φ₂⟩ as columns in the computational basis;
    ``coarse_basis`` holds |⇑⟩, |⇓⟩ as columns in the coarse computational basis.
    """

    states: np.ndarray
    coarse_basis: np.ndarray
    energies: np.ndarray = field(repr=False)
    is_block_ground: bool = True

    @property
    def matrix(self) -> np.ndarray:
        return self.states @ self.coarse_basis.conj().T

    @property
    def splitting(self) -> float:
        return float(abs(self.energies[1] - self.energies[0]))

    def isometry_error(self) -> float:
        t = self.matrix
        return float(np.linalg.norm(t.conj().T @ t - np.eye(2), 2))


def _sector_projectors(model: str) -> list[np.ndarray]:
    if model == "itf":
        # σˣ-parity: {↑↑, ↓↓} is even, {↑↓, ↓↑} is odd
        parity = np.kron(SIGMA_X, SIGMA_X)
        return [(np.eye(4) + parity) / 2, (np.eye(4) - parity) / 2]
    total_z = sum(site_operator(SIGMA_Z, i, 3) for i in range(3)).toarray().real.diagonal()
    return [np.diag((total_z == 1).astype(complex)), np.diag((total_z == -1).astype(complex))]


# amplitude made real positive in each block state: ITF the first basis
# state, XXZ the symmetric middle configurations |+−+⟩ and |−+−⟩
_PHASE_REFERENCE = {"itf": (0, 0), "xxz": (0b010, 0b101)}


def _phase_fix(vec: np.ndarray, ref: int) -> np.ndarray:
    idx = ref
    if abs(vec[idx]) < 1e-8:
        idx = int(np.flatnonzero(np.abs(vec) > 1e-8)[0])
    amp = vec[idx]
    return vec * (np.conj(amp) / abs(amp))


def _block_matrix(model: str, x: float, J: float) -> np.ndarray:
    if model == "itf":
        return build_itf_block(J, x).matrix
    if model == "xxz":
        return build_xxz_block(J, x).matrix
    raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")


def _eigen_clusters(w: np.ndarray, tol: float) -> list[np.ndarray]:
    clusters, start = [], 0
    for i in range(1, len(w) + 1):
        if i == len(w) or abs(w[i] - w[start]) > tol:
            clusters.append(np.arange(start, i))
            start = i
    return clusters


def _kept_doublet(model: str, w: np.ndarray, v: np.ndarray, x: float,
                  tol: float) -> tuple[np.ndarray, bool]:
    """Indices of the doublet kept by the RG and whether it is the block ground level.

    For XXZ with Δ < −1/2 a q-spin-3/2 quartet drops below the doublet; it is
    skipped. Any other multiplet structure is reported as a failure.
    """
    clusters = _eigen_clusters(w, tol)
    for position, idx in enumerate(clusters):
        if len(idx) == 2:
            return idx, position == 0
        if model == "xxz" and len(idx) == 4:
            total_z = sum(site_operator(SIGMA_Z, i, 3) for i in range(3)).toarray().real.diagonal()
            outer = np.abs(v[np.abs(total_z) == 3][:, idx]) ** 2
            if outer.sum() > 0.5:
                continue
        break
    raise DegeneracyError(f"{model} block at x={x!r} has no isolated ground doublet "
                          f"(multiplicities {[len(c) for c in clusters]})")


def block_embedding(model: str, x: float, J: float = 1.0,
                    degeneracy_tol: float = 1e-8) -> EmbeddingMatrix:
    """Diagonalize the block Hamiltonian and build a sector-resolved, phase-fixed T_I."""
    h = _block_matrix(model, x, J)
    if model == "itf":
        w, v = np.linalg.eigh(h)
        v = v.astype(complex)
    else:
        w, v = sla.eig(h)
        order = np.argsort(w.real, kind="stable")
        w, v = w[order], v[:, order]
    idx, is_ground = _kept_doublet(model, w.real, v, x, degeneracy_tol)
    ground = v[:, idx]
    columns = []
    for projector, ref in zip(_sector_projectors(model), _PHASE_REFERENCE[model]):
        u, s, _ = np.linalg.svd(projector @ ground)
        if s[0] < 1e-6 or s[1] > 1e-8 * s[0]:
            raise DegeneracyError(
                f"{model} block doublet at x={x!r} is not aligned with the symmetry sectors")
        columns.append(_phase_fix(u[:, 0], ref))
    coarse = HADAMARD if model == "itf" else np.eye(2, dtype=complex)
    return EmbeddingMatrix(states=np.stack(columns, axis=1), coarse_basis=coarse,
                           energies=w[idx], is_block_ground=is_ground)


# -- verification reports ----------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    tolerance: float
    measured: float

    @property
    def passed(self) -> bool:
        return bool(self.measured <= self.tolerance)

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "tolerance": self.tolerance,
                "measured": self.measured, "pass": self.passed}


@dataclass(frozen=True)
class VerificationReport:
    model: str
    coupling: float
    delta: float | None
    checks: tuple[Check, ...]
    diagnostics: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict[str, Any]:
        return {"model": self.model, "coupling": self.coupling, "delta": self.delta,
                "pass": self.passed, "checks": [c.to_dict() for c in self.checks],
                "diagnostics": dict(self.diagnostics)}


def _check_pair_domain(model: str, x: float, delta: float) -> None:
    if model == "itf":
        if not (x >= 0 and x - abs(delta) >= 0):
            raise DomainError(f"ITF requires g >= 0 and g - |delta| >= 0, got g={x!r}, delta={delta!r}")
    elif model == "xxz":
        if not (abs(x - delta) <= 1 and abs(x + delta) <= 1):
            raise DomainError(f"XXZ requires |Delta ± delta| <= 1, got Delta={x!r}, delta={delta!r}")
    else:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")


def _itf_derivative(g: float, J: float, step: float) -> np.ndarray:
    if g >= step:
        return (block_embedding("itf", g + step, J).matrix
                - block_embedding("itf", g - step, J).matrix) / (2 * step)
    t0, t1, t2 = (block_embedding("itf", g + k * step, J).matrix for k in range(3))
    return (-3 * t0 + 4 * t1 - t2) / (2 * step)


def verify_embedding_identities(model: str, x: float, delta: float, *,
                                omega_branch: str = "signed-cos",
                                J: float = 1.0) -> VerificationReport:
    """Check T†T = 1, T†(x₋)T(x₊) = ω·1 and, for ITF, the derivative identities.

    ω is the analytic block overlap; ``omega_branch`` selects the XXZ form it
    is taken from.
    """
    x, delta = float(x), float(delta)
    _check_pair_domain(model, x, delta)
    t0 = block_embedding(model, x, J)
    tm = block_embedding(model, x - delta, J)
    tp = block_embedding(model, x + delta, J)
    if model == "itf":
        omega = math.exp(itf.itf_block_overlap(x, delta))
    else:
        omega = math.exp(xxz.xxz_omega(x, delta, branch=omega_branch))
    overlap = tm.matrix.conj().T @ tp.matrix
    offdiag = max(abs(overlap[0, 1]), abs(overlap[1, 0]))
    checks = [
        Check("degeneracy", TOL_DEGENERACY, max(t.splitting for t in (t0, tm, tp))),
        Check("isometry", TOL_ISOMETRY, max(t.isometry_error() for t in (t0, tm, tp))),
        Check("scalar_omega", TOL_SCALAR_OMEGA,
              float(np.linalg.norm(overlap - omega * np.eye(2), 2))),
        Check("omega_offdiagonal", TOL_SCALAR_OMEGA, float(offdiag)),
        Check("omega_diagonal_agreement", TOL_DIAG_AGREEMENT, float(abs(overlap[0, 0] - overlap[1, 1]))),
    ]
    diagnostics = {"omega_analytic": omega, "omega_measured": float(overlap[0, 0].real),
                   "doublet_is_block_ground": float(all(t.is_block_ground for t in (t0, tm, tp)))}
    if model == "itf":
        d_value = itf.itf_d_factor(x)
        t = t0.matrix
        dt = _itf_derivative(x, J, FD_STEP)
        dt_half = _itf_derivative(x, J, FD_STEP / 2)
        metric = dt.conj().T @ dt
        metric_half = dt_half.conj().T @ dt_half
        checks += [
            Check("t_dagger_dt", TOL_DERIVATIVE, float(np.linalg.norm(t.conj().T @ dt, 2))),
            Check("dt_dagger_dt", TOL_DERIVATIVE,
                  float(np.linalg.norm(metric - d_value * np.eye(2), 2))),
            Check("richardson_step", TOL_DERIVATIVE, float(np.linalg.norm(metric - metric_half, 2))),
        ]
        diagnostics["D"] = d_value
    return VerificationReport(model=model, coupling=x, delta=delta, checks=tuple(checks),
                              diagnostics=diagnostics)


def _traceless(m: np.ndarray) -> np.ndarray:
    return m - np.trace(m) / m.shape[0] * np.eye(m.shape[0])


def verify_renormalized_hamiltonian(model: str, x: float, J: float = 1.0) -> VerificationReport:
    """Project a two-block chain and compare with the coarse Hamiltonian.

    ITF: 4-site ring against the 2-site ring built with the flowed (J, g).
    XXZ: 6-site open chain against the 2-site chain with the flowed J and
    unchanged Δ. Only traceless parts are compared.
    """
    x = float(x)
    t = block_embedding(model, x, J).matrix
    tt = np.kron(t, t)
    diagnostics: dict[str, float] = {}
    if model == "itf":
        coarse = itf.itf_rg_step(itf.ItfCouplings(J=J, g=x))
        fine = _itf_sparse(J, x, 4).toarray()
        projected = tt.conj().T @ fine @ tt
        target = _itf_sparse(coarse.J, coarse.g, 2).toarray()
        diagnostics.update(J_renormalized=coarse.J, g_renormalized=coarse.g)
    else:
        coarse = xxz.xxz_rg_step(xxz.XxzCouplings(J=J, delta=x))
        fine = _xxz_sparse(J, x, 6).toarray()
        gram = tt.T @ tt
        if abs(np.linalg.det(gram)) < 1e-14:
            raise PoleError(f"bilinear block norm vanishes at Delta={x!r}")
        projected = np.linalg.solve(gram, tt.T @ fine @ tt)
        target = _xxz_sparse(coarse.J, x, 2).toarray()
        conj_projected = tt.conj().T @ fine @ tt
        diagnostics.update(
            J_renormalized=coarse.J,
            bilinear_norm=float(gram[0, 0].real) ** 0.5,
            conjugate_projection_deviation=float(
                np.linalg.norm(_traceless(conj_projected) - _traceless(target), 2)),
        )
    deviation = float(np.linalg.norm(_traceless(projected) - _traceless(target), 2))
    diagnostics["constant_shift"] = float((np.trace(projected) - np.trace(target)).real / 4)
    return VerificationReport(model=model, coupling=x, delta=None,
                              checks=(Check("renormalized_hamiltonian", TOL_RENORMALIZED, deviation),),
                              diagnostics=diagnostics)


# -- full-chain ground states ------------------------------------------------

def _sparse_hamiltonian(model: str, x: float, n_sites: int, J: float) -> sp.csr_matrix:
    if model == "itf":
        if not 3 <= n_sites <= 14:
            raise SizeGuardError(f"ITF ring needs 3 <= N <= 14, got N={n_sites}")
        _check_itf(J, x)
        return _itf_sparse(J, x, n_sites).real.tocsr()
    if model == "xxz":
        if not 3 <= n_sites <= 12:
            raise SizeGuardError(f"XXZ chain needs 3 <= N <= 12, got N={n_sites}")
        return _xxz_sparse(J, x, n_sites)
    raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")


def _xxz_sector_eig(h: sp.csr_matrix, n_sites: int) -> tuple[np.ndarray, np.ndarray]:
    """Full spectrum of an XXZ Hamiltonian, diagonalized per total-Sᶻ sector.

    Eigenvalues are real up to rounding and returned sorted; eigenvectors are
    the unit-norm right eigenvectors embedded in the full space.
    """
    dim = 2 ** n_sites
    ups = np.array([n_sites - bin(i).count("1") for i in range(dim)])
    values, vectors = [], []
    for m in range(n_sites + 1):
        idx = np.flatnonzero(ups == m)
        w, v = sla.eig(h[idx][:, idx].toarray())
        full = np.zeros((dim, len(idx)), dtype=complex)
        full[idx] = v / np.linalg.norm(v, axis=0)
        values.append(w.real)
        vectors.append(full)
    w = np.concatenate(values)
    order = np.argsort(w, kind="stable")
    return w[order], np.concatenate(vectors, axis=1)[:, order]


def ground_space(model: str, x: float, n_sites: int, J: float = 1.0,
                 degeneracy_tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Ground energies and an orthonormal basis of the (possibly degenerate) ground space."""
    h = _sparse_hamiltonian(model, x, n_sites, J)
    dim = h.shape[0]
    if model == "xxz":
        w, v = _xxz_sector_eig(h.tocsr(), n_sites)
    else:
        w = None
        if dim > ITERATIVE_DIM:
            w, v = eigsh(h, k=ITERATIVE_K, which="SA", tol=1e-13)
            order = np.argsort(w)
            w, v = w[order], v[:, order]
            if np.sum(w - w[0] <= degeneracy_tol * max(1.0, abs(w[0]))) >= ITERATIVE_K - 1:
                w = None  # cluster may extend past the computed pairs
        if w is None:
            if dim > DENSE_DIM_LIMIT:
                raise SizeGuardError(f"dense fallback unavailable above dimension {DENSE_DIM_LIMIT}")
            w, v = np.linalg.eigh(h.toarray())
    mask = w - w[0] <= degeneracy_tol * max(1.0, abs(w[0]))
    basis, _ = np.linalg.qr(v[:, mask])
    return w[mask], basis


def ed_ground_fidelity(model: str, x: float, delta: float, n_sites: int,
                       J: float = 1.0) -> float:
    """|⟨Φ₀(x−δ)|Φ₀(x+δ)⟩| from dense ground states; degenerate spaces via principal angles."""
    x, delta = float(x), float(delta)
    _check_pair_domain(model, x, delta)
    _, va = ground_space(model, x - delta, n_sites, J)
    _, vb = ground_space(model, x + delta, n_sites, J)
    sv = np.linalg.svd(va.conj().T @ vb, compute_uv=False)
    return float(min(1.0, sv[0]))
