import math

import numpy as np
import pytest

from qrg_fidelity import itf, oracle, xxz
from qrg_fidelity.errors import DegeneracyError, DomainError, PoleError, SizeGuardError

HH = np.kron(oracle.HADAMARD, oracle.HADAMARD)


def itf_analytic_states(g):
    # |φ₁⟩ = A|↑↑⟩ + B|↓↓⟩, |φ₂⟩ = A|↑↓⟩ + B|↓↑⟩ in the σˣ basis, mapped to σᶻ
    s = itf.itf_block_state(g)
    phi1 = np.array([s.A, 0, 0, s.B])
    phi2 = np.array([0, s.A, s.B, 0])
    return HH @ np.stack([phi1, phi2], axis=1)


def xxz_analytic_states(delta):
    a = xxz.xxz_block_state(delta).amplitudes
    phi = np.zeros((8, 2), dtype=complex)
    for col, configs in enumerate((("++-", "+-+", "-++"), ("+--", "-+-", "--+"))):
        for amp, cfg in zip(a, configs):
            phi[int(cfg.replace("+", "0").replace("-", "1"), 2), col] = amp
    return phi


def subspace_distance(a, b):
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    return float(np.linalg.norm(qa @ qa.conj().T - qb @ qb.conj().T, 2))


class TestDenseOperator:
    def test_guards(self):
        with pytest.raises(ValueError):
            oracle.DenseOperator(np.zeros((3, 3)))
        with pytest.raises(ValueError):
            oracle.DenseOperator(np.zeros((4, 2)))

    def test_size_guards(self):
        for n in (2, 15):
            with pytest.raises(SizeGuardError):
                oracle.build_itf_hamiltonian(1.0, 1.0, n)
        with pytest.raises(SizeGuardError):
            oracle.build_xxz_hamiltonian(1.0, 0.0, 13)
        with pytest.raises(SizeGuardError):
            oracle.ed_ground_fidelity("itf", 1.0, 0.01, 16)


class TestItfHamiltonian:
    @pytest.mark.parametrize("n, g", [(3, 0.0), (4, 0.7), (6, 1.0), (8, 2.5)])
    def test_hermitian_real_spectrum(self, n, g):
        h = oracle.build_itf_hamiltonian(1.0, g, n)
        assert h.hermiticity_error() <= 1e-12
        assert np.isrealobj(h.spectrum())

    def test_classical_ring(self):
        w = oracle.build_itf_hamiltonian(1.0, 0.0, 3).spectrum()
        assert w[0] == pytest.approx(-3.0) and w[1] == pytest.approx(-3.0)
        assert w[2] > -3.0 + 1

    def test_spectrum_scales_with_j(self):
        a = oracle.build_itf_hamiltonian(1.0, 0.6, 5).spectrum()
        b = oracle.build_itf_hamiltonian(2.0, 0.6, 5).spectrum()
        assert np.allclose(2 * a, b, atol=1e-12)

    def test_rejects_open(self):
        with pytest.raises(ValueError):
            oracle.build_itf_hamiltonian(1.0, 1.0, 4, boundary="open")


class TestItfBlock:
    def test_zero_field(self):
        assert np.allclose(oracle.build_itf_block(1.0, 0.0).spectrum(), [-1, -1, 1, 1], atol=1e-14)

    def test_critical_field(self):
        w = oracle.build_itf_block(1.0, 1.0).spectrum()
        assert w[0] == pytest.approx(-math.sqrt(2), abs=1e-14)
        assert abs(w[1] - w[0]) <= 1e-14

    @pytest.mark.parametrize("g", [0.0, 0.3, 1.0, 2.0, 10.0])
    def test_ground_space_is_analytic(self, g):
        w, v = np.linalg.eigh(oracle.build_itf_block(1.0, g).matrix)
        phi = itf_analytic_states(g)
        overlap = np.linalg.svd(v[:, :2].T @ phi, compute_uv=False)
        assert overlap.min() >= 1 - 1e-12
        assert w[0] == pytest.approx(-math.hypot(1, g), abs=1e-12)

    @pytest.mark.parametrize("g", [0.2, 0.8, 1.0, 1.5, 3.0])
    def test_embedding_columns_match_analytic(self, g):
        t = oracle.block_embedding("itf", g)
        assert np.allclose(t.states, itf_analytic_states(g), atol=1e-12)


class TestXxzHamiltonian:
    @pytest.mark.parametrize("d", [-0.9, -0.3, 0.0, 0.5, 0.99])
    def test_complex_symmetric_with_real_spectrum(self, d):
        h = oracle.build_xxz_hamiltonian(1.0, d, 6)
        assert np.abs(h.matrix - h.matrix.T).max() <= 1e-14
        assert h.hermiticity_error() > 1e-3  # the surface term is not Hermitian
        # degenerate clusters of a non-normal matrix split like sqrt(eps)
        assert np.abs(h.spectrum().imag).max() <= 1e-6
        w, _ = oracle._xxz_sector_eig(oracle._xxz_sparse(1.0, d, 6), 6)
        assert np.abs(np.asarray(w).imag).max() <= 1e-6

    def test_isotropic_point(self):
        h = oracle.build_xxz_hamiltonian(1.0, 1.0, 4)
        assert h.hermiticity_error() <= 1e-12
        ops = [[oracle.site_operator(p, i, 4).toarray() for i in range(4)]
               for p in (oracle.SIGMA_X, oracle.SIGMA_Y, oracle.SIGMA_Z)]
        heis = sum(ops[a][i] @ ops[a][i + 1] for a in range(3) for i in range(3))
        assert np.allclose(h.matrix, heis, atol=1e-14)

    @pytest.mark.parametrize("d", [-0.4, 0.0, 0.6, 1.0])
    def test_block_ground_doublet(self, d):
        w = np.sort(oracle.build_xxz_block(1.0, d).spectrum().real)
        assert abs(w[1] - w[0]) <= 1e-10 and w[2] - w[1] > 1e-3
        assert w[0] == pytest.approx(-2 * (1 + d), abs=1e-12)

    @pytest.mark.parametrize("d", [-1.0, -0.9, -0.6])
    def test_block_doublet_is_excited_below_minus_half(self, d):
        # a four-fold level at 2Δ lies below the kept doublet at −2(1+Δ)
        w = np.sort(oracle.build_xxz_block(1.0, d).spectrum().real)
        assert np.allclose(w[:4], 2 * d, atol=1e-10)
        assert np.allclose(w[4:6], -2 * (1 + d), atol=1e-10)
        t = oracle.block_embedding("xxz", d)
        assert not t.is_block_ground and t.splitting <= 1e-10

    def test_crossing_at_minus_half(self):
        w = np.sort(oracle.build_xxz_block(1.0, -0.5).spectrum().real)
        assert np.allclose(w[:6], -1.0, atol=1e-6)
        with pytest.raises(DegeneracyError):
            oracle.block_embedding("xxz", -0.5)

    @pytest.mark.parametrize("d", [-0.9, -0.4, 0.0, 0.6, 1.0])
    def test_doublet_matches_analytic_states(self, d):
        t = oracle.block_embedding("xxz", d)
        phi = xxz_analytic_states(d)
        assert subspace_distance(t.states, phi) <= 1e-10
        assert np.allclose(t.states, phi, atol=1e-10)


class TestEmbeddingIdentities:
    def test_itf_example(self):
        rep = oracle.verify_embedding_identities("itf", 1.3, 0.05)
        assert rep.passed, rep.to_dict()
        assert rep.check("dt_dagger_dt").measured <= 1e-6

    def test_branch_decides_xxz(self):
        assert oracle.verify_embedding_identities("xxz", -0.4, 0.02).passed
        bad = oracle.verify_embedding_identities("xxz", -0.4, 0.02, omega_branch="radical-abs")
        assert not bad.passed
        assert bad.check("scalar_omega").measured > 0.1
        assert bad.check("isometry").passed

    @pytest.mark.parametrize("model, x", [("itf", 0.8), ("xxz", 0.3)])
    def test_zero_delta_reduces_to_isometry(self, model, x):
        rep = oracle.verify_embedding_identities(model, x, 0.0)
        assert rep.passed
        assert rep.diagnostics["omega_analytic"] == 1.0

    def test_domain(self):
        with pytest.raises(DomainError):
            oracle.verify_embedding_identities("itf", -1.0, 0.0)
        with pytest.raises(DomainError):
            oracle.verify_embedding_identities("xxz", 0.99, 0.02)
        with pytest.raises(ValueError):
            oracle.verify_embedding_identities("heisenberg", 0.0, 0.0)

    def test_report_serializes(self):
        d = oracle.verify_embedding_identities("itf", 0.5, 0.01).to_dict()
        assert {c["name"] for c in d["checks"]} >= {"isometry", "scalar_omega", "t_dagger_dt"}
        assert all(set(c) == {"name", "tolerance", "measured", "pass"} for c in d["checks"])


class TestRenormalizedHamiltonian:
    def test_itf_example(self):
        rep = oracle.verify_renormalized_hamiltonian("itf", 0.8)
        assert rep.passed
        assert rep.diagnostics["g_renormalized"] == pytest.approx(0.64)
        assert rep.diagnostics["J_renormalized"] == pytest.approx(1 / math.hypot(1, 0.8))

    def test_itf_zero_field(self):
        rep = oracle.verify_renormalized_hamiltonian("itf", 0.0)
        assert rep.passed and rep.diagnostics["J_renormalized"] == 1.0

    def test_xxz_example(self):
        rep = oracle.verify_renormalized_hamiltonian("xxz", 0.6)
        assert rep.passed
        assert rep.diagnostics["J_renormalized"] == pytest.approx((3.2 / 4.4) ** 2)

    def test_xxz_needs_the_bilinear_projection(self):
        rep = oracle.verify_renormalized_hamiltonian("xxz", 0.6)
        assert rep.diagnostics["conjugate_projection_deviation"] > 0.1

    def test_xxz_pole(self):
        with pytest.raises((PoleError, DegeneracyError)):
            oracle.verify_renormalized_hamiltonian("xxz", -0.5)


class TestGroundFidelity:
    def test_zero_delta(self):
        assert oracle.ed_ground_fidelity("itf", 0.7, 0.0, 6) == pytest.approx(1.0, abs=1e-12)
        assert oracle.ed_ground_fidelity("xxz", 0.2, 0.0, 5) == pytest.approx(1.0, abs=1e-12)

    def test_degenerate_ground_space(self):
        e, basis = oracle.ground_space("itf", 0.0, 6)
        assert basis.shape[1] == 2 and np.allclose(e, -6)

    def test_minimum_near_critical(self):
        gs = np.linspace(0.2, 2.0, 37)
        f = [oracle.ed_ground_fidelity("itf", g, 0.05, 8) for g in gs]
        assert abs(gs[int(np.argmin(f))] - 1.0) <= 0.2

    def test_paramagnetic_agreement(self):
        ed = oracle.ed_ground_fidelity("itf", 2.0, 0.01, 8)
        qrg = itf.itf_fidelity(2.0, 0.01, 2).f
        assert abs(ed - qrg) <= 0.01

    def test_iterative_matches_dense(self):
        e_it, b_it = oracle.ground_space("itf", 0.9, 11)
        h = oracle._itf_sparse(1.0, 0.9, 11).real.toarray()
        w, v = np.linalg.eigh(h)
        assert e_it[0] == pytest.approx(w[0], abs=1e-10)
        assert abs(b_it[:, 0].conj() @ v[:, 0]) == pytest.approx(1.0, abs=1e-10)

    def test_xxz_sector_diagonalization(self):
        h = oracle.build_xxz_hamiltonian(1.0, 0.4, 5).matrix
        w_full = np.sort(np.linalg.eigvals(h).real)
        w_sec, _ = oracle._xxz_sector_eig(oracle._xxz_sparse(1.0, 0.4, 5), 5)
        assert np.allclose(w_sec, w_full, atol=1e-10)
