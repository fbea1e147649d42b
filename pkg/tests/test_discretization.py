import numpy as np
import pytest
from scipy.linalg import eigh_tridiagonal

from diracgap import (
    ModelParams,
    ParameterDomainError,
    assemble_A,
    assemble_Lmu,
    assemble_schrodinger,
    build_grid,
    dump_matrix,
    gap_eigs,
    potential_W,
    sample_solitary_wave,
    sample_staggered,
    solitary_wave,
)
from diracgap.discretization import DomainTooSmallWarning, staggered_positions

P = ModelParams(1.0, 0.5, 1.0)
L_REF = 40.0 / P.kappa


class TestGrid:
    def test_rejects_odd_and_small(self):
        with pytest.raises(ParameterDomainError):
            build_grid(10.0, 5)
        with pytest.raises(ParameterDomainError):
            build_grid(10.0, 33)
        with pytest.raises(ParameterDomainError):
            build_grid(10.0, 8)
        with pytest.raises(ParameterDomainError):
            build_grid(-1.0, 64)

    def test_spacing_example(self):
        g = build_grid(1.0, 16)
        assert g.h == pytest.approx(2.0 / 15.0, rel=1e-15)

    def test_reference_spacing(self):
        g = build_grid(L_REF, 4096)
        assert g.h == pytest.approx(0.02256, abs=5e-5)

    def test_nodes_symmetric_bitexact(self):
        g = build_grid(7.3, 128)
        assert np.max(np.abs(g.nodes + g.nodes[::-1])) == 0.0
        assert np.max(np.abs(g.nodes - (-g.half_length + np.arange(128) * g.h))) < 1e-13

    def test_staggered_sets_mirror_each_other(self):
        g = build_grid(5.0, 64)
        xu, xl = staggered_positions(g)
        assert np.max(np.abs(xu + xl[::-1])) == 0.0
        assert np.allclose(xl - xu, g.h / 2.0)


class TestAssembleA:
    def test_free_operator_has_empty_gap(self):
        for n in (512, 1024):
            g = build_grid(30.0, n)
            A = assemble_A(P, g, g_scale=0.0)
            vals = eigh_tridiagonal(A.d, A.e, eigvals_only=True,
                                    select="v", select_range=(-P.m + 1e-9, P.m - 1e-9))
            assert vals.size == 0

    def test_structural_symmetry(self):
        g = build_grid(20.0, 64)
        A = assemble_A(P, g)
        dense = A.to_dense()
        assert np.array_equal(dense, dense.T)

    def test_sampled_wave_residual(self):
        g = build_grid(L_REF, 32768)
        A = assemble_A(P, g)
        phi = sample_solitary_wave(P, g).to_vector()
        res = np.linalg.norm(A.matvec(phi) - P.omega * phi) / np.linalg.norm(phi)
        assert res < 1e-6

    def test_affine_identity_between_As(self):
        p, q = 1.5, 1.0
        g = build_grid(L_REF, 4096)
        Ap = assemble_A(ModelParams(1.0, 0.5, p), g)
        Aq = assemble_A(ModelParams(1.0, 0.5, q), g)
        xu, xl = staggered_positions(g)
        xf = np.empty(2 * g.n)
        xf[0::2], xf[1::2] = xu, xl
        sgn = np.where(np.arange(2 * g.n) % 2 == 0, 1.0, -1.0)
        wd = sgn * potential_W(P, xf)
        assert np.max(np.abs(Ap.d - (p / q * Aq.d - (p - q) / q * wd))) < 1e-13
        assert np.max(np.abs(Ap.e - p / q * Aq.e)) < 1e-13

    def test_spectrum_symmetric_about_zero(self):
        g = build_grid(L_REF, 2048)
        A = assemble_A(ModelParams(1.0, 0.5, 1.3), g)
        vals = eigh_tridiagonal(A.d, A.e, eigvals_only=True)
        assert np.max(np.abs(vals + vals[::-1])) < 1e-10

    def test_refinement_order(self):
        vals = []
        for n in (1024, 2048, 4096, 8192):
            g = build_grid(L_REF, n)
            rep = gap_eigs(assemble_A(P, g), window=(0.25, 0.75))
            vals.append(rep.eigenvalues[0])
        diffs = np.abs(np.diff(vals))
        orders = np.log2(diffs[:-1] / diffs[1:])
        assert np.all(np.abs(orders - 2.0) <= 0.3)

    def test_domain_warning(self):
        g = build_grid(4.0, 64)
        with pytest.warns(DomainTooSmallWarning):
            assemble_A(P, g)


class TestAssembleLmu:
    def test_ground_state_residuals(self):
        g = build_grid(L_REF, 32768)
        L0 = assemble_Lmu(P, g)
        phi = sample_solitary_wave(P, g).to_vector()
        res0 = np.linalg.norm(L0.matvec(phi)) / np.linalg.norm(phi)
        assert res0 < 1e-6
        # sigma_1 phi_0 = (u, v) at eigenvalue -2 omega
        swapped = sample_staggered(g, lambda x: solitary_wave(P, x).swap()).to_vector()
        res1 = np.linalg.norm(L0.matvec(swapped) + 2.0 * P.omega * swapped) / np.linalg.norm(swapped)
        assert res1 < 1e-6

    def test_spectrum_symmetric_about_minus_omega(self):
        g = build_grid(L_REF, 2048)
        L0 = assemble_Lmu(P, g)
        vals = eigh_tridiagonal(L0.d, L0.e, eigvals_only=True) + P.omega
        assert np.max(np.abs(vals + vals[::-1])) < 1e-8

    def test_gap_window(self):
        g = build_grid(L_REF, 1024)
        L0 = assemble_Lmu(P, g)
        assert L0.gap_window == (-P.m - P.omega, P.m - P.omega)

    def test_mu_term_is_symmetric(self):
        g = build_grid(L_REF, 256)
        lm = assemble_Lmu(P.with_mu(0.7), g)
        dense = lm.to_dense()
        assert np.array_equal(dense, dense.T)

    def test_unitary_scaling_matches_A(self):
        # A_p assembled on the p-rescaled grid equals L_0 + omega entrywise
        p = 1.7
        n = 2048
        gL = build_grid(L_REF, n)
        gA = build_grid(p * L_REF, n)
        L0 = assemble_Lmu(ModelParams(1.0, 0.5, p), gL)
        Ap = assemble_A(ModelParams(1.0, 0.5, p), gA)
        assert np.allclose(Ap.d, L0.d + P.omega, rtol=0, atol=1e-12)
        assert np.allclose(Ap.e, L0.e, rtol=1e-12)


class TestSchrodinger:
    def test_potential_saturates_at_m_squared(self):
        g = build_grid(80.0, 2048)
        S = assemble_schrodinger(ModelParams(1.0, 0.5, 2.0), g, -1)
        V_wall = S.d[0] - 2.0 / g.h**2
        assert V_wall == pytest.approx(P.m**2, abs=1e-10)

    def test_square_consistency_with_dirac(self):
        g = build_grid(L_REF, 16384)
        rep = gap_eigs(assemble_A(P, g), window=(0.25, 0.75))
        lam_dirac_sq = rep.eigenvalues[0] ** 2
        for sign in (-1, 1):
            S = assemble_schrodinger(P, g, sign)
            vals = eigh_tridiagonal(S.d, S.e, eigvals_only=True,
                                    select="v", select_range=(0.0, 0.9))
            assert vals.size >= 1
            assert abs(vals[0] - lam_dirac_sq) < 1e-5

    def test_conjugates_are_reflections(self):
        g = build_grid(L_REF, 2048)
        Sm = assemble_schrodinger(P, g, -1)
        Sp = assemble_schrodinger(P, g, +1)
        # the two potentials are exact mirror images on the symmetric node set
        assert np.array_equal(Sm.d, Sp.d[::-1])
        vm = eigh_tridiagonal(Sm.d, Sm.e, eigvals_only=True, select="v", select_range=(0.0, 0.99))
        vp = eigh_tridiagonal(Sp.d, Sp.e, eigvals_only=True, select="v", select_range=(0.0, 0.99))
        assert np.max(np.abs(vm - vp)) < 1e-8

    def test_sign_validation(self):
        g = build_grid(20.0, 64)
        with pytest.raises(ParameterDomainError):
            assemble_schrodinger(P, g, 2)


class TestDump:
    def test_triplet_dump(self, tmp_path):
        g = build_grid(20.0, 32)
        A = assemble_A(P, g)
        path = tmp_path / "matrix.txt"
        dump_matrix(A, str(path))
        rows = [line.split() for line in path.read_text().splitlines() if not line.startswith("#")]
        dense = np.zeros((A.size, A.size))
        for i, j, v in rows:
            dense[int(i), int(j)] = float(v)
        assert np.array_equal(dense, A.to_dense())
