import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from ecdkit.channel import (
    Dilation,
    KrausMap,
    TwoOperatorMap,
    amplitude_damping,
    annihilation,
    dephasing_channel,
    extend,
    identity_channel,
    random_kraus,
    reset_channel,
    stinespring_from_kraus,
)
from ecdkit.distance import (
    AscentConfig,
    bures,
    bures_e_distance,
    common_dilation_optimize,
    continuity_bound_check,
    continuity_rhs,
    dilation_difference_bound,
    dilation_difference_rhs,
    ecd_distance,
    ecd_norm_cp,
    fidelity,
    ksw_chain,
)
from ecdkit.energy import EnergyObservable, energy_of, number_observable
from ecdkit.enorm import e_norm
from ecdkit.matcore import DimensionError, NotPSDError, basis, ginibre, partial_trace, proj, random_psd, trace_norm
from oracles import sampled_bures_qubit, sampled_ecd_qubit

seeds = st.integers(0, 2**32 - 1)
QUBIT = EnergyObservable([0.0, 1.0])
FAST = AscentConfig(restarts=8, max_iter=150, polish=2)


def random_cp(d, rng, n_ops=2):
    return random_kraus(d, d, n_ops, rng, channel=False)


class TestFidelity:
    @given(seeds)
    def test_self_fidelity_is_squared_trace(self, seed):
        rho = random_psd(3, np.random.default_rng(seed), trace=None)
        assert_allclose(fidelity(rho, rho), np.trace(rho).real ** 2, rtol=1e-9)

    def test_orthogonal_pure_states(self):
        assert fidelity(proj(basis(3, 0)), proj(basis(3, 2))) == pytest.approx(0.0, abs=1e-14)

    @given(seeds)
    def test_commuting_diagonals(self, seed):
        rng = np.random.default_rng(seed)
        p, q = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4))
        assert_allclose(fidelity(np.diag(p), np.diag(q)), np.sum(np.sqrt(p * q)) ** 2, rtol=1e-9, atol=1e-14)

    @given(seeds)
    def test_symmetric(self, seed):
        rng = np.random.default_rng(seed)
        a, b = random_psd(3, rng), random_psd(3, rng, rank=2)
        assert_allclose(fidelity(a, b), fidelity(b, a), atol=1e-10)

    def test_rejects_non_psd(self):
        with pytest.raises(NotPSDError):
            fidelity(np.diag([1.0, -0.5]), np.eye(2) / 2)


class TestBures:
    def test_identical_states(self):
        rho = random_psd(3, np.random.default_rng(0))
        assert bures(rho, rho) == pytest.approx(0.0, abs=1e-7)

    def test_orthogonal_pure_states(self):
        assert_allclose(bures(proj(basis(2, 0)), proj(basis(2, 1))), np.sqrt(2), atol=1e-12)

    def test_trace_norm_sandwich_on_500_pairs(self):
        rng = np.random.default_rng(3)
        for _ in range(500):
            d = int(rng.integers(2, 5))
            a = random_psd(d, rng, rank=int(rng.integers(1, d + 1)), trace=rng.uniform(0.1, 1.0))
            b = random_psd(d, rng, rank=int(rng.integers(1, d + 1)), trace=rng.uniform(0.1, 1.0))
            t = trace_norm(a - b)
            beta = bures(a, b)
            lower = t / (np.sqrt(np.trace(a).real) + np.sqrt(np.trace(b).real))
            assert lower <= beta + 1e-9
            assert beta <= np.sqrt(t) + 1e-9

    @given(seeds)
    @settings(max_examples=30)
    def test_monotone_under_partial_trace(self, seed):
        rng = np.random.default_rng(seed)
        a, b = random_psd(6, rng), random_psd(6, rng)
        ra, rb = partial_trace(a, (2, 3), 0), partial_trace(b, (2, 3), 0)
        assert bures(ra, rb) <= bures(a, b) + 1e-9


class TestECDNormCP:
    @pytest.mark.parametrize("budget", [0.1, 0.5, 1.0, 3.0])
    def test_identity_channel(self, budget):
        assert_allclose(ecd_norm_cp(identity_channel(3), number_observable(3), budget).value, 1.0, atol=1e-10)

    @given(seeds, st.floats(0.05, 5.0))
    @settings(max_examples=20)
    def test_any_channel_has_unit_norm(self, seed, budget):
        phi = random_kraus(3, 2, 3, np.random.default_rng(seed))
        assert_allclose(ecd_norm_cp(phi, number_observable(3), budget).value, 1.0, atol=1e-9)

    @pytest.mark.parametrize("budget", [0.5, 2.0, 4.0, 7.5, 20.0])
    def test_annihilation_conjugation(self, budget):
        d = 8
        phi = KrausMap([annihilation(d)])
        assert_allclose(ecd_norm_cp(phi, number_observable(d), budget).value, min(budget, d - 1), rtol=1e-9)

    @given(seeds, st.floats(0.1, 4.0))
    @settings(max_examples=20)
    def test_equals_squared_enorm_of_representing_operator(self, seed, budget):
        rng = np.random.default_rng(seed)
        phi = random_cp(3, rng)
        v = stinespring_from_kraus(phi)
        g = number_observable(3)
        assert_allclose(ecd_norm_cp(phi, g, budget).value, e_norm(v.v, g, budget).value ** 2, rtol=1e-8, atol=1e-12)

    def test_rejects_two_operator_map(self):
        t = TwoOperatorMap(np.eye(2), np.eye(2), 1)
        with pytest.raises(TypeError):
            ecd_norm_cp(t, QUBIT, 1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            ecd_norm_cp(identity_channel(3), QUBIT, 1.0)


class TestECDDistance:
    def test_equal_maps_give_zero(self):
        phi = random_cp(3, np.random.default_rng(1))
        rep = ecd_distance(phi, phi, number_observable(3), 1.0, FAST)
        assert rep.estimate == 0.0
        assert rep.lower <= rep.upper + 1e-7

    @pytest.mark.parametrize("budget", [1.0, 1.5])
    def test_identity_vs_dephasing_matches_sampling(self, budget):
        idc, deph = identity_channel(2), dephasing_channel(2)
        rep = ecd_distance(idc, deph, QUBIT, budget)
        oracle = sampled_ecd_qubit(idc.ops, deph.ops, budget, 200_000, np.random.default_rng(0))
        assert oracle <= rep.estimate + 1e-6
        assert abs(oracle - rep.estimate) <= 1e-4

    def test_amplitude_damping_matches_sampling(self):
        idc, ad = identity_channel(2), amplitude_damping(0.6)
        rep = ecd_distance(idc, ad, QUBIT, 0.5)
        oracle = sampled_ecd_qubit(idc.ops, ad.ops, 0.5, 200_000, np.random.default_rng(1))
        assert oracle <= rep.estimate + 1e-6
        assert abs(oracle - rep.estimate) <= 1e-4

    def test_monotone_in_energy(self):
        rng = np.random.default_rng(5)
        g = number_observable(3)
        for _ in range(3):
            phi, psi = random_cp(3, rng), random_cp(3, rng)
            vals = [ecd_distance(phi, psi, g, e, FAST).estimate for e in (0.3, 1.0, 2.0)]
            assert vals[0] <= vals[1] + 1e-6
            assert vals[1] <= vals[2] + 1e-6

    def test_witness_is_feasible_and_reproduces_estimate(self):
        rng = np.random.default_rng(7)
        g = number_observable(3)
        phi, psi = random_cp(3, rng), random_cp(3, rng)
        budget = 0.8
        rep = ecd_distance(phi, psi, g, budget, FAST)
        gx = g.tensor_identity(3)
        assert energy_of(rep.witness, gx) <= budget + 1e-9
        assert rep.witness.rank() == 1
        ext_phi, ext_psi = extend(phi, 3), extend(psi, 3)
        value = trace_norm(ext_phi.apply(rep.witness.mat) - ext_psi.apply(rep.witness.mat))
        assert_allclose(value, rep.estimate, atol=1e-8)
        assert rep.lower == rep.estimate
        assert rep.lower <= rep.upper + 1e-7

    def test_chain_bound_is_used_when_supplied(self):
        idc, deph = identity_channel(2), dephasing_channel(2)
        rep = ecd_distance(idc, deph, QUBIT, 1.0, FAST, chain=0.7653668647305271)
        assert rep.upper_provenance == "bures-chain"
        assert_allclose(rep.upper, 2 * 0.7653668647305271, rtol=1e-9)

    def test_report_serializes(self):
        rep = ecd_distance(identity_channel(2), dephasing_channel(2), QUBIT, 1.0, FAST)
        d = rep.to_dict()
        assert set(d) >= {"estimate", "lower", "upper", "upper_provenance", "witness"}
        assert len(d["witness"]) == 4

    def test_rejects_bad_budget(self):
        with pytest.raises(ValueError):
            ecd_distance(identity_channel(2), identity_channel(2), QUBIT, 0.0)


class TestBuresEDistance:
    def test_equal_maps_give_zero(self):
        phi = random_cp(3, np.random.default_rng(2))
        rep = bures_e_distance(phi, phi, number_observable(3), 1.0, FAST)
        assert rep.estimate == pytest.approx(0.0, abs=1e-6)

    @pytest.mark.parametrize(
        "psi,budget",
        [(dephasing_channel(2), 0.5), (reset_channel(2), 1.0), (amplitude_damping(0.6), 0.5)],
    )
    def test_qubit_sampling_agreement(self, psi, budget):
        idc = identity_channel(2)
        rep = bures_e_distance(idc, psi, QUBIT, budget, FAST)
        oracle = sampled_bures_qubit(idc.ops, psi.ops, budget, 200_000, np.random.default_rng(4))
        assert oracle <= rep.estimate + 1e-6
        assert abs(oracle - rep.estimate) <= 1e-4
        assert rep.lower <= rep.upper + 1e-7

    def test_chain_against_distance(self):
        rng = np.random.default_rng(11)
        g = number_observable(3)
        phi, psi = random_cp(3, rng), random_cp(3, rng)
        budget = 1.0
        beta = bures_e_distance(phi, psi, g, budget, FAST).estimate
        dist = ecd_distance(phi, psi, g, budget, FAST).estimate
        nphi, npsi = ecd_norm_cp(phi, g, budget).value, ecd_norm_cp(psi, g, budget).value
        assert dist / (np.sqrt(nphi) + np.sqrt(npsi)) <= beta + 1e-4
        assert beta <= np.sqrt(dist) + 1e-4


class TestDilationDifferenceBound:
    def test_equal_dilations(self):
        v = stinespring_from_kraus(random_cp(3, np.random.default_rng(0)))
        lhs, rhs = dilation_difference_bound(v, v, number_observable(3), 1.0, FAST)
        assert lhs == 0.0
        assert rhs == pytest.approx(0.0, abs=1e-12)

    def test_rank_one_perturbation_is_linear(self):
        rng = np.random.default_rng(1)
        g = number_observable(3)
        v = stinespring_from_kraus(random_cp(3, rng))
        theta = rng.standard_normal(v.v.shape[0]) + 1j * rng.standard_normal(v.v.shape[0])
        bump = np.outer(theta / np.linalg.norm(theta), basis(3, 0).conj())
        r = [dilation_difference_rhs(v, Dilation(v.v + eps * bump, v.env_dim), g, 1.0) for eps in (1e-4, 2e-4, 4e-4)]
        assert_allclose(r[1] / r[0], 2.0, rtol=1e-3)
        assert_allclose(r[2] / r[0], 4.0, rtol=1e-3)

    def test_contract_on_50_pairs(self):
        rng = np.random.default_rng(2)
        g = number_observable(3)
        cfg = AscentConfig(restarts=4, max_iter=100, polish=1)
        for _ in range(50):
            vphi = Dilation(ginibre(6, 3, rng) / 3, 2)
            vpsi = Dilation(ginibre(6, 3, rng) / 3, 2)
            lhs, rhs = dilation_difference_bound(vphi, vpsi, g, rng.uniform(0.2, 2.0), cfg)
            assert lhs <= rhs + 1e-6

    def test_shape_mismatch(self):
        g = number_observable(2)
        with pytest.raises(DimensionError):
            dilation_difference_bound(Dilation(np.eye(2), 1), Dilation(np.ones((4, 2)), 2), g, 1.0)


class TestCommonDilation:
    def test_equal_dilations(self):
        v = stinespring_from_kraus(identity_channel(2))
        cd = common_dilation_optimize(v, v, QUBIT, 1.0, FAST)
        assert cd.achieved == pytest.approx(0.0, abs=1e-6)
        assert_allclose(cd.contraction, np.eye(cd.contraction.shape[0]), atol=1e-6)

    @pytest.mark.parametrize("budget", [0.5, 1.0])
    def test_identity_vs_dephasing_matches_bures(self, budget):
        vid = stinespring_from_kraus(identity_channel(2))
        vde = stinespring_from_kraus(dephasing_channel(2))
        cd = common_dilation_optimize(vid, vde, QUBIT, budget, FAST)
        beta = bures_e_distance(identity_channel(2), dephasing_channel(2), QUBIT, budget, FAST).estimate
        assert beta - 1e-6 <= cd.achieved <= beta + 1e-3
        assert cd.within(1e-3)

    def test_doubled_environment_preserves_gram(self):
        rng = np.random.default_rng(3)
        vphi = stinespring_from_kraus(random_cp(3, rng))
        vpsi = stinespring_from_kraus(random_cp(3, rng))
        cd = common_dilation_optimize(vphi, vpsi, number_observable(3), 1.0, FAST)
        assert_allclose(cd.v_psi.v.conj().T @ cd.v_psi.v, vpsi.v.conj().T @ vpsi.v, atol=1e-12)
        assert_allclose(cd.v_phi.v.conj().T @ cd.v_phi.v, vphi.v.conj().T @ vphi.v, atol=1e-12)
        assert np.linalg.norm(cd.contraction, 2) <= 1 + 1e-9


class TestChain:
    def test_equal_maps(self):
        phi = identity_channel(2)
        rep = ksw_chain(phi, phi, QUBIT, 1.0, FAST)
        assert_allclose([t.value for t in rep.terms], 0.0, atol=1e-6)
        assert rep.holds

    def test_identity_vs_dephasing(self):
        rep = ksw_chain(identity_channel(2), dephasing_channel(2), QUBIT, 1.0, FAST)
        assert rep.holds
        assert len(rep.margins) == 3
        assert all(t.provenance for t in rep.terms)
        assert_allclose(rep.terms[2].value, np.sqrt(2 - np.sqrt(2)), atol=1e-6)

    def test_random_pairs(self):
        rng = np.random.default_rng(9)
        g = number_observable(3)
        for _ in range(3):
            rep = ksw_chain(random_cp(3, rng), random_cp(3, rng), g, 1.0, FAST)
            assert rep.holds, rep.margins


class TestContinuity:
    def test_equal_states_trivially_pass(self):
        phi = amplitude_damping(0.3)
        omega = proj(np.array([0.8, 0, 0, 0.6]))
        out = extend(phi, 2).apply(omega)
        assert trace_norm(out - out) == 0.0 < continuity_rhs(phi, QUBIT, 0.5, 1e-6)

    def test_no_proximity_constraint(self):
        rep = continuity_bound_check(random_cp(3, np.random.default_rng(0)), number_observable(3), 1.0, 2.0, 100, seed=1)
        assert rep.passed
        assert rep.max_lhs <= rep.rhs

    def test_small_eps(self):
        rep = continuity_bound_check(random_kraus(3, 3, 2, np.random.default_rng(2)), number_observable(3), 0.5, 0.05, 100)
        assert rep.passed

    def test_rejects_bad_eps(self):
        with pytest.raises(ValueError):
            continuity_bound_check(identity_channel(2), QUBIT, 1.0, 3.0, 10)
