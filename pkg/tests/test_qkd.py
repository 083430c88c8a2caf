import math

import numpy as np
import pytest

from cvq import gaussian as gs
from cvq import qkd


BETA = 0.95


class TestChannelParams:
    def test_distance_conversion(self):
        ch = qkd.ChannelParams.from_distance(50.0, 0.01)
        assert abs(ch.T - 10 ** (-1.0)) < 1e-15

    def test_inconsistent_pair_rejected(self):
        with pytest.raises(ValueError):
            qkd.ChannelParams(0.5, 0.01, d_km=10.0)

    def test_added_noise(self):
        ch = qkd.ChannelParams(0.25, 0.04)
        assert abs(ch.chi - (3.0 + 0.04)) < 1e-12


class TestGg02:
    def test_mutual_information_matches_gaussian_route(self):
        v, ch = 6.0, qkd.ChannelParams(0.45, 0.03)
        r = qkd.gg02_kgr(ch, BETA, v=v, optimize_v=False)
        st0 = gs.apply_channel(
            gs.make_state("tmsv", V=v),
            gs.thermal_loss_channel(ch.T, ch.nbar_T),
            modes=[1],
        )
        i2 = gs.gaussian_mutual_information(st0, gs.DOUBLE_HOMODYNE, gs.HOMODYNE_Q)
        assert abs(r.I_AB - i2) < 1e-12

    def test_decomposition(self):
        r = qkd.gg02_kgr(qkd.ChannelParams.from_distance(80, 0.02), BETA)
        assert r.check_decomposition(1e-12)

    def test_positive_at_500km_no_noise(self):
        assert qkd.gg02_kgr(qkd.ChannelParams.from_distance(500, 0.0), 1.0).K > 0

    def test_chi_nonnegative(self):
        for d in (10, 100, 250):
            r = qkd.gg02_kgr(qkd.ChannelParams.from_distance(d, 0.03), BETA)
            assert r.chi_BE >= 0.0


class TestPsk:
    def test_state_eigenvalues_qpsk_closed_form(self):
        a2 = 0.8
        lam = qkd.psk_state_eigenvalues(4, a2)
        e = math.exp(-a2) / 2
        expect = [
            e * (math.cosh(a2) + math.cos(a2)),
            e * (math.sinh(a2) + math.sin(a2)),
            e * (math.cosh(a2) - math.cos(a2)),
            e * (math.sinh(a2) - math.sin(a2)),
        ]
        assert np.allclose(lam, expect, atol=1e-14)
        assert abs(lam.sum() - 1.0) < 1e-12

    def test_correlation_below_gaussian(self):
        for m in (4, 8):
            for a2 in (0.1, 0.5, 2.0):
                z = qkd.psk_correlation(m, a2)
                assert 0.0 < z <= math.sqrt((1 + 2 * a2) ** 2 - 1) + 1e-9

    def test_correlation_vs_fock_oracle(self):
        # Z = 2 tr[rho^(1/2) a rho^(1/2) a^dag] evaluated brute force
        m, a2 = 4, 0.7
        amps = math.sqrt(a2) * np.exp(1j * np.pi * (2 * np.arange(m) + 1) / m)
        vecs = gs.coherent_fock_vector(amps, 40)
        rho = (vecs.T / m) @ vecs.conj()
        w, v = np.linalg.eigh(rho)
        sq = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
        a_op = np.diag(np.sqrt(np.arange(1, 41)), k=1)
        oracle = 2.0 * float(np.real(np.trace(sq @ a_op @ sq @ a_op.conj().T)))
        assert abs(qkd.psk_correlation(m, a2) - oracle) < 1e-9

    def test_qpsk_below_gg02(self):
        ch = qkd.ChannelParams.from_distance(40, 0.01)
        assert qkd.psk_kgr(4, ch, BETA).K < qkd.gg02_kgr(ch, BETA).K

    def test_higher_order_improves(self):
        ch = qkd.ChannelParams.from_distance(50, 0.01)
        k4 = qkd.psk_kgr(4, ch, BETA).K
        k8 = qkd.psk_kgr(8, ch, BETA).K
        kinf = qkd.psk_kgr("inf", ch, BETA).K
        assert k4 < k8 <= kinf + 1e-4
        assert abs(k8 - kinf) < 0.02 * kinf  # PSK(8) almost saturates

    def test_tiny_transmissivity_no_key(self):
        ch = qkd.ChannelParams(1e-6, 0.01)
        assert qkd.psk_kgr(4, ch, BETA, alpha2=0.3).K <= 0.0

    def test_quadrature_stability(self):
        ch = qkd.ChannelParams.from_distance(30, 0.02)
        a = qkd.psk_mutual_information(4, 0.4, ch, n_points=2001)
        b = qkd.psk_mutual_information(4, 0.4, ch, n_points=4001)
        assert abs(a - b) < 1e-7


class TestQam:
    def test_xi_zero_equals_uniform(self):
        ch = qkd.ChannelParams.from_distance(40, 0.01)
        a = qkd.qam_kgr(4, ch, BETA, sampling="MB", nbar=1.5, xi=0.0)
        b = qkd.qam_kgr(4, ch, BETA, sampling="uniform", nbar=1.5)
        assert abs(a.K - b.K) < 1e-12

    def test_two_by_two_is_qpsk(self):
        ch = qkd.ChannelParams.from_distance(40, 0.01)
        nb = 0.4
        a = qkd.qam_kgr(2, ch, BETA, sampling="uniform", nbar=nb)
        b = qkd.psk_kgr(4, ch, BETA, alpha2=nb)
        assert abs(a.K - b.K) < 1e-6

    def test_large_xi_collapses_to_qpsk(self):
        ch = qkd.ChannelParams.from_distance(40, 0.01)
        nb = 0.4
        a = qkd.qam_kgr(4, ch, BETA, sampling="MB", nbar=nb, xi=30.0)
        b = qkd.psk_kgr(4, ch, BETA, alpha2=nb)
        assert abs(a.K / b.K - 1) < 0.01

    def test_uniform_spacing_inversion(self):
        delta = qkd._qam_delta(8, 2.0, 0.0)
        assert abs(delta - math.sqrt(6 * 2.0 / 63)) < 1e-12
        delta_mb = qkd._qam_delta(8, 2.0, 0.7)
        levels = qkd._qam_levels(8)
        w = qkd._mb_weights(levels, delta_mb, 0.7)
        assert abs(2 * delta_mb**2 * float(w @ levels**2) - 2.0) < 1e-9


class TestTrusted:
    def test_ordering(self):
        ch = qkd.ChannelParams.from_distance(60, 0.01)
        ks = []
        for tag in ("uL;uN", "tL;uN", "tL;tN"):
            sc = qkd.TrustScenario(tag, eta=0.7, eps_d=0.01)
            ks.append(qkd.trusted_qpsk_kgr(ch, BETA, sc).K)
        assert ks[0] <= ks[1] + 1e-9 <= ks[2] + 2e-9

    def test_untrusted_equals_unconditional_pipeline(self):
        ch = qkd.ChannelParams.from_distance(60, 0.01)
        sc = qkd.TrustScenario("uL;uN", eta=0.7, eps_d=0.01)
        a = qkd.trusted_qpsk_kgr(ch, BETA, sc, alpha2=0.35)
        b = qkd.psk_kgr(4, qkd.ChannelParams(0.7 * ch.T, 0.02), BETA, alpha2=0.35)
        assert abs(a.K - b.K) < 1e-12

    def test_fighting_noise_with_noise(self):
        # for large channel noise, trusted lossy-noisy detection can beat
        # the lossless detector: K(tL;tN) not monotone in eta
        ch = qkd.ChannelParams.from_distance(60, 0.05)
        ks = []
        for eta in (0.9999, 0.7, 0.5):
            sc = qkd.TrustScenario("tL;tN", eta=eta, eps_d=0.001 if eta < 1 else 0.0)
            ks.append(qkd.trusted_qpsk_kgr(ch, BETA, sc).K)
        assert max(ks[1], ks[2]) > ks[0]

    def test_eta_one_with_noise_rejected(self):
        with pytest.raises(ValueError):
            qkd.TrustScenario("tL;tN", eta=1.0, eps_d=0.01)


class TestMixtureEntropy:
    def test_single_state(self):
        assert qkd.mixture_entropy([1.0], [0.5 + 0.1j]) < 1e-12

    def test_qpsk_closed_form(self):
        a2 = 0.7
        amps = math.sqrt(a2) * np.exp(1j * np.pi * (2 * np.arange(4) + 1) / 4)
        got = qkd.mixture_entropy(np.full(4, 0.25), amps)
        ev = qkd.qpsk_mixture_eigenvalues(a2)
        expect = float(-np.sum(ev[ev > 0] * np.log2(ev[ev > 0])))
        assert abs(got - expect) < 1e-10
        assert abs(ev.sum() - 1.0) < 1e-12

    def test_orthogonal_limit(self):
        amps = 12.0 * np.exp(1j * np.pi * (2 * np.arange(4) + 1) / 4)
        assert abs(qkd.mixture_entropy(np.full(4, 0.25), amps) - 2.0) < 1e-9

    def test_gaussian_branch_matches_coherent_branch(self):
        amps = [0.4 + 0.2j, -0.3 + 0.5j, 0.1 - 0.6j]
        w = [0.5, 0.3, 0.2]
        states = [gs.make_state("coherent", alpha=a) for a in amps]
        a = qkd.mixture_entropy(w, amps)
        b = qkd.mixture_entropy(w, states)
        assert abs(a - b) < 1e-7

    def test_rejects_bad_weights(self):
        with pytest.raises(ValueError):
            qkd.mixture_entropy([0.7, 0.7], [0.1, 0.2])


class TestWiretap:
    def test_t_one_no_leak(self):
        r = qkd.wiretap_qpsk_kgr(qkd.ChannelParams(1.0, 0.0), BETA, "pure", alpha2=0.4)
        assert r.chi_BE == 0.0
        assert abs(r.K - BETA * r.I_AB) < 1e-15

    def test_pure_requires_no_noise(self):
        with pytest.raises(ValueError):
            qkd.wiretap_qpsk_kgr(qkd.ChannelParams(0.5, 0.01), BETA, "pure")

    def test_thermal_reduces_to_pure(self):
        a2, d = 0.4, 30.0
        kp = qkd.wiretap_qpsk_kgr(
            qkd.ChannelParams.from_distance(d, 0.0), BETA, "pure", alpha2=a2
        )
        kt = qkd.wiretap_qpsk_kgr(
            qkd.ChannelParams.from_distance(d, 1e-9), BETA, "thermal", alpha2=a2
        )
        assert abs(kp.K - kt.K) < 1e-6

    def test_wiretap_beats_unconditional(self):
        ch = qkd.ChannelParams.from_distance(30, 0.02)
        kw = qkd.wiretap_qpsk_kgr(ch, BETA, "thermal", alpha2=0.35, n_nodes=121)
        ku = qkd.psk_kgr(4, ch, BETA, alpha2=0.35)
        assert kw.K >= ku.K - 1e-9

    def test_gaussian_bound_dominates_exact(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            t = float(rng.uniform(0.15, 0.9))
            a2 = float(rng.uniform(0.1, 1.2))
            ch = qkd.ChannelParams(t, 0.0)
            exact = qkd.wiretap_qpsk_kgr(ch, BETA, "pure", alpha2=a2, n_nodes=151)
            bound = qkd.psk_kgr(4, ch, BETA, alpha2=a2)
            assert bound.chi_BE >= exact.chi_BE - 1e-9


class TestMaxExcessNoise:
    def test_bracketing_definition(self):
        def k_of_eps(eps):
            return qkd.gg02_kgr(qkd.ChannelParams.from_distance(100, eps), BETA).K

        e_max = qkd.max_excess_noise(k_of_eps, hi=0.2)
        delta = 1e-3
        assert k_of_eps(e_max - delta) > 0.0 > k_of_eps(e_max + delta)

    def test_decreasing_with_distance(self):
        vals = []
        for d in (40, 90, 140, 190, 240):
            vals.append(
                qkd.max_excess_noise(
                    lambda e: qkd.gg02_kgr(
                        qkd.ChannelParams.from_distance(d, e), BETA
                    ).K,
                    hi=0.4,
                )
            )
        assert all(b < a for a, b in zip(vals, vals[1:]))
