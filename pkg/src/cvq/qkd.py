"""Asymptotic key rates for Gaussian- and discrete-modulation CV-QKD.

Implements the GG02 pipeline, PSK(M)/PSK(inf) and QAM (uniform and
Maxwell-Boltzmann sampled) protocols under the Gaussian-attack bound,
the trusted-device QPSK variants, and the wiretap-channel QPSK rates
(pure-loss and thermal-loss).  Key rates are reverse-reconciliation
Devetak-Winter lower bounds K = beta I_AB - chi_BE in bits per use.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special

from . import gaussian as gs
from .numerics import (
    PrecisionWarning,
    bisect_root,
    golden_min,
    hermitian_sqrt,
    minimize_bounded,
    OptimizerConfig,
    simpson_integral,
)

__all__ = [
    "ChannelParams",
    "KgrResult",
    "TrustScenario",
    "gg02_kgr",
    "psk_kgr",
    "qam_kgr",
    "trusted_qpsk_kgr",
    "mixture_entropy",
    "wiretap_qpsk_kgr",
    "max_excess_noise",
    "psk_correlation",
    "psk_state_eigenvalues",
]

LOG2E = 1.0 / math.log(2.0)


@dataclass(frozen=True)
class ChannelParams:
    """Thermal-loss channel: transmissivity (or distance) and excess noise."""

    T: float
    eps: float = 0.0
    kappa: float = 0.2
    d_km: float | None = None

    def __post_init__(self):
        if not 0.0 < self.T <= 1.0:
            raise ValueError("transmissivity must lie in (0, 1]")
        if self.eps < 0.0:
            raise ValueError("excess noise must be >= 0")
        if self.d_km is not None:
            t_check = 10.0 ** (-self.kappa * self.d_km / 10.0)
            if abs(t_check - self.T) > 1e-12 * max(self.T, t_check):
                raise ValueError("inconsistent (T, distance) pair")

    @classmethod
    def from_distance(cls, d_km, eps=0.0, kappa=0.2):
        return cls(10.0 ** (-kappa * d_km / 10.0), eps, kappa, d_km)

    @property
    def chi(self):
        return (1.0 - self.T) / self.T + self.eps

    @property
    def nbar_T(self):
        """Thermal occupation reproducing the excess noise."""
        if self.T == 1.0:
            return 0.0
        return self.T * self.eps / (2.0 * (1.0 - self.T))


@dataclass(frozen=True)
class KgrResult:
    """Key rate, its two information parts, and the optimized knobs."""

    K: float
    I_AB: float
    chi_BE: float
    beta: float
    p_success: float = 1.0
    params: dict = field(default_factory=dict)

    def check_decomposition(self, tol=1e-12):
        return abs(self.K - self.p_success * (self.beta * self.I_AB - self.chi_BE)) <= tol


@dataclass(frozen=True)
class TrustScenario:
    """Detection trust level: tag in {'uL;uN', 'tL;uN', 'tL;tN'}."""

    tag: str
    eta: float = 1.0
    eps_d: float = 0.0

    def __post_init__(self):
        if self.tag not in ("uL;uN", "tL;uN", "tL;tN"):
            raise ValueError(f"unknown trust tag {self.tag!r}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("detector efficiency must lie in (0, 1]")
        if self.eps_d < 0.0:
            raise ValueError("detection noise must be >= 0")
        if self.eta == 1.0 and self.eps_d > 0.0:
            raise ValueError(
                "detection noise requires eta < 1 (the noise-injecting "
                "beam splitter degenerates at unit efficiency)"
            )


# ----------------------------------------------------------------------
# Gaussian two-mode pipeline
# ----------------------------------------------------------------------

def _two_mode_cm(v, t, chi, z):
    sz = np.diag([1.0, -1.0])
    return np.block(
        [
            [v * np.eye(2), math.sqrt(t) * z * sz],
            [math.sqrt(t) * z * sz, t * (v + chi) * np.eye(2)],
        ]
    )


def holevo_from_cm(cm, measured_mode=1, meas=gs.HOMODYNE_Q):
    """chi(B;E) = S(full) - S(rest | measurement) for a purifiable CM."""
    s_all = gs.entropy_cm(cm)
    state = gs.GaussianState(np.zeros(cm.shape[0]), cm, check=False)
    cond = gs.condition_on_measurement(state, meas, measured_mode)
    return s_all - gs.entropy_cm(cond.cm)


def gg02_kgr(channel: ChannelParams, beta, optimize_v=True, v=None) -> KgrResult:
    """GG02 key rate; if ``optimize_v`` the modulation V is tuned.

    The exact Gaussian pipeline: I from the 2x2 determinant formula,
    Eve's Holevo information from the joint covariance matrix under the
    purification (entangling-cloner) attack.
    """
    if not 0.0 < beta <= 1.0:
        raise ValueError("reconciliation efficiency must lie in (0, 1]")
    t, eps, chi = channel.T, channel.eps, channel.chi

    def parts(vv):
        i_ab = 0.5 * math.log2(1.0 + t * (vv - 1.0) / (1.0 + t * eps))
        z = math.sqrt(vv * vv - 1.0)
        cm = _two_mode_cm(vv, t, chi, z)
        chi_be = holevo_from_cm(cm)
        return i_ab, chi_be

    def neg_k(vv):
        i_ab, chi_be = parts(vv)
        return -(beta * i_ab - chi_be)

    if v is None and optimize_v:
        grid = np.exp(np.linspace(math.log(1.01), math.log(200.0), 41))
        v0 = grid[np.argmin([neg_k(x) for x in grid])]
        lo = max(1.005, v0 / 2.0)
        hi = min(250.0, v0 * 2.0)
        v_opt, _ = golden_min(neg_k, lo, hi, tol=1e-7)
    else:
        v_opt = 10.0 if v is None else v
    i_ab, chi_be = parts(v_opt)
    k = beta * i_ab - chi_be
    return KgrResult(k, i_ab, chi_be, beta, params={"V": float(v_opt)})


# ----------------------------------------------------------------------
# PSK modulation
# ----------------------------------------------------------------------

def _psk_log_eigenvalues(m, alpha2):
    """log lambda_k of the PSK(M) mixture via the direct Fock series.

    lambda_k = e^{-a2} sum_n a2^{nM+k} / (nM+k)!, summed in log space so
    that the tiny high-k eigenvalues stay accurate at small energies.
    """
    if alpha2 <= 0.0:
        raise ValueError("positive energy required for log eigenvalues")
    n_terms = max(8, int(np.ceil((4.0 * alpha2 + 40.0) / m)))
    n = np.arange(n_terms)
    out = np.empty(m)
    for k in range(m):
        idx = n * m + k
        logs = idx * math.log(alpha2) - special.gammaln(idx + 1.0)
        out[k] = -alpha2 + special.logsumexp(logs)
    return out


def psk_state_eigenvalues(m, alpha2):
    """Eigenvalues lambda_k of the uniform PSK(M) coherent mixture."""
    if alpha2 == 0.0:
        lam = np.zeros(m)
        lam[0] = 1.0
        return lam
    return np.exp(_psk_log_eigenvalues(m, alpha2))


def psk_correlation(m, alpha2):
    """Correlation term Z_M = 2 a^2 sum_k lambda_k^{3/2}/lambda_{k+1}^{1/2}."""
    if alpha2 == 0.0:
        return 0.0
    log_lam = _psk_log_eigenvalues(m, alpha2)
    log_next = np.roll(log_lam, -1)
    return float(2.0 * alpha2 * np.sum(np.exp(1.5 * log_lam - 0.5 * log_next)))


def psk_inf_correlation(alpha2):
    """Z for continuous phase modulation: 2 e^{-a2} sum a^{2n+1} sqrt(n+1)/n!."""
    if alpha2 == 0.0:
        return 0.0
    a = math.sqrt(alpha2)
    n_max = max(30, int(np.ceil(6.0 * (alpha2 + 2.0))))
    n = np.arange(n_max)
    logs = (2 * n + 1) * math.log(a) - special.gammaln(n + 1.0)
    return float(2.0 * np.exp(-alpha2 + logs) @ np.sqrt(n + 1.0))


def _mixture_hb(means, weights, var, n_points=2001):
    """Shannon entropy (bits) of a Gaussian mixture along one quadrature."""
    means = np.asarray(means, dtype=float)
    weights = np.asarray(weights, dtype=float)
    sd = math.sqrt(var)
    lo = means.min() - 8.0 * sd
    hi = means.max() + 8.0 * sd

    def integrand(x):
        p = np.sum(
            weights[:, None]
            * np.exp(-((x[None, :] - means[:, None]) ** 2) / (2.0 * var)),
            axis=0,
        ) / math.sqrt(2.0 * math.pi * var)
        out = np.zeros_like(p)
        mask = p > 1e-300
        out[mask] = -p[mask] * np.log2(p[mask])
        return out

    val, err = simpson_integral(integrand, lo, hi, n_points=n_points)
    if err > 1e-7:
        warnings.warn(f"H_B quadrature error estimate {err:.1e}", PrecisionWarning)
    return val


def _psk_means(m, alpha2, t):
    k = np.arange(m)
    return 2.0 * math.sqrt(t * alpha2) * np.cos(np.pi * (2 * k + 1) / m)


def psk_mutual_information(m, alpha2, channel, n_points=2001):
    """Exact I_AB of PSK(M) (or 'inf') with homodyne detection."""
    var = 1.0 + channel.T * channel.eps
    if m == "inf":
        phi = np.linspace(0.0, 2.0 * np.pi, 512, endpoint=False)
        means = 2.0 * math.sqrt(channel.T * alpha2) * np.cos(phi)
        weights = np.full(phi.size, 1.0 / phi.size)
    else:
        means = _psk_means(m, alpha2, channel.T)
        weights = np.full(m, 1.0 / m)
    h_b = _mixture_hb(means, weights, var, n_points)
    return h_b - 0.5 * math.log2(2.0 * math.pi * math.e * var)


def _z_penalty_terms(rho, a_op, probs, alpha_vecs):
    """w-term of the nonlinear-channel correlation bound (flagged)."""
    w_eig, v_eig = np.linalg.eigh(rho)
    keep = w_eig > 1e-10
    if not np.all(keep):
        warnings.warn(
            "rho^(-1/2) acts on a near-null subspace; penalty uses a "
            "pseudo-inverse there",
            PrecisionWarning,
        )
    inv_sqrt = (v_eig[:, keep] / np.sqrt(w_eig[keep])) @ v_eig[:, keep].conj().T
    sqrt = (v_eig * np.sqrt(np.clip(w_eig, 0.0, None))) @ v_eig.conj().T
    a_rho = sqrt @ a_op @ inv_sqrt
    w = 0.0
    for p, vec in zip(probs, alpha_vecs):
        av = a_rho @ vec
        mean = vec.conj() @ av
        w += p * float(np.real(av.conj() @ av - abs(mean) ** 2))
    return w


def psk_kgr(m, channel: ChannelParams, beta, alpha2=None,
            alpha2_box=(1e-3, 4.0), z_penalty=False) -> KgrResult:
    """PSK(M in {4, 8, ...} or 'inf') key rate under the Gaussian bound.

    K(a2) = beta I_AB(a2) - chi_BE(a2) with the linear-channel CM; the
    modulation energy is optimized on ``alpha2_box`` unless pinned.  The
    optional ``z_penalty`` switch applies the nonlinear-channel
    correlation bound instead of the linear-channel value (default off).
    """
    if m != "inf" and (m < 2 or m % 2):
        raise ValueError("PSK order must be even and >= 2, or 'inf'")
    t, eps, chi = channel.T, channel.eps, channel.chi

    def parts(a2):
        if m == "inf":
            z = psk_inf_correlation(a2)
        else:
            z = psk_correlation(m, a2)
        if z_penalty and eps > 0.0 and m != "inf":
            cutoff = max(20, int(np.ceil(4.0 * (a2 + 2.0))))
            amps = math.sqrt(a2) * np.exp(
                1j * np.pi * (2 * np.arange(m) + 1) / m
            )
            vecs = gs.coherent_fock_vector(amps, cutoff)
            rho = (vecs.T / m) @ vecs.conj()
            a_op = np.diag(np.sqrt(np.arange(1, cutoff + 1)), k=1)
            w = _z_penalty_terms(rho, a_op, np.full(m, 1.0 / m), vecs)
            z = max(z - math.sqrt(max(2.0 * t * eps * w, 0.0)) / math.sqrt(t), 0.0)
        v = 1.0 + 2.0 * a2
        i_ab = psk_mutual_information(m, a2, channel)
        cm = _two_mode_cm(v, t, chi, z)
        chi_be = holevo_from_cm(cm)
        return i_ab, chi_be

    def neg_k(a2):
        i_ab, chi_be = parts(a2)
        return -(beta * i_ab - chi_be)

    if alpha2 is None:
        grid = np.exp(np.linspace(math.log(alpha2_box[0]), math.log(alpha2_box[1]), 25))
        a0 = grid[np.argmin([neg_k(x) for x in grid])]
        alpha2, _ = golden_min(
            neg_k, max(alpha2_box[0], a0 / 2.0), min(alpha2_box[1], a0 * 2.0), tol=1e-6
        )
    i_ab, chi_be = parts(alpha2)
    return KgrResult(
        beta * i_ab - chi_be, i_ab, chi_be, beta, params={"alpha2": float(alpha2)}
    )


# ----------------------------------------------------------------------
# QAM modulation
# ----------------------------------------------------------------------

def _qam_levels(m_side):
    return np.arange(m_side) - (m_side - 1) / 2.0


def _mb_weights(levels, delta, xi):
    w = np.exp(-xi * (levels * delta) ** 2)
    return w / w.sum()


def _qam_delta(m_side, nbar, xi):
    """Symbol spacing producing mean energy nbar for the MB weights."""
    levels = _qam_levels(m_side)
    if xi == 0.0:
        return math.sqrt(6.0 * nbar / (m_side**2 - 1.0))

    def energy(delta):
        w = _mb_weights(levels, delta, xi)
        return 2.0 * delta**2 * float(w @ levels**2)

    hi = math.sqrt(6.0 * nbar / (m_side**2 - 1.0)) + 1.0
    while energy(hi) < nbar:
        hi *= 2.0
    return bisect_root(lambda d: energy(d) - nbar, 1e-12, hi, tol=1e-12)


def _qam_rho_z(m_side, nbar, xi):
    """(Z correlation, Fock trace defect) of the QAM ensemble."""
    levels = _qam_levels(m_side)
    delta = _qam_delta(m_side, nbar, xi)
    w1 = _mb_weights(levels, delta, xi)
    xs = levels * delta
    amps = (xs[:, None] + 1j * xs[None, :]).ravel()
    probs = np.outer(w1, w1).ravel()
    significant = probs > 1e-18
    peak = np.max(np.abs(amps[significant])) ** 2
    cutoff = max(10, min(int(np.ceil(4.0 * (peak + 1.0))), gs.FOCK_CAP))
    while True:
        vecs = gs.coherent_fock_vector(amps, cutoff)
        rho = np.einsum("k,kn,km->nm", probs, vecs, vecs.conj())
        defect = 1.0 - float(np.real(np.trace(rho)))
        if defect < 1e-11 or cutoff >= gs.FOCK_CAP:
            break
        cutoff *= 2
    if defect >= 1e-11:
        warnings.warn("QAM Fock cutoff cap reached", PrecisionWarning)
    sq, _ = hermitian_sqrt(rho)
    a_op = np.diag(np.sqrt(np.arange(1, cutoff + 1)), k=1)
    z = 2.0 * float(np.real(np.trace(sq @ a_op @ sq @ a_op.conj().T)))
    return z, defect, delta, w1, xs


def qam_kgr(m_side, channel: ChannelParams, beta, sampling="MB",
            nbar=None, xi=None) -> KgrResult:
    """QAM(m_side x m_side) key rate with uniform or MB sampling.

    For ``sampling='uniform'`` only the mean energy is optimized; for
    ``sampling='MB'`` the inverse temperature of the Maxwell-Boltzmann
    weights is tuned as well (xi -> 0 recovers the uniform grid, large
    xi collapses onto the innermost QPSK square).
    """
    if m_side not in (2, 4, 8):
        raise ValueError("m_side must be one of 2, 4, 8")
    if sampling not in ("uniform", "MB"):
        raise ValueError("sampling must be 'uniform' or 'MB'")
    t, eps, chi = channel.T, channel.eps, channel.chi
    var = 1.0 + t * eps

    def parts(nb, x):
        z, defect, delta, w1, xs = _qam_rho_z(m_side, nb, x)
        v = 1.0 + 2.0 * nb
        means = 2.0 * math.sqrt(t) * xs
        h_b = _mixture_hb(means, w1, var)
        i_ab = h_b - 0.5 * math.log2(2.0 * math.pi * math.e * var)
        chi_be = holevo_from_cm(_two_mode_cm(v, t, chi, z))
        return i_ab, chi_be, delta

    if sampling == "uniform":
        xi = 0.0

    if nbar is not None and (xi is not None or sampling == "uniform"):
        i_ab, chi_be, delta = parts(nbar, xi)
        return KgrResult(
            beta * i_ab - chi_be, i_ab, chi_be, beta,
            params={"nbar": nbar, "xi": xi, "delta": delta},
        )

    if sampling == "uniform":
        def neg_k(nb):
            i_ab, chi_be, _ = parts(nb, 0.0)
            return -(beta * i_ab - chi_be)

        grid = np.exp(np.linspace(math.log(0.05), math.log(20.0), 21))
        n0 = grid[np.argmin([neg_k(x) for x in grid])]
        nb, _ = golden_min(neg_k, n0 / 2.0, n0 * 2.0, tol=1e-4)
        i_ab, chi_be, delta = parts(nb, 0.0)
        return KgrResult(
            beta * i_ab - chi_be, i_ab, chi_be, beta,
            params={"nbar": float(nb), "xi": 0.0, "delta": delta},
        )

    def neg_k2(v):
        nb = math.exp(v[0])
        i_ab, chi_be, _ = parts(nb, v[1])
        return -(beta * i_ab - chi_be)

    cfg = OptimizerConfig(grid_points=21, xtol=1e-5, ftol=1e-10)
    box = [(math.log(0.05), math.log(20.0)), (0.0, 3.0)]
    x_opt, _ = minimize_bounded(neg_k2, box, cfg)
    nb, x = math.exp(x_opt[0]), float(x_opt[1])
    i_ab, chi_be, delta = parts(nb, x)
    return KgrResult(
        beta * i_ab - chi_be, i_ab, chi_be, beta,
        params={"nbar": float(nb), "xi": x, "delta": delta},
    )


# ----------------------------------------------------------------------
# trusted-device QPSK
# ----------------------------------------------------------------------

def _trusted_cm(alpha2, channel, scenario):
    """8x8 CM of modes (A, B, C1, C2) with the detection dilation."""
    t_ch, eps_ch = channel.T, channel.eps
    chi_ch = (1.0 - t_ch) / t_ch + eps_ch
    v = 1.0 + 2.0 * alpha2
    z = psk_correlation(4, alpha2)
    sigma_ab = _two_mode_cm(v, t_ch, chi_ch, z)
    eta, eps_d = scenario.eta, scenario.eps_d
    if eta < 1.0:
        nbar_d = eta * t_ch * eps_d / (2.0 * (1.0 - eta))
    else:
        nbar_d = 0.0
    v_d = 1.0 + 2.0 * nbar_d
    z_d = math.sqrt(max(v_d * v_d - 1.0, 0.0))
    sz = np.diag([1.0, -1.0])
    sigma_c = np.block(
        [[v_d * np.eye(2), z_d * sz], [z_d * sz, v_d * np.eye(2)]]
    )
    full = linalg.block_diag(sigma_ab, sigma_c)
    state = gs.GaussianState(np.zeros(8), full, check=False)
    state = gs.apply_channel(state, gs.beam_splitter(eta), modes=[1, 2])
    return state.cm


def trusted_qpsk_kgr(channel: ChannelParams, beta, scenario: TrustScenario,
                     alpha2=None, alpha2_box=(1e-3, 4.0)) -> KgrResult:
    """QPSK key rate with trusted/untrusted detection losses and noise.

    The mutual information always uses the physical pipeline with total
    transmissivity eta*T and noise eps_ch + eps_d; Eve's bound retains
    the trusted modes according to the scenario tag.
    """
    t_tot = scenario.eta * channel.T
    eps_tot = channel.eps + scenario.eps_d
    total = ChannelParams(t_tot, eps_tot, channel.kappa)

    def parts(a2):
        i_ab = psk_mutual_information(4, a2, total)
        cm = _trusted_cm(a2, channel, scenario)
        if scenario.tag == "tL;tN":
            keep = [0, 1, 2, 3]  # A, B, C1, C2
        elif scenario.tag == "tL;uN":
            keep = [0, 1, 2]
        else:
            keep = [0, 1]
        idx = np.concatenate([(2 * m, 2 * m + 1) for m in keep])
        sub = cm[np.ix_(idx, idx)]
        chi_be = holevo_from_cm(sub, measured_mode=1)
        return i_ab, chi_be

    def neg_k(a2):
        i_ab, chi_be = parts(a2)
        return -(beta * i_ab - chi_be)

    if alpha2 is None:
        grid = np.exp(np.linspace(math.log(alpha2_box[0]), math.log(alpha2_box[1]), 25))
        a0 = grid[np.argmin([neg_k(x) for x in grid])]
        alpha2, _ = golden_min(
            neg_k, max(alpha2_box[0], a0 / 2.0), min(alpha2_box[1], a0 * 2.0), tol=1e-6
        )
    i_ab, chi_be = parts(alpha2)
    return KgrResult(
        beta * i_ab - chi_be, i_ab, chi_be, beta, params={"alpha2": float(alpha2)}
    )


# ----------------------------------------------------------------------
# mixture entropies
# ----------------------------------------------------------------------

def coherent_overlap_matrix(amplitudes):
    """Gram matrix <a_k|a_m> of a list of coherent amplitudes."""
    a = np.asarray(amplitudes, dtype=complex)
    return np.exp(
        -0.5 * np.abs(a[:, None]) ** 2
        - 0.5 * np.abs(a[None, :]) ** 2
        + np.conj(a[:, None]) * a[None, :]
    )


def _coherent_mixture_eigs(weights, gram):
    """Eigenvalues of sum_k c_k |a_k><a_k| from diag(c) G."""
    w = np.asarray(weights, dtype=float)
    sq = np.sqrt(np.clip(w, 0.0, None))
    h = sq[:, None] * gram * sq[None, :]
    ev = np.linalg.eigvalsh(h)
    if np.min(ev) < -1e-9:
        raise FloatingPointError(f"mixture eigenvalue {np.min(ev)} < 0")
    return np.clip(ev, 0.0, None)


def mixture_entropy(weights, components) -> float:
    """Entropy (bits) of a finite mixture of coherent or Gaussian states.

    ``components`` is either a sequence of complex coherent amplitudes
    (exact finite-rank eigenproblem through the overlap matrix) or a
    sequence of GaussianState objects (truncated Fock expansion and a
    dense eigendecomposition).
    """
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0.0) or abs(w.sum() - 1.0) > 1e-10:
        raise ValueError("weights must be a probability vector")
    comps = list(components)
    if all(isinstance(c, gs.GaussianState) for c in comps):
        nb = max(gs.mean_photons(c) / c.n_modes for c in comps)
        cut = max(10, int(np.ceil(4.0 * (nb + 1.0))))
        while True:
            mats = [gs.fock_density_matrix(c, cut).matrix for c in comps]
            rho = sum(wk * mk for wk, mk in zip(w, mats))
            defect = 1.0 - float(np.real(np.trace(rho)))
            if defect < 1e-9 or cut >= gs.FOCK_CAP:
                break
            cut *= 2
        ev = np.linalg.eigvalsh((rho + rho.conj().T) / 2.0)
        if np.min(ev) < -1e-9:
            raise FloatingPointError("negative eigenvalue in Gaussian mixture")
        ev = ev[ev > 0.0]
        return float(-np.sum(ev * np.log2(ev)))
    amps = np.asarray(comps, dtype=complex)
    ev = _coherent_mixture_eigs(w, coherent_overlap_matrix(amps))
    ev = ev[ev > 0.0]
    return float(-np.sum(ev * np.log2(ev)))


def qpsk_mixture_eigenvalues(energy):
    """Closed-form spectrum of the balanced QPSK coherent mixture."""
    a2 = energy
    e = math.exp(-a2)
    return np.array(
        [
            0.5 * e * (math.cosh(a2) + math.cos(a2)),
            0.5 * e * (math.cosh(a2) - math.cos(a2)),
            0.5 * e * (math.sinh(a2) + abs(math.sin(a2))),
            0.5 * e * (math.sinh(a2) - abs(math.sin(a2))),
        ]
    )


# ----------------------------------------------------------------------
# wiretap QPSK
# ----------------------------------------------------------------------

def _qpsk_amps(alpha2):
    k = np.arange(4)
    return math.sqrt(alpha2) * np.exp(1j * np.pi * (2 * k + 1) / 4)


def _entropy_batch(mats):
    ev = np.linalg.eigvalsh(mats)
    if np.min(ev) < -1e-9:
        raise FloatingPointError("negative eigenvalue in conditional mixture")
    ev = np.clip(ev, 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(ev > 0.0, -ev * np.log2(np.where(ev > 0, ev, 1.0)), 0.0)
    return terms.sum(axis=-1)


def _wiretap_pure(alpha2, channel, beta, n_nodes):
    t = channel.T
    amps = _qpsk_amps(alpha2)
    eve = math.sqrt(1.0 - t) * amps
    gram = coherent_overlap_matrix(eve)
    s_e = mixture_entropy(np.full(4, 0.25), eve)
    means = 2.0 * math.sqrt(t) * np.real(amps)
    var = 1.0
    sd = math.sqrt(var)
    xmax = np.max(np.abs(means)) + 8.0 * sd
    xs = np.linspace(0.0, xmax, n_nodes)
    pxk = np.exp(-((xs[None, :] - means[:, None]) ** 2) / (2.0 * var)) / math.sqrt(
        2.0 * math.pi * var
    )
    pb = 0.25 * pxk.sum(axis=0)
    wk = np.where(pb[None, :] > 0.0, 0.25 * pxk / pb[None, :], 0.25)
    sq = np.sqrt(wk.T)  # (nodes, 4)
    h = sq[:, :, None] * gram[None, :, :] * sq[:, None, :]
    s_cond = _entropy_batch(h)
    integrand = 2.0 * pb * s_cond  # symmetric in x_B
    weights = np.ones_like(xs)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    step = xs[1] - xs[0]
    s_eb = float(np.sum(weights * integrand) * step / 3.0)
    chi = s_e - s_eb
    return chi


def _wiretap_thermal(alpha2, channel, beta, n_nodes, cutoff=None):
    t, eps = channel.T, channel.eps
    v_eps = 1.0 + t * eps / (1.0 - t) if t < 1.0 else 1.0
    amps = _qpsk_amps(alpha2)
    tmsv = gs.make_state("tmsv", V=v_eps)
    cm0 = linalg.block_diag(np.eye(2), tmsv.cm)
    bs = gs.beam_splitter(t)
    s_full = linalg.block_diag(bs.x_mat, np.eye(2))
    cm = s_full @ cm0 @ s_full.T
    fms = []
    for a in amps:
        fm0 = np.array([2 * a.real, 2 * a.imag, 0, 0, 0, 0])
        fms.append(s_full @ fm0)
    fms = np.array(fms)  # (4, 6), modes (B, E1, E2)
    # Bob homodyne-q statistics
    var_b = cm[0, 0]
    means = fms[:, 0]
    # Eve marginal: modes (E1, E2)
    idx_e = np.array([2, 3, 4, 5])
    cm_e = cm[np.ix_(idx_e, idx_e)]
    fm_e = fms[:, idx_e]
    if cutoff is None:
        nb = max(
            gs.mean_photons(gs.GaussianState(f, cm_e, check=False)) / 2.0
            for f in fm_e
        )
        cutoff = max(6, int(np.ceil(4.0 * (nb + 1.0))) + 2)
    rho_e = gs._fock_batch(cm_e, fm_e, (cutoff, cutoff))
    rho_bar = rho_e.mean(axis=0)
    tail = 1.0 - float(np.real(np.trace(rho_bar)))
    if tail > 1e-7:
        warnings.warn(f"wiretap Fock tail {tail:.1e}", PrecisionWarning)
    s_e = float(_entropy_batch(rho_bar[None])[0])
    # conditional states given Bob's outcome
    state = gs.GaussianState(np.zeros(6), cm, check=False)
    cond = gs.condition_on_measurement(state, gs.HOMODYNE_Q, measured_mode=0)
    cm_cond = cond.cm
    gain = cm[np.ix_(idx_e, [0])][:, 0] / var_b  # sigma_EB * pinv
    xmax = np.max(np.abs(means)) + 8.0 * math.sqrt(var_b)
    xs = np.linspace(0.0, xmax, n_nodes)
    pxk = np.exp(-((xs[None, :] - means[:, None]) ** 2) / (2.0 * var_b)) / math.sqrt(
        2.0 * math.pi * var_b
    )
    pb = 0.25 * pxk.sum(axis=0)
    wk = np.where(pb[None, :] > 0.0, 0.25 * pxk / pb[None, :], 0.25)  # (4, nodes)
    # conditional FMs, batched over (node, k)
    cond_fms = (
        fm_e[None, :, :] + gain[None, None, :] * (xs[:, None, None] - means[None, :, None])
    )  # (nodes, 4, 4dims)
    flat = cond_fms.reshape(-1, 4)
    rho_cond = gs._fock_batch(cm_cond, flat, (cutoff, cutoff))
    dim = rho_cond.shape[-1]
    rho_cond = rho_cond.reshape(len(xs), 4, dim, dim)
    mix = np.einsum("kn,nkij->nij", wk, rho_cond)
    s_cond = _entropy_batch(mix)
    integrand = 2.0 * pb * s_cond
    weights = np.ones_like(xs)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    step = xs[1] - xs[0]
    s_eb = float(np.sum(weights * integrand) * step / 3.0)
    return s_e - s_eb


def wiretap_qpsk_kgr(channel: ChannelParams, beta, loss_model="thermal",
                     alpha2=None, alpha2_box=(5e-2, 2.0),
                     n_nodes=201) -> KgrResult:
    """QPSK key rate when Eve holds exactly the channel environment.

    loss_model='pure' treats the channel as pure loss (requires eps = 0)
    and evaluates Eve's entropies exactly through coherent-mixture
    spectra; 'thermal' runs the entangling-cloner dilation with Eve's
    two-mode Gaussian mixtures expanded in the Fock basis and the
    conditional entropy integrated over Bob's outcome by Simpson's rule.
    """
    if loss_model not in ("pure", "thermal"):
        raise ValueError("loss_model must be 'pure' or 'thermal'")
    if loss_model == "pure" and channel.eps != 0.0:
        raise ValueError("the pure-loss model requires zero excess noise")
    if n_nodes % 2 == 0:
        n_nodes += 1

    def parts(a2):
        i_ab = psk_mutual_information(4, a2, channel)
        if loss_model == "pure":
            chi = _wiretap_pure(a2, channel, beta, n_nodes)
        else:
            chi = _wiretap_thermal(a2, channel, beta, n_nodes)
        return i_ab, max(chi, 0.0)

    def neg_k(a2):
        i_ab, chi = parts(a2)
        return -(beta * i_ab - chi)

    if alpha2 is None:
        grid = np.exp(np.linspace(math.log(alpha2_box[0]), math.log(alpha2_box[1]), 9))
        a0 = grid[np.argmin([neg_k(x) for x in grid])]
        alpha2, _ = golden_min(
            neg_k, max(alpha2_box[0], a0 / 1.6), min(alpha2_box[1], a0 * 1.6), tol=2e-3
        )
    i_ab, chi = parts(alpha2)
    return KgrResult(
        beta * i_ab - chi, i_ab, chi, beta, params={"alpha2": float(alpha2)}
    )


# ----------------------------------------------------------------------
# tolerable excess noise
# ----------------------------------------------------------------------

def max_excess_noise(kgr_of_eps, lo=1e-4, hi=0.5, tol=1e-4):
    """Largest excess noise with positive optimized key rate.

    ``kgr_of_eps`` maps an excess-noise value to the optimized key rate.
    Returns 0 if even ``lo`` gives a non-positive rate; bisection
    otherwise (tolerance 1e-4 on eps).
    """
    if kgr_of_eps(lo) <= 0.0:
        return 0.0
    while kgr_of_eps(hi) > 0.0:
        hi *= 2.0
        if hi > 2.0:
            return hi
    return bisect_root(lambda e: kgr_of_eps(e), lo, hi, tol=tol)
