"""Truncated Fourier-matrix route to Hill periodic spectra.

Independent of the shooting solver: the periodic spectrum of
-d^2/dx^2 + q on the unit period is the union of the Bloch spectra at
phases 0 and pi, and each Bloch problem becomes a dense Hermitian matrix in
the e^{i pi (2k + nu) x} basis.  Nothing here touches ODE integration; this
module is the oracle side of the dual-route check.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import eigh


def fourier_coefficients(q_samples: np.ndarray) -> np.ndarray:
    """Coefficients c_m of q = sum_m c_m e^{2 pi i m x} from uniform samples."""
    qs = np.asarray(q_samples, dtype=float)
    return np.fft.fft(qs) / len(qs)


def _bloch_matrix(chat, nu: int, dim: int) -> np.ndarray:
    n = len(chat)
    ks = np.arange(-dim // 2, dim - dim // 2)
    H = np.zeros((dim, dim), dtype=complex)
    for a, k in enumerate(ks):
        H[a, a] = (np.pi * (2 * k + nu)) ** 2 + chat[0]
        for b in range(a + 1, dim):
            m = (k - ks[b]) % n
            H[a, b] += chat[m]
            H[b, a] += np.conj(chat[m])
    return H


def periodic_spectrum_fourier(q_samples, n_pairs: int, dim: int = 64) -> np.ndarray:
    """First 2*n_pairs+1 periodic eigenvalues lam_0 <= ... <= lam_{2n}.

    Pairs with odd index i are antiperiodic (Bloch phase pi), even-i pairs
    periodic (phase 0); lam_0 is the lowest periodic eigenvalue.
    """
    chat = fourier_coefficients(q_samples)
    spec = {nu: np.sort(eigh(_bloch_matrix(chat, nu, dim),
                             eigvals_only=True).real)
            for nu in (0, 1)}
    lams = [spec[0][0]]
    ia, ip = 0, 1
    for i in range(1, n_pairs + 1):
        if i % 2 == 1:
            lams += [spec[1][ia], spec[1][ia + 1]]
            ia += 2
        else:
            lams += [spec[0][ip], spec[0][ip + 1]]
            ip += 2
    return np.array(lams)


def cos_family_spectrum(L: float, T: float, n_pairs: int, dim: int = 64):
    """Periodic spectrum (physical scale) of cos(x/T) on an interval of
    length L, periodized.

    The unit-period reduction is q_hat(u) = L^2 cos((x0 + L u)/T); its
    Fourier coefficients have the closed form of a frequency-shifted
    exponential, so no sampling error enters.  Returns (lams, eigvecs_info)
    where eigvecs_info supports eigenfunction evaluation.
    """
    # c_m = (L^2/2) * [E(f - m) + E(-f - m)],  E(g) = (e^{2 pi i g}-1)/(2 pi i g)
    f = L / (2.0 * np.pi * T)

    def E(g):
        g = np.asarray(g, dtype=float)
        out = np.ones_like(g, dtype=complex)
        nz = np.abs(g) > 1e-12
        out[nz] = (np.exp(2j * np.pi * g[nz]) - 1.0) / (2j * np.pi * g[nz])
        return out

    dimq = 4 * dim
    ms = np.arange(-dimq // 2, dimq - dimq // 2)
    cm = 0.5 * L * L * (E(f - ms) + E(-f - ms))
    chat = np.zeros(dimq, dtype=complex)
    chat[ms % dimq] = cm
    spec = {}
    vecs = {}
    for nu in (0, 1):
        H = _bloch_matrix(chat, nu, dim)
        w, v = eigh(H)
        order = np.argsort(w.real)
        spec[nu] = w.real[order]
        vecs[nu] = v[:, order]
    lams = [spec[0][0]]
    ia, ip = 0, 1
    which = [(0, 0)]
    for i in range(1, n_pairs + 1):
        if i % 2 == 1:
            lams += [spec[1][ia], spec[1][ia + 1]]
            which += [(1, ia), (1, ia + 1)]
            ia += 2
        else:
            lams += [spec[0][ip], spec[0][ip + 1]]
            which += [(0, ip), (0, ip + 1)]
            ip += 2
    info = {"vecs": vecs, "which": which, "dim": dim}
    return np.array(lams) / (L * L), info


def eigenfunction_samples(info, index: int, xs: np.ndarray) -> np.ndarray:
    """Real eigenfunction of the unit-period problem at points xs in [0,1]."""
    nu, col = info["which"][index]
    dim = info["dim"]
    ks = np.arange(-dim // 2, dim - dim // 2)
    v = info["vecs"][nu][:, col]
    phases = np.exp(1j * np.pi * np.outer(xs, 2 * ks + nu))
    vals = phases @ v
    # rotate to the real axis (eigenfunctions of a real potential are real
    # up to a global phase within each Bloch sector)
    j = np.argmax(np.abs(vals))
    vals = vals * np.exp(-1j * np.angle(vals[j]))
    return vals.real
