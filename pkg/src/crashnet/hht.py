"""Empirical mode decomposition and Hilbert spectral energy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ContractError, NormalizationError, UndefinedPhaseError

N_FREQ_BINS = 64


@dataclass(frozen=True)
class SiftConfig:
    sd_threshold: float = 0.2
    max_sifts: int = 50


@dataclass(frozen=True)
class ImfSet:
    imfs: tuple[np.ndarray, ...]
    residue: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return np.sum(self.imfs, axis=0) + self.residue if self.imfs else self.residue.copy()


@dataclass(frozen=True)
class HilbertSpectrum:
    amplitude: np.ndarray  # (n_imfs, T)
    phase: np.ndarray
    frequency: np.ndarray  # radians per sample
    ie: np.ndarray
    ie_n: np.ndarray

    def grid(self, n_bins: int = N_FREQ_BINS):
        """Long-form ``(t, freq_bin, amplitude)`` rows over ``[0, pi]``.

        Samples with frequency outside ``[0, pi]`` are left out; amplitudes of
        IMFs landing in the same cell are summed.
        """
        cells: dict[tuple[int, int], float] = {}
        n_imf, n_t = self.amplitude.shape
        for k in range(n_imf):
            w = self.frequency[k]
            ok = (w >= 0) & (w <= np.pi)
            b = np.minimum((w[ok] / np.pi * n_bins).astype(int), n_bins - 1)
            for t, bin_, a in zip(np.flatnonzero(ok), b, self.amplitude[k][ok]):
                cells[(int(t), int(bin_))] = cells.get((int(t), int(bin_)), 0.0) + float(a)
        return [(t, b, cells[(t, b)]) for t, b in sorted(cells)]


def local_extrema(x):
    """Indices of strict interior maxima and minima."""
    d = np.diff(x)
    maxima = np.flatnonzero((d[:-1] > 0) & (d[1:] < 0)) + 1
    minima = np.flatnonzero((d[:-1] < 0) & (d[1:] > 0)) + 1
    return maxima, minima


def zero_crossings(x) -> int:
    s = np.sign(x)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def is_imf_count_ok(x) -> bool:
    mx, mn = local_extrema(x)
    return abs(mx.size + mn.size - zero_crossings(x)) <= 1


def _envelope(idx, x):
    """Natural cubic spline through ``x[idx]`` with two extrema mirrored at each end."""
    n = x.size
    left = idx[:2]
    right = idx[-2:]
    t = np.concatenate([-left[::-1], idx, 2 * (n - 1) - right[::-1]])
    v = np.concatenate([x[left[::-1]], x[idx], x[right[::-1]]])
    t, keep = np.unique(t, return_index=True)
    return CubicSpline(t, v[keep], bc_type="natural")(np.arange(n))


def _sift(x, cfg):
    h = x.copy()
    for _ in range(cfg.max_sifts):
        mx, mn = local_extrema(h)
        if mx.size < 2 or mn.size < 2:
            break
        mean = 0.5 * (_envelope(mx, h) + _envelope(mn, h))
        new = h - mean
        denom = float(np.sum(h ** 2))
        sd = float(np.sum((h - new) ** 2)) / denom if denom > 0 else 0.0
        h = new
        if sd < cfg.sd_threshold and is_imf_count_ok(h):
            break
    return h


def emd(signal, max_imfs: int = 10, sift_cfg: SiftConfig | None = None) -> ImfSet:
    """Decompose ``signal`` into IMFs plus a residue.

    Extraction stops when the residue has fewer than three extrema or
    ``max_imfs`` components exist. The residue is carried as a running
    subtraction so that ``sum(imfs) + residue`` rebuilds the input.
    """
    cfg = sift_cfg or SiftConfig()
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1 or x.size < 8:
        raise ContractError("emd needs a 1-D series of length >= 8")
    if not np.all(np.isfinite(x)):
        raise ContractError("emd input must be finite")
    imfs = []
    residue = x.copy()
    while len(imfs) < max_imfs:
        mx, mn = local_extrema(residue)
        if mx.size + mn.size < 3 or mx.size < 2 or mn.size < 2:
            break
        imf = _sift(residue, cfg)
        imfs.append(imf)
        residue = residue - imf
    return ImfSet(tuple(imfs), residue)


def analytic_signal(x) -> np.ndarray:
    """Signal plus ``1j`` times its discrete Hilbert transform (one-sided FFT)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if x.ndim != 1 or n < 4:
        raise ContractError("analytic_signal needs a 1-D series of length >= 4")
    spec = np.fft.fft(x)
    h = np.zeros(n)
    h[0] = 1.0
    if n % 2 == 0:
        h[n // 2] = 1.0
        h[1:n // 2] = 2.0
    else:
        h[1:(n + 1) // 2] = 2.0
    hilb = np.fft.ifft(spec * h).imag
    return x + 1j * hilb


def instantaneous_frequency(analytic) -> np.ndarray:
    """Derivative of the unwrapped phase in radians per sample."""
    z = np.asarray(analytic, dtype=complex)
    zero = np.flatnonzero(np.abs(z) == 0)
    if zero.size:
        raise UndefinedPhaseError(int(zero[0]))
    return np.gradient(np.unwrap(np.angle(z)))


def hilbert_energy(imfs: ImfSet) -> HilbertSpectrum:
    if not imfs.imfs:
        raise ContractError("hilbert_energy needs at least one IMF")
    analytic = [analytic_signal(imf) for imf in imfs.imfs]
    amp = np.array([np.abs(z) for z in analytic])
    ie = np.sum(amp ** 2, axis=0)
    peak = ie.max()
    if not peak > 0:
        raise NormalizationError("instantaneous energy is identically zero")
    phase = np.array([np.unwrap(np.angle(z)) for z in analytic])
    freq = np.array([instantaneous_frequency(z) for z in analytic])
    return HilbertSpectrum(amp, phase, freq, ie, ie / peak)
