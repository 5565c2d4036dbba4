"""Fourier diagnostics: Helmholtz projection, shell spectra and power-law fits.

Conventions: the forward transform is unnormalized and the inverse carries
1/V, so for any field ``sum_x |w|^2 == sum_k |w_hat|^2 / V``. Shell spectra
use that normalization, which makes the shell sum reproduce the real-space
energy exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.fft as sfft
from scipy import stats

KINDS = ("incompressible_KE", "compressible_KE", "quantum", "total_KE")
CSV_COLUMNS = {
    "incompressible_KE": "E_incomp",
    "compressible_KE": "E_comp",
    "quantum": "E_quantum",
    "total_KE": "E_total_kin",
}


class WindowError(ValueError):
    """Too few usable shells inside a fit window."""


def forward_transform(f: np.ndarray, axes=(-3, -2, -1)) -> np.ndarray:
    return sfft.fftn(f, axes=axes)


def inverse_transform(fh: np.ndarray, axes=(-3, -2, -1)) -> np.ndarray:
    return sfft.ifftn(fh, axes=axes)


@dataclass(frozen=True)
class KGrid:
    """Integer wavevectors of a periodic grid and their shell indices."""

    shape: tuple[int, int, int]

    @property
    def components(self) -> list[np.ndarray]:
        # integer k, ordered like the FFT output; sparse broadcasting arrays
        ks = [np.fft.fftfreq(n, 1.0 / n) for n in self.shape]
        return np.meshgrid(*ks, indexing="ij", sparse=True)

    @property
    def k2(self) -> np.ndarray:
        kx, ky, kz = self.components
        return kx**2 + ky**2 + kz**2

    @property
    def shells(self) -> np.ndarray:
        return np.rint(np.sqrt(self.k2)).astype(np.int64)

    @property
    def n_shells(self) -> int:
        return int(self.shells.max()) + 1


def _project(wh: np.ndarray, kg: KGrid) -> tuple[np.ndarray, np.ndarray]:
    # a Nyquist index has no sign, so its k component is dropped; otherwise the
    # projector differs between a mode and its conjugate and the output is not real
    k = [np.where(np.abs(c) * 2 == n, 0.0, c) for c, n in zip(kg.components, kg.shape)]
    k2 = k[0] ** 2 + k[1] ** 2 + k[2] ** 2
    safe = np.where(k2 == 0, 1.0, k2)
    div = sum(k[i] * wh[i] for i in range(3)) / safe
    comp = np.stack([k[i] * div for i in range(3)])
    comp[:, k2 == 0] = 0  # the mean flow counts as incompressible
    return wh - comp, comp


def helmholtz_split(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a real 3-vector field (3, nx, ny, nz) into solenoidal and irrotational parts."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 4 or w.shape[0] != 3:
        raise ValueError(f"expected a (3, nx, ny, nz) field, got shape {w.shape}")
    wi, wc = _project(forward_transform(w), KGrid(w.shape[1:]))
    return inverse_transform(wi).real, inverse_transform(wc).real


@dataclass
class Spectrum:
    kind: str
    values: np.ndarray
    timestep: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown spectrum kind {self.kind!r}")
        self.values = np.asarray(self.values, dtype=float)

    @property
    def k(self) -> np.ndarray:
        return np.arange(len(self.values))

    def total(self) -> float:
        return float(self.values.sum())


def shell_spectrum(fh: np.ndarray, kind: str, timestep: int = 0) -> Spectrum:
    """Bin ``sum |fh|^2 / V`` by shell; ``fh`` is a k-space scalar or (3, ...) vector."""
    fh = np.asarray(fh)
    shape = fh.shape[-3:]
    kg = KGrid(shape)
    power = np.abs(fh) ** 2
    if power.ndim == 4:
        power = power.sum(axis=0)
    vol = shape[0] * shape[1] * shape[2]
    vals = np.bincount(kg.shells.ravel(), weights=power.ravel(), minlength=kg.n_shells) / vol
    return Spectrum(kind, vals, timestep)


def flow_spectra(w: np.ndarray, sqrt_rho_grad: np.ndarray, a: float, timestep: int = 0) -> dict[str, Spectrum]:
    """All four spectra from the density-weighted velocity and the gradient of sqrt(rho)."""
    wh = forward_transform(np.asarray(w, dtype=float))
    wi, wc = _project(wh, KGrid(wh.shape[1:]))
    qh = forward_transform((math.sqrt(2.0) / a) * np.asarray(sqrt_rho_grad, dtype=float))
    return {
        "incompressible_KE": shell_spectrum(wi, "incompressible_KE", timestep),
        "compressible_KE": shell_spectrum(wc, "compressible_KE", timestep),
        "quantum": shell_spectrum(qh, "quantum", timestep),
        "total_KE": shell_spectrum(wh, "total_KE", timestep),
    }


@dataclass(frozen=True)
class SpectralFit:
    k_lo: int
    k_hi: int
    alpha: float
    std_error: float
    n_points: int


def fit_exponent(spectrum: Spectrum, k_lo: int, k_hi: int) -> SpectralFit:
    """Least-squares slope of log10 E against log10 k over shells k_lo..k_hi.

    Returns ``alpha = -slope`` so that E ~ k^-alpha.
    """
    if not 0 < k_lo < k_hi:
        raise WindowError(f"window needs 0 < k_lo < k_hi, got {k_lo}:{k_hi}")
    k = spectrum.k
    sel = (k >= k_lo) & (k <= k_hi) & (spectrum.values > 0)
    n = int(sel.sum())
    if n < 3:
        raise WindowError(f"window {k_lo}:{k_hi} has {n} nonempty shells, need at least 3")
    res = stats.linregress(np.log10(k[sel]), np.log10(spectrum.values[sel]))
    return SpectralFit(k_lo, k_hi, -float(res.slope), float(res.stderr), n)


@dataclass(frozen=True)
class FitRow:
    kind: str
    k_lo: int
    k_hi: int
    alpha_mean: float
    alpha_std: float
    n_snapshots: int
    error: str = ""


def time_averaged_exponents(
    snapshots: Sequence[Mapping[str, Spectrum]],
    windows: Iterable[tuple[int, int]],
    kinds: Sequence[str] = KINDS,
) -> list[FitRow]:
    """Mean and population std of the fitted exponent per (kind, window).

    A window that cannot be fitted on some snapshot is skipped for that
    snapshot; if it fails on all of them the row holds NaN and the last error.
    """
    if not snapshots:
        raise ValueError("need at least one snapshot")
    rows = []
    windows = list(windows)
    for kind in kinds:
        for lo, hi in windows:
            alphas, err = [], ""
            for snap in snapshots:
                try:
                    alphas.append(fit_exponent(snap[kind], lo, hi).alpha)
                except WindowError as exc:
                    err = str(exc)
            if alphas:
                rows.append(FitRow(kind, lo, hi, float(np.mean(alphas)), float(np.std(alphas)), len(alphas)))
            else:
                rows.append(FitRow(kind, lo, hi, math.nan, math.nan, 0, err))
    return rows


def parse_windows(text: str) -> list[tuple[int, int]]:
    """Parse "4:12,14:24" into ordered, non-overlapping windows."""
    windows = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            lo, hi = (int(x) for x in part.split(":"))
        except ValueError:
            raise ValueError(f"bad window {part!r}; expected lo:hi") from None
        if not 0 < lo < hi:
            raise ValueError(f"window {part!r} needs 0 < lo < hi")
        if windows and lo <= windows[-1][1]:
            raise ValueError(f"window {part!r} overlaps or precedes {windows[-1][0]}:{windows[-1][1]}")
        windows.append((lo, hi))
    if not windows:
        raise ValueError("no fit windows given")
    return windows


def write_spectra_csv(spectra: Mapping[str, Spectrum], path: Path) -> None:
    from qlg.io import atomic_open

    n = max(len(s.values) for s in spectra.values())
    with atomic_open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["k"] + [CSV_COLUMNS[k] for k in KINDS])
        for k in range(n):
            out.writerow([k] + [repr(float(spectra[kind].values[k])) if k < len(spectra[kind].values) else 0.0 for kind in KINDS])


def write_fit_csv(rows: Sequence[FitRow], path: Path) -> None:
    from qlg.io import atomic_open

    with atomic_open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["kind", "k_lo", "k_hi", "alpha_mean", "alpha_std", "n_snapshots"])
        for r in rows:
            out.writerow([r.kind, r.k_lo, r.k_hi, r.alpha_mean, r.alpha_std, r.n_snapshots])
