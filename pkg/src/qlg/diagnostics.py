"""Madelung fields, energy budget, vortex topology and recurrence measures.

The phase convention is phi = sqrt(rho) exp(i theta / 2) with v = grad theta,
so the density-weighted velocity is w = sqrt(rho) v = 2 Im(conj(phi) grad phi)
/ sqrt(rho). A unit winding of arg(phi) is a 4 pi circulation of theta;
:func:`winding_number` reports windings of arg(phi).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from qlg.evolution import SimParams
from qlg.lattice import SpinorField, project_phi
from qlg.spectral import helmholtz_split

DEFAULT_FLOOR = 1e-12  # relative to max rho


def _phi(x) -> np.ndarray:
    return project_phi(x) if isinstance(x, SpinorField) else np.asarray(x)


def _grad(f: np.ndarray) -> np.ndarray:
    """Second-order centered gradient with periodic wrap, shape (3, ...)."""
    return np.stack([(np.roll(f, -1, ax) - np.roll(f, 1, ax)) / 2 for ax in range(3)])


@dataclass
class FlowFields:
    rho: np.ndarray
    w: np.ndarray
    sqrt_rho_grad: np.ndarray


def madelung(phi, density_floor: float | None = None) -> FlowFields:
    """Density, density-weighted velocity and grad sqrt(rho) of ``phi``.

    ``density_floor`` defaults to 1e-12 of the peak density; it regularizes
    the division at vortex cores, where w tends to zero.
    """
    phi = _phi(phi)
    rho = phi.real**2 + phi.imag**2
    if density_floor is None:
        density_floor = DEFAULT_FLOOR * float(rho.max()) or DEFAULT_FLOOR
    if not density_floor > 0:
        raise ValueError("density_floor must be > 0")
    sq = np.sqrt(rho)
    current = np.imag(np.conj(phi)[None] * _grad(phi))
    w = 2 * current / np.maximum(sq, math.sqrt(density_floor))
    return FlowFields(rho, w, _grad(sq))


@dataclass
class EnergyBudget:
    E_kin: float
    E_qu: float
    E_int: float
    E_kin_incomp: float
    E_kin_comp: float
    timestep: int = 0

    @property
    def E_tot(self) -> float:
        return self.E_kin + self.E_qu + self.E_int


def energies(field, params: SimParams, timestep: int = 0, flow: FlowFields | None = None) -> EnergyBudget:
    """Lattice sums of E_kin = sum w^2, E_qu = (2/a^2) sum |grad sqrt rho|^2, E_int = (g/a^2) sum rho^2."""
    flow = flow or madelung(_phi(field))
    a2 = params.a**2
    wi, wc = helmholtz_split(flow.w)
    return EnergyBudget(
        E_kin=float(np.sum(flow.w**2)),
        E_qu=2.0 / a2 * float(np.sum(flow.sqrt_rho_grad**2)),
        E_int=params.g / a2 * float(np.sum(flow.rho**2)),
        E_kin_incomp=float(np.sum(wi**2)),
        E_kin_comp=float(np.sum(wc**2)),
        timestep=timestep,
    )


class IndeterminateWindingError(ValueError):
    pass


def winding_number(phi, loop: Sequence[tuple[int, int, int]], density_floor: float | None = None) -> int:
    """Net winding of arg(phi) around a closed loop of neighbouring sites.

    The loop is given without repeating its first site at the end.
    """
    phi = _phi(phi)
    if len(loop) < 3:
        raise ValueError("loop needs at least 3 sites")
    shape = np.array(phi.shape)
    idx = np.array(loop) % shape
    steps = (np.roll(idx, -1, axis=0) - idx) % shape
    dist = np.minimum(steps, shape - steps).sum(axis=1)
    if np.any(dist != 1):
        raise ValueError("consecutive loop sites must be nearest neighbours")
    vals = phi[tuple(idx.T)]
    rho = np.abs(vals) ** 2
    if density_floor is None:
        density_floor = DEFAULT_FLOOR * float(np.max(np.abs(phi)) ** 2)
    if np.any(rho < density_floor) or not np.all(rho > 0):
        raise IndeterminateWindingError("loop passes through a vortex core; winding is undefined")
    dtheta = np.angle(np.roll(vals, -1) / vals)
    return int(round(dtheta.sum() / (2 * math.pi)))


def plaquette(axis: int, corner: tuple[int, int, int]) -> list[tuple[int, int, int]]:
    """Counter-clockwise unit loop normal to ``axis`` starting at ``corner``."""
    u, v = [(1, 2), (2, 0), (0, 1)][axis]
    eu = np.eye(3, dtype=int)[u]
    ev = np.eye(3, dtype=int)[v]
    c = np.array(corner)
    return [tuple(p) for p in (c, c + eu, c + eu + ev, c + ev)]


@dataclass
class VortexMask:
    threshold: float
    mask: np.ndarray
    n_components: int

    @property
    def voxels(self) -> int:
        return int(self.mask.sum())


def _periodic_label_count(mask: np.ndarray) -> int:
    labels, n = ndimage.label(mask)  # 6-connectivity by default
    if n == 0:
        return 0
    edges = []
    for ax in range(mask.ndim):
        first = np.take(labels, 0, axis=ax)
        last = np.take(labels, -1, axis=ax)
        both = (first > 0) & (last > 0)
        edges.append(np.stack([first[both], last[both]]))
    e = np.concatenate(edges, axis=1) - 1
    graph = coo_matrix((np.ones(e.shape[1]), (e[0], e[1])), shape=(n, n))
    return int(connected_components(graph, directed=False)[0])


def vortex_core_mask(phi, c: float) -> VortexMask:
    """Sites with |phi| < c |phi|_max and their periodic 6-connected component count."""
    if not 0 < c < 1:
        raise ValueError("c must lie in (0, 1)")
    mag = np.abs(_phi(phi))
    mask = mag < c * mag.max()
    return VortexMask(c, mask, _periodic_label_count(mask))


def point_inversion(x):
    """Map site r to (-r mod L) along every axis; accepts arrays or spinor fields."""
    if isinstance(x, SpinorField):
        return SpinorField(x.grid, np.stack([point_inversion(c) for c in x.data]))
    x = np.asarray(x)
    return np.roll(np.flip(x, axis=(0, 1, 2)), 1, axis=(0, 1, 2))


def fidelity(phi_a, phi_b) -> float:
    """|<a, b>| / (|a| |b|), in [0, 1] and blind to global phase."""
    a, b = _phi(phi_a), _phi(phi_b)
    if a.shape != b.shape:
        raise ValueError(f"grid mismatch {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("fidelity of a zero-norm field is undefined")
    return float(min(1.0, abs(np.vdot(a, b)) / (na * nb)))


def coherence_length(params: SimParams, rho0: float) -> float:
    if not rho0 > 0:
        raise ValueError("rho0 must be > 0")
    return 1.0 / math.sqrt(params.a * params.g * rho0)


@dataclass
class RecurrenceTrace:
    timesteps: list[int] = dc_field(default_factory=list)
    budgets: list[EnergyBudget] = dc_field(default_factory=list)
    fidelity: list[float] = dc_field(default_factory=list)
    fidelity_inversion: list[float] = dc_field(default_factory=list)
    core_voxels: list[int] = dc_field(default_factory=list)

    COLUMNS = (
        "timestep", "E_kin", "E_qu", "E_int", "E_tot", "E_kin_incomp", "E_kin_comp",
        "fidelity", "fidelity_inversion", "core_voxels",
    )

    def append(self, t, budget, f, f_inv, voxels):
        if self.timesteps and t <= self.timesteps[-1]:
            raise ValueError("samples must be strictly increasing in time")
        self.timesteps.append(int(t))
        self.budgets.append(budget)
        self.fidelity.append(float(f))
        self.fidelity_inversion.append(float(f_inv))
        self.core_voxels.append(int(voxels))

    def rows(self):
        for t, e, f, fi, v in zip(self.timesteps, self.budgets, self.fidelity, self.fidelity_inversion, self.core_voxels):
            yield [t, e.E_kin, e.E_qu, e.E_int, e.E_tot, e.E_kin_incomp, e.E_kin_comp, f, fi, v]

    def peaks(self, threshold: float = 0.9) -> list[tuple[int, float]]:
        return detect_recurrence(self, threshold)

    def energy_drift(self) -> float:
        e = np.array([b.E_tot for b in self.budgets])
        return float(np.max(np.abs(e - e[0])) / abs(e[0]))

    def write_csv(self, path: Path) -> None:
        from qlg.io import atomic_open

        with atomic_open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(self.COLUMNS)
            for row in self.rows():
                out.writerow([repr(x) if isinstance(x, float) else x for x in row])

    @classmethod
    def read_csv(cls, path: Path) -> "RecurrenceTrace":
        trace = cls()
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader, ()))
            if header != cls.COLUMNS:
                raise ValueError(f"{path}: unexpected trace header {header}")
            for row in reader:
                t, ek, eq, ei, _, einc, ecomp, f, fi, v = row
                budget = EnergyBudget(float(ek), float(eq), float(ei), float(einc), float(ecomp), int(t))
                trace.append(int(t), budget, float(f), float(fi), int(v))
        return trace


class TraceRecorder:
    """Run hook that appends one trace sample per call, measured against the initial state."""

    def __init__(self, initial: SpinorField, params: SimParams, core_fraction: float = 0.13, trace=None):
        self.params = params
        self.core_fraction = core_fraction
        self.phi0 = project_phi(initial)
        self.phi0_inv = point_inversion(self.phi0)
        self.trace = trace if trace is not None else RecurrenceTrace()

    def __call__(self, t: int, field: SpinorField) -> float:
        phi = project_phi(field)
        f = fidelity(self.phi0, phi)
        if self.trace.timesteps and t == self.trace.timesteps[-1]:
            return f  # already sampled before a resume
        self.trace.append(
            t,
            energies(phi, self.params, t),
            f,
            fidelity(self.phi0_inv, phi),
            vortex_core_mask(phi, self.core_fraction).voxels,
        )
        return f


def detect_recurrence(trace, threshold: float = 0.9) -> list[tuple[int, float]]:
    """Interior local maxima of the fidelity above ``threshold``, excluding t = 0.

    ``trace`` is a :class:`RecurrenceTrace` or a ``(timesteps, fidelity)`` pair.
    """
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    if isinstance(trace, RecurrenceTrace):
        t, f = trace.timesteps, trace.fidelity
    else:
        t, f = trace
    t, f = np.asarray(t), np.asarray(f, dtype=float)
    if len(t) < 3:
        raise ValueError("need at least 3 samples")
    peaks = []
    for i in range(1, len(f) - 1):
        if t[i] != 0 and f[i] > threshold and f[i] >= f[i - 1] and f[i] > f[i + 1]:
            peaks.append((int(t[i]), float(f[i])))
    return peaks


def diffusion_scaling_check(pairs: Sequence[tuple[float, float]]) -> list[float]:
    """Measured over expected recurrence-time ratio for consecutive (L, T) pairs.

    Diffusion ordering predicts T(L2)/T(L1) = (L2/L1)^2, so 1.0 is perfect scaling.
    """
    if len(pairs) < 2:
        raise ValueError("need at least two (L, T) pairs")
    out = []
    for (l1, t1), (l2, t2) in zip(pairs, pairs[1:]):
        out.append((t2 / t1) / (l2 / l1) ** 2)
    return out
