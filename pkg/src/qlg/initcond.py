"""Initial states built from straight Pade line vortices.

Amplitudes use the nearest periodic image of each vortex axis. Phases of a
multi-vortex layout come from a product of Jacobi theta_1 factors, which is
exactly periodic whenever the vortices parallel to each axis carry zero net
circulation and a zero circulation-weighted centroid (mod the box). The
built-in presets satisfy both conditions; other layouts get a warning.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from qlg.evolution import SimParams
from qlg.lattice import GridSpec, SpinorField

# (first, second) transverse coordinates for each vortex axis, right handed
TRANSVERSE = {"x": ("y", "z"), "y": ("z", "x"), "z": ("x", "y")}
_AXIS = {"x": 0, "y": 1, "z": 2}

DEFAULT_RESCALE = 1e-3


class PeriodicityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class VortexSpec:
    axis: str
    center: tuple[float, float]
    winding: int = 1
    sign: int = 1

    def __post_init__(self):
        if self.axis not in TRANSVERSE:
            raise ValueError(f"axis must be one of x, y, z; got {self.axis!r}")
        if self.winding not in (1, 2):
            raise ValueError(f"winding must be 1 or 2, got {self.winding}")
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != 2:
            raise ValueError("center needs two transverse coordinates")

    @property
    def charge(self) -> int:
        return self.winding * self.sign


@dataclass
class InitLayout:
    vortices: list[VortexSpec]
    amplitude_rescale: float = DEFAULT_RESCALE
    name: str = "custom"

    def __post_init__(self):
        if not self.vortices:
            raise ValueError("layout needs at least one vortex")
        if not self.amplitude_rescale > 0:
            raise ValueError("amplitude_rescale must be > 0")

    def check_box(self, grid: GridSpec) -> None:
        for v in self.vortices:
            u, w = TRANSVERSE[v.axis]
            lu, lw = grid.shape[_AXIS[u]], grid.shape[_AXIS[w]]
            if not (0 <= v.center[0] < lu and 0 <= v.center[1] < lw):
                raise ValueError(f"vortex center {v.center} outside the {lu}x{lw} cross-section")


def pade_profile(r, a: float, g: float):
    """Radial magnitude of the winding-1 Pade vortex; tends to 1/sqrt(g)."""
    ar2 = a * np.square(r)
    return np.sqrt(11 * ar2 * (12 + ar2) / (g * (384 + ar2 * (128 + 11 * ar2))))


def _coords(grid: GridSpec):
    return np.meshgrid(*(np.arange(n, dtype=float) for n in grid.shape), indexing="ij", sparse=True)


def _offsets(grid: GridSpec, spec: VortexSpec):
    """Nearest-image transverse offsets (du, dv) of every site from the axis."""
    coords = _coords(grid)
    out = []
    for name, c in zip(TRANSVERSE[spec.axis], spec.center):
        n = grid.shape[_AXIS[name]]
        d = coords[_AXIS[name]] - c
        out.append((d + n / 2) % n - n / 2)
    return out


def _profile(r, winding: int, params: SimParams):
    # normalized to 1 far away; winding 2 squares it so |phi| ~ r^2 at the core
    return (math.sqrt(params.g) * pade_profile(r, params.a, params.g)) ** winding


def line_vortex(grid: GridSpec, spec: VortexSpec, params: SimParams) -> np.ndarray:
    """Single straight vortex, nearest-image amplitude and polar phase.

    Far from the core ``|phi| -> 1/sqrt(g)``. The polar phase jumps where the
    nearest image changes, so a lone vortex is not periodic; use
    :func:`compose` for periodic states.
    """
    du, dv = _offsets(grid, spec)
    r = np.hypot(du, dv)
    theta = np.arctan2(dv, du)
    amp = _profile(r, spec.winding, params) / math.sqrt(params.g)
    return amp * np.exp(1j * spec.charge * theta)


def _theta1(u, q=math.exp(-math.pi), terms=8):
    # Jacobi theta_1 for a square period lattice; q^((n+1/2)^2) < 1e-80 at n = 8
    total = np.zeros_like(u)
    for n in range(terms):
        total += (-1) ** n * q ** ((n + 0.5) ** 2) * np.sin((2 * n + 1) * u)
    return 2 * total


def _periodic_phase(grid: GridSpec, spec: VortexSpec) -> np.ndarray:
    """exp(i charge * arg theta_1): a winding with zeros on all periodic images."""
    coords = _coords(grid)
    (u, lu), (v, lv) = (
        (coords[_AXIS[name]], grid.shape[_AXIS[name]]) for name in TRANSVERSE[spec.axis]
    )
    # map the cross-section onto a square period cell of side pi
    z = math.pi * ((u - spec.center[0]) / lu + 1j * (v - spec.center[1]) / lv)
    t = _theta1(z)
    mag = np.abs(t)
    unit = np.where(mag > 0, t / np.where(mag > 0, mag, 1), 1.0)
    if spec.sign < 0:
        unit = np.conj(unit)
    return unit**spec.winding


def _periodicity_defects(grid: GridSpec, layout: InitLayout) -> list[str]:
    problems = []
    for axis, (u, v) in TRANSVERSE.items():
        group = [s for s in layout.vortices if s.axis == axis]
        if not group:
            continue
        net = sum(s.charge for s in group)
        if net:
            problems.append(f"{axis}-vortices carry net winding {net}")
            continue
        lu = grid.shape[_AXIS[u]]
        moment = sum(s.charge * s.center[0] for s in group)
        if not math.isclose(moment / lu, round(moment / lu), abs_tol=1e-9):
            problems.append(f"{axis}-vortices have a nonzero winding-weighted {u} centroid")
    return problems


def compose(grid: GridSpec, layout: InitLayout, params: SimParams) -> SpinorField:
    """Product state of all vortices in ``layout`` split as alpha = beta = phi/2.

    |phi| is normalized so its maximum is ``amplitude_rescale / sqrt(g)``.
    """
    layout.check_box(grid)
    for msg in _periodicity_defects(grid, layout):
        warnings.warn(f"layout is not periodic: {msg}", PeriodicityWarning, stacklevel=2)
    amp = np.ones(grid.shape)
    phase = np.ones(grid.shape, dtype=np.complex128)
    for spec in layout.vortices:
        du, dv = _offsets(grid, spec)
        amp = amp * _profile(np.hypot(du, dv), spec.winding, params)
        phase = phase * _periodic_phase(grid, spec)
    amp *= layout.amplitude_rescale / (math.sqrt(params.g) * amp.max())
    return SpinorField.from_phi(amp * phase)


def preset(name: str, grid: GridSpec, winding: int = 1, amplitude_rescale: float = DEFAULT_RESCALE) -> InitLayout:
    """Built-in layouts: "twelve" (4 per axis) and "fortyeight" (16 per axis).

    Each axis family is a checkerboard of alternating circulation on a square
    transverse grid. Families are offset cyclically by a quarter spacing so
    no two vortex lines intersect, and cores sit at plaquette centres.
    """
    per_side = {"twelve": 2, "fortyeight": 4}.get(name)
    if per_side is None:
        raise ValueError(f"unknown preset {name!r}; expected 'twelve' or 'fortyeight'")
    vortices = []
    for axis, (u, v) in TRANSVERSE.items():
        lu, lv = grid.shape[_AXIS[u]], grid.shape[_AXIS[v]]
        for i in range(per_side):
            for j in range(per_side):
                cu = (i + 0.5) * lu / per_side + 0.5
                cv = j * lv / per_side + 0.5
                vortices.append(VortexSpec(axis, (cu % lu, cv % lv), winding, (-1) ** (i + j)))
    return InitLayout(vortices, amplitude_rescale, name)


def parse_layout(text: str, amplitude_rescale: float = DEFAULT_RESCALE) -> InitLayout:
    """Read "axis cx cy winding sign" lines; '#' starts a comment."""
    vortices = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ValueError(f"line {lineno}: expected 'axis cx cy winding sign', got {raw!r}")
        axis, cx, cy, n, s = parts
        try:
            vortices.append(VortexSpec(axis, (float(cx), float(cy)), int(n), int(s)))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return InitLayout(vortices, amplitude_rescale)


def format_layout(layout: InitLayout) -> str:
    lines = ["# axis cx cy winding sign"]
    for v in layout.vortices:
        lines.append(f"{v.axis} {v.center[0]:g} {v.center[1]:g} {v.winding} {v.sign:+d}")
    return "\n".join(lines) + "\n"


def load_layout(spec: str, grid: GridSpec, winding: int = 1, amplitude_rescale: float = DEFAULT_RESCALE) -> InitLayout:
    """Preset name or path to a layout file."""
    if spec in ("twelve", "fortyeight"):
        return preset(spec, grid, winding, amplitude_rescale)
    return parse_layout(Path(spec).read_text(), amplitude_rescale)


class UndefinedRatioError(ValueError):
    pass


@dataclass
class RecurrenceClass:
    int_over_kin: float
    qu_over_kin: float
    comp_over_incomp: float
    is_recurrence_class: bool = field(init=False)

    INT_LIMIT = 0.1
    COMP_LIMIT = 0.05

    def __post_init__(self):
        self.is_recurrence_class = (
            self.int_over_kin < self.INT_LIMIT and self.comp_over_incomp < self.COMP_LIMIT
        )

    def as_dict(self) -> dict:
        return {
            "E_int/E_kin": self.int_over_kin,
            "E_qu/E_kin": self.qu_over_kin,
            "E_comp/E_incomp": self.comp_over_incomp,
            "recurrence_class": self.is_recurrence_class,
        }


def recurrence_class_check(field: SpinorField, params: SimParams) -> RecurrenceClass:
    """Energy ratios deciding whether a state belongs to the short-recurrence class."""
    from qlg.diagnostics import energies

    e = energies(field, params)
    if e.E_kin <= 0 or e.E_kin_incomp <= 0:
        raise UndefinedRatioError("kinetic energy is zero; ratios are undefined")
    return RecurrenceClass(e.E_int / e.E_kin, e.E_qu / e.E_kin, e.E_kin_comp / e.E_kin_incomp)
