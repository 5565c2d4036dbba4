"""Unitary QLG timestep.

One step is ``U = U1[Omega/2] U0[Omega/2]`` with

    U_gamma[Omega] = J_x^2 J_y^2 J_z^2 exp(-i eps^2 Omega)
    J_{x,gamma}    = S_{-dx,gamma} C S_{+dx,gamma} C

applied right to left, where ``C`` is the square root of swap and
``S_{+dx,gamma}`` pulls component gamma from the neighbour at ``x + dx``
(``stream(..., dir=-1, ...)`` in :mod:`qlg.lattice` terms). Lattice spacing is
one site; ``phase_scale`` plays the role of ``eps^2``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from qlg import _kernels
from qlg.lattice import SpinorField, axis_index

C_DIAG = (1 - 1j) / 2
C_OFF = (1 + 1j) / 2
COLLISION = np.array([[C_DIAG, C_OFF], [C_OFF, C_DIAG]])

# warn when the nonlinear phase per half step gets this large
PHASE_WARN = 0.1 * math.pi


class PhaseStepWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class SimParams:
    g: float = 1.0
    a: float = 0.04
    phase_scale: float = 0.1
    steps_per_output: int = 1

    def __post_init__(self):
        for name in ("g", "a", "phase_scale"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be a finite positive number, got {v}")
        if int(self.steps_per_output) != self.steps_per_output or self.steps_per_output < 1:
            raise ValueError("steps_per_output must be a positive integer")


def collide(field: SpinorField) -> SpinorField:
    """Apply the square-root-of-swap collision at every site."""
    return SpinorField(field.grid, _collide(field.data))


def _collide(d: np.ndarray) -> np.ndarray:
    a, b = d[0], d[1]
    return np.stack([C_DIAG * a + C_OFF * b, C_OFF * a + C_DIAG * b])


def _sweep(d: np.ndarray, ax: int, comp: int) -> np.ndarray:
    # C, pull from x+1, C, pull from x-1, fused into one stencil pass:
    # the streamed component sees only its own post-collision neighbour.
    a, b = d[0], d[1]
    a1 = C_DIAG * a + C_OFF * b
    b1 = C_OFF * a + C_DIAG * b
    if comp == 0:
        na = C_DIAG * a1 + C_OFF * np.roll(b1, 1, axis=ax)
        nb = C_OFF * np.roll(a1, -1, axis=ax) + C_DIAG * b1
    else:
        na = C_DIAG * a1 + C_OFF * np.roll(b1, -1, axis=ax)
        nb = C_OFF * np.roll(a1, 1, axis=ax) + C_DIAG * b1
    return np.stack([na, nb])


def interleaved_sweep(field: SpinorField, axis, component: int) -> SpinorField:
    """One application of J = S(-dx) C S(+dx) C on ``component`` along ``axis``."""
    if component not in (0, 1):
        raise ValueError(f"component must be 0 or 1, got {component}")
    return SpinorField(field.grid, _sweep(field.data, axis_index(axis), component))


def _omega(d: np.ndarray, g: float) -> np.ndarray:
    phi = d[0] + d[1]
    return g * (phi.real**2 + phi.imag**2) - 1.0


def _phase(d: np.ndarray, params: SimParams, fraction: float) -> np.ndarray:
    theta = (params.phase_scale * fraction) * _omega(d, params.g)
    _check_phase(float(np.max(np.abs(theta))))
    return d * np.exp(-1j * theta)


def _check_phase(peak: float) -> None:
    if peak > PHASE_WARN:
        warnings.warn(
            "nonlinear phase per application exceeds 0.1*pi; "
            "phase_scale * |Omega| should stay well below pi",
            PhaseStepWarning,
            stacklevel=4,
        )


def nonlinear_phase(field: SpinorField, params: SimParams, fraction: float = 1.0) -> SpinorField:
    """Multiply both components by exp(-i phase_scale fraction (g|phi|^2 - 1))."""
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    return SpinorField(field.grid, _phase(field.data, params, fraction))


def _reference_step(d: np.ndarray, params: SimParams) -> np.ndarray:
    """Pure numpy timestep, kept as a cross-check for the compiled path."""
    for comp in (0, 1):
        d = _phase(d, params, 0.5)
        for ax in (2, 1, 0):
            d = _sweep(d, ax, comp)
            d = _sweep(d, ax, comp)
    return d


def _step(d: np.ndarray, params: SimParams) -> np.ndarray:
    src = np.ascontiguousarray(d)
    cur = np.empty_like(src)
    nxt = np.empty_like(src)
    for comp in (0, 1):
        # the phase kernel is site-local, so cur -> cur is safe
        _check_phase(_kernels.phase(src, cur, 0.5 * params.phase_scale, params.g))
        for ax in (2, 1, 0):
            for _ in range(2):
                _kernels.sweep(cur, nxt, ax, comp)
                cur, nxt = nxt, cur
        src = cur
    return cur


def evolve_step(field: SpinorField, params: SimParams) -> SpinorField:
    """Advance one full symmetrized timestep.

    Omega is recomputed from the current state before each half phase.
    """
    return SpinorField(field.grid, _step(field.data, params))


Hook = Callable[[int, SpinorField], object]


def run(
    field: SpinorField,
    params: SimParams,
    n_steps: int,
    hook_every: int | None = None,
    hooks: Mapping[str, Hook] | None = None,
    *,
    start_step: int = 0,
    checkpoint_every: int = 0,
    checkpoint: Callable[[int, SpinorField], None] | None = None,
    stop: Callable[[int, Mapping[str, list]], bool] | None = None,
) -> tuple[SpinorField, dict[str, list]]:
    """Apply ``evolve_step`` ``n_steps`` times.

    Hooks are called with ``(timestep, field)`` at ``start_step``, at every
    timestep divisible by ``hook_every`` and at the final step, so a resumed
    run samples the same timesteps as an uninterrupted one. Each hook's
    results are collected as ``(timestep, value)`` pairs. ``checkpoint`` is
    called at timesteps divisible by ``checkpoint_every``; its exceptions
    propagate. ``stop`` may end the run early after a hook round.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    hook_every = hook_every or params.steps_per_output
    hooks = dict(hooks or {})
    outputs: dict[str, list] = {name: [] for name in hooks}

    def fire(t, d):
        snap = SpinorField(field.grid, d)
        for name, fn in hooks.items():
            outputs[name].append((t, fn(t, snap)))

    d = field.data
    end = start_step + n_steps
    t = start_step
    if hooks:
        fire(t, d)
    while t < end:
        d = _step(d, params)
        t += 1
        if hooks and (t % hook_every == 0 or t == end):
            fire(t, d)
            if stop is not None and stop(t, outputs):
                break
        if checkpoint is not None and checkpoint_every and t % checkpoint_every == 0:
            checkpoint(t, SpinorField(field.grid, d))
    if d is field.data:
        d = d.copy()
    return SpinorField(field.grid, d), outputs
