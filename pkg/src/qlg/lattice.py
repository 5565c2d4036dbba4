"""Periodic cubic lattice and two-spinor field storage."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

AXES = {"x": 0, "y": 1, "z": 2}


def axis_index(axis) -> int:
    """Accept 0/1/2 or 'x'/'y'/'z'."""
    if isinstance(axis, str):
        try:
            return AXES[axis]
        except KeyError:
            raise ValueError(f"unknown axis {axis!r}") from None
    axis = int(axis)
    if axis not in (0, 1, 2):
        raise ValueError(f"axis must be 0, 1 or 2, got {axis}")
    return axis


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    nz: int

    def __post_init__(self):
        for name in ("nx", "ny", "nz"):
            n = getattr(self, name)
            if int(n) != n or n < 4:
                raise ValueError(f"{name} must be an integer >= 4, got {n}")

    @classmethod
    def cube(cls, n: int) -> "GridSpec":
        return cls(n, n, n)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def sites(self) -> int:
        return self.nx * self.ny * self.nz

    def wrap(self, i, j, k) -> tuple[int, int, int]:
        return (i % self.nx, j % self.ny, k % self.nz)


class SpinorField:
    """Complex pair (alpha, beta) per site of a periodic lattice.

    ``data`` has shape ``(2, nx, ny, nz)``: component-major, z fastest within
    a component. The snapshot format interleaves the components per site;
    :meth:`interleaved` and :meth:`from_interleaved` convert.
    """

    __slots__ = ("grid", "data")

    def __init__(self, grid: GridSpec, data: np.ndarray):
        data = np.asarray(data, dtype=np.complex128)
        if data.shape != (2, *grid.shape):
            raise ValueError(f"data shape {data.shape} does not match grid {grid.shape}")
        self.grid = grid
        self.data = data

    @classmethod
    def from_components(cls, alpha, beta) -> "SpinorField":
        alpha = np.asarray(alpha, dtype=np.complex128)
        grid = GridSpec(*alpha.shape)
        return cls(grid, np.stack([alpha, np.asarray(beta, dtype=np.complex128)]))

    @classmethod
    def from_phi(cls, phi) -> "SpinorField":
        """Split a scalar wave function evenly, alpha = beta = phi / 2."""
        half = np.asarray(phi, dtype=np.complex128) / 2
        return cls.from_components(half, half.copy())

    @classmethod
    def random(cls, grid: GridSpec, rng=None) -> "SpinorField":
        rng = np.random.default_rng(rng)
        shape = (2, *grid.shape)
        return cls(grid, rng.standard_normal(shape) + 1j * rng.standard_normal(shape))

    @classmethod
    def from_interleaved(cls, grid: GridSpec, flat: np.ndarray) -> "SpinorField":
        site = np.asarray(flat, dtype=np.complex128).reshape(*grid.shape, 2)
        return cls(grid, np.moveaxis(site, -1, 0).copy())

    def interleaved(self) -> np.ndarray:
        """Per-site (alpha, beta) pairs in row-major site order."""
        return np.ascontiguousarray(np.moveaxis(self.data, 0, -1))

    @property
    def alpha(self) -> np.ndarray:
        return self.data[0]

    @property
    def beta(self) -> np.ndarray:
        return self.data[1]

    def norm2(self) -> float:
        """Global spinor norm, sum of |alpha|^2 + |beta|^2."""
        return float(np.sum(self.data.real**2 + self.data.imag**2))

    def copy(self) -> "SpinorField":
        return SpinorField(self.grid, self.data.copy())

    def __eq__(self, other):
        if not isinstance(other, SpinorField):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.data, other.data)

    def __repr__(self):
        return f"SpinorField(grid={self.grid.shape}, norm2={self.norm2():.6g})"


def project_phi(field: SpinorField) -> np.ndarray:
    """Scalar wave function phi = alpha + beta (a fresh array)."""
    return field.data[0] + field.data[1]


def stream(field: SpinorField, axis, dir: int, component: int) -> SpinorField:
    """Move one component by one site along ``axis`` in direction ``dir``.

    A value at site x ends up at x + dir. Pure permutation with periodic wrap;
    the other component is copied untouched.
    """
    if dir not in (1, -1):
        raise ValueError(f"dir must be +1 or -1, got {dir}")
    if component not in (0, 1):
        raise ValueError(f"component must be 0 or 1, got {component}")
    ax = axis_index(axis)
    out = field.data.copy()
    out[component] = np.roll(field.data[component], dir, axis=ax)
    return SpinorField(field.grid, out)
