"""Arnold cat map (x, y) -> (2x + y, x + y) mod N on square pixel images.

Images are indexed ``img[x, y]``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

CAT = ((2, 1), (1, 1))


def _coords(n: int):
    return np.meshgrid(np.arange(n), np.arange(n), indexing="ij")


def _check(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim < 2 or img.shape[0] != img.shape[1] or img.shape[0] < 1:
        raise ValueError(f"expected a square N x N image, got shape {img.shape}")
    return img


def cat_step(img: np.ndarray) -> np.ndarray:
    """Move the pixel at (x, y) to ((2x + y) mod N, (x + y) mod N)."""
    img = _check(img)
    n = img.shape[0]
    x, y = _coords(n)
    out = np.empty_like(img)
    out[(2 * x + y) % n, (x + y) % n] = img
    return out


def cat_inverse(img: np.ndarray) -> np.ndarray:
    """Inverse map (x, y) -> ((x - y) mod N, (2y - x) mod N)."""
    img = _check(img)
    n = img.shape[0]
    x, y = _coords(n)
    out = np.empty_like(img)
    out[(x - y) % n, (2 * y - x) % n] = img
    return out


def _matmul(a, b, n):
    return (
        ((a[0][0] * b[0][0] + a[0][1] * b[1][0]) % n, (a[0][0] * b[0][1] + a[0][1] * b[1][1]) % n),
        ((a[1][0] * b[0][0] + a[1][1] * b[1][0]) % n, (a[1][0] * b[0][1] + a[1][1] * b[1][1]) % n),
    )


def matrix_power(t: int, n: int):
    """CAT^t mod n by repeated squaring."""
    result = ((1 % n, 0), (0, 1 % n))
    base = tuple(tuple(v % n for v in row) for row in CAT)
    while t:
        if t & 1:
            result = _matmul(result, base, n)
        base = _matmul(base, base, n)
        t >>= 1
    return result


def cat_period(n: int) -> tuple[int, bool]:
    """Order of the cat matrix mod ``n`` and whether its half power is -I.

    The order never exceeds 3n, so a direct walk over powers terminates fast.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"N must be a positive integer, got {n}")
    ident = ((1 % n, 0), (0, 1 % n))
    base = tuple(tuple(v % n for v in row) for row in CAT)
    m, t = base, 1
    while m != ident:
        m = _matmul(m, base, n)
        t += 1
    minus = (((-1) % n, 0), (0, (-1) % n))
    half = t % 2 == 0 and matrix_power(t // 2, n) == minus
    return t, bool(half)


def image_period(img: np.ndarray, limit: int | None = None) -> int:
    """Smallest t >= 1 with cat_step^t(img) == img, by iteration."""
    img = _check(img)
    limit = limit or 3 * img.shape[0] + 1
    cur = cat_step(img)
    t = 1
    while not np.array_equal(cur, img):
        if t >= limit:
            raise RuntimeError(f"no period found within {limit} steps")
        cur = cat_step(cur)
        t += 1
    return t


def point_invert(img: np.ndarray) -> np.ndarray:
    """(x, y) -> (-x mod N, -y mod N)."""
    img = _check(img)
    return np.roll(np.flip(img, axis=(0, 1)), 1, axis=(0, 1))


def iterate(img: np.ndarray, steps: int) -> np.ndarray:
    if steps < 0:
        raise ValueError("steps must be >= 0")
    for _ in range(steps):
        img = cat_step(img)
    return img


def sample_image(n: int) -> np.ndarray:
    """Deterministic 8-bit image with a recognisable, asymmetric motif."""
    x, y = _coords(n)
    return ((37 * x + 11 * y * y + (x * y) // 3) % 256).astype(np.uint8)


def read_pgm(path) -> np.ndarray:
    with Image.open(path) as im:
        if im.format != "PPM" or im.mode not in ("L", "I;16", "I;16B"):
            raise ValueError(f"{path}: expected a binary greyscale PGM (P5)")
        arr = np.asarray(im)
    # PIL returns rows (y) first; we index img[x, y]
    return _check(arr.T.copy())


def write_pgm(img: np.ndarray, path) -> None:
    from qlg.io import atomic_open

    img = _check(img)
    if img.dtype != np.uint8:
        raise ValueError("PGM output needs uint8 pixels")
    with atomic_open(Path(path), "wb") as fh:
        Image.fromarray(np.ascontiguousarray(img.T), mode="L").save(fh, format="PPM")
