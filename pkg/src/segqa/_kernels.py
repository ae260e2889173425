"""Hot per-pixel kernels: connected-component labeling and tolerance flood fill.

Both kernels carry a numba ``@njit`` implementation and a pure-numpy
fallback. The numpy path is selected when ``SEGQA_NO_NUMBA=1`` is set in the
environment (or when numba is not importable). Both paths compute identical
results; ``benchmarks/bench_kernels.py`` compares their speed.
"""

import os

import numpy as np

from .errors import ContractViolation

try:
    from numba import njit

    _NUMBA_IMPORTED = True
except ImportError:  # pragma: no cover - exercised only without numba
    _NUMBA_IMPORTED = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


USE_NUMBA = _NUMBA_IMPORTED and os.environ.get("SEGQA_NO_NUMBA", "") != "1"

_OFFSETS_8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))
_OFFSETS_4 = ((-1, 0), (0, -1), (0, 1), (1, 0))


def active_path() -> str:
    return "numba" if USE_NUMBA else "numpy"


def shift2d(a: np.ndarray, dy: int, dx: int, fill) -> np.ndarray:
    """Return b with b[y, x] = a[y + dy, x + dx], out-of-range reads = fill."""
    h, w = a.shape
    out = np.full(a.shape, fill, dtype=a.dtype)
    ys = slice(max(0, -dy), min(h, h - dy))
    xs = slice(max(0, -dx), min(w, w - dx))
    ysrc = slice(max(0, dy), min(h, h + dy))
    xsrc = slice(max(0, dx), min(w, w + dx))
    out[ys, xs] = a[ysrc, xsrc]
    return out


# ---------------------------------------------------------------------------
# connected-component labeling
# ---------------------------------------------------------------------------


@njit(cache=True)
def _uf_find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


@njit(cache=True)
def _uf_merge(parent, lab, nb):
    # lab is 0 (unset) or a current root; returns the surviving root.
    r = _uf_find(parent, nb)
    if lab == 0 or r == lab:
        return r
    if r < lab:
        parent[lab] = r
        return r
    parent[r] = lab
    return lab


@njit(cache=True)
def _label_numba(fg, eight):
    h, w = fg.shape
    labels = np.zeros((h, w), np.int32)
    # one provisional label per horizontal run: at most ceil(w/2) per row
    parent = np.zeros(h * ((w + 3) // 2) + 2, np.int32)
    nxt = 1
    for y in range(h):
        for x in range(w):
            if not fg[y, x]:
                continue
            lab = 0
            if x > 0 and labels[y, x - 1] > 0:
                lab = _uf_merge(parent, lab, labels[y, x - 1])
            if y > 0:
                if labels[y - 1, x] > 0:
                    lab = _uf_merge(parent, lab, labels[y - 1, x])
                if eight:
                    if x > 0 and labels[y - 1, x - 1] > 0:
                        lab = _uf_merge(parent, lab, labels[y - 1, x - 1])
                    if x + 1 < w and labels[y - 1, x + 1] > 0:
                        lab = _uf_merge(parent, lab, labels[y - 1, x + 1])
            if lab == 0:
                lab = nxt
                parent[nxt] = nxt
                nxt += 1
            labels[y, x] = lab
    # renumber components 1..count in order of first pixel (row-major)
    remap = np.zeros(nxt, np.int32)
    count = 0
    for y in range(h):
        for x in range(w):
            lab = labels[y, x]
            if lab == 0:
                continue
            r = _uf_find(parent, lab)
            if remap[r] == 0:
                count += 1
                remap[r] = count
            labels[y, x] = remap[r]
    return labels, count


def _label_numpy(fg, eight):
    h, w = fg.shape
    if not fg.any():
        return np.zeros((h, w), np.int32), 0
    big = np.int64(h * w)
    flat = np.where(fg.ravel(), np.arange(h * w, dtype=np.int64), big)
    offsets = _OFFSETS_8 if eight else _OFFSETS_4
    inside = np.nonzero(flat < big)[0]
    # hook-and-compress: labels are pixel indices, treated as pointers.
    # Each round gathers neighbor minima, scatters them into the pointed-to
    # root (hook), then collapses pointer chains (compress), converging in
    # O(log) rounds instead of O(component diameter).
    while True:
        lab = flat.reshape(h, w)
        cand = lab
        for dy, dx in offsets:
            cand = np.minimum(cand, shift2d(lab, dy, dx, big))
        cand = cand.ravel()[inside]
        prev = flat.copy()
        np.minimum.at(flat, prev[inside], cand)
        flat[inside] = np.minimum(flat[inside], cand)
        while True:
            hopped = np.minimum(flat[inside], flat[flat[inside]])
            if np.array_equal(hopped, flat[inside]):
                break
            flat[inside] = hopped
        if np.array_equal(flat, prev):
            break
    roots = np.unique(flat[inside])  # ascending == first-pixel row-major order
    out = np.zeros(h * w, np.int32)
    out[inside] = (np.searchsorted(roots, flat[inside]) + 1).astype(np.int32)
    return out.reshape(h, w), int(roots.size)


def label_components(fg: np.ndarray, connectivity: int = 8):
    """Label connected true-pixel regions of a binary grid.

    Returns ``(labels, count)`` where labels is int32 with 0 for background
    and components numbered 1..count by their first pixel in row-major order.
    """
    if connectivity not in (4, 8):
        raise ContractViolation(f"connectivity must be 4 or 8, got {connectivity}")
    fg = np.ascontiguousarray(fg, dtype=np.bool_)
    if fg.ndim != 2:
        raise ContractViolation(f"expected a 2-d grid, got shape {fg.shape}")
    if USE_NUMBA:
        return _label_numba(fg, connectivity == 8)
    return _label_numpy(fg, connectivity == 8)


# ---------------------------------------------------------------------------
# flood fill within an intensity tolerance (8-connected)
# ---------------------------------------------------------------------------


@njit(cache=True)
def _flood_numba(luma, sy, sx, tol):
    h, w = luma.shape
    out = np.zeros((h, w), np.bool_)
    qy = np.empty(h * w, np.int32)
    qx = np.empty(h * w, np.int32)
    seed = luma[sy, sx]
    out[sy, sx] = True
    qy[0] = sy
    qx[0] = sx
    head = 0
    tail = 1
    while head < tail:
        y = qy[head]
        x = qx[head]
        head += 1
        for dy in range(-1, 2):
            for dx in range(-1, 2):
                if dy == 0 and dx == 0:
                    continue
                ny = y + dy
                nx = x + dx
                if 0 <= ny < h and 0 <= nx < w and not out[ny, nx]:
                    d = luma[ny, nx] - seed
                    if -tol <= d <= tol:
                        out[ny, nx] = True
                        qy[tail] = ny
                        qx[tail] = nx
                        tail += 1
    return out


def _flood_numpy(luma, sy, sx, tol):
    ok = np.abs(luma.astype(np.int32) - int(luma[sy, sx])) <= tol
    region = np.zeros(luma.shape, np.bool_)
    region[sy, sx] = True
    while True:
        grown = region.copy()
        for dy, dx in _OFFSETS_8:
            grown |= shift2d(region, dy, dx, False)
        grown &= ok
        if np.array_equal(grown, region):
            return region
        region = grown


def flood_fill_tolerance(luma: np.ndarray, y: int, x: int, tolerance: int) -> np.ndarray:
    """8-connected flood fill from (y, x); a pixel joins iff its intensity is
    within ``tolerance`` of the seed's intensity."""
    luma = np.ascontiguousarray(luma, dtype=np.int16)
    h, w = luma.shape
    if not (0 <= y < h and 0 <= x < w):
        raise ContractViolation(f"seed ({x}, {y}) outside {w}x{h} grid")
    if USE_NUMBA:
        return _flood_numba(luma, y, x, np.int16(tolerance))
    return _flood_numpy(luma, y, x, int(tolerance))
