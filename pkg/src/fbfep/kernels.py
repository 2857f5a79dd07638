"""Pixel kernels for the TV inpainting loop.

Each kernel exists twice: a numba ``@njit`` loop version and a vectorised
numpy version. Both return new arrays and never reorder reductions, so a
given backend is bitwise deterministic. The two backends agree to
rounding (checked in the test suite), not bitwise.

Arrays are 2-D ``float64`` of shape ``(M, N)``; ``gx`` holds differences
along the row index ``i`` and ``gy`` along the column index ``j``.
"""

import numpy as np

from fbfep._accel import HAS_NUMBA, requested_backend

__all__ = [
    "grad_forward",
    "div_adjoint",
    "proj_unit_disks",
    "pair_norm_sum",
    "backend",
    "use_backend",
]


# --- numpy reference path -------------------------------------------------


def _grad_forward_np(x):
    gx = np.zeros_like(x)
    gy = np.zeros_like(x)
    gx[:-1, :] = x[1:, :] - x[:-1, :]
    gy[:, :-1] = x[:, 1:] - x[:, :-1]
    return gx, gy


def _div_adjoint_np(gx, gy):
    out = np.zeros_like(gx)
    out[:-1, :] -= gx[:-1, :]
    out[1:, :] += gx[:-1, :]
    out[:, :-1] -= gy[:, :-1]
    out[:, 1:] += gy[:, :-1]
    return out


def _proj_unit_disks_np(gx, gy):
    scale = np.maximum(1.0, np.sqrt(gx * gx + gy * gy))
    return gx / scale, gy / scale


def _pair_norm_sum_np(gx, gy):
    return float(np.sum(np.sqrt(gx * gx + gy * gy)))


# --- numba path -----------------------------------------------------------

if HAS_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _grad_forward_nb(x):
        M, N = x.shape
        gx = np.zeros((M, N))
        gy = np.zeros((M, N))
        for i in range(M):
            for j in range(N):
                if i < M - 1:
                    gx[i, j] = x[i + 1, j] - x[i, j]
                if j < N - 1:
                    gy[i, j] = x[i, j + 1] - x[i, j]
        return gx, gy

    @njit(cache=True)
    def _div_adjoint_nb(gx, gy):
        M, N = gx.shape
        out = np.zeros((M, N))
        for i in range(M):
            for j in range(N):
                acc = 0.0
                if i < M - 1:
                    acc -= gx[i, j]
                if i > 0:
                    acc += gx[i - 1, j]
                out[i, j] = acc
        for i in range(M):
            for j in range(N):
                acc = out[i, j]
                if j < N - 1:
                    acc -= gy[i, j]
                if j > 0:
                    acc += gy[i, j - 1]
                out[i, j] = acc
        return out

    @njit(cache=True)
    def _proj_unit_disks_nb(gx, gy):
        M, N = gx.shape
        px = np.empty((M, N))
        py = np.empty((M, N))
        for i in range(M):
            for j in range(N):
                p = gx[i, j]
                q = gy[i, j]
                s = np.sqrt(p * p + q * q)
                if s < 1.0:
                    s = 1.0
                px[i, j] = p / s
                py[i, j] = q / s
        return px, py

    @njit(cache=True)
    def _pair_norm_sum_nb(gx, gy):
        M, N = gx.shape
        total = 0.0
        for i in range(M):
            for j in range(N):
                total += np.sqrt(gx[i, j] * gx[i, j] + gy[i, j] * gy[i, j])
        return total


_IMPLS = {
    "numpy": {
        "grad_forward": _grad_forward_np,
        "div_adjoint": _div_adjoint_np,
        "proj_unit_disks": _proj_unit_disks_np,
        "pair_norm_sum": _pair_norm_sum_np,
    },
}
if HAS_NUMBA:
    _IMPLS["numba"] = {
        "grad_forward": _grad_forward_nb,
        "div_adjoint": _div_adjoint_nb,
        "proj_unit_disks": _proj_unit_disks_nb,
        "pair_norm_sum": _pair_norm_sum_nb,
    }

_active = {"name": requested_backend()}


def backend():
    """Name of the active kernel backend."""
    return _active["name"]


def use_backend(name):
    """Switch the kernel backend; returns the previous name."""
    if name not in _IMPLS:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {sorted(_IMPLS)}")
    prev = _active["name"]
    _active["name"] = name
    return prev


def _as2d(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def grad_forward(x):
    """Forward differences ``(gx, gy)`` with zero last row / last column."""
    return _IMPLS[_active["name"]]["grad_forward"](_as2d(x))


def div_adjoint(gx, gy):
    """Exact adjoint of :func:`grad_forward` (a negative divergence)."""
    return _IMPLS[_active["name"]]["div_adjoint"](_as2d(gx), _as2d(gy))


def proj_unit_disks(gx, gy):
    """Scale each pixel pair into the closed unit disk."""
    return _IMPLS[_active["name"]]["proj_unit_disks"](_as2d(gx), _as2d(gy))


def pair_norm_sum(gx, gy):
    """Sum over pixels of ``sqrt(gx**2 + gy**2)``."""
    return float(_IMPLS[_active["name"]]["pair_norm_sum"](_as2d(gx), _as2d(gy)))
