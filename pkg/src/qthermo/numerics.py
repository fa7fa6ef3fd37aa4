"""Quadrature, root bracketing and differentiation helpers."""
from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy import optimize

from .errors import NumericalError

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-10,
    max_depth: int = 40,
) -> float:
    """Integrate ``f`` on [a, b] by recursive Simpson bisection.

    Raises NumericalError if some panel hits ``max_depth`` before its
    Richardson error estimate drops below its share of ``tol``.
    """
    if a == b:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    failures: list[tuple[float, float]] = []

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        if abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        if depth >= max_depth:
            failures.append((a, b))
            return left + right + delta / 15.0
        return recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) + recurse(
            m, b, fm, frm, fb, right, 0.5 * tol, depth + 1
        )

    value = recurse(a, b, fa, fm, fb, whole, tol, 0)
    if failures or not math.isfinite(value):
        raise NumericalError(
            f"adaptive Simpson on [{a}, {b}] did not reach tol={tol}: "
            f"{len(failures)} panel(s) at max depth {max_depth}, first {failures[:1]}, value {value}"
        )
    return value


def gauss_legendre_panels(f: Callable[[np.ndarray], np.ndarray], edges: np.ndarray) -> np.ndarray:
    """Integral of a vectorized ``f`` over each panel [edges[k], edges[k+1]]."""
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1], edges[1:]
    half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
    nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = np.asarray(f(nodes.ravel())).reshape(nodes.shape)
    return half * (vals @ _GL_WEIGHTS)


def bisect(f: Callable[[float], float], a: float, b: float, xtol: float = 1e-9) -> float:
    """Root of ``f`` in a sign-changing bracket [a, b]."""
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if np.sign(fa) == np.sign(fb):
        raise NumericalError(f"no sign change on [{a}, {b}]: f = {fa}, {fb}")
    return optimize.bisect(f, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=400)


def grid_roots(
    f: Callable[[float], float],
    grid: np.ndarray,
    values: np.ndarray | None = None,
    xtol: float = 1e-9,
) -> list[float]:
    """All sign changes of ``f`` between consecutive grid points, bisected to ``xtol``."""
    grid = np.asarray(grid, dtype=float)
    if values is None:
        values = np.array([f(t) for t in grid])
    roots = []
    for k in range(len(grid) - 1):
        va, vb = values[k], values[k + 1]
        if va == 0.0:
            if k == 0 or values[k - 1] != 0.0:
                roots.append(float(grid[k]))
        elif vb != 0.0 and (va < 0.0) != (vb < 0.0):
            roots.append(bisect(f, grid[k], grid[k + 1], xtol))
    if values[-1] == 0.0 and (len(values) == 1 or values[-2] != 0.0):
        roots.append(float(grid[-1]))
    return roots


def derivative(f: Callable[[np.ndarray], np.ndarray], t, step) -> np.ndarray:
    """Five-point central difference of a vectorized ``f``."""
    t = np.asarray(t, dtype=float)
    h = np.broadcast_to(np.asarray(step, dtype=float), t.shape)
    f2p, f1p = np.asarray(f(t + 2 * h)), np.asarray(f(t + h))
    f1m, f2m = np.asarray(f(t - h)), np.asarray(f(t - 2 * h))
    hb = h.reshape(h.shape + (1,) * (f1p.ndim - h.ndim))
    return (-f2p + 8.0 * f1p - 8.0 * f1m + f2m) / (12.0 * hb)


def maximize_scalar(f: Callable[[float], float], a: float, b: float, xtol: float = 1e-10) -> tuple[float, float]:
    """Local maximum of ``f`` on [a, b] by bounded golden-section/parabolic search."""
    res = optimize.minimize_scalar(lambda x: -f(x), bounds=(a, b), method="bounded", options={"xatol": xtol})
    return float(res.x), float(-res.fun)


def refine_grid(grid: np.ndarray) -> np.ndarray:
    """Insert the midpoint of every panel."""
    grid = np.asarray(grid, dtype=float)
    out = np.empty(2 * len(grid) - 1)
    out[0::2] = grid
    out[1::2] = 0.5 * (grid[:-1] + grid[1:])
    return out
