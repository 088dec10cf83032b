"""(psi, beta)-derivatives on coefficient tables and the extremal derivative.

With ``theta = beta pi / 2`` a function ``f`` and its derivative ``phi``
are related harmonic by harmonic through

    a_k(f) = psi(k) (a_k(phi) cos theta - b_k(phi) sin theta)
    b_k(f) = psi(k) (a_k(phi) sin theta + b_k(phi) cos theta)

so ``differentiate`` divides by ``psi(k)`` and rotates back by ``-theta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AliasingError, ParameterError
from .fourier_core import TWO_PI, PeriodicGrid, TrigCoeffs
from .psi_catalog import PsiSpec, characteristics

# relative slack when comparing mu(n) against the regime boundaries n/p and n
REGIME_RTOL = 1e-9

REGIMES = ("mu_le_n_over_p", "between", "mu_gt_n")

_QUARTER_TURNS = ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))


@dataclass(frozen=True)
class ClassParams:
    psi: PsiSpec
    beta: float

    def __post_init__(self):
        if not math.isfinite(self.beta):
            raise ParameterError(f"beta must be finite, got {self.beta!r}")

    @property
    def theta(self) -> float:
        return 0.5 * math.pi * self.beta

    def rotation(self) -> tuple[float, float]:
        return rotation(self.beta)


def rotation(beta: float) -> tuple[float, float]:
    """``(cos, sin)`` of ``beta pi / 2``, exact for integer ``beta``."""
    b = math.fmod(beta, 4.0)
    if b < 0:
        b += 4.0
    if b == int(b):
        return _QUARTER_TURNS[int(b) % 4]
    th = 0.5 * math.pi * b
    return math.cos(th), math.sin(th)


def _psi_table(psi: PsiSpec, m: int) -> np.ndarray:
    return np.asarray(psi(np.arange(1, m + 1, dtype=float)), dtype=float)


def integrate_derivative(phi: TrigCoeffs, params: ClassParams, *, a0_tol: float = 1e-10) -> TrigCoeffs:
    """Coefficients of ``f`` whose (psi, beta)-derivative is ``phi``.

    ``phi`` must have zero mean (``|a0| <= a0_tol``); the free constant of
    ``f`` is set to 0.
    """
    if abs(phi.a0) > a0_tol:
        raise ParameterError(f"the derivative must have zero mean, got a0={phi.a0!r}")
    c, s = params.rotation()
    w = _psi_table(params.psi, phi.m)
    return TrigCoeffs(0.0, w * (phi.a * c - phi.b * s), w * (phi.a * s + phi.b * c))


def differentiate(f: TrigCoeffs, params: ClassParams) -> TrigCoeffs:
    """(psi, beta)-derivative of ``f``; the constant term is dropped."""
    c, s = params.rotation()
    w = _psi_table(params.psi, f.m)
    a, b = f.a / w, f.b / w
    return TrigCoeffs(0.0, a * c + b * s, -a * s + b * c)


# -- partition of the real line used by the extremal derivative ---------------


@dataclass(frozen=True)
class PartitionData:
    """Zeros ``t_k = (2k + 1 - beta) pi / 2`` and the four selected indices.

    ``a`` and ``b`` are the outer and inner cut points of the active
    regime: ``t_{k0-1} < -a <= t_{k0}``, ``t_{k1} < -b <= t_{k1+1}``,
    ``t_{k2-1} < b <= t_{k2}``, ``t_{k3} < a <= t_{k3+1}``.
    """

    n: int
    p: int
    beta: float
    k0: int
    k1: int
    k2: int
    k3: int
    mu_n: float
    regime: str
    a: float
    b: float

    def t(self, k):
        return (2.0 * np.asarray(k, dtype=float) + 1.0 - self.beta) * (0.5 * math.pi)

    def x(self, k):
        return self.t(k) + 0.5 * math.pi

    def active(self) -> np.ndarray:
        """Indices ``k`` whose interval ``[t_k, t_{k+1}]`` carries ``l_n``."""
        return np.concatenate([np.arange(self.k0, self.k1), np.arange(self.k2, self.k3)])

    def sandwich_holds(self) -> bool:
        t = self.t
        return bool(
            t(self.k0 - 1) < -self.a <= t(self.k0)
            and t(self.k1) < -self.b <= t(self.k1 + 1)
            and t(self.k2 - 1) < self.b <= t(self.k2)
            and t(self.k3) < self.a <= t(self.k3 + 1)
        )


def build_partition(params: ClassParams, n: int, p: int) -> PartitionData:
    if not (int(n) == n and int(p) == p and 1 <= p <= n):
        raise ParameterError(f"need integers 1 <= p <= n, got n={n}, p={p}")
    n, p = int(n), int(p)
    mu = characteristics(params.psi, float(n)).mu
    ratio = n / p
    if mu <= ratio * (1 + REGIME_RTOL):
        regime, a, b = "mu_le_n_over_p", ratio, mu
    elif mu <= n * (1 + REGIME_RTOL):
        regime, a, b = "between", mu, ratio
    else:
        regime, a, b = "mu_gt_n", float(n), ratio
    beta = params.beta

    def t(k):
        return (2.0 * k + 1.0 - beta) * (0.5 * math.pi)

    def first_at_least(v):
        k = math.ceil((v / (0.5 * math.pi) + beta - 1.0) / 2.0)
        while t(k) < v:
            k += 1
        while t(k - 1) >= v:
            k -= 1
        return k

    k0 = first_at_least(-a)
    k1 = first_at_least(-b) - 1
    k2 = first_at_least(b)
    k3 = first_at_least(a) - 1
    return PartitionData(n, p, float(beta), k0, k1, k2, k3, float(mu), regime, float(a), float(b))


# -- extremal derivative -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ExtremalPieces:
    """Piecewise-constant function on ``[-pi, pi]``: value ``v[i]`` on ``[lo[i], hi[i]]``.

    Only the non-zero pieces are stored; ``c`` is the value outside ``[-1, 1]``.
    """

    lo: np.ndarray
    hi: np.ndarray
    v: np.ndarray
    c: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where(np.abs(t) > 1.0, self.c, 0.0)
        inner = np.abs(t) <= 1.0
        if self.lo.size:
            idx = np.searchsorted(self.lo, t, side="right") - 1
            ok = inner & (idx >= 0)
            idx = np.clip(idx, 0, None)
            hit = ok & (t < self.hi[idx])
            out = np.where(hit, self.v[idx], out)
        return out


def _pattern(params: ClassParams, part: PartitionData):
    """Sign pattern of ``l_n(s) sin(s + theta)`` as pieces in ``s = n t``."""
    k = part.active()
    tk, xk, tk1 = part.t(k), part.x(k), part.t(k + 1)
    sgn = np.sign(xk) * np.where(k % 2 == 0, 1.0, -1.0)
    lo = np.concatenate([tk, xk])
    hi = np.concatenate([xk, tk1])
    v = np.concatenate([sgn, -sgn])
    order = np.argsort(lo, kind="stable")
    return lo[order] / part.n, hi[order] / part.n, v[order]


def extremal_pieces(params: ClassParams, n: int, p: int) -> ExtremalPieces:
    """Exact piecewise description of the extremal derivative on ``[-pi, pi]``.

    On ``[-1, 1]`` it is ``sign(l_n(n t) sin(n t + theta))``; outside it is
    the constant that makes the mean vanish.
    """
    part = build_partition(params, n, p)
    lo, hi, v = _pattern(params, part)
    mass = math.fsum(v * (hi - lo))
    c = min(1.0, max(-1.0, -mass / (TWO_PI - 2.0)))
    return ExtremalPieces(lo, hi, v, c)


def build_extremal_derivative(params: ClassParams, n: int, p: int, N: int) -> PeriodicGrid:
    """Samples of the extremal derivative on the standard grid ``2 pi j / N``.

    The constant outside ``[-1, 1]`` is recomputed from the samples so the
    discrete mean is zero.
    """
    if N < 64 * n:
        raise AliasingError(f"grid of {N} points is too coarse for n={n} (need N >= {64 * n})")
    pieces = extremal_pieces(params, n, p)
    x = TWO_PI * np.arange(N) / N
    t = np.where(x >= math.pi, x - TWO_PI, x)
    outside = np.abs(t) > 1.0
    inner = ExtremalPieces(pieces.lo, pieces.hi, pieces.v, 0.0)(t)
    c = -math.fsum(inner) / np.count_nonzero(outside)
    c = min(1.0, max(-1.0, c))
    return PeriodicGrid(np.where(outside, c, inner))
