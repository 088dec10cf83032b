"""Class error of a multiplier method through the L1 norm of its deviation kernel.

For ``f`` with (psi, beta)-derivative ``phi``,

    f(0) - U(f)(0) = (1/pi) int_{-pi}^{pi} phi(t) K(t) dt,
    K(t) = sum_{k >= 1} w_k cos(k t + theta),

with ``w_k = (1 - lambda_k) psi(k)`` (so ``w_k = psi(k)`` for ``k >= n``).
The worst case over ``|phi| <= 1`` is ``(1/pi) ||K||_1``.

Kernels are evaluated normalized by ``psi(n)`` so that rapidly decaying
weights do not underflow; the public results are rescaled at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly
from numpy.polynomial.legendre import leggauss

from .errors import DomainError, ParameterError, TailBudgetError
from .fourier_core import (
    TWO_PI,
    TrigCoeffs,
    integrate,
    l1_norm_periodic,
    sign_change_partition,
    window_mass,
)
from .psi_catalog import Exp, PsiSpec, Tabulated
from .psi_class import ClassParams, extremal_pieces, rotation
from .summation import MultiplierSet, build_multipliers

MAX_TAIL_TERMS = 10_000_000
SINGULAR_DELTA = 1e-8
# graded panels reach this fraction of the window half-width when the
# kernel can be evaluated that close to 0
WINDOW_DEPTH = 1e-20
_CHUNK = 4096

_GL_X, _GL_W = leggauss(20)


def tau_eval(psi: PsiSpec, n: int, p: int, u) -> np.ndarray | float:
    """Piecewise profile ``tau_{n,p}(u)``: 0, then a linear ramp to ``psi(n)``, then ``psi(n u)``."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise DomainError("tau is defined for u >= 0")
    psi_n = float(psi(float(n)))
    ramp = psi_n * (n * u - n + p) / p
    tail = psi(np.maximum(n * u, float(n)))
    out = np.where(u <= (n - p) / n, 0.0, np.where(u <= 1.0, ramp, tail))
    return float(out) if out.ndim == 0 else out


# -- tail sums ------------------------------------------------------------------


def _gl_panels(edges):
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1, None], edges[1:, None]
    y = 0.5 * (b - a) * _GL_X + 0.5 * (a + b)
    w = 0.5 * (b - a) * _GL_W
    return y.ravel(), np.broadcast_to(w, y.shape).ravel()


class _ContourTail:
    """``sum_{k>=n} psi(k) e^{ikt} / psi(n)`` for analytic ``psi`` via Abel-Plana.

    For ``0 < t < 2 pi``,

        sum_{k>=n} psi(k) e^{ikt} = e^{int} [psi(n)/2 + i I1(t) + i I2(t)],
        I1 = int_0^inf psi(n+iy) e^{-yt} dy,
        I2 = int_0^inf [psi(n+iy) e^{-yt} - psi(n-iy) e^{yt}] / (e^{2 pi y} - 1) dy,

    and negative ``t`` follows by conjugation. The complex weights are
    sampled once; each ``t`` then costs a real exponential per node.
    """

    def __init__(self, psi: PsiSpec, n: int, t_min: float):
        self.n = n
        self.t_min = t_min
        psi_n = float(psi(float(n)))
        edges = [0.0, 1.0 / 16.0]
        while edges[-1] < 50.0 / t_min:
            edges.append(2.0 * edges[-1])
        self.y1, w1 = _gl_panels(edges)
        self.p1 = w1 * psi.complex(n + 1j * self.y1) / psi_n
        # nodes of panels starting below y are the ones needed once e^{-yt} < e^{-50}
        self.y1_panel = np.repeat(np.asarray(edges[:-1]), _GL_X.size)
        self.y2, w2 = _gl_panels([0.0, 0.5, 1, 2, 4, 8, 16, 32])
        den = -np.expm1(-TWO_PI * self.y2)
        self.pp = w2 * psi.complex(n + 1j * self.y2) / (psi_n * den)
        self.pm = w2 * psi.complex(n - 1j * self.y2) / (psi_n * den)

    def __call__(self, t: np.ndarray) -> np.ndarray:
        s = np.abs(t)
        if np.any(s < self.t_min):
            raise DomainError(f"contour tail needs |t| >= {self.t_min}")
        out = np.empty(s.size, dtype=complex)
        for i in range(0, s.size, _CHUNK):
            sc = s[i:i + _CHUNK, None]
            m = int(np.searchsorted(self.y1_panel, 50.0 / float(sc.min()), side="left"))
            i1 = np.exp(-sc * self.y1[:m]) @ self.p1[:m]
            i2 = (np.exp(-self.y2 * (TWO_PI + sc)) @ self.pp
                  - np.exp(-self.y2 * (TWO_PI - sc)) @ self.pm)
            out[i:i + _CHUNK] = 0.5 + 1j * (i1 + i2)
        out *= np.exp(1j * self.n * s)
        return np.where(t > 0, out, np.conj(out))


def _exp_log_tail_bound(psi: Exp, m: float) -> float:
    """``log int_m^inf exp(-alpha u^r) du`` (upper bound), overflow-free."""
    a, r = psi.alpha, psi.r
    x = a * m**r
    if r >= 1:
        # u^r >= m^r + r m^{r-1} (u - m)
        return -x - math.log(a * r * m ** (r - 1))
    s = 1.0 / r
    # Gamma(s, x) <= x^{s-1} e^{-x} / (1 - (s-1)/x) for x > s - 1
    if x <= 2 * (s - 1):
        return math.inf
    return (s - 1) * math.log(x) - x - math.log1p(-(s - 1) / x) - math.log(r) - s * math.log(a)


def _exp_cut(psi: Exp, n: int, eps_rel: float) -> int:
    """Smallest ``M >= n`` with ``sum_{k>M} psi(k) <= eps_rel psi(n)``."""
    target = math.log(eps_rel) + float(psi._log_shape(np.float64(n)))
    if _exp_log_tail_bound(psi, float(n)) <= target:
        return n
    lo, hi = n, 2 * n
    while _exp_log_tail_bound(psi, float(hi)) > target:
        lo, hi = hi, 2 * hi
        if lo > MAX_TAIL_TERMS + n:
            raise TailBudgetError(f"tail of {psi.to_string()} needs more than {MAX_TAIL_TERMS} terms")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _exp_log_tail_bound(psi, float(mid)) <= target:
            hi = mid
        else:
            lo = mid
    return hi


def _horner(w: np.ndarray, k_first: int, t: np.ndarray) -> np.ndarray:
    """``sum_j w_j e^{i (k_first + j) t}`` by Horner's rule in ``e^{it}``."""
    if w.size == 0:
        return np.zeros(t.size, dtype=complex)
    z = np.exp(1j * t)
    return npoly.polyval(z, w.astype(complex)) * np.exp(1j * k_first * t)


class _PartialSumTail:
    """Direct sum up to ``M`` closed by a summation-by-parts boundary term.

    With ``z = e^{it}``, two rounds of summation by parts give

        sum_{k>M} psi(k) z^k = -psi(M+1) z^{M+1} / (z - 1) + R,
        |R| <= 2 (psi(M+1) - psi(M+2)) / |z - 1|^2,

    for convex decreasing ``psi``. ``M`` is chosen per batch so that the
    bound is at most ``eps_tail psi(n)``. ``Exp`` uses the t-independent
    bound ``sum_{k>M} psi(k) <= int_M^inf psi`` instead, and ``Tabulated``
    weights stop at their last knot.
    """

    def __init__(self, psi: PsiSpec, n: int, eps_rel: float, max_terms: int):
        self.psi, self.n, self.eps_rel, self.max_terms = psi, n, eps_rel, max_terms
        self.fixed_m = None
        if isinstance(psi, Exp):
            self.fixed_m = _exp_cut(psi, n, eps_rel)
        elif isinstance(psi, Tabulated):
            self.fixed_m = max(n, int(math.floor(psi.t_max)))
        if self.fixed_m is not None and self.fixed_m - n > max_terms:
            raise TailBudgetError(f"tail needs {self.fixed_m - n} terms (cap {max_terms})")
        self._log_n = float(psi.log(float(n)))
        self._weights = {}

    def _rel(self, k):
        return np.exp(self.psi.log(np.asarray(k, dtype=float)) - self._log_n)

    def _w(self, m):
        if m not in self._weights:
            self._weights[m] = self._rel(np.arange(self.n, m + 1))
        return self._weights[m]

    def _second_difference_ok(self, m, y):
        d = self._rel([m + 1, m + 2])
        return 2.0 * (d[0] - d[1]) <= y

    def cut_for(self, t: np.ndarray) -> int:
        if self.fixed_m is not None:
            return self.fixed_m
        gap = float(np.min(np.abs(np.expm1(1j * np.abs(t))))) if t.size else 1.0
        y = self.eps_rel * gap * gap
        if self._second_difference_ok(self.n, y):
            return self.n
        lo, hi = self.n, 2 * self.n
        while not self._second_difference_ok(hi, y):
            lo, hi = hi, 2 * hi
            if lo - self.n > self.max_terms:
                raise TailBudgetError(
                    f"|t|={float(np.min(np.abs(t))):.3g} needs more than {self.max_terms} tail terms"
                )
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self._second_difference_ok(mid, y):
                hi = mid
            else:
                lo = mid
        if hi - self.n > self.max_terms:
            raise TailBudgetError(f"tail needs {hi - self.n} terms (cap {self.max_terms})")
        return hi

    def __call__(self, t: np.ndarray) -> np.ndarray:
        out = np.empty(t.size, dtype=complex)
        for i in range(0, t.size, _CHUNK):
            tc = t[i:i + _CHUNK]
            m = self.cut_for(tc)
            val = _horner(self._w(m), self.n, tc)
            if self.fixed_m is None:
                z = np.exp(1j * tc)
                val -= self._rel(m + 1) * np.exp(1j * (m + 1) * tc) / (z - 1.0)
            out[i:i + _CHUNK] = val
        return out


# -- kernel ---------------------------------------------------------------------


@dataclass(eq=False)
class DeviationKernel:
    """``K(t) = sum_k w_k cos(k t + theta)`` for a multiplier method on a class.

    ``ramp_w`` holds ``w_k / psi(n)`` for ``k`` in ``ramp_k`` (harmonics
    below ``n`` with ``lambda_k < 1``); harmonics ``k >= n`` carry
    ``psi(k)``.
    """

    psi: PsiSpec
    beta: float
    n: int
    p: int
    ramp_k: np.ndarray
    ramp_w: np.ndarray
    backend: str = "auto"
    eps_tail: float = 1e-12
    max_terms: int = MAX_TAIL_TERMS
    t_min: float | None = None
    _tail: object = field(init=False, repr=False)

    def __post_init__(self):
        if self.backend == "auto":
            self.backend = "contour" if self.psi.analytic else "partial_sums"
        # a partial sum with a t-dependent cut cannot go deep into the window
        deep = self.backend == "contour" or isinstance(self.psi, (Exp, Tabulated))
        self.window_depth = WINDOW_DEPTH if deep else 1.0
        if self.t_min is None:
            self.t_min = 0.5 * guard_width(self.n) * self.window_depth
        if self.backend == "contour":
            self._tail = _ContourTail(self.psi, self.n, self.t_min)
        elif self.backend == "partial_sums":
            self._tail = _PartialSumTail(self.psi, self.n, self.eps_tail, self.max_terms)
        else:
            raise ParameterError(f"unknown tail backend {self.backend!r}")
        self.psi_n = float(self.psi(float(self.n)))
        self._cos, self._sin = rotation(self.beta)

    @property
    def theta(self) -> float:
        return 0.5 * math.pi * self.beta

    @classmethod
    def for_method(cls, psi: PsiSpec, beta: float, n: int, p: int | None = None,
                   method: str = "U_psi", *, s=None, phi_table=None, **kwargs) -> "DeviationKernel":
        mult = build_multipliers(method, n, p, psi=psi, s=s, phi_table=phi_table)
        return cls.from_multipliers(mult, psi, beta, **kwargs)

    @classmethod
    def from_multipliers(cls, mult: MultiplierSet, psi: PsiSpec, beta: float,
                         **kwargs) -> "DeviationKernel":
        n, p = mult.n, mult.p
        if mult.method == "U_psi":
            k = np.arange(n - p + 1, n)
            w = (k - n + p) / p
        else:
            k = np.arange(1, n)
            lam = mult.lam[1:]
            keep = lam != 1.0
            k = k[keep]
            w = (1.0 - lam[keep]) * np.exp(psi.log(k.astype(float)) - float(psi.log(float(n))))
        return cls(psi, float(beta), n, p, k, np.asarray(w, dtype=float), **kwargs)

    def series(self, t) -> np.ndarray:
        """``sum_k (w_k / psi(n)) e^{ikt}`` as a complex array."""
        t = np.atleast_1d(np.asarray(t, dtype=float)).ravel()
        out = self._tail(t)
        if self.ramp_k.size:
            k_first = int(self.ramp_k[0])
            dense = np.zeros(int(self.ramp_k[-1]) - k_first + 1)
            dense[self.ramp_k - k_first] = self.ramp_w
            out = out + _horner(dense, k_first, t)
        return out

    def normalized(self, t) -> np.ndarray:
        """``K(t) / psi(n)``."""
        t_arr = np.asarray(t, dtype=float)
        z = self.series(t_arr)
        # Re(e^{i theta} z)
        val = self._cos * z.real - self._sin * z.imag
        return val.reshape(t_arr.shape)

    def __call__(self, t):
        return self.psi_n * self.normalized(t)


def kernel_dump(kernel: DeviationKernel, N: int):
    """``(t, K(t))`` on ``t_j = -pi + 2 pi j / N``; ``K`` is ``nan`` at ``t = 0``."""
    if N < 2:
        raise ParameterError("kernel dump needs N >= 2")
    t = -math.pi + (TWO_PI * np.arange(N)) / N
    k = np.full(N, np.nan)
    ok = np.abs(t) >= kernel.t_min
    k[ok] = kernel(t[ok])
    return t, k


# -- class error ----------------------------------------------------------------


@dataclass(frozen=True)
class ErrorResult:
    value: float
    err_estimate: float
    ratio: float
    ratio_err: float
    psi_n: float
    n: int
    p: int
    method: str


def _kernel(psi, beta, n, p, tol, method, s, phi_table, backend, eps_tail):
    if not 0 < tol < 1:
        raise ParameterError("tol must lie in (0, 1)")
    eps = tol / 100.0 if eps_tail is None else eps_tail
    return DeviationKernel.for_method(psi, beta, n, p, method, s=s, phi_table=phi_table,
                                      backend=backend, eps_tail=eps)


def guard_width(n: int) -> float:
    """Half-width of the window around ``t = 0`` integrated on graded panels.

    ``|K|`` near 0 grows roughly like ``n psi(n)``, so the window shrinks
    with ``n`` to keep its share comparable across orders.
    """
    return SINGULAR_DELTA / n


def _n_panels(n):
    return 4 * n + 64


def class_error(psi: PsiSpec, beta: float, n: int, p: int | None = None, tol: float = 1e-8, *,
                method: str = "U_psi", s: float | None = None, phi_table=None,
                backend: str = "auto", eps_tail: float | None = None,
                full_output: bool = False):
    """Worst-case deviation ``sup |f(0) - U(f)(0)|`` over the class.

    Parameters
    ----------
    psi, beta : class parameters.
    n, p : operator order and ramp width.
    tol : relative quadrature tolerance; the pointwise tail truncation is
        ``eps_tail * psi(n)`` with ``eps_tail = tol / 100`` by default.
    method : summation method (see :mod:`psi_approx.summation`).
    full_output : return an :class:`ErrorResult` instead of the value.

    The value is ``inf`` when ``psi`` is not log-integrable and
    ``sin(beta pi / 2) != 0``.
    """
    K = _kernel(psi, beta, n, p, tol, method, s, phi_table, backend, eps_tail)
    if not psi.log_integrable and K._sin != 0.0:
        # sum psi(k) sin(kt) is then not the Fourier series of an integrable function
        if not full_output:
            return math.inf
        return ErrorResult(math.inf, 0.0, math.inf, 0.0, K.psi_n, K.n, K.p, method)
    l1, err = l1_norm_periodic(K.normalized, tol, n_panels=_n_panels(K.n), delta=guard_width(K.n),
                               window_depth=K.window_depth, full_output=True)
    ratio = l1 / math.pi
    ratio_err = err / math.pi + 2.0 * K.eps_tail
    if not full_output:
        return K.psi_n * ratio
    return ErrorResult(K.psi_n * ratio, K.psi_n * ratio_err, ratio, ratio_err, K.psi_n,
                       K.n, K.p, method)


def _signed_pieces_integral(f, lo, hi, v, max_len, tol):
    """``sum_i v_i int_{lo_i}^{hi_i} f`` with pieces pre-split to ``max_len``."""
    counts = np.maximum(1, np.ceil((hi - lo) / max_len).astype(int))
    idx = np.repeat(np.arange(lo.size), counts)
    offs = np.arange(idx.size) - np.repeat(np.cumsum(counts) - counts, counts)
    step = (hi - lo) / counts
    a = lo[idx] + offs * step[idx]
    b = np.where(offs + 1 == counts[idx], hi[idx], a + step[idx])
    total, err = 0.0, 0.0
    for val in np.unique(v[idx]):
        sel = v[idx] == val
        iv, ie = integrate(f, a[sel], b[sel], tol, full_output=True)
        total += val * iv
        err += abs(val) * ie
    return total, err


def lower_bound_extremal(psi: PsiSpec, beta: float, n: int, p: int | None = None,
                         tol: float = 1e-8, *, method: str = "U_psi", phi: str = "extremal",
                         s: float | None = None, phi_table=None, backend: str = "auto",
                         full_output: bool = False):
    """``|(1/pi) int phi K|`` for a specific admissible ``phi``.

    ``phi="extremal"`` uses the piecewise-constant extremal derivative of
    :mod:`psi_approx.psi_class`; ``phi="sign"`` uses ``sign(K)`` located by
    root finding, which attains the class error.
    """
    K = _kernel(psi, beta, n, p, tol, method, s, phi_table, backend, None)
    max_len = 0.5 * math.pi / K.n
    if phi == "extremal":
        pieces = extremal_pieces(ClassParams(psi, beta), K.n, K.p)
        lo = np.concatenate([[-math.pi], pieces.lo, [1.0]])
        hi = np.concatenate([[-1.0], pieces.hi, [math.pi]])
        v = np.concatenate([[pieces.c], pieces.v, [pieces.c]])
        keep = v != 0
        total, err = _signed_pieces_integral(K.normalized, lo[keep], hi[keep], v[keep],
                                             max_len, tol)
    elif phi == "sign":
        half = _n_panels(K.n) // 2
        delta = guard_width(K.n)
        pts = np.concatenate([
            sign_change_partition(K.normalized, np.linspace(-math.pi, -delta, half + 1)),
            sign_change_partition(K.normalized, np.linspace(delta, math.pi, half + 1)),
        ])
        lo, hi = pts[:-1], pts[1:]
        keep = hi > lo
        keep &= ~((lo < 0) & (hi > 0))
        lo, hi = lo[keep], hi[keep]
        v = np.sign(K.normalized(0.5 * (lo + hi)))
        total, err = _signed_pieces_integral(K.normalized, lo, hi, v, max_len, tol)
        w_value, w_err = window_mass(K.normalized, delta, K.window_depth, tol)
        total += w_value
        err += w_err
    else:
        raise ParameterError(f"phi must be 'extremal' or 'sign', got {phi!r}")
    ratio = abs(float(total)) / math.pi
    ratio_err = float(err) / math.pi + 2.0 * K.eps_tail
    if not full_output:
        return K.psi_n * ratio
    return ErrorResult(K.psi_n * ratio, K.psi_n * ratio_err, ratio, ratio_err, K.psi_n,
                       K.n, K.p, method)


def deviation_at_zero(f: TrigCoeffs, mult: MultiplierSet) -> float:
    """``f(0) - U(f)(0) = sum_k (1 - lambda_k) a_k(f)`` with ``lambda_k = 0`` for ``k >= n``."""
    lam = np.zeros(f.m)
    upto = min(f.m, mult.n - 1)
    lam[:upto] = mult.lam[1:upto + 1]
    return math.fsum((1.0 - lam) * f.a)
