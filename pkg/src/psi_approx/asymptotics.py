"""Predicted main terms ``psi(n) (4/pi^2) A`` of the class error and remainder extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError
from .psi_catalog import PsiSpec, characteristics

FOUR_OVER_PI2 = 4.0 / math.pi**2

# T(n) within this relative distance of 1 or p counts as equal, which
# absorbs the rounding of the numerically inverted characteristic
SNAP_RTOL = 1e-12

VARIANTS = ("U", "fourier", "zygmund")


@dataclass(frozen=True)
class AsymptoticEstimate:
    A: float
    case_tag: str
    main_term: float
    T_n: float
    psi_n: float
    n: int
    p: int
    variant: str


def _snap(T: float, target: float) -> float:
    return target if abs(T - target) <= SNAP_RTOL * target else T


def _three_cases(T: float, p: float):
    T = _snap(_snap(T, 1.0), p)
    if T <= 1.0:
        return math.log(p), "T_le_1"
    if T <= p:
        return math.log(p / T), "one_le_T_le_p"
    return math.log(T / p), "T_ge_p"


def compute_A(variant: str, psi: PsiSpec, n: int, p: int | None = None) -> AsymptoticEstimate:
    """Logarithmic constant ``A`` of the main term for a summation variant.

    ``U`` uses the three cases in ``T(n)`` versus ``1`` and ``p``;
    ``fourier`` (``p = 1``) uses ``ln+ T(n)``; ``zygmund`` is the ``U``
    rule at ``p = n``.
    """
    if variant not in VARIANTS:
        raise ParameterError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if int(n) != n or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    if variant == "fourier":
        if p not in (None, 1):
            raise ParameterError("the fourier variant has p = 1")
        p = 1
    elif variant == "zygmund":
        if p not in (None, n):
            raise ParameterError("the zygmund variant has p = n")
        p = n
    elif p is None or int(p) != p or not 1 <= p <= n:
        raise ParameterError(f"need 1 <= p <= n, got p={p!r}, n={n}")
    p = int(p)
    ch = characteristics(psi, float(n))
    T = ch.T
    if variant == "fourier":
        A, tag = max(0.0, math.log(_snap(T, 1.0))), "fourier"
    else:
        A, tag = _three_cases(T, float(p))
        if variant == "zygmund":
            tag = "zygmund_" + tag
    return AsymptoticEstimate(A, tag, ch.psi * FOUR_OVER_PI2 * A, T, ch.psi, n, p, variant)


def vp_main_term(alpha: float, n: int, p: int) -> float:
    """Leading term of the de la Vallee Poussin error on ``psi(k) = e^{-alpha k}``."""
    if not alpha > 0:
        raise ParameterError("alpha must be positive")
    if not 1 <= p <= n:
        raise ParameterError(f"need 1 <= p <= n, got n={n}, p={p}")
    return math.exp(-alpha * (n - p + 1)) * 4.0 / (p * math.pi * -math.expm1(-2.0 * alpha))


def remainder(psi: PsiSpec, beta: float, n: int, p: int, measured_error: float,
              variant: str = "U") -> float:
    """``measured_error / psi(n) - (4/pi^2) A``; bounded in ``n``, ``p``, ``beta`` by the theory.

    ``beta`` does not enter the prediction; it is accepted so calls mirror
    the class parameters of the measurement.
    """
    est = compute_A(variant, psi, n, p)
    return measured_error / est.psi_n - FOUR_OVER_PI2 * est.A


def remainder_from_ratio(ratio: float, estimate: AsymptoticEstimate) -> float:
    """Same as :func:`remainder` from a precomputed ``error / psi(n)``.

    Preferred when ``psi(n)`` underflows.
    """
    return ratio - FOUR_OVER_PI2 * estimate.A
