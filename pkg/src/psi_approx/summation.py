"""Multiplier tables of the sums ``U_{n,p}`` and their classical special cases.

Every method fits the pattern

    lambda(k) = 1                       for 0 <= k <= n - p,
    lambda(k) = 1 - phi(k) / phi(n)     for n - p < k <= n - 1,

with ``phi`` chosen per method (``phi(k) = (k - n + p) / psi(k)`` for
``U_psi``, ``k - n + p`` for de la Vallee Poussin, ``k^s`` for Zygmund,
``k`` for Fejer). Fourier sums are the ``p = 1`` case.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .fourier_core import TrigCoeffs
from .psi_catalog import PsiSpec

METHODS = ("U_psi", "vallee_poussin", "zygmund", "fejer", "fourier", "gen_zygmund")

_ALIASES = {
    "u": "U_psi", "u_psi": "U_psi", "upsi": "U_psi",
    "vp": "vallee_poussin", "vallee_poussin": "vallee_poussin",
    "zygmund": "zygmund", "z": "zygmund",
    "fejer": "fejer",
    "fourier": "fourier", "s": "fourier",
    "genz": "gen_zygmund", "gen_zygmund": "gen_zygmund",
}

# methods that are defined only for p = n
_FULL_RAMP = ("zygmund", "fejer", "gen_zygmund")


@dataclass(frozen=True, eq=False)
class MultiplierSet:
    """``lambda(k)`` for ``k = 0..n-1`` plus the method that produced it."""

    n: int
    p: int
    lam: np.ndarray = field(repr=False)
    method: str
    params: dict = field(default_factory=dict)

    def ramp(self) -> np.ndarray:
        """Harmonics ``n-p+1 .. n-1`` where ``lambda`` may differ from 1."""
        return np.arange(self.n - self.p + 1, self.n)


def canonical_method(name: str) -> str:
    key = name.strip()
    if key in METHODS:
        return key
    try:
        return _ALIASES[key.lower()]
    except KeyError:
        raise ParameterError(f"unknown summation method {name!r}") from None


def ramp_multipliers(n: int, p: int, phi) -> np.ndarray:
    """Lambda table for an arbitrary increasing ``phi`` (callable on arrays)."""
    _check_np(n, p)
    lam = np.ones(n)
    k = np.arange(n - p + 1, n)
    if k.size:
        phi_n = float(phi(np.array([float(n)]))[0])
        if not phi_n > 0:
            raise ParameterError(f"phi(n) must be positive, got {phi_n}")
        lam[k] = 1.0 - phi(k.astype(float)) / phi_n
    return lam


def _check_np(n, p):
    if int(n) != n or int(p) != p:
        raise ParameterError("n and p must be integers")
    if not 1 <= p <= n:
        raise ParameterError(f"need 1 <= p <= n, got n={n}, p={p}")


def _check_increasing(values, what):
    if np.any(np.diff(values) <= 0):
        raise ParameterError(f"{what} must be strictly increasing on the ramp")


def build_multipliers(method: str, n: int, p: int | None = None, *,
                      psi: PsiSpec | None = None, s: float | None = None,
                      phi_table=None) -> MultiplierSet:
    """Build the multiplier table of a summation method.

    Parameters
    ----------
    method : str
        One of :data:`METHODS` or a CLI alias (``u``, ``vp``, ``genz``...).
    n, p : int
        Order and ramp width, ``1 <= p <= n``. ``fourier`` requires
        ``p = 1`` and the Zygmund-type methods require ``p = n``; ``p`` may
        be omitted for those.
    psi : PsiSpec
        Required by ``U_psi``.
    s : float
        Zygmund exponent.
    phi_table : sequence
        ``phi(0..n)`` for ``gen_zygmund``; strictly increasing, ``phi(n) > 0``.
    """
    method = canonical_method(method)
    n = int(n)
    if p is None:
        p = 1 if method == "fourier" else n if method in _FULL_RAMP else None
        if p is None:
            raise ParameterError(f"{method} needs p")
    p = int(p)
    _check_np(n, p)
    if method in _FULL_RAMP and p != n:
        raise ParameterError(f"{method} is defined for p = n only (got p={p}, n={n})")
    if method == "fourier" and p != 1:
        raise ParameterError(f"fourier sums have p = 1 (got p={p})")

    params = {}
    if method == "U_psi":
        if psi is None:
            raise ParameterError("U_psi needs psi")
        k = np.arange(n - p + 1, n + 1, dtype=float)
        phi_vals = np.concatenate([[0.0], (k - n + p) / psi(k)])
        _check_increasing(phi_vals, "phi(k) = (k - n + p) / psi(k)")
        lam = np.ones(n)
        ramp = np.arange(n - p + 1, n)
        # 1 - phi(k)/phi(n) with phi(n) = p / psi(n)
        lam[ramp] = 1.0 - (ramp - n + p) * float(psi(float(n))) / (p * psi(ramp.astype(float)))
        params["psi"] = psi
    elif method in ("vallee_poussin", "fejer"):
        # closed form (n - k) / p; fejer is the p = n case
        lam = np.ones(n)
        ramp = np.arange(n - p + 1, n)
        lam[ramp] = (n - ramp) / p
    elif method == "fourier":
        lam = np.ones(n)
    elif method == "zygmund":
        if s is None or not s > 0:
            raise ParameterError("zygmund needs s > 0")
        lam = ramp_multipliers(n, p, lambda k: k**s)
        params["s"] = float(s)
    else:
        if phi_table is None:
            if psi is None:
                raise ParameterError("gen_zygmund needs phi_table or psi")
            k = np.arange(n + 1, dtype=float)
            phi_vals = np.zeros(n + 1)
            phi_vals[1:] = k[1:] / psi(k[1:])
            params["psi"] = psi
        else:
            phi_vals = np.asarray(phi_table, dtype=float)
            if phi_vals.size < n + 1:
                raise ParameterError(f"phi_table needs entries phi(0..{n})")
            phi_vals = phi_vals[: n + 1]
        _check_increasing(phi_vals, "phi_table")
        if not phi_vals[n] > 0:
            raise ParameterError("phi(n) must be positive")
        lam = np.ones(n)
        lam[1:] = 1.0 - phi_vals[1:n] / phi_vals[n]
        params["phi"] = phi_vals
    return MultiplierSet(n=n, p=p, lam=lam, method=method, params=params)


def apply_multipliers(mult: MultiplierSet, coeffs: TrigCoeffs) -> TrigCoeffs:
    """``U(f) = sum_{k<n} lambda(k) A_k(f)``; the result has ``m = n - 1``."""
    c = coeffs.padded(mult.n - 1)
    lam = mult.lam[1:]
    return TrigCoeffs(c.a0, lam * c.a, lam * c.b)
