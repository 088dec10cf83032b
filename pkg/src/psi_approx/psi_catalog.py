"""Decreasing convex weights ``psi`` and their half-decay characteristics.

Every weight is a frozen dataclass. Evaluation is vectorized over numpy
arrays; ``psi.log(t)`` is provided separately because the characteristics
are computed in log space (``psi(t)`` itself underflows for the fast
families long before ``eta(t)`` becomes large).

For ``t >= 1``:

* ``eta(t) = psi^{-1}(psi(t) / 2)``, the point where ``psi`` has halved,
* ``T(t) = eta(t) - t``, the half-decay period,
* ``mu(t) = t / T(t)``, the half-decay modulus.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, NonConvergenceError, ParameterError

LN2 = math.log(2.0)

#: Default relative tolerance of :func:`inverse_psi`.
TOL_INV = 1e-12

#: Tabulated weights must end below ``TAB_FLOOR * psi(first knot)``.
TAB_FLOOR = 1e-2

_MAX_BISECTIONS = 400
_MAX_EXPANSIONS = 2000


@dataclass(frozen=True)
class PsiSpec:
    """Base class of the weight families.

    Subclasses declare their shape parameters followed by ``scale``; the
    weight is ``scale * shape(t)``.
    """

    #: Whether ``psi`` continues analytically into ``Re z >= 1, Im z >= 0``
    #: with decay, which the contour evaluation of kernel tails requires.
    analytic = False
    #: Whether ``int_1^inf psi(t) / t dt`` is finite. Without it the kernel
    #: of any class with ``sin(beta pi / 2) != 0`` is not integrable.
    log_integrable = True

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ParameterError(f"scale must be positive and finite, got {self.scale!r}")

    @property
    def t_min(self) -> float:
        return 1.0

    @property
    def t_max(self) -> float:
        return math.inf

    def __call__(self, t):
        return self.scale * self._shape(np.asarray(t, dtype=float))

    def log(self, t):
        """Natural logarithm of ``psi(t)`` (never underflows)."""
        return math.log(self.scale) + self._log_shape(np.asarray(t, dtype=float))

    def complex(self, z):
        """Analytic continuation of ``psi`` at complex ``z``."""
        if not self.analytic:
            raise DomainError(f"{self.to_string()} has no analytic continuation")
        return self.scale * self._shape_complex(np.asarray(z, dtype=complex))

    def scaled(self, c: float) -> "PsiSpec":
        """Return ``c * psi``."""
        from dataclasses import replace

        return replace(self, scale=self.scale * c)

    # family hooks -------------------------------------------------------

    def _shape(self, t):
        return np.exp(self._log_shape(t))

    def _log_shape(self, t):
        raise NotImplementedError

    def _shape_complex(self, z):
        raise NotImplementedError

    def _inverse_log_shape(self, s):
        """Closed-form ``t`` with ``log shape(t) = s``, or ``None``."""
        return None

    def _params(self) -> dict:
        return {}

    def to_string(self) -> str:
        """Render in the ``family:key=value,...`` syntax of :func:`parse_psi`."""
        params = dict(self._params())
        if self.scale != 1.0:
            params["c"] = self.scale
        name = _FAMILY_NAMES[type(self)]
        if not params:
            return name
        return name + ":" + ",".join(f"{k}={v!r}" for k, v in params.items())


@dataclass(frozen=True)
class Power(PsiSpec):
    """``psi(t) = t^{-r}``."""

    analytic = True

    r: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if not self.r > 0:
            raise ParameterError(f"power: r must be positive, got {self.r!r}")

    def _shape(self, t):
        return t ** (-self.r)

    def _log_shape(self, t):
        return -self.r * np.log(t)

    def _shape_complex(self, z):
        return z ** (-self.r)

    def _inverse_log_shape(self, s):
        return np.exp(-s / self.r)

    def _params(self):
        return {"r": self.r}


@dataclass(frozen=True)
class PowerLog(PsiSpec):
    """``psi(t) = 1 / (t^r ln(t + b))`` with ``b >= 1``."""

    analytic = True

    r: float = 1.0
    b: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if not self.r > 0:
            raise ParameterError(f"powerlog: r must be positive, got {self.r!r}")
        if not self.b >= 1:
            raise ParameterError(f"powerlog: b must be >= 1, got {self.b!r}")

    def _shape(self, t):
        return 1.0 / (t**self.r * np.log(t + self.b))

    def _log_shape(self, t):
        return -self.r * np.log(t) - np.log(np.log(t + self.b))

    def _shape_complex(self, z):
        return 1.0 / (z**self.r * np.log(z + self.b))

    def _params(self):
        return {"r": self.r, "b": self.b}


@dataclass(frozen=True)
class Exp(PsiSpec):
    """``psi(t) = exp(-alpha t^r)``.

    Not flagged analytic: for ``r >= 1`` the continuation oscillates or
    grows along vertical lines, so kernel tails use partial sums instead.
    """

    alpha: float = 1.0
    r: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if not (self.alpha > 0 and self.r > 0):
            raise ParameterError(
                f"exp: alpha and r must be positive, got alpha={self.alpha!r}, r={self.r!r}"
            )

    def _log_shape(self, t):
        return -self.alpha * t**self.r

    def _inverse_log_shape(self, s):
        return (-s / self.alpha) ** (1.0 / self.r)

    def _params(self):
        return {"alpha": self.alpha, "r": self.r}

    def tail_integral(self, m: float) -> float:
        """Upper bound ``int_m^inf psi(u) du`` for ``sum_{k>m} psi(k)``."""
        from scipy.special import gamma, gammaincc

        a = 1.0 / self.r
        return self.scale * gamma(a) * gammaincc(a, self.alpha * m**self.r) / (
            self.r * self.alpha**a
        )


@dataclass(frozen=True)
class Log(PsiSpec):
    """``psi(t) = 1 / ln(t + 1)``."""

    analytic = True
    log_integrable = False

    scale: float = 1.0

    def _shape(self, t):
        return 1.0 / np.log(t + 1.0)

    def _log_shape(self, t):
        return -np.log(np.log(t + 1.0))

    def _shape_complex(self, z):
        return 1.0 / np.log(z + 1.0)

    def _inverse_log_shape(self, s):
        return np.expm1(np.exp(-s))


@dataclass(frozen=True, eq=False)
class Tabulated(PsiSpec):
    """Weight given by knots ``(t, psi)``, interpolated monotonically in log space.

    The table is validated on construction: values positive, non-increasing
    and convex (checked on the knots and on a sampled grid of the
    interpolant, with tolerance ``1e-9 * psi(t_0)``), and the last value
    below ``floor * psi(t_0)``.
    """

    knots: tuple = ()
    scale: float = 1.0
    floor: float = field(default=TAB_FLOOR, compare=False)
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        super().__post_init__()
        knots = tuple((float(t), float(v)) for t, v in self.knots)
        object.__setattr__(self, "knots", knots)
        if len(knots) < 3:
            raise ParameterError("tabulated psi needs at least 3 knots")
        t, v = self._t, self._v
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(v)):
            raise ParameterError("tabulated psi: non-finite knot")
        if t[0] < 1:
            raise ParameterError(f"tabulated psi: knots must satisfy t >= 1, got {t[0]}")
        if np.any(np.diff(t) <= 0):
            raise ParameterError("tabulated psi: knot abscissae must be strictly increasing")
        if np.any(v <= 0):
            raise ParameterError("tabulated psi: values must be positive")
        tol = 1e-9 * v[0]
        if np.any(np.diff(v) > tol):
            raise ParameterError("tabulated psi: values must be non-increasing")
        slopes = np.diff(v) / np.diff(t)
        if np.any(np.diff(slopes) * np.diff(t)[1:] < -tol):
            raise ParameterError("tabulated psi: knots are not convex")
        if v[-1] > self.floor * v[0]:
            raise ParameterError(
                f"tabulated psi: last value {v[-1]:g} is not below the floor "
                f"{self.floor:g} * psi(t_0)"
            )
        grid = np.linspace(t[0], t[-1], 1025)
        vals = self._shape(grid)
        if np.any(np.diff(vals) > tol):
            raise ParameterError("tabulated psi: interpolant is not non-increasing")
        if np.any(vals[:-2] - 2 * vals[1:-1] + vals[2:] < -tol):
            raise ParameterError("tabulated psi: interpolant is not convex")

    @property
    def _t(self):
        return np.array([k[0] for k in self.knots])

    @property
    def _v(self):
        return np.array([k[1] for k in self.knots])

    @cached_property
    def _interp(self):
        return PchipInterpolator(self._t, np.log(self._v), extrapolate=False)

    @property
    def t_min(self) -> float:
        return self.knots[0][0]

    @property
    def t_max(self) -> float:
        return self.knots[-1][0]

    def _log_shape(self, t):
        return self._interp(t)

    def __hash__(self):
        return hash((self.knots, self.scale))

    def __eq__(self, other):
        return (
            isinstance(other, Tabulated)
            and self.knots == other.knots
            and self.scale == other.scale
        )

    def to_string(self) -> str:
        base = f"tab:file={self.source}" if self.source else "tab"
        return base + (f",c={self.scale!r}" if self.scale != 1.0 else "")

    @classmethod
    def from_csv(cls, path, **kwargs) -> "Tabulated":
        """Read knots from a CSV file with header ``t,psi``."""
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"t", "psi"} <= set(reader.fieldnames):
                raise ParameterError(f"{path}: expected CSV header 't,psi'")
            knots = tuple((float(row["t"]), float(row["psi"])) for row in reader)
        return cls(knots=knots, source=str(path), **kwargs)


_FAMILY_NAMES = {Power: "power", PowerLog: "powerlog", Exp: "exp", Log: "log", Tabulated: "tab"}


@dataclass(frozen=True)
class PsiCharacteristics:
    t: float
    psi: float
    eta: float
    T: float
    mu: float


@dataclass(frozen=True)
class Classification:
    """Grid-level evidence for membership in ``M_C``, ``M_inf^+`` and ``F``.

    These are trend checks on a finite grid, not proofs.
    """

    t_grid: np.ndarray = field(repr=False)
    in_Mc: bool
    mc_min: float
    mc_max: float
    in_Minf_plus: bool
    mu_min: float
    mu_max: float
    in_F_numeric: bool
    eta_prime_sup: float


def _check_domain(spec: PsiSpec, t):
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < spec.t_min) or np.any(t > spec.t_max):
        raise DomainError(
            f"{spec.to_string()}: argument outside [{spec.t_min}, {spec.t_max}]"
        )
    return t


def eval_psi(spec: PsiSpec, t):
    """Evaluate ``psi(t)``, raising :class:`DomainError` outside the domain."""
    t = _check_domain(spec, t)
    out = spec(t)
    return float(out) if out.ndim == 0 else out


def _log_inverse(spec: PsiSpec, log_y: float, lo: float, tol: float, method: str) -> float:
    if method not in ("auto", "closed", "numeric"):
        raise ParameterError(f"unknown inverse method {method!r}")
    if method != "numeric":
        closed = spec._inverse_log_shape(log_y - math.log(spec.scale))
        if closed is not None:
            return float(closed)
        if method == "closed":
            raise ParameterError(f"{spec.to_string()} has no closed-form inverse")

    def residual(t):
        return float(spec.log(t)) - log_y

    if residual(lo) < 0:
        lo = spec.t_min
    hi = min(2.0 * lo, spec.t_max)
    for _ in range(_MAX_EXPANSIONS):
        if residual(hi) <= 0:
            break
        if hi >= spec.t_max:
            raise DomainError(f"{spec.to_string()}: target below psi(t_max)")
        lo, hi = hi, min(2.0 * hi, spec.t_max)
    else:
        raise NonConvergenceError("bracket expansion did not reach the target value")

    for _ in range(_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        r = residual(mid)
        if abs(math.expm1(r)) <= tol or mid <= lo or mid >= hi:
            return mid
        if r > 0:
            lo = mid
        else:
            hi = mid
    raise NonConvergenceError("bisection did not converge")


def inverse_psi(spec: PsiSpec, y: float, *, tol: float = TOL_INV, method: str = "auto") -> float:
    """Return ``t >= t_min`` with ``psi(t) = y`` up to ``tol * y``.

    Closed forms are used for ``power``, ``exp`` and ``log`` unless
    ``method="numeric"``; otherwise bisection after geometric bracket
    expansion.
    """
    y = float(y)
    top = float(spec(spec.t_min))
    if not (0 < y <= top * (1 + 1e-15)):
        raise DomainError(f"{spec.to_string()}: inverse requires 0 < y <= psi(t_min) = {top}")
    return _log_inverse(spec, math.log(y), spec.t_min, tol, method)


def characteristics(spec: PsiSpec, t: float, *, tol: float = TOL_INV,
                    method: str = "auto") -> PsiCharacteristics:
    t = float(_check_domain(spec, t))
    target = float(spec.log(t)) - LN2
    eta = _log_inverse(spec, target, t, tol, method)
    if not eta > t:
        raise NonConvergenceError(f"eta({t}) = {eta} is not beyond t")
    period = eta - t
    return PsiCharacteristics(t=t, psi=float(spec(t)), eta=eta, T=period, mu=t / period)


def half_decay_period(spec: PsiSpec, t: float) -> float:
    return characteristics(spec, t).T


def classify(spec: PsiSpec, t_range=(1.0, 100.0), samples: int = 64, *,
             mc_ratio_max: float = 4.0, mu_growth: float = 2.0,
             eta_prime_max: float | None = None) -> Classification:
    """Collect grid evidence for the sets ``M_C``, ``M_inf^+`` and ``F``.

    The grid is geometric on ``t_range``. ``in_Mc`` holds when
    ``max(t/T) / min(t/T) <= mc_ratio_max``. ``in_Minf_plus`` requires
    ``mu`` non-decreasing (up to 1e-9 relative) with
    ``mu(t_max) >= mu_growth * mu(t_min)``. ``in_F_numeric`` compares the
    central-difference sup of ``eta'`` against ``eta_prime_max`` when
    given; otherwise it asks that the sup over the upper half of the grid
    is at most twice the sup over the lower half.
    """
    lo, hi = map(float, t_range)
    if not (spec.t_min <= lo < hi):
        raise ParameterError(f"invalid t_range {t_range!r}")
    if samples < 16:
        raise ParameterError("classify needs at least 16 samples")
    grid = np.geomspace(lo, hi, samples)
    chars = [characteristics(spec, t) for t in grid]
    mu = np.array([c.mu for c in chars])

    h = 1e-4 * grid
    lo_pts = np.maximum(grid - h, spec.t_min)
    hi_pts = grid + h
    eta_lo = np.array([characteristics(spec, t).eta for t in lo_pts])
    eta_hi = np.array([characteristics(spec, t).eta for t in hi_pts])
    eta_prime = (eta_hi - eta_lo) / (hi_pts - lo_pts)
    sup = float(eta_prime.max())
    if eta_prime_max is not None:
        in_f = sup <= eta_prime_max
    else:
        half = samples // 2
        in_f = eta_prime[half:].max() <= 2.0 * eta_prime[:half].max()

    nondecreasing = bool(np.all(np.diff(mu) >= -1e-9 * mu[:-1]))
    return Classification(
        t_grid=grid,
        in_Mc=bool(mu.max() / mu.min() <= mc_ratio_max),
        mc_min=float(mu.min()),
        mc_max=float(mu.max()),
        in_Minf_plus=nondecreasing and bool(mu[-1] >= mu_growth * mu[0]),
        mu_min=float(mu.min()),
        mu_max=float(mu.max()),
        in_F_numeric=bool(in_f),
        eta_prime_sup=sup,
    )


_PARAM_ALIASES = {"c": "scale", "scale": "scale"}


def parse_psi(text: str) -> PsiSpec:
    """Parse ``family:key=value,...``.

    Examples: ``power:r=2``, ``exp:alpha=0.693147,r=1``, ``log``,
    ``powerlog:r=1,b=1``, ``tab:file=psi.csv``. Every family accepts
    ``c=<scale>``.
    """
    name, _, rest = text.strip().partition(":")
    name = name.strip().lower()
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ParameterError(f"malformed psi parameter {item!r} in {text!r}")
        params[_PARAM_ALIASES.get(key.strip(), key.strip())] = value.strip()

    families = {"power": Power, "powerlog": PowerLog, "exp": Exp, "log": Log}
    if name in ("tab", "tabulated"):
        if "file" not in params:
            raise ParameterError("tab psi needs file=<path.csv>")
        extra = {k: float(v) for k, v in params.items() if k != "file"}
        return Tabulated.from_csv(params.pop("file"), **extra)
    if name not in families:
        raise ParameterError(f"unknown psi family {name!r}")
    try:
        kwargs = {k: float(v) for k, v in params.items()}
        return families[name](**kwargs)
    except TypeError as exc:
        raise ParameterError(f"bad parameters for {name}: {exc}") from None
    except ValueError as exc:
        if isinstance(exc, ParameterError):
            raise
        raise ParameterError(f"bad parameter value in {text!r}") from None
