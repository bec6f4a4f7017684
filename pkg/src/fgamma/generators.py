"""Convex generator functions and their Legendre transforms.

A generator is a convex function ``f : (a, b) -> R`` with ``f(1) = 0``,
extended to all of R by limits at finite endpoints and ``+inf`` outside
``[a, b]``.  Everything downstream (divergences, variational objectives,
optimal-measure formulas) consumes the generator through the record type
:class:`ConvexGenerator`, which bundles ``f`` with its convex conjugate
``f*`` and the conjugate's first two derivatives.

Built-in families
-----------------
``kl``          x*log(x), conjugate exp(y-1).
``alpha:<a>``   (x^a - 1)/(a*(a-1)) for a > 0, a != 1.
``chi2``        alias for ``alpha:2`` (the classical chi-square generator
                differs by an affine term that never changes a divergence).

Custom generators built from a bare callable get numeric conjugates via
:func:`legendre`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import InputError

__all__ = [
    "ConvexGenerator",
    "make_kl",
    "make_alpha",
    "from_name",
    "custom_generator",
    "legendre",
]

_XMAX = 1e6  # search ceiling for numeric conjugates
_XMIN = 1e-12


@dataclass(frozen=True)
class ConvexGenerator:
    """A convex generator together with its conjugate calculus.

    Attributes
    ----------
    name : str
        Human-readable identifier ("kl", "alpha:1.5", ...).
    a, b : float
        Endpoints of the effective domain of ``f`` (may be ``inf``).
    f : callable
        The generator itself, extended by limits at finite endpoints and
        ``+inf`` outside ``[a, b]``.  Vectorized over numpy arrays.
    f_star : callable
        Convex conjugate ``f*(y) = sup_x {x*y - f(x)}``, valued in
        ``(-inf, +inf]``.
    f_star_prime : callable
        Derivative of ``f*`` where finite.  For the one-sided families
        this is the left/right-continuous version used by the optimal
        measure formula (0 on the flat branch).
    f_star_second : callable or None
        Second derivative of ``f*`` where it exists; ``None`` when no
        closed form is available (numeric generators).
    admissible : bool
        True when ``f*`` is finite on all of R and bounded below at
        ``-inf`` — the condition for the variational objective to be
        finite for every bounded function.
    strictly_admissible : bool
        True when, additionally, ``f`` is strictly convex on its domain
        (unique optimal measures).
    nu0 : float
        The distinguished shift ``f'(1)`` (right derivative), the fixed
        point ``f*(nu0) = nu0`` with slope one.
    f_prime, f_second : callable or None
        Derivatives of ``f`` itself on the open domain, when available.
        Used by the transport-form solver; numeric fallbacks are applied
        when absent.
    has_closed_star : bool
        Whether ``f_star`` is a closed form (False for numeric ones).
    """

    name: str
    a: float
    b: float
    f: Callable
    f_star: Callable
    f_star_prime: Callable
    f_star_second: Optional[Callable]
    admissible: bool
    strictly_admissible: bool
    nu0: float
    f_prime: Optional[Callable] = None
    f_second: Optional[Callable] = None
    has_closed_star: bool = True

    def __repr__(self):  # keep dataclass noise out of diagnostics
        return f"ConvexGenerator({self.name!r})"


def _as_float_array(x):
    return np.asarray(x, dtype=float)


def _scalar_like(x, out):
    """Return a python float when the input was scalar, else the array."""
    if np.ndim(x) == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# KL family
# ---------------------------------------------------------------------------

def make_kl() -> ConvexGenerator:
    """Generator x*log(x) on (0, inf); conjugate exp(y-1)."""

    def f(x):
        xv = _as_float_array(x)
        out = np.full(xv.shape, np.inf)
        pos = xv > 0
        out[pos] = xv[pos] * np.log(xv[pos])
        out[xv == 0] = 0.0  # limit of x*log(x) at 0+
        return _scalar_like(x, out)

    def f_star(y):
        yv = _as_float_array(y)
        return _scalar_like(y, np.exp(yv - 1.0))

    def f_prime(x):
        xv = _as_float_array(x)
        out = np.full(xv.shape, -np.inf)
        pos = xv > 0
        out[pos] = np.log(xv[pos]) + 1.0
        return _scalar_like(x, out)

    def f_second(x):
        xv = _as_float_array(x)
        with np.errstate(divide="ignore"):
            out = np.where(xv > 0, 1.0 / np.where(xv > 0, xv, 1.0), np.inf)
        return _scalar_like(x, out)

    return ConvexGenerator(
        name="kl",
        a=0.0,
        b=math.inf,
        f=f,
        f_star=f_star,
        f_star_prime=f_star,
        f_star_second=f_star,
        admissible=True,
        strictly_admissible=True,
        nu0=1.0,
        f_prime=f_prime,
        f_second=f_second,
    )


# ---------------------------------------------------------------------------
# alpha family
# ---------------------------------------------------------------------------

def make_alpha(alpha: float) -> ConvexGenerator:
    """Generator (x^alpha - 1) / (alpha*(alpha-1)) on (0, inf).

    For alpha > 1 the conjugate is finite on all of R (admissible); for
    alpha in (0, 1) it is ``+inf`` on [0, inf) and the family is not
    admissible, which restricts the variational argument to a half-line.
    """
    alpha = float(alpha)
    if not (alpha > 0.0) or alpha == 1.0:
        raise InputError(f"alpha must be positive and != 1, got {alpha}")
    c = 1.0 / (alpha * (alpha - 1.0))
    am1 = alpha - 1.0

    def f(x):
        xv = _as_float_array(x)
        out = np.full(xv.shape, np.inf)
        pos = xv > 0
        out[pos] = (xv[pos] ** alpha - 1.0) * c
        out[xv == 0] = -c  # limit of (x^alpha - 1)*c at 0+
        return _scalar_like(x, out)

    if alpha > 1.0:
        # f*(y) = k * y^{alpha/(alpha-1)} + c on y > 0, = c on y <= 0
        k = am1 ** (alpha / am1) / alpha
        expo = alpha / am1

        def f_star(y):
            yv = _as_float_array(y)
            out = np.full(yv.shape, c)
            pos = yv > 0
            out[pos] = k * yv[pos] ** expo + c
            return _scalar_like(y, out)

        def f_star_prime(y):
            yv = _as_float_array(y)
            out = np.zeros(yv.shape)
            pos = yv > 0
            out[pos] = (am1 * yv[pos]) ** (1.0 / am1)
            return _scalar_like(y, out)

        def f_star_second(y):
            yv = _as_float_array(y)
            out = np.zeros(yv.shape)
            pos = yv > 0
            out[pos] = (am1 * yv[pos]) ** ((2.0 - alpha) / am1)
            return _scalar_like(y, out)

        admissible = True
    else:
        # alpha in (0, 1): f*(y) = k * |y|^{-alpha/(1-alpha)} + c on y < 0,
        # +inf on y >= 0.  Note c < 0 here.
        oma = 1.0 - alpha
        k = oma ** (-alpha / oma) / alpha

        def f_star(y):
            yv = _as_float_array(y)
            out = np.full(yv.shape, np.inf)
            neg = yv < 0
            out[neg] = k * np.abs(yv[neg]) ** (-alpha / oma) + c
            return _scalar_like(y, out)

        def f_star_prime(y):
            yv = _as_float_array(y)
            out = np.full(yv.shape, np.inf)
            neg = yv < 0
            out[neg] = (oma * np.abs(yv[neg])) ** (-1.0 / oma)
            return _scalar_like(y, out)

        def f_star_second(y):
            yv = _as_float_array(y)
            out = np.full(yv.shape, np.inf)
            neg = yv < 0
            # same unified form ((alpha-1)*y)^{(2-alpha)/(alpha-1)}
            out[neg] = (oma * np.abs(yv[neg])) ** ((2.0 - alpha) / am1)
            return _scalar_like(y, out)

        admissible = False

    def f_prime(x):
        xv = _as_float_array(x)
        out = np.full(xv.shape, -np.inf if alpha > 1 else np.inf)
        pos = xv > 0
        out[pos] = xv[pos] ** am1 / am1
        return _scalar_like(x, out)

    def f_second(x):
        xv = _as_float_array(x)
        out = np.full(xv.shape, np.inf)
        pos = xv > 0
        out[pos] = xv[pos] ** (alpha - 2.0)
        return _scalar_like(x, out)

    return ConvexGenerator(
        name=f"alpha:{alpha:g}",
        a=0.0,
        b=math.inf,
        f=f,
        f_star=f_star,
        f_star_prime=f_star_prime,
        f_star_second=f_star_second,
        admissible=admissible,
        strictly_admissible=admissible,
        nu0=1.0 / am1,
        f_prime=f_prime,
        f_second=f_second,
    )


def from_name(spec: str) -> ConvexGenerator:
    """Parse a generator name: "kl", "chi2", or "alpha:<value>"."""
    s = spec.strip().lower()
    if s == "kl":
        return make_kl()
    if s == "chi2":
        return replace(make_alpha(2.0), name="chi2")
    if s.startswith("alpha:"):
        try:
            val = float(s.split(":", 1)[1])
        except ValueError:
            raise InputError(f"bad alpha value in generator spec {spec!r}") from None
        return make_alpha(val)
    raise InputError(f"unknown generator {spec!r}; expected kl, chi2 or alpha:<value>")


# ---------------------------------------------------------------------------
# Numeric Legendre transform
# ---------------------------------------------------------------------------

def legendre(gen: ConvexGenerator, y, force_numeric: bool = False):
    """Convex conjugate ``f*(y) = sup_x {x*y - f(x)}``.

    Uses the generator's closed form when it has one, otherwise (or when
    ``force_numeric`` is set) maximizes numerically: the bracket
    ``[max(a, 1e-12), min(b, 2)]`` is expanded geometrically while the
    objective keeps increasing, the result is declared ``+inf`` if it is
    still increasing at ``x = 1e6``, and the interior maximum is located
    by bisection on ``f'`` when the generator has one, else by
    golden-section, to an absolute value tolerance of about 1e-10.
    """
    if gen.has_closed_star and not force_numeric:
        return gen.f_star(y)
    yv = _as_float_array(y)
    out = np.empty(yv.shape)
    flat = yv.reshape(-1)
    res = out.reshape(-1)
    for i, yi in enumerate(flat):
        res[i] = _legendre_scalar(gen, float(yi))
    return _scalar_like(y, out)


def _legendre_scalar(gen: ConvexGenerator, y: float) -> float:
    h = lambda x: y * x - gen.f(x)
    lo = max(gen.a, _XMIN)
    hi = min(gen.b, 2.0)
    if hi <= lo:
        hi = lo * 2.0
    # expand right while the objective still increases
    while hi < min(gen.b, _XMAX):
        if h(hi) > h(0.5 * hi):
            hi = min(hi * 2.0, gen.b, _XMAX)
        else:
            break
    if hi >= _XMAX and h(hi) > h(0.5 * hi):
        return math.inf  # supremum diverges along x -> inf
    if gen.f_prime is not None:
        # stationarity f'(x) = y; f' is nondecreasing
        if gen.f_prime(lo) >= y:
            return h(lo)
        if gen.f_prime(hi) <= y:
            return h(hi)
        a, b = lo, hi
        for _ in range(200):
            m = 0.5 * (a + b)
            if gen.f_prime(m) < y:
                a = m
            else:
                b = m
            if b - a < 1e-13 * max(1.0, abs(a)):
                break
        return h(0.5 * (a + b))
    return _golden_max(h, lo, hi)


def _golden_max(h, a: float, b: float) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    hc, hd = h(c), h(d)
    for _ in range(300):
        if hc >= hd:
            b, d, hd = d, c, hc
            c = b - invphi * (b - a)
            hc = h(c)
        else:
            a, c, hc = c, d, hd
            d = a + invphi * (b - a)
            hd = h(d)
        if abs(b - a) < 1e-12 * max(1.0, abs(a), abs(b)) and abs(hd - hc) < 1e-11:
            break
    return max(hc, hd)


# ---------------------------------------------------------------------------
# Custom generators from bare callables
# ---------------------------------------------------------------------------

def custom_generator(
    f: Callable[[float], float],
    a: float = 0.0,
    b: float = math.inf,
    name: str = "custom",
    f_prime: Optional[Callable] = None,
    nu0: Optional[float] = None,
    rng_seed: int = 0,
) -> ConvexGenerator:
    """Wrap a scalar convex callable into a full generator record.

    The conjugate and its first derivative are numeric (ceiling 1e6), the
    second derivative is unavailable.  Convexity is spot-checked on 64
    random midpoints inside the domain; a violation raises InputError.
    Admissibility is probed numerically and therefore heuristic.
    """
    a, b = float(a), float(b)

    def f_ext(x):
        xv = _as_float_array(x)
        out = np.empty(xv.shape)
        flat = xv.reshape(-1)
        res = out.reshape(-1)
        for i, xi in enumerate(flat):
            xi = float(xi)
            if xi < a or xi > b:
                res[i] = np.inf
            elif xi == a:
                res[i] = f(a + 1e-9 * max(1.0, abs(a)))
            elif xi == b:
                res[i] = f(b - 1e-9 * max(1.0, abs(b)))
            else:
                res[i] = f(xi)
        return _scalar_like(x, out)

    # convexity spot check on random midpoints
    rng = np.random.Generator(np.random.Philox(rng_seed))
    lo = a if math.isfinite(a) else -10.0
    hi = b if math.isfinite(b) else lo + 20.0
    span = hi - lo
    for _ in range(64):
        x1 = lo + span * rng.random() * 0.999 + 1e-6 * span
        x2 = lo + span * rng.random() * 0.999 + 1e-6 * span
        mid = 0.5 * (x1 + x2)
        lhs = f_ext(mid)
        rhs = 0.5 * (f_ext(x1) + f_ext(x2))
        if lhs > rhs + 1e-9 * max(1.0, abs(rhs)):
            raise InputError(
                f"callable violates midpoint convexity at x={mid:.6g}: "
                f"f(mid)={lhs:.6g} > {rhs:.6g}"
            )

    if abs(f_ext(1.0)) > 1e-9:
        raise InputError(f"generator must vanish at 1, got f(1)={f_ext(1.0):.6g}")

    stub = ConvexGenerator(
        name=name, a=a, b=b, f=f_ext,
        f_star=lambda y: y,  # replaced below
        f_star_prime=lambda y: y,
        f_star_second=None,
        admissible=False, strictly_admissible=False,
        nu0=0.0, f_prime=f_prime, f_second=None,
        has_closed_star=False,
    )

    def f_star(y):
        return legendre(stub, y, force_numeric=True)

    def f_star_prime(y):
        yv = _as_float_array(y)
        out = np.empty(yv.shape)
        flat = yv.reshape(-1)
        res = out.reshape(-1)
        for i, yi in enumerate(flat):
            hstep = 1e-5 * max(1.0, abs(yi))
            fp = f_star(float(yi) + hstep)
            fm = f_star(float(yi) - hstep)
            if math.isinf(fp) or math.isinf(fm):
                res[i] = np.inf
            else:
                res[i] = (fp - fm) / (2.0 * hstep)
        return _scalar_like(y, out)

    big = 50.0
    admissible = math.isfinite(f_star(big)) and math.isfinite(f_star(-1e6))
    if nu0 is None:
        if f_prime is not None:
            nu0 = float(f_prime(1.0))
        else:
            eps = 1e-7
            nu0 = float((f_ext(1.0 + eps) - f_ext(1.0)) / eps)

    return ConvexGenerator(
        name=name, a=a, b=b, f=f_ext,
        f_star=f_star, f_star_prime=f_star_prime, f_star_second=None,
        admissible=admissible, strictly_admissible=False,
        nu0=nu0, f_prime=f_prime, f_second=None,
        has_closed_star=False,
    )
