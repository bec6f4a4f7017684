"""Function classes, variational building blocks, and gradient penalties.

Three ingredients shared by all solvers and estimators live here:

* :class:`FunctionClass` — the test-function sets Gamma that restrict the
  variational problem: Lipschitz balls (optionally intersected with a
  uniform bound), uniform-bound balls, and feature-linear families for
  sample-based estimation.
* :func:`lambda_f` / :func:`objective_H` — the scalar functionals
  ``inf_nu {nu + E_P[f*(g - nu)]}`` and
  ``E_Q[g - nu] - E_P[f*(g - nu)]`` that every divergence below is built
  from.
* :class:`PenaltySpec` / :func:`gradient_penalty` — soft Lipschitz
  constraints via Monte Carlo gradient-norm penalties on interpolated
  sample points.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InputError
from .generators import ConvexGenerator
from .measures import DiscreteMeasure, MetricSpec, joint_support

__all__ = [
    "FunctionClass",
    "FeatureMap",
    "FeatureLinearFunction",
    "GradientFunction",
    "PenaltySpec",
    "random_fourier_features",
    "polynomial_features",
    "grid_indicator_features",
    "median_pairwise_distance",
    "lambda_f",
    "lambda_f_weights",
    "objective_H",
    "objective_H_weights",
    "gradient_penalty",
]


# ---------------------------------------------------------------------------
# Function classes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeatureMap:
    """A finite feature dictionary x -> (phi_1(x), ..., phi_m(x)).

    ``evaluate`` maps an (n, d) point array to an (n, m) feature matrix;
    ``jacobian``, when available, maps it to the (n, m, d) array of
    spatial derivatives (needed by gradient penalties).
    """

    kind: str
    n_features: int
    dim: int
    evaluate: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __repr__(self):
        return f"FeatureMap({self.kind!r}, m={self.n_features}, d={self.dim})"


def random_fourier_features(dim: int, n_features: int = 128,
                            bandwidth: float = 1.0, seed: int = 0) -> FeatureMap:
    """Random cosine features phi_k(x) = sqrt(2/m) cos(w_k.x + b_k).

    Frequencies are N(0, 1/bandwidth^2) draws from a counter-based
    generator, so the map is fully determined by (dim, m, bandwidth,
    seed).
    """
    if bandwidth <= 0:
        raise InputError(f"bandwidth must be positive, got {bandwidth}")
    rng = np.random.Generator(np.random.Philox(seed))
    omega = rng.normal(0.0, 1.0 / bandwidth, size=(n_features, dim))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=n_features)
    scale = math.sqrt(2.0 / n_features)

    def evaluate(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return scale * np.cos(x @ omega.T + phase)

    def jacobian(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        s = -scale * np.sin(x @ omega.T + phase)  # (n, m)
        return s[:, :, None] * omega[None, :, :]  # (n, m, d)

    return FeatureMap("random-fourier", n_features, dim, evaluate, jacobian)


def polynomial_features(dim: int, degree: int) -> FeatureMap:
    """All monomials of total degree 1..degree (constant omitted: the
    variational shift nu already covers it)."""
    if degree < 1:
        raise InputError("degree must be >= 1")
    exponents = [
        e
        for total in range(1, degree + 1)
        for e in itertools.product(range(total + 1), repeat=dim)
        if sum(e) == total
    ]
    expo = np.asarray(exponents, dtype=float)  # (m, d)
    m = expo.shape[0]

    def evaluate(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.prod(x[:, None, :] ** expo[None, :, :], axis=2)

    def jacobian(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = x.shape[0]
        out = np.zeros((n, m, dim))
        for j in range(dim):
            e = expo.copy()
            coef = e[:, j].copy()
            e[:, j] = np.maximum(e[:, j] - 1.0, 0.0)
            out[:, :, j] = coef[None, :] * np.prod(
                x[:, None, :] ** e[None, :, :], axis=2
            )
        return out

    return FeatureMap("polynomial", m, dim, evaluate, jacobian)


def grid_indicator_features(points, tol: float = 1e-9) -> FeatureMap:
    """One indicator feature per grid point (exact-measure parametrization).

    No spatial jacobian exists, so these features cannot be combined with
    gradient penalties.
    """
    grid = np.atleast_2d(np.asarray(points, dtype=float))
    m, d = grid.shape

    def evaluate(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        dist = np.max(np.abs(x[:, None, :] - grid[None, :, :]), axis=2)
        return (dist <= tol).astype(float)

    return FeatureMap("custom-grid", m, d, evaluate, None)


def median_pairwise_distance(x: np.ndarray) -> float:
    """Median of nonzero pairwise Euclidean distances (bandwidth heuristic)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    diff = x[:, None, :] - x[None, :, :]
    d = np.sqrt(np.sum(diff * diff, axis=-1))
    iu = np.triu_indices(d.shape[0], k=1)
    vals = d[iu]
    vals = vals[vals > 0]
    if vals.size == 0:
        return 1.0
    return float(np.median(vals))


@dataclass(frozen=True)
class FunctionClass:
    """A test-function class Gamma.

    Variants
    --------
    ``lipschitz``       {g : |g(x)-g(y)| <= L c(x,y)}, optionally
                        intersected with {|g| <= bound}.
    ``all-bounded``     {g : |g| <= bound}.
    ``feature-linear``  {theta . phi : |theta_k| <= param_bound}, the
                        estimator parametrization.
    """

    variant: str
    L: float = 1.0
    metric: MetricSpec = field(default_factory=MetricSpec)
    bound: Optional[float] = None
    features: Optional[FeatureMap] = None
    param_bound: Optional[float] = None

    def __post_init__(self):
        if self.variant not in ("lipschitz", "all-bounded", "feature-linear"):
            raise InputError(f"unknown function-class variant {self.variant!r}")
        if self.variant == "lipschitz" and not (self.L > 0):
            raise InputError(f"Lipschitz constant must be positive, got {self.L}")
        if self.variant == "all-bounded" and not (
            self.bound is not None and self.bound > 0
        ):
            raise InputError("all-bounded class needs a positive bound")
        if self.bound is not None and self.bound <= 0:
            raise InputError("bound must be positive when given")
        if self.variant == "feature-linear" and self.features is None:
            raise InputError("feature-linear class needs a FeatureMap")

    @classmethod
    def lipschitz(cls, L: float = 1.0, metric: Optional[MetricSpec] = None,
                  bound: Optional[float] = None) -> "FunctionClass":
        return cls("lipschitz", L=float(L),
                   metric=metric if metric is not None else MetricSpec(),
                   bound=bound)

    @classmethod
    def all_bounded(cls, bound: float) -> "FunctionClass":
        return cls("all-bounded", bound=float(bound))

    @classmethod
    def feature_linear(cls, features: FeatureMap,
                       param_bound: Optional[float] = None) -> "FunctionClass":
        return cls("feature-linear", features=features, param_bound=param_bound)

    def rescaled(self, scale: float) -> "FunctionClass":
        """Same class with the Lipschitz constant multiplied by ``scale``."""
        if self.variant != "lipschitz":
            raise InputError("only Lipschitz classes can be rescaled")
        return FunctionClass("lipschitz", L=self.L * float(scale),
                             metric=self.metric, bound=self.bound)

    def shift_invariant(self) -> bool:
        """Whether g + const stays in the class (flat direction present)."""
        return self.variant == "lipschitz" and self.bound is None

    def violation(self, points: np.ndarray, g: np.ndarray) -> float:
        """Largest constraint violation of a candidate g on given points."""
        g = np.asarray(g, dtype=float)
        worst = 0.0
        if self.variant in ("lipschitz",):
            c = self.metric.pairwise(points)
            diff = np.abs(g[:, None] - g[None, :]) - self.L * c
            np.fill_diagonal(diff, -np.inf)
            if diff.size:
                worst = max(worst, float(np.max(diff)))
        if self.bound is not None or self.variant == "all-bounded":
            b = self.bound
            worst = max(worst, float(np.max(np.abs(g))) - b)
        return worst


# ---------------------------------------------------------------------------
# Differentiable function handles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GradientFunction:
    """A function handle exposing values and analytic spatial gradients."""

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]


class FeatureLinearFunction:
    """g(x) = theta . phi(x) for a feature map with analytic jacobian."""

    def __init__(self, features: FeatureMap, theta: np.ndarray):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (features.n_features,):
            raise InputError(
                f"theta has shape {theta.shape}, expected ({features.n_features},)"
            )
        self.features = features
        self.theta = theta

    def value(self, x: np.ndarray) -> np.ndarray:
        return self.features.evaluate(x) @ self.theta

    def gradient(self, x: np.ndarray) -> np.ndarray:
        if self.features.jacobian is None:
            raise InputError(
                f"{self.features.kind} features have no spatial jacobian"
            )
        return np.einsum("nmd,m->nd", self.features.jacobian(x), self.theta)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.value(x)


# ---------------------------------------------------------------------------
# lambda_f and the joint objective
# ---------------------------------------------------------------------------

def lambda_f_weights(gen: ConvexGenerator, p: np.ndarray, g: np.ndarray,
                     tol: float = 1e-10):
    """Raw-array version of :func:`lambda_f` (weights sum to one)."""
    p = np.asarray(p, dtype=float)
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise InputError("g must be finite")
    live = p > 0
    pl, gl = p[live], g[live]

    def phi(nu):
        vals = gen.f_star(gl - nu)
        if np.any(np.isinf(vals)):
            return math.inf
        return float(nu + pl @ vals)

    lo = float(np.min(gl)) - gen.nu0
    hi = float(np.max(gl)) - gen.nu0
    if hi - lo < 1e-12:
        lo -= 0.5
        hi += 0.5
    # expand until the objective is increasing at both ends
    width = hi - lo
    for _ in range(200):
        if phi(lo) <= phi(lo + 1e-7 * width) and phi(lo) < math.inf:
            lo -= width
            width = hi - lo
        else:
            break
    for _ in range(200):
        if math.isinf(phi(hi)) or phi(hi) <= phi(hi - 1e-7 * width):
            hi += width
            width = hi - lo
        else:
            break
    if math.isinf(phi(hi)):
        return math.inf, math.nan

    if gen.f_star_prime is not None and gen.has_closed_star:
        # stationarity: h(nu) = E_P[(f*)'(g - nu)] - 1 is nonincreasing
        def h(nu):
            vals = gen.f_star_prime(gl - nu)
            if np.any(np.isinf(vals)):
                return math.inf
            return float(pl @ vals) - 1.0

        a_, b_ = lo, hi
        for _ in range(300):
            mid = 0.5 * (a_ + b_)
            if h(mid) > 0:
                a_ = mid
            else:
                b_ = mid
            if b_ - a_ <= 1e-13 * max(1.0, abs(a_), abs(b_)):
                break
        nu_star = 0.5 * (a_ + b_)
    else:
        nu_star = _golden_min(phi, lo, hi, tol)
    val = phi(nu_star)
    if math.isinf(val):
        # boundary of the feasible slab; nudge inward
        for step in (1e-10, 1e-8, 1e-6):
            v = phi(nu_star + step * max(1.0, abs(nu_star)))
            if math.isfinite(v):
                return v, nu_star + step * max(1.0, abs(nu_star))
        return math.inf, math.nan
    return val, nu_star


def _golden_min(phi, a: float, b: float, tol: float) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = phi(c), phi(d)
    for _ in range(400):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = phi(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = phi(d)
        if b - a < 1e-12 * max(1.0, abs(a), abs(b)):
            break
    return c if fc <= fd else d


def lambda_f(gen: ConvexGenerator, P: DiscreteMeasure, g) -> tuple:
    """inf over nu of {nu + E_P[f*(g - nu)]} and the minimizing nu.

    This plays the role the cumulant generating function plays for KL:
    for ``gen = kl`` the value is ``log E_P[exp(g)]``.  Returns
    ``(+inf, nan)`` when no shift brings every argument into the finite
    domain of f*.
    """
    g = np.asarray(g, dtype=float)
    if g.shape[0] != P.n:
        raise InputError(f"expected {P.n} values of g, got {g.shape[0]}")
    return lambda_f_weights(gen, P.weights, g)


def objective_H_weights(gen: ConvexGenerator, q: np.ndarray, p: np.ndarray,
                        g: np.ndarray, nu: float) -> float:
    """Raw-array version of :func:`objective_H`."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    g = np.asarray(g, dtype=float)
    live = p > 0
    star = gen.f_star(g[live] - nu)
    if np.any(np.isinf(star)):
        return -math.inf  # inf - inf resolves to -inf by convention
    qterm = float(q @ (g - nu * np.ones_like(g)))
    return qterm - float(p[live] @ star)


def objective_H(gen: ConvexGenerator, Q: DiscreteMeasure, P: DiscreteMeasure,
                g, nu: float) -> float:
    """The joint variational objective E_Q[g - nu] - E_P[f*(g - nu)].

    ``g`` is indexed by ``joint_support(Q, P)`` (lexicographic order).
    Returns -inf whenever some f*(g_j - nu) = +inf carries positive
    P-mass, which is the extended-real convention that keeps the
    objective well-defined.
    """
    pts, q, p = joint_support(Q, P)
    g = np.asarray(g, dtype=float)
    if g.shape[0] != pts.shape[0]:
        raise InputError(
            f"g has {g.shape[0]} entries but the joint support has {pts.shape[0]}"
        )
    if not np.all(np.isfinite(g)):
        raise InputError("g must be finite")
    return objective_H_weights(gen, q, p, g, nu)


# ---------------------------------------------------------------------------
# Gradient penalties
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PenaltySpec:
    """Soft Lipschitz constraint: Monte Carlo gradient-norm penalty.

    ``lam`` is the penalty weight, ``L`` the target Lipschitz constant,
    ``sided`` selects max{0, |grad|^2/L^2 - 1} ("one") versus
    (|grad|/L - 1)^2 ("two"), and ``interpolation_count`` the number of
    Monte Carlo interpolation points.  Only the one-sided form vanishes
    on the whole Lipschitz ball; the two-sided form charges every
    function whose gradient norm is not exactly L.
    """

    lam: float = 1.0
    L: float = 1.0
    sided: str = "one"
    interpolation_count: int = 256

    def __post_init__(self):
        if self.sided not in ("one", "two"):
            raise InputError(f"sided must be 'one' or 'two', got {self.sided!r}")
        if self.lam < 0 or self.L <= 0 or self.interpolation_count < 1:
            raise InputError("penalty needs lam >= 0, L > 0, count >= 1")

    def apply(self, grad_norms: np.ndarray) -> np.ndarray:
        """Pointwise penalty values for an array of gradient norms."""
        u = np.asarray(grad_norms, dtype=float) / self.L
        if self.sided == "one":
            return self.lam * np.maximum(0.0, u * u - 1.0)
        return self.lam * (u - 1.0) ** 2


def interpolation_points(q_samples: np.ndarray, p_samples: np.ndarray,
                         count: int, seed: int) -> np.ndarray:
    """Monte Carlo draws of x = t*x_Q + (1-t)*x_P with independent
    uniform pair indices and t ~ Unif[0,1]; deterministic given seed."""
    q_samples = np.atleast_2d(np.asarray(q_samples, dtype=float))
    p_samples = np.atleast_2d(np.asarray(p_samples, dtype=float))
    if q_samples.shape[0] == 0 or p_samples.shape[0] == 0:
        raise InputError("samples must be nonempty")
    rng = np.random.Generator(np.random.Philox(seed))
    iq = rng.integers(0, q_samples.shape[0], size=count)
    ip = rng.integers(0, p_samples.shape[0], size=count)
    t = rng.uniform(0.0, 1.0, size=count)[:, None]
    return t * q_samples[iq] + (1.0 - t) * p_samples[ip]


def gradient_penalty(gfun, q_samples, p_samples, spec: PenaltySpec,
                     rng_seed: int = 0) -> float:
    """Monte Carlo gradient penalty of a differentiable function handle.

    ``gfun`` must expose ``.gradient(points) -> (n, d)``; see
    :class:`GradientFunction` and :class:`FeatureLinearFunction`.
    """
    x = interpolation_points(q_samples, p_samples,
                             spec.interpolation_count, rng_seed)
    grads = np.asarray(gfun.gradient(x), dtype=float)
    norms = np.sqrt(np.sum(grads * grads, axis=-1))
    return float(np.mean(spec.apply(norms)))
