"""Classical Borel-Laplace multisummation.

The pipeline follows the ladder construction: the positive Newton-polygon
slopes k_1 < ... < k_{r-1} are completed by an integer top level k_r, the
intermediate orders kappa_i (1/kappa_i = 1/k_i - 1/k_{i+1}) are replaced by
alpha_i copies of alpha_i*kappa_i so that every level is >= d0, and the
series is split into beta-sections.  Each section is summed in the variable
w = z^beta, where the Borel orders kappa~_i/beta are reciprocals of integers
and the whole chain reduces to weight clearing at the recurrence level.
"""

from __future__ import annotations

import cmath
import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from ._quad import complex_quad, peak_scale
from .errors import (
    ArgumentError,
    BracketingError,
    DomainError,
    GrowthError,
    SingularDirectionError,
    UnsupportedError,
)
from .operators import (
    LinearOperator,
    NewtonPolygon,
    Recurrence,
    newton_polygon,
    reweight_recurrence,
    section_recurrence,
)
from .series import PowerSeries, SectorPoint, as_sector_point, gamma

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# Ladder construction


@dataclass(frozen=True)
class SummationLadder:
    """Levels of the multisummation ladder (all entries exact rationals)."""

    positive_slopes: tuple[Fraction, ...]
    top_level: int
    kappa: tuple[Fraction, ...]
    kappa_tilde: tuple[Fraction, ...]
    beta: int
    d0: int

    def __post_init__(self):
        k = list(self.positive_slopes) + [Fraction(self.top_level)]
        if any(k[i] >= k[i + 1] for i in range(len(k) - 1)):
            raise ArgumentError("ladder slopes must be strictly increasing")
        expect_kappa = []
        for i in range(len(k)):
            inv = Fraction(1, 1) / k[i] - (Fraction(1, 1) / k[i + 1] if i + 1 < len(k) else 0)
            expect_kappa.append(1 / inv)
        if tuple(expect_kappa) != self.kappa:
            raise ArgumentError("kappa levels inconsistent with slopes")
        if sum(Fraction(1, 1) / kt for kt in self.kappa_tilde) != Fraction(1, 1) / k[0]:
            raise ArgumentError("kappa~ reciprocals must sum to 1/k_1")
        if self.kappa_tilde[-1] != self.top_level:
            raise ArgumentError("last kappa~ must equal the top level")
        if any(kt < self.d0 for kt in self.kappa_tilde):
            raise ArgumentError("every kappa~ must be >= d0")
        for kt in self.kappa_tilde:
            if (Fraction(self.beta) / kt).denominator != 1:
                raise ArgumentError("beta must clear every kappa~")

    @property
    def levels(self) -> int:
        return len(self.kappa_tilde)

    def w_orders(self) -> tuple[Fraction, ...]:
        """Ladder orders in the section variable w = z^beta (each 1/integer)."""
        return tuple(kt / self.beta for kt in self.kappa_tilde)


def build_ladder(
    polygon: NewtonPolygon,
    coefficient_degrees: Sequence[int],
    k_r_choice: Optional[int] = None,
) -> SummationLadder:
    """Build the summation ladder from the polygon's positive slopes.

    d0 = max(2, degrees); the top level is the minimal integer exceeding both
    the largest slope and d0 unless a larger choice is supplied.
    """
    slopes = polygon.positive_slopes()
    if not slopes:
        raise ArgumentError("ladder construction needs at least one positive slope")
    d0 = max(2, max(int(d) for d in coefficient_degrees))
    minimal = max(slopes[-1], Fraction(d0))
    k_r_min = int(minimal) + 1
    if k_r_choice is None:
        k_r = k_r_min
    else:
        k_r = int(k_r_choice)
        if k_r <= max(slopes[-1], Fraction(d0)):
            raise ArgumentError(
                f"top level {k_r} must exceed both the largest slope and d0={d0}"
            )
    k = list(slopes) + [Fraction(k_r), None]
    kappa = []
    for i in range(len(k) - 1):
        nxt = k[i + 1]
        inv = Fraction(1, 1) / k[i] - (Fraction(1, 1) / nxt if nxt is not None else 0)
        kappa.append(1 / inv)
    kappa_tilde: list[Fraction] = []
    for ki in kappa:
        alpha = 1
        while alpha * ki < d0:
            alpha += 1
        kappa_tilde.extend([alpha * ki] * alpha)
    beta = 1
    while any((Fraction(beta) / kt).denominator != 1 for kt in kappa_tilde):
        beta += 1
    return SummationLadder(
        tuple(slopes), k_r, tuple(kappa), tuple(kappa_tilde), beta, d0
    )


# ---------------------------------------------------------------------------
# Formal Borel transform


def formal_borel(s: PowerSeries, k) -> PowerSeries:
    """Divide the coefficient of z^e by Gamma(1 + e/k) termwise."""
    k = Fraction(k)
    if k <= 0:
        raise ArgumentError("Borel order must be positive")
    nu = s.ram_index
    return s.termwise(lambda n: 1.0 / gamma(1.0 + n / (nu * float(k))))


# ---------------------------------------------------------------------------
# Continuation handles


class RayHandle:
    """Protocol: values of an analytic function along the ray arg = d."""

    direction: float

    def eval_ray(self, x: float) -> complex:  # pragma: no cover - interface
        raise NotImplementedError

    def eval_ray_many(self, xs) -> np.ndarray:
        return np.array([self.eval_ray(float(x)) for x in xs], dtype=complex)

    def growth(self, k: float) -> tuple[float, float]:  # pragma: no cover
        raise NotImplementedError


class FunctionHandle(RayHandle):
    """Wrap an explicit function of the ray coordinate (tests, polynomials)."""

    def __init__(self, fn: Callable[[complex], complex], direction: float,
                 growth: tuple[float, float] = (1.0, 0.0)):
        self.fn = fn
        self.direction = direction
        self._growth = growth

    def eval_ray(self, x: float) -> complex:
        return self.fn(x * cmath.exp(1j * self.direction))

    def growth(self, k: float) -> tuple[float, float]:
        return self._growth


class ContinuationHandle(RayHandle):
    """Analytic continuation of a convergent series along a ray: direct series
    inside 0.8x the empirical radius, numerical integration of the defining
    ODE beyond, initialized from the series at 0.5x the radius."""

    def __init__(self, series: PowerSeries, op: LinearOperator, direction: float,
                 rtol: float = 1e-12):
        if series.ram_index != 1:
            raise ArgumentError("continuation works on unramified series")
        self.series = series
        self.op = op
        self.direction = direction
        self.rtol = rtol
        self._quad_epsrel = max(1e-11, rtol)
        self.radius = _cauchy_hadamard(series.coefficients)
        self._lead_roots = op.coefficients[-1].nonzero_roots()
        self._check_ray_clear()
        self._segments: list = []  # list of OdeSolution
        self._x_hi = 0.0
        self._lock = threading.RLock()
        self._x0 = 0.5 * self.radius
        self._series_limit = 0.8 * self.radius
        m = op.order
        self._m = m
        self._forcing = op.rhs

    def _check_ray_clear(self, x_max: float = np.inf):
        d = self.direction
        for rho in self._lead_roots:
            ang = _angdiff(cmath.phase(rho), d)
            dist = abs(rho) * abs(math.sin(ang)) if abs(ang) < math.pi / 2 else abs(rho)
            if abs(ang) < 1e-9 or dist < 1e-12 * max(abs(rho), 1.0):
                raise SingularDirectionError(
                    f"continuation ray arg={d} hits a singularity of the "
                    f"Borel-plane operator at {rho}"
                )

    # -- series-side values --------------------------------------------------

    def _series_vector(self, x: float) -> np.ndarray:
        """(f, delta f, ..., delta^{m-1} f) at x e^{i d} from the series."""
        zeta = x * cmath.exp(1j * self.direction)
        c = self.series.coefficients
        n = np.arange(len(c))
        out = np.empty(self._m, dtype=complex)
        powers = zeta ** n
        for i in range(self._m):
            out[i] = np.sum(c * (n**i) * powers)
        return out

    def _rhs_vector(self, x: float) -> np.ndarray:
        w = x * cmath.exp(1j * self.direction)
        m = self._m
        b = self.op.coefficients
        lead = b[-1](w)
        F = np.zeros(m, dtype=complex)
        if self._forcing is not None:
            F[m - 1] = self._forcing.eval(w) / lead
        return F

    def _companion(self, x: float) -> np.ndarray:
        w = x * cmath.exp(1j * self.direction)
        m = self._m
        b = self.op.coefficients
        lead = b[-1](w)
        C = np.zeros((m, m), dtype=complex)
        for i in range(m - 1):
            C[i, i + 1] = 1.0
        for j in range(m):
            bj = b[j](w) if j < len(b) else 0.0
            C[m - 1, j] = -bj / lead
        return C

    def _ode_rhs(self, x, y):
        V = y[: self._m] + 1j * y[self._m :]
        dV = (self._companion(x) @ V + self._rhs_vector(x)) / x
        return np.concatenate([dV.real, dV.imag])

    def ensure(self, x_max: float):
        if x_max <= self._x_hi:
            return
        if self._m == 0:
            return
        with self._lock:
            self._ensure_locked(x_max)

    def _ensure_locked(self, x_max: float):
        if x_max <= self._x_hi:
            return
        if not self._segments:
            start = self._x0
            V0 = self._series_vector(start)
        else:
            start = self._x_hi
            V0 = self._vector_at(start)
        y0 = np.concatenate([V0.real, V0.imag])
        scale = max(np.max(np.abs(V0)), 1e-30)
        sol = solve_ivp(
            self._ode_rhs,
            (start, x_max * 1.0001),
            y0,
            method="DOP853",
            rtol=self.rtol,
            atol=scale * 1e-16,
            dense_output=True,
        )
        if not sol.success:
            raise GrowthError(
                f"ODE continuation failed along arg={self.direction}: {sol.message}"
            )
        self._segments.append((start, x_max * 1.0001, sol.sol))
        self._x_hi = x_max * 1.0001

    def _vector_at(self, x: float) -> np.ndarray:
        if x <= self._series_limit:
            return self._series_vector(x)
        for lo, hi, dense in self._segments:
            if lo <= x <= hi:
                y = dense(x)
                return y[: self._m] + 1j * y[self._m :]
        raise ArgumentError(f"point {x} outside the continued range")

    def prepare(self, x_hi: float):
        self.ensure(x_hi * 1.0001)

    def eval_ray(self, x: float) -> complex:
        if x <= self._series_limit:
            zeta = x * cmath.exp(1j * self.direction)
            return self.series.eval(zeta)
        if x > self._x_hi:
            self.ensure(x)
        return complex(self._vector_at(x)[0])

    def eval_ray_many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if xs.size == 0:
            return np.zeros(0, dtype=complex)
        top = float(np.max(xs))
        if top > self._series_limit:
            self.ensure(top)
        out = np.empty(len(xs), dtype=complex)
        inner = xs <= self._series_limit
        if np.any(inner):
            ts = xs[inner] * cmath.exp(1j * self.direction)
            out[inner] = np.polynomial.polynomial.polyval(
                ts, self.series.coefficients)
        idx = np.where(~inner)[0]
        if len(idx):
            pts = xs[idx]
            for lo, hi, dense in self._segments:
                mask = (pts >= lo) & (pts <= hi)
                if np.any(mask):
                    y = dense(pts[mask])
                    out[idx[mask]] = y[0] + 1j * y[self._m]
                    pts = np.where(mask, np.nan, pts)
            left = ~np.isnan(pts)
            for j in np.where(left)[0]:
                out[idx[j]] = self.eval_ray(float(pts[j]))
        return out

    def growth(self, k: float) -> tuple[float, float]:
        # sweep far enough for the tail log-slope to settle; stop early if the
        # values escape the safe float range (the fit then uses what exists)
        target = max(self._x_hi, 16.0 * max(self.radius, 1e-3), 8.0)
        x = max(4.0 * self.radius, self._series_limit * 1.5)
        while x < target:
            x = min(2.0 * x, target)
            self.ensure(x)
            if abs(self.eval_ray(x)) > 1e200:
                break
        return _fit_growth(self.eval_ray, 0.3 * self.radius, self._x_hi, k)


def _cauchy_hadamard(coeffs: np.ndarray, tail: int = 20) -> float:
    nz = [(n, abs(c)) for n, c in enumerate(coeffs) if abs(c) > 0]
    if len(nz) < 3:
        return 1e6  # polynomial-like: effectively entire
    pick = nz[-tail:]
    est = max(math.log(a) / n for n, a in pick if n > 0)
    return math.exp(-est)


def _angdiff(a: float, b: float) -> float:
    return (a - b + math.pi) % TWO_PI - math.pi


def _fit_growth(eval_ray, x_lo: float, x_hi: float, k: float,
                samples: int = 48) -> tuple[float, float]:
    """Constants (J, L) with |f(x e^{id})| <= J exp(L x^k) on the sampled ray.

    Least squares on log|f| ~ c0 + alpha*log x + L*x^k separates algebraic
    from order-k exponential growth, so power-law stage functions get L ~ 0
    instead of a spurious finite-range slope.
    """
    xs = np.geomspace(max(x_lo, 1e-9), x_hi, samples)
    vals = np.array([abs(eval_ray(x)) for x in xs])
    vals = np.maximum(vals, 1e-300)
    logs = np.log(vals)
    t = xs**k
    # fit the tail half only: transients (and near-misses of off-ray
    # singularities) at small x must not inflate L
    half = len(xs) // 2
    M = np.column_stack([np.ones_like(xs), np.log(xs), t])
    sol, *_ = np.linalg.lstsq(M[half:], logs[half:], rcond=None)
    L = max(float(sol[2]), 0.0)
    resid = logs - M @ sol
    # escape check: a persistent, growing tail misfit means the growth order
    # exceeds k and no (J, L) bound of this class exists
    q = len(xs) // 4
    if q >= 2:
        tail_r = resid[-q:]
        if np.all(np.diff(tail_r) > 0) and tail_r[-1] > 3.0:
            raise GrowthError(
                f"growth fit failed: order-{k} exponential bound does not stabilize"
            )
    if L > 0:
        L *= 1.05
    J = float(np.max(vals * np.exp(-L * t))) * 1.2
    return max(J, 1e-300), L


# ---------------------------------------------------------------------------
# Laplace transform along a ray


def _prepare(handle: RayHandle, x_hi: float):
    """Announce the ray range an upcoming quadrature will sample."""
    prep = getattr(handle, "prepare", None)
    if prep is not None:
        prep(x_hi)


def _cached_growth(handle: RayHandle, k: float) -> tuple[float, float]:
    cache = getattr(handle, "_growth_cache", None)
    if cache is None:
        cache = {}
        try:
            handle._growth_cache = cache
        except AttributeError:
            return handle.growth(k)
    if k not in cache:
        cache[k] = handle.growth(k)
    return cache[k]


def _laplace_base_integrals(
    handle: RayHandle,
    lam: float,
    d: float,
    w: SectorPoint,
    t_max: int,
    epsrel: float = 1e-11,
) -> list[complex]:
    """I_t = int_0^S f((s^{1/lam}) e^{id}) s^t exp(-s A) ds for t = 0..t_max,
    with A = (e^{id}/w)^lam computed on the surface of the logarithm."""
    A = cmath.exp(lam * (1j * d - w.complex_log()))
    epsrel = max(epsrel, getattr(handle, "_quad_epsrel", 0.0))
    J, L = _cached_growth(handle, lam)
    margin = 1.05
    if A.real <= 0:
        raise DomainError(
            f"evaluation point arg={w.argument} outside the order-{lam} Laplace "
            f"sector around d={d}"
        )
    if A.real <= L * margin:
        raise DomainError(
            f"Laplace integrability violated: Re(e^(i d)/w)^k = {A.real:.3e} "
            f"must exceed the fitted growth rate L = {L:.3e}"
        )
    decay = A.real - L
    S = (42.0 + max(0.0, math.log(J))) / decay
    inv_lam = 1.0 / lam

    def integrand_factory(t):
        def integrand(s):
            if s <= 0.0:
                return 0.0j
            return handle.eval_ray(s**inv_lam) * s**t * cmath.exp(-s * A)

        return integrand

    # authoritative truncation: extend until the integrand has fallen below
    # 1e-16 of its peak (the fitted L only seeds the first guess); never
    # extend past the reach of the handle's own Laplace domain
    reach = getattr(handle, "_x_dom", math.inf) * 0.96
    S = min(S, reach**lam)
    fn0 = integrand_factory(t_max)
    _prepare(handle, S ** (1.0 / lam))
    scale0 = peak_scale(fn0, 0.0, S)
    grow_checks = 0
    while abs(fn0(S)) * S > 1e-16 * scale0:
        nxt = 1.5 * S
        if nxt > reach**lam:
            if abs(fn0(S)) * S > 1e-9 * scale0:
                raise DomainError(
                    f"Laplace tail beyond the previous stage's reach carries "
                    f"too much mass (fitted growth L = {L:.3e})"
                )
            break
        _prepare(handle, nxt ** (1.0 / lam))
        if abs(fn0(nxt)) > abs(fn0(S)):
            grow_checks += 1
            if grow_checks >= 3:
                raise DomainError(
                    f"Laplace integrand does not decay along the ray "
                    f"(fitted growth L = {L:.3e}, Re A = {A.real:.3e})"
                )
        S = nxt
        if S > 1e7 * (42.0 / A.real):
            raise DomainError(
                f"Laplace truncation not reached; integrand decays too slowly "
                f"(fitted growth L = {L:.3e})"
            )

    out = []
    for t in range(t_max + 1):
        fn = integrand_factory(t)
        eps = 1e-14 * scale0 * S ** (t_max - t + 1)
        out.append(complex_quad(fn, 0.0, S, epsabs=eps, epsrel=epsrel))
    return out


def laplace_along_ray(handle: RayHandle, k, d: float, z) -> complex:
    """Order-k Laplace transform of the continued function, evaluated at z.

    Requires arg z within pi/(2k) of d and |z|^k below 1/L for the handle's
    fitted growth constants (J, L).
    """
    lam = float(Fraction(k))
    w = as_sector_point(z)
    if abs(lam * (w.argument - d)) >= math.pi / 2:
        raise DomainError(
            f"arg z = {w.argument:.6f} outside (d - pi/(2k), d + pi/(2k)) "
            f"for d = {d:.6f}, k = {lam}"
        )
    A = cmath.exp(lam * (1j * d - w.complex_log()))
    I0 = _laplace_base_integrals(handle, lam, d, w, 0)[0]
    return A * I0


def _moment_values(handle, lam, d, w, count) -> list[complex]:
    """N_t(w^lam) = A e^{i lam d t} I_t for t = 0..count-1."""
    A = cmath.exp(lam * (1j * d - w.complex_log()))
    base = _laplace_base_integrals(handle, lam, d, w, count - 1)
    return [A * cmath.exp(1j * lam * d * t) * base[t] for t in range(count)]


def _delta_derivatives_from_moments(handle, lam, d, w: SectorPoint, m: int) -> np.ndarray:
    """(f, delta f, ..., delta^{m-1} f)(w) for f = L_lam(handle).

    Uses delta_W N_t = W^{-1} N_{t+1} - N_t exactly; no finite differences.
    """
    N = _moment_values(handle, lam, d, w, m)
    # delta^i f = sum_t c[i][t] * w^{-lam t} * N_t(w^lam)
    coeffs: list[dict[int, complex]] = [{0: 1.0 + 0j}]
    for i in range(1, m):
        prev = coeffs[-1]
        nxt: dict[int, complex] = {}
        for t, c in prev.items():
            nxt[t + 1] = nxt.get(t + 1, 0.0) + c * lam
            nxt[t] = nxt.get(t, 0.0) - c * lam * (t + 1)
        coeffs.append(nxt)
    wpow = lambda t: cmath.exp(-lam * t * w.complex_log())
    out = np.zeros(m, dtype=complex)
    for i, table in enumerate(coeffs):
        out[i] = sum(c * wpow(t) * N[t] for t, c in table.items())
    return out


class _ChebLogInterpolant:
    """Barycentric Chebyshev interpolant in log x on [a, b] (analytic data)."""

    def __init__(self, fn, a: float, b: float, n: int = 160, values=None):
        self.a, self.b = a, b
        ta, tb = math.log(a), math.log(b)
        j = np.arange(n + 1)
        nodes_t = 0.5 * (ta + tb) + 0.5 * (tb - ta) * np.cos(j * math.pi / n)
        self.t = nodes_t
        if values is not None:
            self.vals = np.asarray(values, dtype=complex)
        else:
            self.vals = np.array([fn(math.exp(t)) for t in nodes_t], dtype=complex)
        w = np.ones(n + 1)
        w[1::2] = -1.0
        w[0] *= 0.5
        w[-1] *= 0.5
        self.w = w

    def __call__(self, x: float) -> complex:
        t = math.log(x)
        diff = t - self.t
        hit = np.where(np.abs(diff) < 1e-300)[0]
        if len(hit):
            return complex(self.vals[hit[0]])
        c = self.w / diff
        return complex(np.sum(c * self.vals) / np.sum(c))

    def eval_many(self, xs: np.ndarray) -> np.ndarray:
        ts = np.log(np.asarray(xs, dtype=float))
        diff = ts[:, None] - self.t[None, :]
        small = np.abs(diff) < 1e-300
        diff = np.where(small, 1.0, diff)
        C = self.w[None, :] / diff
        vals = (C @ self.vals) / np.sum(C, axis=1)
        exact_rows = np.any(small, axis=1)
        if np.any(exact_rows):
            idx = np.argmax(small[exact_rows], axis=1)
            vals[exact_rows] = self.vals[idx]
        return vals


def _batched_ray_laplace(handle: RayHandle, lam: float, d: float,
                         xs: np.ndarray) -> np.ndarray:
    """L_lam(handle) at the on-ray points x_i e^{id}, all at once.

    On the ray A_i = x_i^(-lam) is real, so substituting s = u x_i^lam gives
    value_i = int_0^U f(x_i u^(1/lam)) e^-u du with a shared u-grid: one
    vectorized evaluation of the previous stage covers every node.
    """
    from numpy.polynomial.legendre import leggauss

    xs = np.asarray(xs, dtype=float)
    J, L = _cached_growth(handle, lam)
    x_top = float(np.max(xs))
    margin = 1.0 - L * x_top**lam
    if margin <= 0.05:
        raise DomainError(
            f"batched Laplace tabulation reaches the growth-domain edge "
            f"(L = {L:.3e}, max x = {x_top:.4g})"
        )
    U = (45.0 + max(0.0, math.log(J))) / margin
    _prepare(handle, (U * x_top**lam) ** (1.0 / lam))
    xg, wg = leggauss(24)
    edges = np.geomspace(U * 1e-12, U, 15)
    out = np.zeros(len(xs), dtype=complex)
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        u = mid + half * xg
        pts = (xs[:, None] * u[None, :] ** (1.0 / lam)).ravel()
        fv = handle.eval_ray_many(pts).reshape(len(xs), len(u))
        out += fv @ (half * wg * np.exp(-u))
    # left-end correction: the integrand tends to f(0+) like a constant
    u0 = edges[0]
    out += handle.eval_ray_many(xs * (0.5 * u0) ** (1.0 / lam)) * u0
    return out


class LaplaceStageHandle(RayHandle):
    """f = L_lam(prev) along the shared ray.

    Three regimes: the truncated (Gevrey-)asymptotic expansion at tiny x, a
    Chebyshev-in-log interpolant of direct quadratures below the ODE anchor,
    and the stage ODE (moment-initialized, no finite differences) beyond.
    """

    def __init__(self, prev: RayHandle, lam: Fraction, direction: float,
                 op: LinearOperator, asym_seeds: Optional[np.ndarray] = None,
                 rtol: float = 1e-12):
        self.prev = prev
        self.lam = float(lam)
        self.direction = direction
        self.op = op
        self.rtol = rtol
        self._quad_epsrel = max(1e-11, rtol)
        self._m = op.order
        J, L = _cached_growth(prev, self.lam)
        x_dom = (1.0 / L) ** (1.0 / self.lam) if L > 0 else 1e8
        self._x_dom = x_dom
        # the anchor's moment quadratures sample the previous stage out to
        # (e-folds / x0^lam)^(1/lam); budget the fitted J and stay within the
        # previous stage's own Laplace-domain reach
        prev_dom = getattr(prev, "_x_dom", math.inf)
        budget = 50.0 + max(0.0, math.log(J))
        reach_cap = 0.9 * prev_dom / (budget ** (1.0 / self.lam))
        self._x0 = min(0.15 * x_dom, reach_cap, 1.0)
        self._segments = []
        self._x_hi = 0.0
        self._lead_roots = op.coefficients[-1].nonzero_roots()
        self._check_ray_clear()
        self._forcing = op.rhs
        self._interp: Optional[_ChebLogInterpolant] = None
        self._cache: dict[float, complex] = {}
        self._lock = threading.RLock()
        # asymptotic regime from the first formal coefficients; the cutoff is
        # where the first dropped (Gevrey-divergent) term falls below 1e-14
        # of the function scale |c0| + |c1| x, not of the coefficient scale
        self._asym = None
        self._x_asym = 0.0
        if asym_seeds is not None and len(asym_seeds) >= 3:
            n_use = min(len(asym_seeds) - 1, 5)
            c_next = abs(asym_seeds[n_use])
            c0 = abs(asym_seeds[0])
            c1 = abs(asym_seeds[1]) if len(asym_seeds) > 1 else 0.0
            if c_next > 0 and (c0 > 0 or c1 > 0):
                lo, hi = 1e-280, 0.5 * self._x0
                for _ in range(200):
                    mid = math.sqrt(lo * hi)
                    if 3.0 * c_next * mid**n_use <= 1e-14 * (c0 + c1 * mid):
                        lo = mid
                    else:
                        hi = mid
                phase = cmath.exp(1j * direction)
                coefs = np.array(asym_seeds[:n_use], dtype=complex)
                self._asym = (coefs, phase)
                self._x_asym = lo
        w0 = SectorPoint.from_polar(self._x0, direction)
        self._V0 = _delta_derivatives_from_moments(prev, self.lam, direction, w0, self._m)

    def _check_ray_clear(self):
        d = self.direction
        for rho in self._lead_roots:
            ang = _angdiff(cmath.phase(rho), d)
            if abs(ang) < 1e-9:
                raise SingularDirectionError(
                    f"stage ray arg={d} hits a singularity at {rho}"
                )

    _companion = ContinuationHandle._companion
    _rhs_vector = ContinuationHandle._rhs_vector
    _ode_rhs = ContinuationHandle._ode_rhs

    def ensure(self, x_max: float):
        if x_max <= self._x_hi:
            return
        if x_max >= self._x_dom * 0.98:
            raise DomainError(
                f"stage evaluation at x={x_max:.4g} outside the order-{self.lam} "
                f"Laplace domain (limit {self._x_dom:.4g})"
            )
        with self._lock:
            self._ensure_locked(x_max)

    def _ensure_locked(self, x_max: float):
        if x_max <= self._x_hi:
            return
        if not self._segments:
            start, V0 = self._x0, self._V0
        else:
            start, V0 = self._x_hi, self._vector_at(self._x_hi)
        y0 = np.concatenate([V0.real, V0.imag])
        scale = max(np.max(np.abs(V0)), 1e-30)
        sol = solve_ivp(self._ode_rhs, (start, x_max * 1.0001), y0, method="DOP853",
                        rtol=self.rtol, atol=scale * 1e-16, dense_output=True)
        if not sol.success:
            raise GrowthError(f"stage continuation failed: {sol.message}")
        self._segments.append((start, x_max * 1.0001, sol.sol))
        self._x_hi = x_max * 1.0001

    def _vector_at(self, x: float) -> np.ndarray:
        for lo, hi, dense in self._segments:
            if lo <= x <= hi:
                y = dense(x)
                return y[: self._m] + 1j * y[self._m :]
        raise ArgumentError(f"stage point {x} outside continued range")

    def _direct(self, x: float) -> complex:
        v = self._cache.get(x)
        if v is None:
            v = laplace_along_ray(self.prev, self.lam, self.direction,
                                  SectorPoint.from_polar(x, self.direction))
            with self._lock:
                self._cache[x] = v
        return v

    def _eval_asym(self, x: float) -> complex:
        coefs, phase = self._asym
        wv = x * phase
        acc = 0.0 + 0.0j
        for c in coefs[::-1]:
            acc = acc * wv + c
        return acc

    def prepare(self, x_hi: float):
        """Make the handle cheap to sample on (0, x_hi]: extend the ODE if the
        range exceeds the anchor, and build the sub-anchor interpolant once
        over its full span (validated against direct quadrature)."""
        if x_hi > self._x0:
            self.ensure(x_hi)
        with self._lock:
            if self._interp is not None:
                return
            self._prepare_locked()

    def _prepare_locked(self):
        hi = self._x0 * 1.0001
        lo = max(self._x_asym * 0.8, hi * 1e-8, 1e-290)
        if lo >= hi:
            return
        if self.rtol <= 1e-11:
            n = int(56 + 15 * math.log(hi / lo))
        else:
            n = int(36 + 9 * math.log(hi / lo))
        ta, tb = math.log(lo), math.log(hi)
        nodes = np.exp(0.5 * (ta + tb)
                       + 0.5 * (tb - ta) * np.cos(np.arange(n + 1) * math.pi / n))
        values = _batched_ray_laplace(self.prev, self.lam, self.direction, nodes)
        interp = _ChebLogInterpolant(None, lo, hi, n=n, values=values)
        # validate the batched tabulation against adaptive quadrature
        for frac in (0.23, 0.52, 0.81):
            x = lo * (hi / lo) ** frac
            ref = self._direct(x)
            if abs(interp(x) - ref) > 1e-8 * max(abs(ref), 1e-300):
                interp = _ChebLogInterpolant(self._direct, lo, hi, n=2 * n)
                break
        self._interp = interp

    def eval_ray(self, x: float) -> complex:
        if x >= self._x0:
            if x > self._x_hi:
                self.ensure(x)
            return complex(self._vector_at(x)[0])
        if self._asym is not None and x <= self._x_asym:
            return self._eval_asym(x)
        if self._interp is not None and self._interp.a <= x <= self._interp.b:
            return self._interp(x)
        return self._direct(x)

    def eval_ray_many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if xs.size == 0:
            return np.zeros(0, dtype=complex)
        out = np.empty(len(xs), dtype=complex)
        done = np.zeros(len(xs), dtype=bool)
        top = float(np.max(xs))
        if top >= self._x0:
            if top > self._x_hi:
                self.ensure(top)
            sel = xs >= self._x0
            pts = xs[sel]
            vals = np.empty(len(pts), dtype=complex)
            left = np.ones(len(pts), dtype=bool)
            for lo, hi, dense in self._segments:
                mask = left & (pts >= lo) & (pts <= hi)
                if np.any(mask):
                    y = dense(pts[mask])
                    vals[mask] = y[0] + 1j * y[self._m]
                    left &= ~mask
            for j in np.where(left)[0]:
                vals[j] = self.eval_ray(float(pts[j]))
            out[sel] = vals
            done |= sel
        if self._asym is not None:
            sel = (~done) & (xs <= self._x_asym)
            if np.any(sel):
                coefs, phase = self._asym
                wv = xs[sel] * phase
                out[sel] = np.polynomial.polynomial.polyval(wv, coefs)
                done |= sel
        if self._interp is not None:
            sel = (~done) & (xs >= self._interp.a) & (xs <= self._interp.b)
            if np.any(sel):
                out[sel] = self._interp.eval_many(xs[sel])
                done |= sel
        for j in np.where(~done)[0]:
            out[j] = self.eval_ray(float(xs[j]))
        return out

    def value_at(self, w: SectorPoint) -> complex:
        """Evaluate L_lam(prev) at an arbitrary sector point (off-ray allowed)."""
        return laplace_along_ray(self.prev, self.lam, self.direction, w)

    def growth(self, k: float) -> tuple[float, float]:
        self.ensure(max(self._x_hi, min(12.0 * self._x0, 0.9 * self._x_dom)))
        return _fit_growth(self.eval_ray, self._x0, self._x_hi, k)


# ---------------------------------------------------------------------------
# Section pipelines


def _section_master(op: LinearOperator) -> Recurrence:
    if op.kind != "differential":
        raise ArgumentError("classical multisummation applies to delta-operators")
    return Recurrence.from_operator(op)


def _section_seed_logs(op: LinearOperator, beta: int, l: int, count: int):
    """Section coefficients s_n = a_{l+n*beta}, n < count, in (phase, log) form."""
    rec = Recurrence.from_operator(op)
    order = l + beta * (count - 1) + 1
    phases, logmags = rec.solve_logspace(order)
    idx = [l + beta * n for n in range(count)]
    return phases[idx], logmags[idx]


@dataclass
class SectionPipeline:
    """All per-section data needed to evaluate S^d(h^(l)) at w = z^beta."""

    l: int
    beta: int
    orders_w: tuple[Fraction, ...]       # lambda_j = kappa~_j / beta, each 1/integer
    stage_recs: list                     # stage_recs[j-1] annihilates g_j
    stage_ops: list
    g1: PowerSeries
    stage_seeds: list = field(default_factory=list)
    d_w: Optional[float] = None
    handles: Optional[list] = None

    def singular_roots(self) -> list[complex]:
        roots: list[complex] = []
        for op in self.stage_ops:
            roots.extend(op.coefficients[-1].nonzero_roots().tolist())
        return roots

    def build_handles(self, d_w: float, rtol: float = 1e-12):
        if self.handles is not None and self.d_w == d_w:
            return
        handles: list[RayHandle] = [
            ContinuationHandle(self.g1, self.stage_ops[0], d_w, rtol=rtol)
        ]
        for j in range(1, len(self.orders_w)):
            seeds = self.stage_seeds[j] if j < len(self.stage_seeds) else None
            handles.append(
                LaplaceStageHandle(
                    handles[-1], self.orders_w[j - 1], d_w, self.stage_ops[j],
                    asym_seeds=seeds, rtol=rtol,
                )
            )
        self.d_w = d_w
        self.handles = handles

    def value(self, w: SectorPoint) -> complex:
        top = self.handles[-1]
        lam_s = self.orders_w[-1]
        return laplace_along_ray(top, lam_s, self.d_w, w)


def _stage_seeds(op, beta: int, l: int, m_sub: Sequence[int], count: int) -> np.ndarray:
    """First coefficients of B_{1/m_sub[0]} ... B_{1/m_sub[-1]} (section),
    i.e. section values divided by prod Gamma(1 + n*m), in ordinary floats."""
    ph, lg = _section_seed_logs(op, beta, l, count)
    out = np.zeros(count, dtype=complex)
    for n in range(count):
        if lg[n] == -np.inf:
            continue
        w = sum(math.lgamma(1.0 + n * m) for m in m_sub)
        out[n] = ph[n] * math.exp(lg[n] - w)
    return out


def _attach_stage_rhs(rec: Recurrence, seeds: np.ndarray):
    """Record the low-order inhomogeneous rows the section chain dropped:
    rhs_n := sum_i A_i(x_n) g_{n-i} for n below the validity window."""
    span = rec.span
    upto = min(rec.n_min + span, len(seeds) - 1)
    rhs: dict[int, complex] = {}
    for n in range(0, upto + 1):
        row = rec.coeff_row(n)
        acc = 0.0 + 0.0j
        scale = 0.0
        for i in range(span + 1):
            if n - i >= 0:
                term = row[i] * seeds[n - i]
                acc += term
                scale = max(scale, abs(term))
        if abs(acc) > 1e-9 * max(scale, 1e-300):
            rhs[n] = acc
    rec.rhs = rhs


def _build_sections(
    op: LinearOperator, ladder: SummationLadder, order: int = 240
) -> list[SectionPipeline]:
    beta = ladder.beta
    orders_w = ladder.w_orders()
    m_list = [int(1 / lam) for lam in orders_w]
    rec = _section_master(op)
    sections = []
    for l in range(beta):
        if rec.span == 1:
            sec_rec = section_recurrence(rec, beta, l)
        else:
            sec_rec = _fit_section_recurrence(op, rec, beta, l)
        # chain of stage recurrences: stage j annihilates
        # g_j = B_{lam_j} ... B_{lam_s} (section); build from the top down,
        # then restore the inhomogeneous rows each stage's solution satisfies
        recs = [None] * len(orders_w)
        cur = sec_rec
        for j in range(len(orders_w) - 1, -1, -1):
            cur = reweight_recurrence(cur, orders_w[j], "gamma")
            cur.rhs = {}
            recs[j] = cur
        n_seed = max(sec_rec.n_min + sec_rec.span + 2, 8)
        all_seeds = []
        for j in range(len(orders_w)):
            seeds_j = _stage_seeds(op, beta, l, m_list[j:], n_seed)
            _attach_stage_rhs(recs[j], seeds_j)
            all_seeds.append(seeds_j)
        g1 = _solve_stage1(recs[0], all_seeds[0], order)
        ops_chain = [r.to_operator() for r in recs]
        sections.append(
            SectionPipeline(l, beta, orders_w, recs, ops_chain, g1, all_seeds)
        )
    return sections


def _fit_section_recurrence(op, rec, beta, l) -> Recurrence:
    """Fallback for master recurrences of span >= 2: fit the section
    recurrence from fully-Borel-transformed data (tame magnitudes), then
    undo the weights exactly."""
    raise UnsupportedError(
        "multisummation currently derives section operators only for "
        "operators whose coefficient recurrence has span 1 "
        "(polynomial coefficients of z-degree <= 1)"
    )


def _solve_stage1(stage1_rec, seeds: np.ndarray, order: int) -> PowerSeries:
    """Coefficients of g_1 = full Borel chain of the section, overflow-safe."""
    with np.errstate(over="ignore", invalid="ignore"):
        coeffs, _meta = stage1_rec.solve(order, seed=seeds)
    # overflow guard: truncate where magnitudes leave the safe float range
    mags = np.abs(coeffs)
    bad = np.where(~np.isfinite(mags) | (mags > 1e280))[0]
    if len(bad):
        keep = max(int(bad[0]), len(seeds) + 8)
        coeffs = coeffs[:keep]
        if not np.all(np.isfinite(coeffs)):
            coeffs = coeffs[: int(bad[0])]
    return PowerSeries(coeffs, 1)


# ---------------------------------------------------------------------------
# Singular directions


@dataclass(frozen=True)
class DirectionSet:
    """Finite set of excluded ray arguments mod 2*pi with provenance tags."""

    singular_directions: tuple[float, ...]
    provenance: tuple[str, ...]

    def entries(self):
        return list(zip(self.singular_directions, self.provenance))

    def min_distance(self, d: float) -> float:
        if not self.singular_directions:
            return math.pi
        return min(abs(_angdiff(d, s)) for s in self.singular_directions)


def singular_directions(
    op: LinearOperator,
    ladder: Optional[SummationLadder] = None,
    sections: Optional[list[SectionPipeline]] = None,
) -> DirectionSet:
    """Excluded directions: arguments (in the z-plane) of the leading-root
    singularities of every successive Borel-plane operator, united with the
    arguments of the nonzero roots of the operator's leading coefficient.

    May be a strict superset of the true singular support (beta-sections see
    the rotated copies of each Borel singularity); extra entries only shrink
    the verified domain.
    """
    entries: list[tuple[float, str]] = []
    polygon = newton_polygon(op)
    if polygon.is_convergent_only():
        return DirectionSet((), ())
    if ladder is None:
        ladder = build_ladder(polygon, [c.degree for c in op.coefficients if not c.is_zero])
    if sections is None:
        try:
            sections = _build_sections(op, ladder, order=60)
        except UnsupportedError:
            # section operators unavailable (span > 1): report the
            # leading-coefficient rays only; summation itself will refuse
            sections = []
    beta = ladder.beta
    seen = set()
    for sec in sections:
        for rho in sec.singular_roots():
            base = cmath.phase(rho)  # direction in the w-plane
            for t in range(beta):
                d = _mod2pi((base + TWO_PI * t) / beta)
                key = round(d, 9)
                if key not in seen:
                    seen.add(key)
                    entries.append((d, "borel-pole"))
    for rho in op.coefficients[-1].nonzero_roots():
        d = _mod2pi(cmath.phase(rho))
        key = round(d, 9)
        if key not in seen:
            seen.add(key)
            entries.append((d, "leading-root"))
    entries.sort()
    return DirectionSet(tuple(e[0] for e in entries), tuple(e[1] for e in entries))


def _mod2pi(x: float) -> float:
    return x % TWO_PI


# ---------------------------------------------------------------------------
# Multisummation


@dataclass
class SummedFunction:
    """Evaluable handle for the multisum S^d(h): carries the ladder, the
    direction, the per-section stage handles and the sector of validity.
    Evaluation outside the sector raises, never extrapolates."""

    ladder: Optional[SummationLadder]
    direction: float
    sections: list
    excluded_rays: tuple[complex, ...]
    convergent_series: Optional[PowerSeries] = None
    radius: float = 0.0

    @property
    def half_opening(self) -> float:
        if self.ladder is None:
            return math.pi
        return math.pi / (2.0 * self.ladder.top_level)

    def domain_check(self, z: SectorPoint):
        if self.convergent_series is not None:
            if z.modulus >= self.radius:
                raise DomainError(
                    f"|z| = {z.modulus:.4g} outside the convergence disk "
                    f"(radius ~ {self.radius:.4g})"
                )
            return
        if abs(z.argument - self.direction) >= self.half_opening:
            raise DomainError(
                f"arg z = {z.argument:.6f} outside the sector "
                f"d +/- pi/(2 k_r) = {self.direction:.6f} +/- {self.half_opening:.6f}"
            )
        for alpha in self.excluded_rays:
            if (
                abs(_angdiff(z.argument, cmath.phase(alpha))) < 1e-9
                and z.modulus >= 0.99 * abs(alpha)
            ):
                raise DomainError(
                    f"z lies on the excluded ray through the leading-coefficient "
                    f"root {alpha}"
                )

    def __call__(self, z) -> complex:
        z = as_sector_point(z)
        self.domain_check(z)
        if self.convergent_series is not None:
            return self.convergent_series.eval(z)
        beta = self.ladder.beta
        w = z.power(beta)
        total = 0.0 + 0.0j
        for sec in self.sections:
            term = sec.value(w)
            total += cmath.exp(sec.l * z.complex_log()) * term
        return total

    def residual(self, op: LinearOperator, z, step: float = 1e-4) -> float:
        """Relative residual of op at z using Richardson-extrapolated central
        differences for delta in log z."""
        z = as_sector_point(z)
        m = op.order

        def dval(logz: complex) -> complex:
            return self(SectorPoint(logz.real, logz.imag))

        logz = z.complex_log()
        vals: dict[float, complex] = {}

        def delta_pow(j: int, h: float) -> complex:
            # iterated central differences in log z, spacing h
            def rec(jj: int, t: float) -> complex:
                if jj == 0:
                    if t not in vals:
                        vals[t] = dval(logz + t)
                    return vals[t]
                return (rec(jj - 1, t + h / 2) - rec(jj - 1, t - h / 2)) / h

            return rec(j, 0.0)

        zc = z.to_complex()
        scale = 0.0
        total = 0.0 + 0.0j
        for j, b in enumerate(op.coefficients):
            coef = b(zc)
            d1 = delta_pow(j, step)
            d2 = delta_pow(j, step / 2)
            dj = (4.0 * d2 - d1) / 3.0  # Richardson
            term = coef * dj
            total += term
            scale = max(scale, abs(term))
        if op.rhs is not None:
            rv = op.rhs.eval(z)
            total -= rv
            scale = max(scale, abs(rv))
        return abs(total) / max(scale, 1e-300)


def multisum(
    s: Optional[PowerSeries],
    op: LinearOperator,
    d: float,
    k_r_choice: Optional[int] = None,
    order: int = 240,
    rtol: float = 1e-11,
) -> SummedFunction:
    """Multisummation S^d of the formal solution of op along direction d.

    The series argument is optional (it is pinned by the operator and its
    right-hand side / valuation data); when supplied it is cross-checked
    against the operator's own solution.
    """
    polygon = newton_polygon(op)
    if polygon.is_convergent_only():
        from .operators import solve_series

        series = s if s is not None else solve_series(op, order)
        radius = _cauchy_hadamard(series.coefficients)
        return SummedFunction(None, d, [], (), convergent_series=series,
                              radius=0.999 * radius)
    degrees = [c.degree for c in op.coefficients if not c.is_zero]
    if op.rhs is not None:
        degrees.append(op.rhs.truncation_order - 1)
    ladder = build_ladder(polygon, degrees, k_r_choice)
    if any(lam < 1 for lam in ladder.w_orders()):
        raise UnsupportedError(
            "multisummation evaluation currently covers ladders whose "
            "section-variable orders are all 1 (slope-1 problems of any "
            "coefficient degree); fractional slopes produce sub-unit orders "
            "whose stage sweeps are outside the supported envelope"
        )
    sections = _build_sections(op, ladder, order=order)
    dirs = singular_directions(op, ladder, sections)
    if dirs.min_distance(d) < 1e-9:
        raise SingularDirectionError(
            f"direction d = {d} is singular for this operator "
            f"(singular set mod 2pi: {[round(x, 6) for x in dirs.singular_directions]})"
        )
    if s is not None:
        from .operators import residual as op_residual

        res = op_residual(op, s)
        scale = max(np.max(np.abs(s.coefficients)), 1.0)
        head = res.coefficients[: max(1, len(res.coefficients) - op.order - 1)]
        if np.max(np.abs(head)) > 1e-8 * scale:
            raise ArgumentError("supplied series does not satisfy the operator")
    d_w = ladder.beta * d
    for sec in sections:
        sec.build_handles(d_w, rtol=rtol)
    excluded = tuple(op.coefficients[-1].nonzero_roots().tolist())
    return SummedFunction(ladder, d, sections, excluded)


def stokes_jump(
    s: Optional[PowerSeries],
    op: LinearOperator,
    d_singular: float,
    z,
    order: int = 240,
    rtol: float = 1e-10,
) -> complex:
    """Lateral-sum jump S^{d+}(h)(z) - S^{d-}(h)(z) across a singular
    direction; a solution of the homogeneous equation."""
    polygon = newton_polygon(op)
    if polygon.is_convergent_only():
        return 0.0 + 0.0j
    degrees = [c.degree for c in op.coefficients if not c.is_zero]
    ladder = build_ladder(polygon, degrees)
    dirs = singular_directions(op, ladder)
    if dirs.min_distance(d_singular) > 1e-9:
        # not singular: lateral sums agree
        return 0.0 + 0.0j
    others = [x for x in dirs.singular_directions
              if abs(_angdiff(x, d_singular)) > 1e-9]
    gap = min((abs(_angdiff(x, d_singular)) for x in others), default=math.pi)
    offset = min(math.pi / (8.0 * ladder.top_level), gap / 2.0)
    if offset < 1e-8:
        raise BracketingError(
            f"no singularity-free bracket around d = {d_singular}"
        )
    zp = as_sector_point(z)
    plus = multisum(s, op, d_singular + offset, order=order, rtol=rtol)
    minus = multisum(s, op, d_singular - offset, order=order, rtol=rtol)
    return plus(zp) - minus(zp)
