"""q-Borel / q-Laplace summation.

Level-k transforms are conjugates of the level-1 transforms in the variable
xi = zeta^k, which carries the rescaled parameter q^k (rho_k intertwines
sigma_q with sigma_{q^k}); the order-k q-Borel therefore divides coefficient
n by [n/k]_{q^k}!.  On the shared node grid {Q^t e^{i d}} every discrete
q-Laplace level is a convolution against the explicit kernel
(Q^-1) Q^d / e_Q(Q^{d+1}), which is how the ladder stages are evaluated.
"""

from __future__ import annotations

import cmath
import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from ._kernels import windowed_walk
from ._quad import complex_quad, peak_scale
from .classical import (
    SummationLadder,
    build_ladder,
    singular_directions as classical_singular_directions,
)
from .errors import (
    ArgumentError,
    DomainError,
    GrowthError,
    PoleError,
    RangeError,
    SingularDirectionError,
    SpiralCollisionError,
    UnsupportedError,
)
from .operators import (
    LinearOperator,
    Recurrence,
    newton_polygon,
    reweight_recurrence,
    section_recurrence,
)
from .series import (
    PowerSeries,
    SectorPoint,
    as_sector_point,
    q_factorial,
)

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# q-Borel transforms


def q_borel(s: PowerSeries, k, q: float) -> PowerSeries:
    """Order-k q-Borel: divide the coefficient of z^e by [e/k]_{q^k}!.

    Requires e/k to be a nonnegative integer on the support (guaranteed on
    ladder sections after ramification).
    """
    k = Fraction(k)
    if k <= 0:
        raise ArgumentError("q-Borel order must be positive")
    Q = q ** float(k)
    nu = s.ram_index
    out = []
    for n, c in enumerate(s.coefficients):
        if c == 0:
            out.append(0.0)
            continue
        idx = Fraction(n, nu) / k
        if idx.denominator != 1:
            raise UnsupportedError(
                f"exponent {Fraction(n, nu)} is not a multiple of the q-Borel "
                f"order {k}; ramify first"
            )
        out.append(c / q_factorial(int(idx), Q))
    return PowerSeries(out, nu)


def rz_borel(s: PowerSeries, q: float) -> PowerSeries:
    """Theta-weight q-Borel: divide coefficient n by q^{n(n-1)/2}."""
    if s.ram_index != 1:
        raise ArgumentError("rz_borel requires an unramified series")
    return s.termwise(lambda n: q ** (-n * (n - 1) / 2.0))


# ---------------------------------------------------------------------------
# elementary vectorized kernels


def _eq_vec(x: np.ndarray, Q: float) -> np.ndarray:
    """e_Q at an array of complex points, by the infinite product."""
    x = np.asarray(x, dtype=complex)
    out = np.ones_like(x)
    n = 0
    top = np.max(np.abs(x)) if x.size else 0.0
    while (Q - 1.0) * Q ** (-n - 1) * max(top, 1.0) > 1e-18 or n < 4:
        out = out * (1.0 + (Q - 1.0) * Q ** (-n - 1) * x)
        n += 1
        if n > 500000:
            raise RangeError("e_q product did not converge")
    return out


def _jackson_kernel(Q: float, M: int = 1, max_len: int = 120000) -> tuple[np.ndarray, int]:
    """Node weights of the level kernel on the grid with M sub-steps per
    Q-step: K(dlt) = (Q-1)/M * y / e_Q(Q y) at y = Q^(dlt/M), dlt in [-L1, L2].

    M = 1 is exactly the Jackson sum; M >= 8 is the trapezoid discretization
    of the continuous q-Laplace in log coordinates, whose error is spectrally
    small (the integrand is analytic in a strip of width ~pi).  The lower
    tail is geometric (42 e-folds); the upper tail is cut where the kernel's
    Gaussian-type decay reaches ~1e-40.
    """
    lnQ = math.log(Q)
    L1 = int(math.ceil(42.0 * M / lnQ)) + 4 * M
    L2 = (int(math.ceil(math.sqrt(2.0 * 92.0 / lnQ))) + 12) * M
    if L1 + L2 > max_len:
        raise RangeError(
            f"kernel support {L1 + L2} exceeds the node cap {max_len}"
        )
    dlt = np.arange(-L1, L2 + 1)
    y = np.exp(dlt * (lnQ / M))
    vals = (Q - 1.0) / M * y / _eq_vec(Q * y, Q)
    return vals.astype(complex), L1


# ---------------------------------------------------------------------------
# Jackson integral (public op)


def jackson_integral(f: Callable[[complex], complex], d: float, q: float,
                     max_half: int = 400, tol: float = 1e-16) -> complex:
    """(q-1) sum_l f(q^l e^{id}) q^l e^{id}, truncated two-sided once the
    tails fall below tol of the running sum; divergence raises RangeError."""
    if q <= 1.0:
        raise DomainError("Jackson integral requires q > 1")
    phase = cmath.exp(1j * d)
    total = 0.0 + 0.0j
    # upward: integrands may legitimately rise toward an interior peak, so
    # divergence is flagged only by overflow or by failing to decay in range
    for l in range(0, max_half + 1):
        node = q**l * phase
        term = (q - 1.0) * f(node) * node
        total += term
        if not abs(term) < 1e250:
            raise RangeError("Jackson integral diverges along the positive tail")
        if abs(term) < tol * max(abs(total), 1e-300) and l > 4:
            break
    else:
        raise RangeError(f"Jackson integral not converged within l <= {max_half}")
    for l in range(-1, -max_half - 1, -1):
        node = q**l * phase
        term = (q - 1.0) * f(node) * node
        total += term
        if abs(term) < tol * max(abs(total), 1e-300):
            break
    else:
        raise RangeError(f"Jackson integral not converged within l >= -{max_half}")
    return total


# ---------------------------------------------------------------------------
# continuation by the q-difference equation


@dataclass(frozen=True)
class PoleSpiral:
    """Discrete spiral base * ratio^Z (recorded pole locus)."""

    base: complex
    ratio: float

    def distance_rel(self, z: complex) -> float:
        """Relative angular-radial distance from z to the spiral."""
        if z == 0 or self.base == 0:
            return math.inf
        w = z / self.base
        t = round(math.log(abs(w)) / math.log(self.ratio))
        node = self.base * self.ratio**t
        return abs(z - node) / abs(node)


class QContinuation:
    """Meromorphic continuation of a convergent series along a ray by
    iterating the first-order-system form of its q-difference equation.

    Inside 0.8x the empirical radius the series is summed directly; outside,
    the value is pulled forward by exact sigma_q steps from an anchor inside
    the disk.  Pole spirals of the system are recorded; a ray that meets one
    raises SpiralCollisionError.
    """

    def __init__(self, series: PowerSeries, op: LinearOperator, direction: float):
        if series.ram_index != 1:
            raise ArgumentError("q-continuation works on unramified series")
        if op.kind != "q_difference":
            raise ArgumentError("q-continuation needs a q-difference operator")
        self.series = series
        self.op = op.to_sigma_basis()
        self.q = self.op.q
        self.direction = direction
        coeffs = np.abs(series.coefficients)
        if not np.all(np.isfinite(coeffs)):
            raise ArgumentError("series for continuation has non-finite coefficients")
        nz = [(n, c) for n, c in enumerate(coeffs) if c > 0]
        if len(nz) >= 4:
            tail = nz[-16:]
            est = max(math.log(c) / n for n, c in tail if n > 0)
            self.radius = math.exp(-est)
        else:
            self.radius = 1e6
        if not (self.radius > 0.0):
            raise ArgumentError("series for continuation has zero radius estimate")
        self._m = self.op.order
        self._lead = self.op.coefficients[-1]
        self._trail = self.op.coefficients[0]
        self.pole_spirals = self._spirals()
        self._check_ray()
        self._cache: dict[int, complex] = {}
        # seeds must sit deep inside the disk: walks of order >= 2 amplify
        # seed error by the dominant/subdominant solution ratio, so the
        # series tail at the outermost seed point is checked explicitly
        anchor = 0.45 * self.radius / self.q ** max(self._m - 1, 0)
        coeffs_abs = np.abs(series.coefficients)
        N = len(coeffs_abs)
        for _ in range(60):
            top = anchor * self.q ** max(self._m - 1, 0)
            tail = coeffs_abs[-1] * top ** (N - 1)
            scale = max(abs(self.series.eval(top)), coeffs_abs[0], 1e-300)
            if tail <= 1e-12 * scale:
                break
            anchor *= 0.7
        self._anchor_scale = anchor

    def _spirals(self) -> list[PoleSpiral]:
        out = []
        for rho in self._lead.nonzero_roots():
            # stepping divides by b_m at q^{t} rho-adjacent points; poles
            # propagate forward along q^(N*) rho
            out.append(PoleSpiral(complex(rho) * self.q, self.q))
        return out

    def _check_ray(self):
        d = self.direction
        for sp in self.pole_spirals:
            ang = (cmath.phase(sp.base) - d + math.pi) % TWO_PI - math.pi
            if abs(ang) < 1e-9:
                raise SpiralCollisionError(
                    f"continuation ray arg={d} meets the pole spiral through "
                    f"{sp.base} (ratio {sp.ratio})"
                )

    def eval_at(self, zeta) -> complex:
        """Value at an arbitrary nonzero point reached from the disk along
        its own q-spiral (finitely many sigma_q steps)."""
        z = complex(zeta)
        if abs(z) <= 0.8 * self.radius:
            return self.series.eval(z)
        m = self._m
        if m == 0:
            raise UnsupportedError("cannot continue with an order-0 operator")
        # window after k steps holds f(z0 q^(k+j)), j = 0..m-1; we need
        # z0 q^(steps+m-1) = zeta with every seed point inside the disk
        T = int(math.ceil(math.log(abs(z) / self._anchor_scale) / math.log(self.q)))
        steps = max(T - m + 1, 0)
        z0 = z / self.q ** (steps + m - 1)
        window = [self.series.eval(z0 * self.q**j) for j in range(m)]
        for t in range(steps):
            base = z0 * self.q**t
            lead = self._lead(base)
            scale = sum(abs(c) * abs(base) ** j for j, c in enumerate(self._lead.coeffs))
            if abs(lead) <= 1e-11 * max(scale, 1e-300):
                raise SpiralCollisionError(
                    f"sigma_q step hit a zero of the leading coefficient near "
                    f"{base * self.q**m}"
                )
            acc = self.op.rhs.eval(base) if self.op.rhs is not None else 0.0
            for j in range(m):
                acc -= self.op.coefficients[j](base) * window[j]
            nxt = acc / lead
            window = window[1:] + [nxt]
        return window[-1]

    def grid_values(self, base: complex, t_lo: int, t_hi: int) -> np.ndarray:
        """Values on the grid base * q^t for t in [t_lo, t_hi] (one walk)."""
        q, m = self.q, self._m
        anchor_t = int(math.floor(math.log(self._anchor_scale / abs(base)) / math.log(q)))
        start = min(t_lo, anchor_t - m)
        count = t_hi - start + 1
        ts = np.arange(start, t_hi + 1)
        radii = np.abs(base) * q ** ts.astype(float)
        inside = radii <= 0.8 * self.radius
        vals = np.zeros(count, dtype=complex)
        # seed everything inside the disk by the series
        phase = base / abs(base)
        for i in np.where(inside)[0]:
            vals[i] = self.series.eval(base * q ** float(ts[i]))
        first_out = np.where(~inside)[0]
        if len(first_out):
            i0 = int(first_out[0])
            if i0 < m:
                raise ArgumentError("grid starts outside the seedable disk")
            zb = np.array([base * q ** float(t - m) for t in ts[i0:]])
            rows = np.zeros((len(zb), m + 1), dtype=complex)
            rows[:, 0] = [self._lead(w) for w in zb]
            for i in range(1, m + 1):
                bj = self.op.coefficients[m - i]
                rows[:, i] = [bj(w) for w in zb]
            rhs = np.zeros(len(zb), dtype=complex)
            if self.op.rhs is not None:
                rhs = np.array([self.op.rhs.eval(w) for w in zb])
            local = np.zeros(len(zb))
            for j, cc in enumerate(self._lead.coeffs):
                local += abs(cc) * np.abs(zb) ** j
            if np.any(np.abs(rows[:, 0]) <= 1e-12 * np.maximum(local, 1e-300)):
                raise SpiralCollisionError(
                    "grid walk meets a zero of the leading coefficient"
                )
            full = np.concatenate([vals[i0 - m : i0], np.zeros(len(zb), dtype=complex)])
            walked = windowed_walk(
                np.concatenate([np.ones((m, m + 1), dtype=complex), rows]),
                np.concatenate([np.zeros(m, dtype=complex), rhs]),
                full[:m],
            )
            vals[i0:] = walked[m:]
        return vals[t_lo - start :]


def q_continuation(s: PowerSeries, q_op: LinearOperator, d: float) -> QContinuation:
    """Continuation handle for a convergent q-series along the ray arg = d."""
    return QContinuation(s, q_op, d)


# ---------------------------------------------------------------------------
# q-Laplace transforms (pointwise forms)


def _growth_fit_q(handle_eval, q: float, k: float, x_lo: float, x_hi: float,
                  samples: int = 40) -> tuple[float, float]:
    """(J, L) with |f(x e^{id})| <= J e_{q^k}(L x^k) on the sampled ray."""
    Q = q**k
    xs = np.geomspace(x_lo, x_hi, samples)
    vals = np.maximum([abs(handle_eval(x)) for x in xs], 1e-300)
    logs = np.log(vals)
    # consecutive ratios: |f(q x)/f(x)| ~ 1 + (Q-1) L x^k for the e_Q class;
    # only the tail half is read (small-x transients inflate the ratio)
    L = 0.0
    for i in range(len(xs) // 2, len(xs) - 1):
        ratio = math.exp(
            (logs[i + 1] - logs[i]) / (math.log(xs[i + 1] / xs[i]) / math.log(q))
        )
        est = (ratio - 1.0) / ((Q - 1.0) * xs[i] ** k)
        L = max(L, est)
    L = max(L, 0.0)
    if L > 0:
        ln_eq = np.array([_ln_eq(Q, L * x**k) for x in xs])
    else:
        ln_eq = np.zeros(len(xs))
    J = float(np.max(np.exp(logs - ln_eq))) * 1.3
    return max(J, 1e-300), L


def _ln_eq(Q: float, x: float) -> float:
    """log e_Q(x) for real x >= 0."""
    if x <= 0:
        return 0.0
    total = 0.0
    n = 0
    while (Q - 1.0) * Q ** (-n - 1) * x > 1e-18 or n < 4:
        total += math.log1p((Q - 1.0) * Q ** (-n - 1) * x)
        n += 1
        if n > 500000:
            break
    return total


def discrete_q_laplace(f, k, d: float, q: float, z,
                       spiral_tol: float = 1e-6) -> complex:
    """Jackson-sum q-Laplace of order k in direction d, evaluated at z.

    Nodes are q^l e^{id} in the plane of f; the kernel is built from e_{q^k}
    in the conjugate variable.  Poles of the result lie on the q-spiral
    (q^k - 1)[k d + pi] of z^k (checked before summing).
    """
    k = Fraction(k)
    lam = float(k)
    Q = q**lam
    zp = as_sector_point(z)
    Z = cmath.exp(lam * zp.complex_log())
    spiral = PoleSpiral((Q - 1.0) * cmath.exp(1j * (lam * d + math.pi)), Q)
    if spiral.distance_rel(Z) < spiral_tol:
        raise PoleError(
            f"z^k = {Z} lies within {spiral_tol} of the pole spiral "
            f"(q^k-1) q^(k Z) e^(i(kd+pi))"
        )
    eval_ray = _ray_evaluator(f, d)
    # growth gate: the sum converges when the e_{q^k} kernel outruns the
    # handle's fitted e_q-class growth, i.e. L |z|^k safely below q^k
    if isinstance(f, QContinuation):
        fit = getattr(f, "_q_growth_fit", None)
        if fit is None:
            hi = max(4.0 * f.radius, 2.0)
            fit = _growth_fit_q(eval_ray, q, lam, 0.05 * f.radius, hi)
            f._q_growth_fit = fit
        J_fit, L_fit = fit
        if L_fit * abs(Z) >= 0.98 * Q:
            raise GrowthError(
                f"evaluation point outside the fitted growth domain: "
                f"L |z|^k = {L_fit * abs(Z):.3e} vs q^k = {Q:.3e}"
            )
    phase = cmath.exp(1j * lam * d)
    lnQ = math.log(Q)
    c = int(round(math.log(abs(Z) / (Q - 1.0)) / lnQ))
    total = 0.0 + 0.0j
    for direction in (1, -1):
        l = c if direction == 1 else c - 1
        steps = 0
        grew = 0
        prev = None
        while True:
            xi = Q**l * phase
            node_x = q ** (l * lam)  # radius in the f-plane grid q^(l k)
            fv = eval_ray(node_x)
            term = (Q - 1.0) * xi * fv / (Z * _eq_scalar(Q * xi / Z, Q))
            total += term
            at = abs(term)
            if prev is not None and at > prev and direction == 1:
                grew += 1
                if grew >= 14:
                    raise GrowthError(
                        "discrete q-Laplace sum diverges; evaluation point "
                        "outside the growth domain"
                    )
            else:
                grew = 0
            prev = at
            l += direction
            steps += 1
            if at < 1e-17 * max(abs(total), 1e-300) and steps > 6:
                break
            if steps > 6000:
                raise RangeError("discrete q-Laplace sum did not converge")
    return total


def _eq_scalar(x: complex, Q: float) -> complex:
    out = 1.0 + 0.0j
    n = 0
    ax = abs(x)
    while (Q - 1.0) * Q ** (-n - 1) * max(ax, 1.0) > 1e-18 or n < 4:
        out *= 1.0 + (Q - 1.0) * Q ** (-n - 1) * x
        n += 1
    return out


def _ray_evaluator(f, d: float):
    """Normalize handle-like inputs to a function of the ray radius."""
    if isinstance(f, QContinuation):
        phase = cmath.exp(1j * d)
        return lambda x: f.eval_at(x * phase)
    eval_ray = getattr(f, "eval_ray", None)
    if eval_ray is not None:
        return eval_ray
    if callable(f):
        phase = cmath.exp(1j * d)
        return lambda x: f(x * phase)
    raise ArgumentError("expected a continuation handle or callable")


def theta_q_laplace(f, d: float, q: float, z, spiral_tol: float = 1e-6) -> complex:
    """Theta-kernel q-Laplace (order 1):
    sum_n f(q^n (q-1) e^{id}) / Theta_q(q^{n+1} (q-1) e^{id} / z)."""
    from .qspecial import theta as theta_fn

    zp = as_sector_point(z)
    zc = zp.to_complex()
    spiral = PoleSpiral((q - 1.0) * cmath.exp(1j * (d + math.pi)), q)
    if spiral.distance_rel(zc) < spiral_tol:
        raise PoleError(
            f"z = {zc} lies within {spiral_tol} of the pole spiral (q-1)[d+pi]"
        )
    eval_ray = _ray_evaluator(f, d)
    lam0 = (q - 1.0)
    c = int(round(math.log(abs(zc) / lam0) / math.log(q)))
    total = 0.0 + 0.0j
    for direction in (1, -1):
        n = c if direction == 1 else c - 1
        steps = 0
        grew = 0
        prev = None
        while True:
            node = q**n * lam0
            fv = eval_ray(node)
            kern = theta_fn(q ** (n + 1) * lam0 * cmath.exp(1j * d) / zc, q)
            term = fv * cmath.exp(1j * 0.0) / kern
            total += term
            at = abs(term)
            if prev is not None and at > prev and direction == 1:
                grew += 1
                if grew >= 14:
                    raise GrowthError("theta q-Laplace sum diverges")
            else:
                grew = 0
            prev = at
            n += direction
            steps += 1
            if at < 1e-17 * max(abs(total), 1e-300) and steps > 6:
                break
            if steps > 6000:
                raise RangeError("theta q-Laplace sum did not converge")
    return total


def continuous_q_laplace(f, k, d: float, q: float, z,
                         spiral_tol: float = 1e-6) -> complex:
    """Continuous q-Laplace of order k:
    (q^k-1)/log(q^k) * int_0^{inf e^{ikd}} rho_{1/k}f(xi) / (Z e_{q^k}(q^k xi/Z)) dxi.
    """
    k = Fraction(k)
    lam = float(k)
    Q = q**lam
    zp = as_sector_point(z)
    Z = cmath.exp(lam * zp.complex_log())
    spiral = PoleSpiral((Q - 1.0) * cmath.exp(1j * (lam * d + math.pi)), Q)
    if spiral.distance_rel(Z) < spiral_tol:
        raise PoleError(f"z^k = {Z} lies within {spiral_tol} of the pole spiral")
    eval_ray = _ray_evaluator(f, d)
    phase = cmath.exp(1j * lam * d)

    def integrand(s: float) -> complex:
        if s <= 0:
            return 0.0 + 0.0j
        xi = s * phase
        return eval_ray(s ** (1.0 / lam)) * phase / (Z * _eq_scalar(Q * xi / Z, Q))

    # kernel scale: e_Q(Q s/|Z|) reaches 1/eps around s* with
    # ln e_Q ~ ln^2(s (Q-1)/|Z|)/(2 ln Q)
    lnQ = math.log(Q)
    target = 40.0 * 2.0 * lnQ
    s_star = abs(Z) / (Q - 1.0) * math.exp(math.sqrt(target))
    S = s_star
    fn_scale = peak_scale(integrand, 0.0, S)
    grew = 0
    while abs(integrand(S)) * S > 1e-16 * fn_scale:
        nxt = 1.6 * S
        if abs(integrand(nxt)) > abs(integrand(S)):
            grew += 1
            if grew >= 3:
                raise GrowthError(
                    "continuous q-Laplace integrand does not decay; evaluation "
                    "point outside the growth domain"
                )
        S = nxt
        if S > 1e9 * s_star:
            raise RangeError("continuous q-Laplace truncation not reached")
    value = complex_quad(integrand, 0.0, S, epsabs=1e-14 * fn_scale * S, epsrel=1e-12)
    return (Q - 1.0) / math.log(Q) * value


# ---------------------------------------------------------------------------
# q-multisummation pipeline


def _q_section_seed_logs(op: LinearOperator, beta: int, l: int, count: int):
    rec = Recurrence.from_operator(op)
    order = l + beta * (count - 1) + 1
    phases, logmags = rec.solve_logspace(order)
    idx = [l + beta * n for n in range(count)]
    return phases[idx], logmags[idx]


def _ln_qfact(n: int, Q: float) -> float:
    total = 0.0
    for t in range(1, n + 1):
        total += math.log((Q**t - 1.0) / (Q - 1.0))
    return total


def _q_stage_seeds(op, beta: int, l: int, m_sub: Sequence[int],
                   kt_sub: Sequence[Fraction], q: float, count: int) -> np.ndarray:
    """First coefficients of the partial q-Borel chain of the section:
    section values divided by prod_i [n*m_i]_{q^{kt_i}}! in log space."""
    ph, lg = _q_section_seed_logs(op, beta, l, count)
    out = np.zeros(count, dtype=complex)
    for n in range(count):
        if lg[n] == -np.inf:
            continue
        w = sum(
            _ln_qfact(n * m, q ** float(kt))
            for m, kt in zip(m_sub, kt_sub)
        )
        out[n] = ph[n] * math.exp(lg[n] - w)
    return out


def _attach_q_stage_rhs(rec: Recurrence, seeds: np.ndarray):
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


@dataclass
class _QSection:
    """Per-section stage data on the shared log-uniform node grid.

    The grid is x_t = exp(h t) e^{i d_w} with h = log(Q_w)/M; every q-Laplace
    level acts as the convolution with its node kernel.  M = 1 gives the
    Jackson (discrete) summation exactly; M >= 8 gives the continuous
    summation to spectral accuracy (trapezoid rule in log coordinates, with
    the integrand analytic in a strip).
    """

    l: int
    beta: int
    orders_w: tuple[Fraction, ...]
    Qw: float
    stage_recs: list
    stage_ops: list
    g1: PowerSeries
    stage_seeds: list
    d_w: Optional[float] = None
    mode: str = "discrete"
    M: int = 1
    cont: Optional[QContinuation] = None
    _grid: Optional[tuple[int, int, list]] = None

    def _kernels(self):
        out = []
        for lam in self.orders_w[:-1]:
            Qh = self.Qw ** float(lam)
            out.append(_jackson_kernel(Qh, self.M))
        return out

    def build(self, d_w: float, mode: str):
        self.d_w = d_w
        self.mode = mode
        self.M = 1 if mode == "discrete" else 8
        self.cont = QContinuation(self.g1, self.stage_ops[0], d_w)
        self._grid = None
        self._lock = threading.RLock()

    def _stage1_fine(self, lo: int, hi: int) -> np.ndarray:
        """Stage-1 values on the fine grid exp(h t) e^{i d_w}, t in [lo, hi]."""
        M = self.M
        h = math.log(self.Qw) / M
        out = np.empty(hi - lo + 1, dtype=complex)
        for r in range(M):
            # fine indices congruent to r (mod M) form a Q_w-grid
            t0 = lo + ((r - lo) % M)
            ts = np.arange(t0, hi + 1, M)
            if len(ts) == 0:
                continue
            T_lo = (ts[0] - r) // M
            T_hi = (ts[-1] - r) // M
            base = cmath.exp(complex(0.0, self.d_w)) * math.exp(h * r)
            vals = self.cont.grid_values(base, T_lo, T_hi)
            out[ts - lo] = vals
        return out

    def _ensure_grid(self, lo: int, hi: int):
        if self._grid is not None:
            glo, ghi, _ = self._grid
            if glo <= lo and ghi >= hi:
                return
        with self._lock:
            self._ensure_grid_locked(lo, hi)

    def _ensure_grid_locked(self, lo: int, hi: int):
        if self._grid is not None:
            glo, ghi, _ = self._grid
            if glo <= lo and ghi >= hi:
                return
            lo, hi = min(lo, glo), max(hi, ghi)
        kernels = self._kernels()
        lo1, hi1 = lo, hi
        for K, L1 in kernels:
            lo1 -= L1
            hi1 += len(K) - 1 - L1
        if hi1 - lo1 > 400000:
            raise RangeError("q-Laplace node grid exceeded the size cap")
        arrays = [self._stage1_fine(lo1, hi1)]
        cur_lo, cur_hi = lo1, hi1
        for K, L1 in kernels:
            # node_{j+1}(t) = sum_dlt K(dlt) node_j(t + dlt)
            full = np.convolve(arrays[-1], K[::-1], mode="valid")
            cur_lo = cur_lo + L1
            cur_hi = cur_hi - (len(K) - 1 - L1)
            arrays.append(full)
        self._grid = (cur_lo, cur_hi, arrays)

    def value(self, w: SectorPoint) -> complex:
        lam = float(self.orders_w[-1])
        Qh = self.Qw**lam
        M = self.M
        W = cmath.exp(lam * w.complex_log())
        spiral = PoleSpiral(
            (Qh - 1.0) * cmath.exp(1j * (lam * self.d_w + math.pi)), Qh
        )
        if self.mode == "discrete" and spiral.distance_rel(W) < 1e-6:
            raise PoleError(
                f"evaluation point lies within 1e-6 of the level-{lam} pole "
                f"spiral (base {spiral.base:.6g}, ratio {spiral.ratio:.6g})"
            )
        lnQh = math.log(Qh)
        c = int(round(M * math.log(abs(W) / (Qh - 1.0)) / lnQh))
        L1 = int(math.ceil(42.0 * M / lnQh)) + 4 * M
        L2 = (int(math.ceil(math.sqrt(2.0 * 92.0 / lnQh))) + 12) * M
        self._ensure_grid(c - L1, c + L2)
        glo, ghi, arrays = self._grid
        nodes = arrays[-1]
        ls = np.arange(c - L1, c + L2 + 1)
        vals = nodes[ls[0] - glo : ls[-1] - glo + 1]
        phase = cmath.exp(1j * lam * self.d_w)
        xi = np.exp(ls * (lnQh / M)) * phase
        terms = (Qh - 1.0) / M * xi * vals / (W * _eq_vec(Qh * xi / W, Qh))
        total = complex(np.sum(terms))
        edge = max(abs(terms[0]), abs(terms[-1]))
        if edge > 1e-12 * max(abs(total), 1e-300):
            raise RangeError(
                "q-Laplace node window too narrow (edge terms not negligible)"
            )
        return total



@dataclass
class QSummedFunction:
    """Evaluable handle for S_q^{[d]}(h): ladder, direction, q, kernel mode,
    per-section node data and the recorded pole spirals.  Evaluation within
    1e-6 relative distance of a pole spiral raises, never returns a value."""

    ladder: Optional[SummationLadder]
    direction: float
    q: float
    mode: str
    sections: list
    pole_spirals: tuple[PoleSpiral, ...]
    convergent_series: Optional[PowerSeries] = None
    radius: float = 0.0
    direct_evaluator: Optional[Callable[[SectorPoint], complex]] = None

    def domain_check(self, z: SectorPoint):
        if self.convergent_series is not None:
            if z.modulus >= self.radius:
                raise DomainError(
                    f"|z| = {z.modulus:.4g} outside the convergence disk "
                    f"(radius ~ {self.radius:.4g})"
                )
            return
        zc = z.to_complex()
        for sp in self.pole_spirals:
            if sp.distance_rel(zc) < 1e-6:
                raise PoleError(
                    f"z = {zc:.6g} lies within 1e-6 of the pole spiral "
                    f"(base {sp.base:.6g}, ratio {sp.ratio:.6g})"
                )
        if self.ladder is not None:
            half = math.pi / self.ladder.top_level
            if abs(z.argument - self.direction) > half + 1e-12:
                raise DomainError(
                    f"arg z = {z.argument:.6f} outside the sector "
                    f"d +/- pi/k_r = {self.direction:.6f} +/- {half:.6f}"
                )

    def __call__(self, z) -> complex:
        z = as_sector_point(z)
        self.domain_check(z)
        if self.convergent_series is not None:
            return self.convergent_series.eval(z)
        if self.direct_evaluator is not None:
            return self.direct_evaluator(z)
        beta = self.ladder.beta
        w = z.power(beta)
        total = 0.0 + 0.0j
        for sec in self.sections:
            total += cmath.exp(sec.l * z.complex_log()) * sec.value(w)
        return total

    def residual(self, op: LinearOperator, z) -> float:
        """Relative residual of the q-operator at z via exact sigma_q shifts."""
        op = op.to_sigma_basis()
        z = as_sector_point(z)
        zc = z.to_complex()
        lnq = math.log(op.q)
        total = 0.0 + 0.0j
        scale = 0.0
        for j, b in enumerate(op.coefficients):
            zj = SectorPoint(z.log_modulus + j * lnq, z.argument)
            term = b(zc) * self(zj)
            total += term
            scale = max(scale, abs(term))
        if op.rhs is not None:
            rv = op.rhs.eval(z)
            total -= rv
            scale = max(scale, abs(rv))
        return abs(total) / max(scale, 1e-300)


def _final_pole_spirals(ladder: SummationLadder, d: float, q: float) -> tuple:
    k_r = ladder.top_level
    Qh = q**k_r
    out = []
    for j in range(k_r):
        base_mod = (Qh - 1.0) ** (1.0 / k_r)
        ang = d + (math.pi + TWO_PI * j) / k_r
        out.append(PoleSpiral(base_mod * cmath.exp(1j * ang), q))
    return tuple(out)


def q_multisum(
    s: Optional[PowerSeries],
    op: LinearOperator,
    d: float,
    mode: str = "discrete",
    limit_op: Optional[LinearOperator] = None,
    order: int = 240,
) -> QSummedFunction:
    """q-Borel/q-Laplace multisummation S_q^{[d]} of the formal solution.

    mode 'discrete' runs the Jackson-kernel ladder, 'continuous' the
    appendix kernel; 'theta' runs the single-level slope-1 summation
    (theta-weight Borel + theta-kernel Laplace) and requires the sigma_q
    polygon to have {1} as its positive slopes.
    """
    if op.kind != "q_difference":
        raise ArgumentError("q_multisum needs a q-difference operator")
    sop = op.to_sigma_basis()
    q = sop.q
    polygon = newton_polygon(sop)
    if polygon.is_convergent_only():
        from .operators import solve_series

        series = s if s is not None else solve_series(op, order)
        coeffs = np.abs(series.coefficients)
        nz = [(n, c) for n, c in enumerate(coeffs) if c > 0]
        est = max((math.log(c) / n for n, c in nz[-16:] if n > 0), default=-10.0)
        return QSummedFunction(None, d, q, mode, [], (),
                               convergent_series=series,
                               radius=0.999 * math.exp(-est))
    if mode == "theta":
        return _theta_mode_sum(s, op, sop, d, order)
    if mode not in ("discrete", "continuous"):
        raise ArgumentError(f"unknown q-summation mode {mode!r}")
    if limit_op is not None:
        degrees = [c.degree for c in limit_op.coefficients if not c.is_zero]
        ladder_polygon = newton_polygon(limit_op)
        dirs = classical_singular_directions(limit_op)
        if dirs.min_distance(d) < 1e-9:
            raise SingularDirectionError(
                f"direction d = {d} is singular for the limit operator"
            )
    else:
        dop = op.to_delta_q_basis()
        degrees = [c.degree for c in dop.coefficients if not c.is_zero]
        ladder_polygon = polygon
    if op.rhs is not None:
        degrees.append(op.rhs.truncation_order - 1)
    ladder = build_ladder(ladder_polygon, degrees)
    if any(lam < 1 for lam in ladder.w_orders()):
        raise UnsupportedError(
            "q-multisummation evaluation currently covers ladders whose "
            "section-variable orders are all 1 (slope-1 problems); "
            "fractional slopes are outside the supported envelope"
        )
    beta = ladder.beta
    orders_w = ladder.w_orders()
    m_list = [int(1 / lam) for lam in orders_w]
    Qw = q**beta
    rec = Recurrence.from_operator(sop)
    sections = []
    for l in range(beta):
        if rec.span != 1:
            raise UnsupportedError(
                "q-multisummation currently derives section operators only "
                "for coefficient recurrences of span 1 (z-degree <= 1)"
            )
        sec_rec = section_recurrence(rec, beta, l)
        recs = [None] * len(orders_w)
        cur = sec_rec
        for j in range(len(orders_w) - 1, -1, -1):
            cur = reweight_recurrence(cur, orders_w[j], "qfact")
            cur.rhs = {}
            recs[j] = cur
        n_seed = max(sec_rec.n_min + sec_rec.span + 2, 8)
        all_seeds = []
        for j in range(len(orders_w)):
            seeds_j = _q_stage_seeds(
                sop, beta, l, m_list[j:], ladder.kappa_tilde[j:], q, n_seed
            )
            _attach_q_stage_rhs(recs[j], seeds_j)
            all_seeds.append(seeds_j)
        with np.errstate(over="ignore", invalid="ignore"):
            coeffs, _meta = recs[0].solve(order, seed=all_seeds[0])
        mags = np.abs(coeffs)
        bad = np.where(~np.isfinite(mags) | (mags > 1e280))[0]
        if len(bad):
            coeffs = coeffs[: max(int(bad[0]), n_seed + 8)]
        g1 = PowerSeries(coeffs, 1)
        ops_chain = [r.to_operator() for r in recs]
        sec = _QSection(l, beta, orders_w, Qw, recs, ops_chain, g1, all_seeds)
        sec.build(beta * d, mode)
        sections.append(sec)
    spirals = _final_pole_spirals(ladder, d, q)
    return QSummedFunction(ladder, d, q, mode, sections, spirals)


def _theta_mode_sum(s, op, sop, d, order) -> QSummedFunction:
    """Single-level slope-1 summation: theta-weight q-Borel then the
    theta-kernel q-Laplace (valid when the only positive slope is 1)."""
    from .operators import rz_borel_operator, solve_series

    polygon = newton_polygon(sop)
    if polygon.positive_slopes() != (Fraction(1),):
        raise UnsupportedError(
            "theta-kernel summation applies to sigma_q polygons whose only "
            "positive slope is 1"
        )
    q = sop.q
    if s is not None:
        series = s
    else:
        with np.errstate(over="ignore", invalid="ignore"):
            series = solve_series(op, order)
        mags = np.abs(series.coefficients)
        bad = np.where(~np.isfinite(mags) | (mags > 1e280))[0]
        if len(bad):
            series = series.truncate(max(int(bad[0]), 8))
    fhat = rz_borel(series, q)
    bop = rz_borel_operator(op)
    handle = QContinuation(fhat, bop, d)
    spirals = (PoleSpiral((q - 1.0) * cmath.exp(1j * (d + math.pi)), q),)
    return QSummedFunction(
        None, d, q, "theta", [], spirals,
        direct_evaluator=lambda z: theta_q_laplace(handle, d, q, z),
    )


# ---------------------------------------------------------------------------
# q-Stokes jump (scalar demonstration)


def first_order_homogeneous_solution(op: LinearOperator):
    """Nonvanishing solution of the order-1 homogeneous part b1 z dq y + b0 y = 0
    when b1 = c*z, b0 = c (the q-deformed Euler shape): y = 1/e_q(-q a / z)
    with a = b0/b1-coefficient ratio; used to normalize scalar q-Stokes jumps."""
    from .qspecial import eq_exp

    sop = op.to_delta_q_basis()
    if sop.order != 1:
        raise UnsupportedError("normalizer implemented for first-order operators")
    b1, b0 = sop.coefficients[1], sop.coefficients[0]
    if b1.degree != 1 or abs(b1.coeffs[0]) > 1e-14 or b0.degree != 0:
        raise UnsupportedError(
            "normalizer needs b1 = c*z und b0 = c' (q-Euler shape)"
        )
    a = complex(b0.coeffs[0] / b1.coeffs[1])
    q = sop.q

    def y_h(z) -> complex:
        zp = as_sector_point(z)
        return 1.0 / eq_exp(-q * a / zp.to_complex(), q)

    return y_h


def q_stokes_jump(
    s: Optional[PowerSeries],
    op: LinearOperator,
    d_singular: float,
    z,
    mode: str = "discrete",
    limit_op: Optional[LinearOperator] = None,
    order: int = 240,
) -> complex:
    """S_q^{[d+]}(h)(z) - S_q^{[d-]}(h)(z) across a singular direction of the
    limit operator; a solution of the homogeneous q-equation whose normalized
    form (divided by a nonvanishing homogeneous solution) is sigma_q-invariant."""
    sop = op.to_sigma_basis()
    polygon = newton_polygon(sop)
    if polygon.is_convergent_only():
        return 0.0 + 0.0j
    ref = limit_op if limit_op is not None else None
    if ref is not None:
        dirs = classical_singular_directions(ref)
        others = [x for x in dirs.singular_directions
                  if abs((x - d_singular + math.pi) % TWO_PI - math.pi) > 1e-9]
        gap = min(
            (abs((x - d_singular + math.pi) % TWO_PI - math.pi) for x in others),
            default=math.pi,
        )
        degrees = [c.degree for c in ref.coefficients if not c.is_zero]
        ladder = build_ladder(newton_polygon(ref), degrees)
        offset = min(math.pi / (8.0 * ladder.top_level), gap / 2.0)
    else:
        offset = math.pi / 24.0
    zp = as_sector_point(z)
    plus = q_multisum(s, op, d_singular + offset, mode=mode, limit_op=limit_op,
                      order=order)
    minus = q_multisum(s, op, d_singular - offset, mode=mode, limit_op=limit_op,
                       order=order)
    return plus(zp) - minus(zp)


# ---------------------------------------------------------------------------
# (A1)-(A3) validation


@dataclass
class ConfluenceReport:
    """Runtime report of the standing assumptions over a q-grid."""

    q_grid: tuple[float, ...]
    a1_deviation: tuple[float, ...]
    a1_pass: bool
    a2_slopes_q: tuple
    a2_slopes_limit: tuple
    a2_pass: bool
    a3_c1: tuple[float, ...]
    a3_slope: float
    a3_pass: bool

    @property
    def all_pass(self) -> bool:
        return self.a1_pass and self.a2_pass and self.a3_pass


def validate_confluence_family(
    op_of_q: Callable[[float], LinearOperator],
    limit_op: LinearOperator,
    q_grid: Sequence[float],
    z_samples: Optional[Sequence[complex]] = None,
) -> ConfluenceReport:
    """Measure the standing assumptions of the q -> 1 confluence on a q-grid:
    coefficientwise convergence of the family, slope matching of the q- and
    differential Newton polygons, and the (A3) stability constant
    c1 = sup |b_i(z,q) - b~_i(z)| / ((q-1)(|b~_i(z)|+1))."""
    q_grid = tuple(sorted(q_grid, reverse=True))
    if any(q <= 1.0 for q in q_grid):
        raise ArgumentError("q-grid entries must exceed 1")
    if z_samples is None:
        z_samples = [
            r * cmath.exp(1j * TWO_PI * k / 8)
            for r in (0.3, 1.0, 3.0)
            for k in range(8)
        ]
    limit_polygon = newton_polygon(limit_op)
    limit_coeffs = limit_op.coefficients
    a1 = []
    a3 = []
    slopes_q = None
    a2_ok = True
    for q in q_grid:
        opq = op_of_q(q).to_delta_q_basis()
        if opq.order != limit_op.order:
            raise ArgumentError("family and limit operator orders differ")
        dev = 0.0
        c1 = 0.0
        for i in range(limit_op.order + 1):
            bq = opq.coefficients[i]
            bl = limit_coeffs[i]
            n = max(len(bq.coeffs), len(bl.coeffs))
            da = np.zeros(n, dtype=complex)
            da[: len(bq.coeffs)] += bq.coeffs
            da[: len(bl.coeffs)] -= bl.coeffs
            dev = max(dev, float(np.max(np.abs(da))) if n else 0.0)
            for zs in z_samples:
                num = abs(bq(zs) - bl(zs))
                c1 = max(c1, num / ((q - 1.0) * (abs(bl(zs)) + 1.0)))
        a1.append(dev)
        a3.append(c1)
        pq = newton_polygon(opq.to_sigma_basis())
        pos = tuple(sl for sl, _ in pq.slopes if sl > 0)
        if slopes_q is None:
            slopes_q = pos
        elif pos != slopes_q:
            a2_ok = False
    limit_pos = tuple(sl for sl, _ in limit_polygon.slopes if sl > 0)
    a2_ok = a2_ok and (slopes_q == limit_pos)
    # A1: deviations must vanish with q (or be identically ~0)
    if a1[0] < 1e-12:
        a1_ok = all(v < 1e-12 for v in a1)
    else:
        a1_ok = a1[-1] < 0.2 * a1[0] + 1e-12
    # A3: c1 finite and stable as q -> 1 (log-log slope must not diverge)
    xs = np.log([q - 1.0 for q in q_grid])
    cs = np.log([max(c, 1e-300) for c in a3])
    if max(a3) < 1e-12:
        slope = 0.0
        a3_ok = True
    else:
        slope = float(np.polyfit(xs, cs, 1)[0])
        a3_ok = math.isfinite(max(a3)) and slope > -0.05
    return ConfluenceReport(
        q_grid, tuple(a1), a1_ok, slopes_q, limit_pos, a2_ok,
        tuple(a3), slope, a3_ok,
    )
