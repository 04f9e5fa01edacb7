"""Shared numeric substrate: sector points on the Riemann surface of the
logarithm, ramified truncated power series, q-integer arithmetic and the
complex Gamma function.

All values are immutable after construction and all operations are pure,
so everything here can be shared freely between threads.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence, Union

import numpy as np

from .errors import ArgumentError, DomainError, RangeError

ComplexLike = Union[int, float, complex]


def ensure_finite(value: complex, context: str = "operation") -> complex:
    """Reject NaN/Inf instead of letting them propagate silently."""
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise RangeError(f"non-finite value escaped {context}: {value!r}")
    return value


# ---------------------------------------------------------------------------
# q-integers


def q_bracket(l: int, q: float) -> float:
    """[l]_q = 1 + q + ... + q^(l-1); the empty sum 0 for l = 0."""
    if q <= 1.0:
        raise DomainError(f"q_bracket requires q > 1, got q={q}")
    if l < 0 or l != int(l):
        raise ArgumentError(f"q_bracket requires a nonnegative integer, got {l}")
    if l == 0:
        return 0.0
    value = (q**l - 1.0) / (q - 1.0)
    if not math.isfinite(value):
        raise RangeError(f"q_bracket overflow at l={l}, q={q}")
    return value


def q_factorial(n: int, q: float) -> float:
    """[n]_q! = prod_{l=1}^{n} [l]_q, with [0]_q! = 1."""
    if q <= 1.0:
        raise DomainError(f"q_factorial requires q > 1, got q={q}")
    if n < 0 or n != int(n):
        raise ArgumentError(f"q_factorial requires a nonnegative integer, got {n}")
    value = 1.0
    for l in range(1, n + 1):
        value *= (q**l - 1.0) / (q - 1.0)
        if not math.isfinite(value):
            raise RangeError(f"q_factorial overflow at n={n} (step l={l}), q={q}")
    return value


# ---------------------------------------------------------------------------
# Gamma (Lanczos approximation, g = 607/128, 15 coefficients)

_LANCZOS_G = 607.0 / 128.0
_LANCZOS_C = (
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    3.3994649984811888699e-5,
    4.6523628927048575665e-5,
    -9.8374475304879564677e-5,
    1.5808870322491248884e-4,
    -2.1026444172410488319e-4,
    2.1743961811521264320e-4,
    -1.6431810653676389022e-4,
    8.4418223983852743293e-5,
    -2.6190838401581408670e-5,
    3.6899182659531622704e-6,
)


def gamma(z: ComplexLike) -> complex:
    """Complex Gamma function.

    Accurate to at least 12 significant digits for |z| <= 50 away from the
    poles; poles at the non-positive integers raise :class:`DomainError`.
    """
    z = complex(z)
    if z.imag == 0.0 and z.real == round(z.real) and z.real <= 0.0:
        raise DomainError(f"gamma pole at z = {int(z.real)}")
    if z.real < 0.5:
        # reflection: gamma(z) gamma(1-z) = pi / sin(pi z)
        return ensure_finite(
            math.pi / (cmath.sin(math.pi * z) * gamma(1.0 - z)), "gamma"
        )
    w = z - 1.0
    acc = _LANCZOS_C[0]
    for k in range(1, len(_LANCZOS_C)):
        acc += _LANCZOS_C[k] / (w + k)
    t = w + _LANCZOS_G + 0.5
    value = math.sqrt(2.0 * math.pi) * t ** (w + 0.5) * cmath.exp(-t) * acc
    return ensure_finite(value, "gamma")


def log_gamma_real(x: float) -> float:
    """log Gamma(x) for real x > 0 (used for scale bookkeeping)."""
    if x <= 0:
        raise DomainError(f"log_gamma_real requires x > 0, got {x}")
    return math.lgamma(x)


# ---------------------------------------------------------------------------
# Sector points


@dataclass(frozen=True)
class SectorPoint:
    """Point on the Riemann surface of the logarithm.

    The argument is exact and unbounded (never reduced mod 2*pi); the
    projection to C is exp(log_modulus) * e^{i*argument}.
    """

    log_modulus: float
    argument: float

    @classmethod
    def from_complex(cls, w: ComplexLike, argument: float | None = None) -> "SectorPoint":
        w = complex(w)
        if w == 0:
            raise DomainError("SectorPoint requires a nonzero complex number")
        principal = cmath.phase(w)
        if argument is None:
            argument = principal
        else:
            k = round((argument - principal) / (2.0 * math.pi))
            if abs(argument - principal - 2.0 * math.pi * k) > 1e-9:
                raise ArgumentError(
                    f"argument {argument} does not project onto arg({w}) mod 2*pi"
                )
            argument = principal + 2.0 * math.pi * k
        return cls(math.log(abs(w)), argument)

    @classmethod
    def from_polar(cls, modulus: float, argument: float) -> "SectorPoint":
        if modulus <= 0:
            raise DomainError("SectorPoint modulus must be positive")
        return cls(math.log(modulus), argument)

    def to_complex(self) -> complex:
        return cmath.exp(complex(self.log_modulus, self.argument))

    @property
    def modulus(self) -> float:
        return math.exp(self.log_modulus)

    def power(self, c: float) -> "SectorPoint":
        """z^c computed on the surface: both log-modulus and argument scale."""
        c = float(c)
        return SectorPoint(self.log_modulus * c, self.argument * c)

    def scale(self, r: float) -> "SectorPoint":
        """Multiply by a positive real (argument unchanged)."""
        if r <= 0:
            raise ArgumentError("scale factor must be positive")
        return SectorPoint(self.log_modulus + math.log(r), self.argument)

    def complex_log(self) -> complex:
        return complex(self.log_modulus, self.argument)


def as_sector_point(z, argument: float | None = None) -> SectorPoint:
    if isinstance(z, SectorPoint):
        return z
    return SectorPoint.from_complex(z, argument)


# ---------------------------------------------------------------------------
# Polynomials (dense, complex, ascending coefficients)


class Polynomial:
    """Dense complex polynomial; trailing zero coefficients are trimmed so the
    leading coefficient is nonzero unless the polynomial is zero."""

    __slots__ = ("coeffs",)

    def __init__(self, coefficients: Sequence[ComplexLike]):
        arr = np.asarray(list(coefficients), dtype=complex)
        if arr.ndim != 1:
            raise ArgumentError("polynomial coefficients must be a flat sequence")
        n = len(arr)
        while n > 0 and arr[n - 1] == 0:
            n -= 1
        arr = arr[:n].copy()
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    def __setattr__(self, *a):  # immutability
        raise AttributeError("Polynomial is immutable")

    @property
    def is_zero(self) -> bool:
        return len(self.coeffs) == 0

    @property
    def degree(self) -> int:
        """Degree; -1 for the zero polynomial."""
        return len(self.coeffs) - 1

    def valuation(self) -> int | None:
        """z-adic valuation; None for the zero polynomial."""
        for i, c in enumerate(self.coeffs):
            if c != 0:
                return i
        return None

    def __call__(self, z: ComplexLike) -> complex:
        acc = 0.0 + 0.0j
        for c in reversed(self.coeffs):
            acc = acc * z + c
        return acc

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            if self.is_zero or other.is_zero:
                return Polynomial([])
            return Polynomial(np.convolve(self.coeffs, other.coeffs))
        return Polynomial(self.coeffs * complex(other))

    __rmul__ = __mul__

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial([other])
        n = max(len(self.coeffs), len(other.coeffs))
        a = np.zeros(n, dtype=complex)
        a[: len(self.coeffs)] += self.coeffs
        a[: len(other.coeffs)] += other.coeffs
        return Polynomial(a)

    def __sub__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial([other])
        return self + (-1) * other

    def shift_argument(self, a: ComplexLike) -> "Polynomial":
        """p(x) -> p(x + a)."""
        result = Polynomial([])
        for c in reversed(self.coeffs):
            result = result * Polynomial([a, 1]) + Polynomial([c])
        return result

    def scale_argument(self, c: ComplexLike) -> "Polynomial":
        """p(x) -> p(c*x)."""
        powers = np.array([complex(c) ** j for j in range(len(self.coeffs))])
        return Polynomial(self.coeffs * powers)

    def nonzero_roots(self) -> np.ndarray:
        if self.degree < 1:
            return np.zeros(0, dtype=complex)
        roots = np.roots(self.coeffs[::-1])
        return roots[np.abs(roots) > 1e-12]

    def __repr__(self):
        return f"Polynomial({list(self.coeffs)!r})"

    def __eq__(self, other):
        return isinstance(other, Polynomial) and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(tuple(self.coeffs.tolist()))


# ---------------------------------------------------------------------------
# Ramified truncated power series


class PowerSeries:
    """Truncated formal power series in t = z^(1/ram_index).

    coefficients[n] is the coefficient of z^(n/ram_index); the truncation
    order equals len(coefficients).  Instances are immutable.
    """

    __slots__ = ("coefficients", "ram_index")

    def __init__(self, coefficients: Sequence[ComplexLike], ram_index: int = 1):
        if ram_index < 1 or ram_index != int(ram_index):
            raise ArgumentError(f"ram_index must be a positive integer, got {ram_index}")
        arr = np.asarray(list(coefficients), dtype=complex).copy()
        if arr.ndim != 1 or len(arr) == 0:
            raise ArgumentError("coefficients must be a nonempty flat sequence")
        arr.setflags(write=False)
        object.__setattr__(self, "coefficients", arr)
        object.__setattr__(self, "ram_index", int(ram_index))

    def __setattr__(self, *a):
        raise AttributeError("PowerSeries is immutable")

    @property
    def truncation_order(self) -> int:
        return len(self.coefficients)

    def exponents(self) -> list[Fraction]:
        nu = self.ram_index
        return [Fraction(n, nu) for n in range(len(self.coefficients))]

    def coeff_at(self, exponent: Fraction) -> complex:
        """Coefficient of z^exponent (0 if outside the truncated support)."""
        idx = exponent * self.ram_index
        if idx.denominator != 1:
            return 0.0 + 0.0j
        i = int(idx)
        if 0 <= i < len(self.coefficients):
            return complex(self.coefficients[i])
        return 0.0 + 0.0j

    # -- arithmetic --------------------------------------------------------

    def _common_ram(self, other: "PowerSeries"):
        nu = self.ram_index
        mu = other.ram_index
        lcm = nu * mu // math.gcd(nu, mu)
        return self._reramify(lcm), other._reramify(lcm)

    def _reramify(self, new_nu: int) -> "PowerSeries":
        if new_nu == self.ram_index:
            return self
        step = new_nu // self.ram_index
        out = np.zeros((len(self.coefficients) - 1) * step + 1, dtype=complex)
        out[::step] = self.coefficients
        return PowerSeries(out, new_nu)

    def __add__(self, other):
        if not isinstance(other, PowerSeries):
            arr = self.coefficients.copy()
            arr[0] += complex(other)
            return PowerSeries(arr, self.ram_index)
        a, b = self._common_ram(other)
        n = min(len(a.coefficients), len(b.coefficients))
        return PowerSeries(a.coefficients[:n] + b.coefficients[:n], a.ram_index)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1) * other

    def __mul__(self, other):
        if not isinstance(other, PowerSeries):
            return PowerSeries(self.coefficients * complex(other), self.ram_index)
        a, b = self._common_ram(other)
        n = min(len(a.coefficients), len(b.coefficients))
        prod = np.convolve(a.coefficients[:n], b.coefficients[:n])[:n]
        return PowerSeries(prod, a.ram_index)

    __rmul__ = __mul__

    def shift(self, steps: int) -> "PowerSeries":
        """Multiply by t^steps (t the ramified variable), keeping the length."""
        if steps < 0:
            raise ArgumentError("shift steps must be nonnegative")
        out = np.zeros(len(self.coefficients) + steps, dtype=complex)
        out[steps:] = self.coefficients
        return PowerSeries(out, self.ram_index)

    def termwise(self, weight: Callable[[int], complex]) -> "PowerSeries":
        """Multiply coefficient n (index in the ramified variable) by weight(n)."""
        w = np.array([weight(n) for n in range(len(self.coefficients))], dtype=complex)
        return PowerSeries(self.coefficients * w, self.ram_index)

    def truncate(self, order: int) -> "PowerSeries":
        if order < 1:
            raise ArgumentError("truncation order must be >= 1")
        if order >= len(self.coefficients):
            return self
        return PowerSeries(self.coefficients[:order], self.ram_index)

    # -- evaluation --------------------------------------------------------

    def eval(self, z) -> complex:
        """Evaluate at z (complex or SectorPoint; the latter fixes the branch
        of z^(1/ram_index) through its exact argument)."""
        if isinstance(z, SectorPoint):
            t = cmath.exp(z.complex_log() / self.ram_index)
        else:
            z = complex(z)
            if self.ram_index == 1:
                t = z
            else:
                t = cmath.exp(cmath.log(z) / self.ram_index) if z != 0 else 0.0
        if len(self.coefficients) > 24:
            return complex(np.polynomial.polynomial.polyval(t, self.coefficients))
        acc = 0.0 + 0.0j
        for c in reversed(self.coefficients):
            acc = acc * t + c
        return acc

    # -- comparison --------------------------------------------------------

    def normalized(self) -> "PowerSeries":
        """Reduce ram_index by the gcd of the support (plus the ram itself)."""
        nz = [n for n, c in enumerate(self.coefficients) if c != 0]
        g = self.ram_index
        for n in nz:
            g = math.gcd(g, n)
        if g <= 1:
            return self
        return PowerSeries(self.coefficients[::g], self.ram_index // g)

    def almost_equal(self, other: "PowerSeries", tol: float = 1e-12) -> bool:
        a, b = self.normalized()._common_ram(other.normalized())
        n = min(len(a.coefficients), len(b.coefficients))
        ca, cb = a.coefficients[:n], b.coefficients[:n]
        scale = max(np.max(np.abs(ca)), np.max(np.abs(cb)), 1.0)
        return bool(np.max(np.abs(ca - cb)) <= tol * scale)

    def __repr__(self):
        return (
            f"PowerSeries(len={len(self.coefficients)}, ram={self.ram_index}, "
            f"lead={self.coefficients[:4]!r}...)"
        )


def ramify(s: PowerSeries, c) -> PowerSeries:
    """rho_c: sum f_n z^e  ->  sum f_n z^(e*c), for rational c > 0.

    The ram_index is adjusted so all exponents stay integral in the new
    variable; rho_1 is the identity and rho_b . rho_c = rho_{b*c}.
    """
    c = Fraction(c)
    if c <= 0:
        raise ArgumentError(f"ramification exponent must be positive, got {c}")
    if c == 1:
        return s
    p, qden = c.numerator, c.denominator
    new_nu = s.ram_index * qden
    out = np.zeros((len(s.coefficients) - 1) * p + 1, dtype=complex)
    out[::1] = 0
    for n, coef in enumerate(s.coefficients):
        out[n * p] = coef
    return PowerSeries(out, new_nu).normalized()


def section(s: PowerSeries, beta: int, l: int) -> PowerSeries:
    """Return the beta-section sum_n c_{l+n*beta} z^{n*beta} of an unramified
    series; sum_l z^l section(s, beta, l) reconstructs s exactly."""
    if s.ram_index != 1:
        raise ArgumentError("section requires an unramified series (ram_index 1)")
    if beta < 1 or beta != int(beta):
        raise ArgumentError(f"beta must be a positive integer, got {beta}")
    if not (0 <= l < beta):
        raise ArgumentError(f"section index l={l} outside [0, {beta})")
    N = len(s.coefficients)
    picked = s.coefficients[l::beta]
    if len(picked) == 0:
        picked = np.zeros(1, dtype=complex)
    out = np.zeros((len(picked) - 1) * beta + 1, dtype=complex)
    out[::beta] = picked
    return PowerSeries(out, 1)


def section_compact(s: PowerSeries, beta: int, l: int) -> np.ndarray:
    """Coefficients of the beta-section in the compressed variable w = z^beta."""
    if s.ram_index != 1:
        raise ArgumentError("section_compact requires ram_index 1")
    return np.asarray(s.coefficients[l::beta], dtype=complex).copy()
