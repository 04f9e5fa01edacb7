"""Small shared wrapper over QUADPACK for complex integrands."""

from __future__ import annotations

import warnings

import numpy as np
from scipy.integrate import IntegrationWarning, quad


def complex_quad(fn, a: float, b: float, epsabs: float, epsrel: float = 1e-12,
                 limit: int = 200) -> complex:
    """Adaptive Gauss-Kronrod integration of a complex-valued integrand."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, _ = quad(fn, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit,
                      complex_func=True)
    return complex(val)


def peak_scale(fn, a: float, b: float, samples: int = 12) -> float:
    """Coarse estimate of max|fn| on [a, b] (for absolute-tolerance scaling)."""
    ts = np.linspace(a, b, samples + 1)[1:]
    vals = [abs(fn(t)) for t in ts]
    return max(max(vals), 1e-300)
