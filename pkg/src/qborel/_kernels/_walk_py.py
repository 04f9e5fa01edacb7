"""Pure-Python fallback for the hot recurrence-walk kernels.

Identical signatures to the compiled `_walk` extension; selected at import
time by :mod:`qborel._kernels` when the extension is unavailable.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def windowed_walk(coeffs, rhs, seed):
    """Run the sliding-window linear recurrence

        coeffs[t, 0] * out[t] = rhs[t] - sum_{i=1..I} coeffs[t, i] * out[t-i]

    for t = len(seed) .. T-1, with out[0:len(seed)] = seed.

    coeffs : complex (T, I+1) array, rhs : complex (T,) array,
    seed : complex (I,) array.  Returns complex (T,) array.

    Raises ZeroDivisionError when a leading factor vanishes exactly; callers
    translate that into their own resonance/pole reporting.
    """
    coeffs = np.ascontiguousarray(coeffs, dtype=complex)
    rhs = np.ascontiguousarray(rhs, dtype=complex)
    seed = np.ascontiguousarray(seed, dtype=complex)
    T, width = coeffs.shape
    I = width - 1
    out = np.empty(T, dtype=complex)
    nseed = len(seed)
    out[:nseed] = seed
    for t in range(nseed, T):
        acc = rhs[t]
        for i in range(1, I + 1):
            if t - i >= 0:
                acc -= coeffs[t, i] * out[t - i]
        lead = coeffs[t, 0]
        if lead == 0:
            raise ZeroDivisionError(f"vanishing leading factor at step {t}")
        out[t] = acc / lead
    return out
