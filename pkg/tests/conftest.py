import pytest

from qborel.series import Polynomial, PowerSeries
from qborel.operators import LinearOperator


@pytest.fixture
def euler_op():
    """z*delta y + y = z, solution sum (-1)^n n! z^(n+1)."""
    return LinearOperator(
        "differential", "delta",
        (Polynomial([1.0]), Polynomial([0.0, 1.0])),
        None, PowerSeries([0.0, 1.0]),
    )


@pytest.fixture
def euler_homogenized():
    """z*delta^2 + delta - 1 (the homogenized Euler equation)."""
    return LinearOperator(
        "differential", "delta",
        (Polynomial([-1.0]), Polynomial([1.0]), Polynomial([0.0, 1.0])),
    )


@pytest.fixture
def example41_op():
    """(z^4 + z^3) delta^3 + z delta^2 + delta - 1."""
    return LinearOperator(
        "differential", "delta",
        (Polynomial([-1.0]), Polynomial([1.0]), Polynomial([0.0, 1.0]),
         Polynomial([0.0, 0.0, 0.0, 1.0, 1.0])),
    )


def make_q_euler(q):
    """z*delta_q y + y = z, solution sum (-1)^n [n]_q! z^(n+1)."""
    return LinearOperator(
        "q_difference", "delta_q",
        (Polynomial([1.0]), Polynomial([0.0, 1.0])),
        q, PowerSeries([0.0, 1.0]),
    )


@pytest.fixture
def q_euler_op():
    return make_q_euler(1.05)
