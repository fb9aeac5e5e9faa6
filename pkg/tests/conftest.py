import numpy as np
import pytest

from kdvlab.spectral import FourierField, RegularityParams


@pytest.fixture
def params():
    return RegularityParams(0.25, 0.02)


def random_field(n, rng, real=True, mean_zero=True, scale=1.0):
    """Random coefficients with a gentle decay (test helper)."""
    if real:
        half = (rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1)) * scale
        half /= (1.0 + np.arange(n + 1))
        if mean_zero:
            half[0] = 0
        return FourierField.from_half(half, is_mean_zero=mean_zero)
    a = (rng.normal(size=2 * n + 1) + 1j * rng.normal(size=2 * n + 1)) * scale
    if mean_zero:
        a[n] = 0
    return FourierField(n, a, False, mean_zero)


def smooth_field(n, amp=0.3, modes=3):
    half = np.zeros(n + 1, dtype=complex)
    for k in range(1, modes + 1):
        half[k] = amp * np.exp(-k) * np.exp(1j * k)
    return FourierField.from_half(half, is_mean_zero=True)


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda l: int(l.split()[0][1:])):
            terminalreporter.write_line(line)
