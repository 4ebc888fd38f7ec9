import math

import numpy as np
import pytest

from aeris import SampleSpec, SpectralModel

ETHANOL_DETUNINGS = -np.array([342.45, 335.55, 328.65, 321.75, 234.9, 117.6, 110.7, 103.8])
ETHANOL_AMPLITUDES = np.array([106, 320, 320, 106, 426, 320, 640, 320]) * 1e-12

_ACCEPTANCE_LINES = []


def report(criterion: int, ok: bool, detail: str) -> None:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} | {detail}"
    _ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1][:-1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ethanol_model():
    return SpectralModel.from_arrays(ETHANOL_DETUNINGS, ETHANOL_AMPLITUDES)


@pytest.fixture(scope="session")
def ethanol_sample():
    return SampleSpec(B_ext=2.1, temperature=296.0, proton_density=6.2e28, T1=2.0,
                      T2_star=0.2)


@pytest.fixture(scope="session")
def free_sample():
    return SampleSpec(B_ext=2.1, temperature=296.0, proton_density=6.2e28,
                      T1=math.inf, T2_star=math.inf)
