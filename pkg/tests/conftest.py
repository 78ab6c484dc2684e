import math

import pytest

from hapirs.fso import FsoGeometry, PointingParams, fso_derived
from hapirs.rf import (SHADOWING, NakagamiParams, RfLinkBudget, average_snr_u, clt_params,
                       fit_mixture_gamma)

# reference link setting, with q_V = 1.6
TABLE_GEOM = FsoGeometry(q_V=1.6)
NAK = NakagamiParams()


@pytest.fixture(scope="session")
def fso_q1():
    return fso_derived(TABLE_GEOM, PointingParams(q_H=1.0))


@pytest.fixture(scope="session")
def fso_q07():
    return fso_derived(TABLE_GEOM, PointingParams(q_H=0.7))


@pytest.fixture(scope="session")
def gbar_table():
    return average_snr_u(RfLinkBudget())


def mixture_for(preset: str, gamma_u_db=None, N_x: int = 75):
    gbar = average_snr_u(RfLinkBudget(gamma_u_db=gamma_u_db))
    return fit_mixture_gamma(clt_params(50, SHADOWING[preset], NAK), gbar, N_x)


@pytest.fixture(scope="session")
def mix_hs():
    return mixture_for("HS")


@pytest.fixture(scope="session")
def mix_stress():
    """Weak RF hop (mean RF SNR about 6 dB) so the relay term is not negligible."""
    return mixture_for("HS", gamma_u_db=-20.0)


# one summary line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
