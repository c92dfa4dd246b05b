from pathlib import Path

import pytest

from carbon_dse import carbon_model as cm
from carbon_dse import hw_model as hw
from carbon_dse.workload import load_kernels, load_tasks

DATA = Path(__file__).resolve().parents[1] / "src" / "carbon_dse" / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def fabs():
    return cm.load_fab_profiles(DATA / "fab.ini")


@pytest.fixture(scope="session")
def fab7(fabs):
    return fabs["7nm"]


@pytest.fixture(scope="session")
def kernels():
    return load_kernels(DATA / "kernels.csv")


@pytest.fixture(scope="session")
def tasks(kernels):
    return load_tasks(DATA / "tasks.csv", kernels)


@pytest.fixture(scope="session")
def catalog():
    return hw.load_hardware_catalog(DATA / "hardware.csv")


@pytest.fixture
def fixed85():
    return cm.YieldModel(cm.FixedYield(0.85))


@pytest.fixture
def use4y():
    return cm.UsePhaseProfile.from_daily_use(ci_use=380.0, years=4.0, daily_active_hours=24.0)
