import math

import pytest

from carbon_dse import carbon_model as cm
from carbon_dse.errors import ConfigError, InfeasibleError, UsageError


def test_per_area_carbon_of_7nm_fixture(fab7):
    assert cm.carbon_per_area(fab7) == pytest.approx(2538.355, abs=1e-9)


@pytest.mark.parametrize("area, expected", [(0.3, 895.89), (0.15, 447.945), (2.25, 6719.175)])
def test_die_carbon_at_85_percent_yield(fab7, fixed85, area, expected):
    assert cm.embodied_carbon_die(cm.DieSpec(area, fab7), fixed85) == pytest.approx(expected, abs=1e-9)


def test_murphy_matches_closed_form():
    # mpmath, 50 digits
    assert cm.murphy_yield(1.0, 0.09) == pytest.approx(0.91454825540933923675, rel=1e-15)
    assert cm.murphy_yield(1.0, 0.0) == 1.0
    assert cm.murphy_yield(1e-12, 1e-3) == pytest.approx(1.0, abs=1e-14)


def test_murphy_requires_defect_density(fab7):
    no_defects = cm.FabProfile("x", 820, 2.15, 500, 275.355, defect_density=0.0)
    with pytest.raises(ConfigError, match="defect density"):
        cm.die_yield(cm.YieldModel(cm.MurphyYield()), 1.0, no_defects)
    assert cm.die_yield(cm.YieldModel(cm.MurphyYield()), 1.0, fab7) < 1.0


def test_gross_dies_per_wafer():
    assert cm.gross_dies_per_wafer(1.0, 30.0) == 640
    assert cm.gross_dies_per_wafer(0.5, 30.0) == 1319
    assert cm.gross_dies_per_wafer(1e4, 30.0) == 0


def test_die_placement_charges_the_whole_wafer(fab7, fixed85):
    model = cm.YieldModel(cm.FixedYield(0.85), die_placement_correction=True)
    wafer = math.pi * 15.0 ** 2
    expected = 2538.355 * wafer / (640 * 0.85)
    assert cm.embodied_carbon_die(cm.DieSpec(1.0, fab7), model) == pytest.approx(expected, rel=1e-12)
    # edge loss makes the corrected figure larger
    assert expected > cm.embodied_carbon_die(cm.DieSpec(1.0, fab7), fixed85)


def test_chiplet_split_and_multiplier(fab7, fixed85):
    mono = cm.embodied_carbon_die(cm.DieSpec(1.0, fab7), fixed85)
    split = cm.embodied_carbon_die(cm.DieSpec(1.0, fab7, die_count=4), fixed85)
    assert split == pytest.approx(mono, rel=1e-12)  # fixed yield: area-linear
    murphy = cm.YieldModel(cm.MurphyYield())
    assert (cm.embodied_carbon_die(cm.DieSpec(4.0, fab7, die_count=4), murphy)
            < cm.embodied_carbon_die(cm.DieSpec(4.0, fab7), murphy))
    scaled = cm.embodied_carbon_die(cm.DieSpec(1.0, fab7, die_count=2), fixed85, chiplet_multiplier=0.59)
    assert scaled == pytest.approx(0.59 * mono, rel=1e-12)


def test_system_mask():
    assert cm.embodied_carbon_system([1.0, 2.0, 3.0], [1, 0, 1]) == 4.0
    assert cm.embodied_carbon_system([1.0, 2.0], [0, 0]) == 0.0
    with pytest.raises(UsageError):
        cm.embodied_carbon_system([1.0, 2.0], [1])
    with pytest.raises(UsageError):
        cm.embodied_carbon_system([1.0, 2.0], [1, 2])


def test_amortization(use4y):
    assert cm.amortize_embodied(100.0, use4y.active_s, use4y) == 100.0
    assert cm.amortize_embodied(100.0, use4y.active_s / 4, use4y) == pytest.approx(25.0)
    with pytest.raises(InfeasibleError):
        cm.amortize_embodied(100.0, use4y.active_s * 1.01, use4y)


def test_use_profile_from_daily_hours():
    use = cm.UsePhaseProfile.from_daily_use(380.0, years=1.0, daily_active_hours=6.0)
    assert use.active_s == pytest.approx(365 * 6 * 3600.0)
    with pytest.raises(ConfigError):
        cm.UsePhaseProfile(380.0, lifetime_s=10.0, idle_s=10.0)
    with pytest.raises(ConfigError, match="inconsistent"):
        cm.UsePhaseProfile(380.0, lifetime_s=86400.0, idle_s=0.0, daily_active_hours=12.0)


def test_operational_carbon():
    assert cm.operational_carbon(380.0, cm.joules_to_kwh(3.6e6)) == 380.0
    with pytest.raises(UsageError):
        cm.operational_carbon(-1.0, 1.0)


def test_fab_profile_rejects_negative():
    with pytest.raises(ConfigError):
        cm.FabProfile("bad", -1.0, 1.0, 1.0, 1.0)


def test_fab_loader_and_grids(fabs, data_dir):
    assert {"5nm", "7nm", "10nm", "14nm", "22nm", "28nm", "32nm"} <= set(fabs)
    grids = cm.load_grid_intensities(data_dir / "fab.ini")
    assert grids["us"] == 380.0
    assert fabs["7nm"].with_grid(grids["taiwan"]).ci_fab == grids["taiwan"]


def test_fab_loader_names_bad_key(tmp_path):
    p = tmp_path / "fab.ini"
    p.write_text("[7nm]\nci_fab_g_per_kwh = 820\nepa_kwh_per_cm2 = x\n")
    with pytest.raises(ConfigError, match="7nm"):
        cm.load_fab_profiles(p)
    with pytest.raises(ConfigError, match="missing file"):
        cm.load_fab_profiles(tmp_path / "nope.ini")
