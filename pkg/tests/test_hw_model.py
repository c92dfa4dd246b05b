import dataclasses

import pytest

from carbon_dse import hw_model as hw
from carbon_dse.errors import ConfigError
from carbon_dse.workload import Kernel


def base_cfg(**kw):
    values = dict(id="T", mac_arrays=4, lanes_per_array=256, sram_mb=1.0, clock_hz=1e9, leakage_power=0.02,
                  energy_per_mac=1e-12, energy_per_sram_byte=3e-12, energy_per_dram_byte=150e-12,
                  dram_bandwidth=17e9, base_area=0.04, area_per_mac_array=0.015, area_per_sram_mb=0.0125,
                  stack_bandwidth=68e9)
    values.update(kw)
    return hw.AcceleratorConfig(**values)


def test_compute_bound_kernel():
    cfg = base_cfg()
    k = Kernel("k", "AI", mac_ops=1.024e9, param_bytes=0.0, activation_bytes=1000.0)
    r = hw.estimate_kernel(cfg, k)
    assert r.delay == pytest.approx(1.024e9 / (4 * 256 * 1e9))
    assert r.dram_bytes == 0.0
    assert r.utilization == pytest.approx(1.0)
    expected_e = 1.024e9 * 1e-12 + 1000 * 3e-12 + 0.02 * r.delay
    assert r.energy == pytest.approx(expected_e, rel=1e-14)
    assert r.tops == pytest.approx(2 * 1.024e9 / r.delay / 1e12)


def test_memory_bound_kernel():
    cfg = base_cfg()
    spill = 17e9 * 0.01
    k = Kernel("k", "XR", mac_ops=1e6, param_bytes=0.0, activation_bytes=2 ** 20 + spill)
    r = hw.estimate_kernel(cfg, k)
    assert r.delay == pytest.approx(0.01, rel=1e-12)
    assert r.dram_bytes == pytest.approx(spill)
    assert r.utilization < 0.01


def test_3d_uses_stack_for_spill():
    k = Kernel("k", "XR", mac_ops=1e6, param_bytes=0.0, activation_bytes=64 * 2 ** 20)
    planar = hw.estimate_kernel(base_cfg(), k)
    stacked = hw.estimate_kernel(base_cfg(integration="3D"), k)
    assert stacked.delay == pytest.approx(planar.delay * 17 / 68, rel=1e-12)
    assert stacked.energy < planar.energy


def test_reference_catalog(catalog):
    assert set(catalog) == {"A-1", "A-2", "A-3", "A-4", "DSE"}
    a3 = catalog["A-3"]
    assert hw.config_area(a3)[0] == pytest.approx(0.3)
    assert hw.config_area(catalog["A-4"])[0] == pytest.approx(0.1125)


def test_embodied_of_reference_config(catalog, fab7, fixed85):
    # 0.3 cm^2 at 2538.355 g/cm^2 and 85 % yield
    assert hw.config_embodied(catalog["A-3"], fab7, fixed85) == pytest.approx(895.89, abs=1e-9)


def test_3d_die_split_and_bonding_yield(fab7, fixed85):
    cfg = base_cfg(integration="3D")
    total, dies = hw.config_area(cfg)
    assert dies == (pytest.approx(0.1), pytest.approx(0.0125))
    planar = hw.config_embodied(base_cfg(), fab7, fixed85)
    assert hw.config_embodied(cfg, fab7, fixed85) == pytest.approx(planar)
    lossy = dataclasses.replace(cfg, bonding_yield=0.9)
    assert hw.config_embodied(lossy, fab7, fixed85) == pytest.approx(planar / 0.9)
    with pytest.raises(ConfigError, match="does not sum"):
        base_cfg(integration="3D", die_split=(0.05, 0.05))


def test_config_validation():
    with pytest.raises(ConfigError):
        base_cfg(mac_arrays=0)
    with pytest.raises(ConfigError):
        base_cfg(utilization_ai=1.5)
    with pytest.raises(ConfigError, match="stack_bandwidth"):
        base_cfg(integration="3D", stack_bandwidth=1e9)
    with pytest.raises(ConfigError, match="2D or 3D"):
        base_cfg(integration="2.5D")


def test_design_space_grid():
    space = hw.enumerate_design_space(base_cfg(), [1, 2, 4], [0.5, 1, 2, 4])
    assert len(space) == 12
    assert space[0].id == "T_K1_M0.5"
    assert len({c.id for c in space}) == 12


def test_stack_layout_parsing():
    assert hw.StackLayout.parse("2K_4M") == hw.StackLayout(2.0, 4.0)
    assert hw.StackLayout.parse("3D_2K_16M").label == "3D_2K_16M"
    assert hw.StackLayout.parse("2D_1K_1M").dies == 1
    with pytest.raises(ConfigError):
        hw.StackLayout.parse("4M_2K")


def test_stack_variants(catalog):
    base = catalog["A-4"]
    variants = hw.stack3d_variants(base, [hw.StackLayout.parse(t) for t in ("2D_1K_1M", "2K_16M")])
    assert variants[0] is base
    assert variants[1].mac_arrays == 8 and variants[1].sram_mb == 16 and variants[1].integration == "3D"
    with pytest.raises(ConfigError, match="whole number"):
        hw.stack3d_variants(base, [hw.StackLayout(0.1, 1.0)])


def test_cpu_config():
    cpu = hw.CpuConfig(8, 4, 4, 0.075, 0.0375, 1.2, 0.35, 1.8, 2.1)
    assert cpu.soc_area == pytest.approx(2.25)
    assert cpu.core_mask(3) == [1, 1, 1, 0, 0, 0, 0, 0]
    assert cpu.core_areas()[:5] == [0.075] * 4 + [0.0375]
    with pytest.raises(ConfigError):
        hw.CpuConfig(8, 4, 3, 0.075, 0.0375, 1.2, 0.35, 1.8)


def test_catalog_errors_name_row_and_column(tmp_path):
    cols = ",".join(hw.catalog_columns())
    good = "X,4,256,1,1e9,0.02,1e-12,3e-12,1.5e-10,17e9,0.04,0.015,0.0125,7nm,2D,,0,1,1,0,0,1"
    p = tmp_path / "hw.csv"
    p.write_text(f"{cols}\n{good}\n{good.replace('X,4,', 'Y,four,')}\n")
    with pytest.raises(ConfigError, match="row 3 column mac_arrays"):
        hw.load_hardware_catalog(p)
    p.write_text("id,mac_arrays\nX,4\n")
    with pytest.raises(ConfigError, match="header"):
        hw.load_hardware_catalog(p)


def test_resolve_fab(fabs):
    assert hw.resolve_fab("7nm", fabs) is fabs["7nm"]
    with pytest.raises(ConfigError, match="unknown fab node"):
        hw.resolve_fab("3nm", fabs)
