"""Hypothesis checks of model invariants."""

import dataclasses
import math
from fractions import Fraction

from hypothesis import given, settings
from hypothesis import strategies as st

from carbon_dse import carbon_model as cm
from carbon_dse import hw_model as hw
from carbon_dse import studies as sd
from carbon_dse.metrics import EvaluationRecord, MetricKind, compute_metric
from carbon_dse.optimizer import ConstraintSet, QosBound, feasible, optimize
from carbon_dse.workload import Kernel

pos = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False, allow_infinity=False)
unit = st.floats(min_value=0.05, max_value=1.0)

FAB = cm.FabProfile("7nm", 820, 2.15, 500, 275.355, defect_density=0.09, wafer_diameter=30)


@given(area=st.floats(min_value=1e-3, max_value=8.0), y=unit)
def test_embodied_linear_in_area_at_fixed_yield(area, y):
    model = cm.YieldModel(cm.FixedYield(y))
    one = cm.embodied_carbon_die(cm.DieSpec(area, FAB), model)
    two = cm.embodied_carbon_die(cm.DieSpec(2 * area, FAB), model)
    assert math.isclose(two, 2 * one, rel_tol=1e-12)


@given(a=st.floats(min_value=1e-3, max_value=8.0), b=st.floats(min_value=1e-3, max_value=8.0),
       d0=st.floats(min_value=1e-3, max_value=1.0))
def test_murphy_decreasing_in_area(a, b, d0):
    lo, hi = sorted((a, b))
    assert cm.murphy_yield(lo, d0) >= cm.murphy_yield(hi, d0)
    assert 0 < cm.murphy_yield(hi, d0) <= 1


@given(parts=st.lists(pos, min_size=1, max_size=12), data=st.data())
def test_mask_is_a_dot_product(parts, data):
    mask = data.draw(st.lists(st.integers(0, 1), min_size=len(parts), max_size=len(parts)))
    total = cm.embodied_carbon_system(parts, mask)
    assert math.isclose(total, math.fsum(p * m for p, m in zip(parts, mask)), rel_tol=1e-15)
    assert total <= cm.embodied_carbon_system(parts, [1] * len(parts))


@given(c=pos, frac=st.floats(min_value=0.0, max_value=1.0))
def test_amortization_never_exceeds_total(c, frac):
    use = cm.UsePhaseProfile(380.0, 1e8, 1e7)
    am = cm.amortize_embodied(c, frac * use.active_s, use)
    assert 0 <= am <= c * (1 + 1e-15)


@given(d=pos, e=pos, op=pos, am=pos)
def test_tcdp_is_cdp_plus_operational_delay(d, e, op, am):
    r = EvaluationRecord("x", "c", d, e, op, am, am)
    exact = (Fraction(op) + Fraction(am)) * Fraction(d)
    assert compute_metric(MetricKind.TCDP, r) == float(exact)
    assert exact == Fraction(am) * Fraction(d) + Fraction(op) * Fraction(d)


@st.composite
def configs(draw, integration="2D"):
    return hw.AcceleratorConfig(
        id="p", mac_arrays=draw(st.integers(1, 64)), lanes_per_array=draw(st.sampled_from([64, 128, 256])),
        sram_mb=draw(st.floats(0.0, 64.0)), clock_hz=draw(st.floats(2e8, 3e9)),
        leakage_power=draw(st.floats(0.0, 1.0)), energy_per_mac=draw(st.floats(1e-13, 1e-11)),
        energy_per_sram_byte=draw(st.floats(1e-13, 1e-11)), energy_per_dram_byte=draw(st.floats(1e-11, 1e-9)),
        dram_bandwidth=draw(st.floats(1e9, 1e11)), base_area=draw(st.floats(0.01, 1.0)),
        area_per_mac_array=draw(st.floats(0.0, 0.05)), area_per_sram_mb=draw(st.floats(0.0, 0.05)),
        utilization_ai=draw(unit), utilization_xr=draw(unit),
        leakage_per_mac_array=draw(st.floats(0.0, 0.01)), leakage_per_sram_mb=draw(st.floats(0.0, 0.01)),
    )


kernels_st = st.builds(Kernel, id=st.just("k"), category=st.sampled_from(["AI", "XR"]),
                       mac_ops=st.floats(1e6, 1e11), param_bytes=st.floats(0, 1e8),
                       activation_bytes=st.floats(0, 1e8))


@settings(max_examples=200)
@given(cfg=configs(), k=kernels_st)
def test_roofline_monotone(cfg, k):
    d0 = hw.estimate_kernel(cfg, k).delay
    for change in (dict(mac_arrays=cfg.mac_arrays + 1), dict(clock_hz=cfg.clock_hz * 1.5),
                   dict(sram_mb=cfg.sram_mb + 1), dict(dram_bandwidth=cfg.dram_bandwidth * 2)):
        assert hw.estimate_kernel(dataclasses.replace(cfg, **change), k).delay <= d0
    r = hw.estimate_kernel(cfg, k)
    assert r.leakage_energy == cfg.total_leakage * r.delay
    assert 0 < r.utilization <= cfg.utilization_for(k.category) * (1 + 1e-12)


@settings(max_examples=200)
@given(cfg=configs(), k=kernels_st, factor=st.floats(1.0, 16.0))
def test_stacking_never_slower(cfg, k, factor):
    stacked = dataclasses.replace(cfg, integration="3D", stack_bandwidth=cfg.dram_bandwidth * factor)
    assert hw.estimate_kernel(stacked, k).delay <= hw.estimate_kernel(cfg, k).delay


@given(c=st.lists(st.integers(0, 1000), min_size=2, max_size=10).filter(lambda v: sum(v[1:]) > 0),
       scale=st.integers(1, 50))
def test_tlp_invariant_under_rescaling_busy_mass(c, scale):
    total = sum(c)
    a = sd.TlpBreakdown(tuple(x / total for x in c))
    scaled = [c[0]] + [x * scale for x in c[1:]]
    b = sd.TlpBreakdown(tuple(x / sum(scaled) for x in scaled))
    assert math.isclose(sd.tlp(a), sd.tlp(b), rel_tol=1e-12)
    assert 1.0 - 1e-12 <= sd.tlp(a) <= (len(c) - 1) * (1 + 1e-12)


@given(hours=st.floats(0.5, 24.0), power=st.floats(0.1, 50.0), emb=st.floats(0.0, 1e5))
def test_replacement_without_progress_keeps_hardware(hours, power, emb):
    plan = sd.LifetimePlan(hours, power, emb, 380.0, annual_efficiency_gain=1.0)
    result = sd.replacement_study(plan)
    ops = {h.operational for h in result.per_period}
    assert max(ops) - min(ops) <= 1e-9 * max(ops)
    assert result.optimal_period == 5


@given(emb=st.floats(1.0, 1e4), delay=st.floats(1e-3, 1.0), e=st.floats(1e-3, 10.0),
       emb2=st.floats(1.0, 1e4), delay2=st.floats(1e-3, 1.0), e2=st.floats(1e-3, 10.0))
def test_at_most_one_crossover(emb, delay, e, emb2, delay2, e2):
    a, b = sd.LifetimePoint("a", delay, e, emb), sd.LifetimePoint("b", delay2, e2, emb2)
    counts = [10.0 ** x for x in range(0, 13)]
    (c,) = sd.lifetime_crossover([a, b], 380.0, counts).crossovers
    gaps = [a.tcdp_per_inference(n, 380.0) - b.tcdp_per_inference(n, 380.0) for n in counts]
    flips = sum(1 for g1, g2 in zip(gaps, gaps[1:]) if (g1 > 0) != (g2 > 0) and g1 != 0 and g2 != 0)
    assert flips <= 1
    if c.n_star is not None:
        assert counts[0] <= c.n_star <= counts[-1]


@given(area=st.floats(0.01, 1.0), delay=st.floats(1e-3, 1.0), bound=st.floats(0.01, 1.0))
def test_feasibility_boundary_inclusive(area, delay, bound):
    r = EvaluationRecord("x", "c", delay, 1.0, 1.0, 1.0, 1.0, areas={"soc": area}, task_delays={"t": delay})
    assert feasible(r, ConstraintSet(area=(("soc", area),))).feasible
    assert feasible(r, ConstraintSet(qos=(QosBound("t", max_seconds=delay),))).feasible
    assert feasible(r, ConstraintSet(area=(("soc", bound),))).feasible == (area <= bound)


@given(values=st.lists(st.tuples(pos, pos, pos), min_size=1, max_size=20))
def test_optimize_order_independent(values):
    recs = [EvaluationRecord(f"c{i:02d}", "c", d, 1.0, o, e, e) for i, (d, o, e) in enumerate(values)]
    assert optimize(recs).best == optimize(list(reversed(recs))).best
