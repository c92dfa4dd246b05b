import pytest

from carbon_dse import optimizer as op
from carbon_dse.errors import ConfigError, UsageError
from carbon_dse.metrics import EvaluationRecord


def rec(cid, d, c_op, c_am, area=1.0, power=1.0, delays=None):
    return EvaluationRecord(cid, "c", d, 1.0, c_op, c_am, c_am * 10,
                            areas={"soc": area}, powers={"soc": power},
                            task_delays=delays or {"t": d})


def test_objective_and_parts():
    r = rec("a", 2.0, 3.0, 5.0)
    assert op.objective(r, 1.0) == 16.0
    assert op.f1(r) == 6.0 and op.f2(r) == 10.0
    assert op.objective(r, 0.5) == 11.0
    with pytest.raises(UsageError):
        op.objective(r, 0.0)


def test_beta_moves_the_choice():
    records = [rec("op-heavy", 1.0, 10.0, 1.0), rec("emb-heavy", 1.0, 1.0, 10.0)]
    assert op.optimize(records, 1e-3).best.config_id == "emb-heavy"
    assert op.optimize(records, 1e3).best.config_id == "op-heavy"


def test_tie_goes_to_smaller_id():
    records = [rec("b", 1.0, 1.0, 1.0), rec("a", 1.0, 1.0, 1.0)]
    assert op.optimize(records).best.config_id == "a"


def test_bounds_are_inclusive():
    r = rec("a", 0.5, 1.0, 1.0, area=2.0, power=3.0)
    cs = op.ConstraintSet(area=(("soc", 2.0),), power=(("soc", 3.0),), qos=(op.QosBound("t", min_fps=2.0),))
    assert op.feasible(r, cs).feasible
    cs_tight = op.ConstraintSet(area=(("soc", 1.999),))
    report = op.feasible(r, cs_tight)
    assert not report.feasible
    assert report.tightest.kind == "area"


def test_infeasible_design_space_is_diagnosed():
    records = [rec("a", 1.0, 1.0, 1.0, area=5.0), rec("b", 1.0, 1.0, 1.0, area=3.0, power=9.0)]
    cs = op.ConstraintSet(area=(("soc", 2.0),), power=(("soc", 4.0),))
    result = op.optimize(records, 1.0, cs)
    assert result.best is None and not result.feasible
    diag = dict(result.diagnosis)
    assert diag["a"].kind == "area"
    assert diag["b"].kind == "power"  # 9 vs 4 is the larger relative miss
    # loosening everything restores feasibility
    assert op.optimize(records, 1.0, cs.loosened(10.0)).feasible


def test_qos_all_uses_slowest_task():
    r = rec("a", 1.0, 1.0, 1.0, delays={"t1": 0.01, "t2": 0.05})
    assert op.feasible(r, op.ConstraintSet(qos=(op.QosBound("all", min_fps=20.0),))).feasible
    assert not op.feasible(r, op.ConstraintSet(qos=(op.QosBound("all", min_fps=21.0),))).feasible
    assert op.feasible(r, op.ConstraintSet(qos=(op.QosBound("t1", max_seconds=0.01),))).feasible


def test_unknown_selector():
    with pytest.raises(ConfigError, match="selector"):
        op.feasible(rec("a", 1.0, 1.0, 1.0), op.ConstraintSet(area=(("npu", 1.0),)))


def test_constraint_validation():
    with pytest.raises(ConfigError):
        op.QosBound("t")
    with pytest.raises(ConfigError):
        op.QosBound("t", min_fps=30.0, max_seconds=0.1)
    with pytest.raises(ConfigError):
        op.ConstraintSet(area=(("soc", 0.0),))
    with pytest.raises(ConfigError):
        op.ScalarizationConfig((1.0, 0.5))
    with pytest.raises(ConfigError):
        op.ScalarizationConfig(-1.0)


def test_default_sweep():
    betas = op.default_beta_sweep()
    assert len(betas) == 25
    assert betas[0] == pytest.approx(1e-3) and betas[-1] == pytest.approx(1e3)
    assert betas[12] == pytest.approx(1.0)


def test_pareto_sweep_on_three_points():
    records = [rec("a", 1.0, 1.0, 9.0), rec("b", 1.0, 4.0, 4.0), rec("c", 1.0, 9.0, 1.0),
               rec("dominated", 1.0, 9.5, 9.5)]
    sweep = op.pareto_sweep(records)
    ids = [p.config_id for p in sweep.points]
    assert ids == ["a", "b", "c"]
    assert "dominated" not in ids
    f2s = [p.f2 for _, p in sweep.selections]
    assert f2s == sorted(f2s, reverse=True)


def test_empty_space():
    with pytest.raises(UsageError):
        op.optimize([])
    assert op.pareto_sweep([]).points == ()
