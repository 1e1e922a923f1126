from pathlib import Path

import pytest
import yaml

from relwealth.errors import DimensionError, SchemaError
from relwealth.objective import ObjectiveContext
from relwealth.optimizer import merton_optimal
from relwealth.problem import dump_problem, load_problem, parse_problem, save_problem
from relwealth.report import dumps_report, read_report, write_report

SPECS = Path(__file__).resolve().parent.parent / "specs"

MINIMAL = {
    "mode": "merton",
    "market": {"drift": [0.08], "covariance": [[0.04]], "risk_free": 0.02},
    "utility": {"gamma": 0.5},
}


def _with(**changes):
    data = yaml.safe_load(yaml.safe_dump(MINIMAL))
    for dotted, value in changes.items():
        node = data
        *head, last = dotted.split("__")
        for key in head:
            node = node.setdefault(key, {})
        node[last] = value
    return data


def test_minimal_merton_solves_to_three():
    spec = parse_problem(MINIMAL)
    ctx = ObjectiveContext(spec.market_model(), spec.params(), spec.benchmark_set())
    assert merton_optimal(ctx).weights[0] == pytest.approx(3.0, rel=1e-15)
    assert spec.sim_config().paths == 100_000


@pytest.mark.parametrize("gamma", [1.2, 0.0, 1.0, -0.5])
def test_gamma_out_of_range(gamma):
    with pytest.raises(SchemaError) as info:
        parse_problem(_with(utility__gamma=gamma))
    paths = [p for p, _ in info.value.errors]
    assert paths == ["utility.gamma"]
    assert "(0, 1)" in info.value.errors[0][1]


def test_benchmark_count_mismatch():
    data = _with(benchmarks=[[1.0], [0.5]], utility__gammas=[0.2])
    with pytest.raises(DimensionError) as info:
        parse_problem(data)
    assert info.value.errors[0][0] == "utility.gammas"


def test_benchmark_width_mismatch():
    with pytest.raises(DimensionError):
        parse_problem(_with(benchmarks=[[1.0, 0.0]], utility__gammas=[0.2]))


def test_all_errors_reported_together():
    data = _with(market__risk_free="x", utility__gamma=2.0, bogus=1)
    with pytest.raises(SchemaError) as info:
        parse_problem(data)
    assert {p for p, _ in info.value.errors} == {"market.risk_free", "utility.gamma", "bogus"}


def test_non_finite_rejected():
    with pytest.raises(SchemaError):
        parse_problem(_with(market__drift=[float("nan")]))


def test_capm_requires_constraint():
    with pytest.raises(SchemaError) as info:
        parse_problem(
            {
                "mode": "capm_investable",
                "market": {"mu": 0.08, "sigma": 0.2, "risk_free": 0.02, "betas": [1.0], "residual_cov": [[0.05]]},
                "utility": {"gamma": 0.5},
            }
        )
    assert ("constraint", "missing section") in info.value.errors


def test_yaml_syntax_error_location(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("mode: merton\nmarket:\n  drift: [0.08\n  risk_free: 0.02\n")
    with pytest.raises(SchemaError) as info:
        load_problem(path)
    assert info.value.errors[0][0].startswith("line ")
    assert "column" in info.value.errors[0][0]


@pytest.mark.parametrize("name", sorted(p.name for p in SPECS.glob("*.yaml")))
def test_shipped_specs_round_trip(name, tmp_path):
    spec = load_problem(SPECS / name)
    out = tmp_path / name
    save_problem(spec, out)
    again = load_problem(out)
    assert again == spec
    assert dump_problem(again) == out.read_text()


def test_with_simulation_overrides():
    spec = parse_problem(MINIMAL).with_simulation(seed=7, paths=None)
    assert spec.simulation["seed"] == 7
    assert spec.simulation["paths"] == 100_000


def test_report_round_trip_is_byte_identical(tmp_path):
    report = {
        "tool": "relwealth",
        "values": [0.1, 1 / 3, 2.0**-1074, 1e300, -0.0],
        "nested": {"z": 1, "a": [True, None, "s"]},
    }
    first = tmp_path / "a.json"
    second = tmp_path / "b.json"
    write_report(report, first)
    write_report(read_report(first), second)
    assert first.read_bytes() == second.read_bytes()
    assert dumps_report(read_report(first)) == first.read_text()


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "r.json"
    write_report({"a": 1}, target)
    write_report({"a": 2}, target)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["r.json"]
    assert read_report(target) == {"a": 2}
