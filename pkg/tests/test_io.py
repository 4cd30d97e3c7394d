import json
import tempfile

import pytest
from conftest import SUITE, path_instance, suite_instance, suite_optimum
from hypothesis import given, settings
from hypothesis import strategies as st

from majdist.errors import (
    DataError,
    DisconnectedGraphError,
    IdMismatchError,
    InputError,
    MissingColumnError,
    PartitionError,
    PlanValidationError,
    SchemaError,
)
from majdist.io import (
    BLOCK_COLUMNS,
    GridSpec,
    load_instance,
    load_instance_dir,
    load_plan,
    make_grid,
    plan_to_json,
    save_plan,
    write_instance,
)
from majdist.model import District, Plan, pop_deviation

BLOCKS = "id,pop,vap,tvap,x,y,area,perimeter\n" + "".join(
    f"{b},100,75,{t},{x},0,1,4\n" for b, t, x in (("a", 10, 0), ("b", 40, 1), ("c", 50, 2), ("d", 5, 3)))


def _files(tmp_path, blocks=BLOCKS, adjacency=None):
    adjacency = adjacency if adjacency is not None else [
        {"a": "a", "b": "b", "shared_border": 1}, {"a": "b", "b": "c", "shared_border": 1},
        {"a": "c", "b": "d", "shared_border": 1}]
    (tmp_path / "blocks.csv").write_text(blocks)
    (tmp_path / "adjacency.json").write_text(json.dumps(adjacency))
    return tmp_path / "blocks.csv", tmp_path / "adjacency.json"


def test_load_well_formed(tmp_path):
    inst = load_instance(*_files(tmp_path), 2, 0.05)
    assert len(inst.blocks) == 4
    assert inst.ideal_pop == 200
    assert inst.blocks["b"].tvap == 40


def test_load_unknown_id(tmp_path):
    adj = [{"a": "a", "b": "zz", "shared_border": 1}]
    with pytest.raises(IdMismatchError):
        load_instance(*_files(tmp_path, adjacency=adj), 2, 0.05)


def test_load_isolated_vertex(tmp_path):
    adj = [{"a": "a", "b": "b", "shared_border": 1}, {"a": "b", "b": "c", "shared_border": 1}]
    with pytest.raises(DisconnectedGraphError):
        load_instance(*_files(tmp_path, adjacency=adj), 2, 0.05)


def test_load_missing_column(tmp_path):
    blocks = BLOCKS.replace("tvap,", "").replace(",10,", ",")
    with pytest.raises(MissingColumnError):
        load_instance(*_files(tmp_path, blocks=blocks), 2, 0.05)


def test_load_border_exceeds_perimeter(tmp_path):
    adj = [{"a": "a", "b": "b", "shared_border": 5}, {"a": "b", "b": "c", "shared_border": 1},
           {"a": "c", "b": "d", "shared_border": 1}]
    with pytest.raises(DataError):
        load_instance(*_files(tmp_path, adjacency=adj), 2, 0.05)


def test_make_grid_uniform_has_zero_deviation():
    inst = make_grid(GridSpec(4, 4, 4))
    for r0 in (0, 2):
        for c0 in (0, 2):
            d = {f"{r}-{c}" for r in (r0, r0 + 1) for c in (c0, c0 + 1)}
            assert pop_deviation(d, inst) == 0


def test_make_grid_deterministic_and_planted():
    spec = GridSpec(6, 6, 4, 0.05, (((0, 0, 3, 3), 0.9),), 0.1, 100, 0.2, 7)
    a, b = make_grid(spec), make_grid(spec)
    assert dict(a.blocks) == dict(b.blocks)
    assert a.graph.edges == b.graph.edges
    assert a.blocks["1-1"].tvap == round(0.9 * a.blocks["1-1"].vap)
    assert a.blocks["4-4"].tvap == round(0.1 * a.blocks["4-4"].vap)
    assert all(b.vap == round(0.75 * b.pop) for b in a.blocks.values())
    assert all(80 <= b.pop <= 120 for b in a.blocks.values())


def test_make_grid_infeasible_spec():
    with pytest.raises(InputError):
        GridSpec(2, 2, 5)
    with pytest.raises(InputError):
        GridSpec(3, 3, 2, cluster_spec=(((0, 0, 1, 1), 1.5),))


def test_planted_grid_oracle_optimum():
    # 3x3 cluster at 0.9 on a 6x6 background of 0.1, n=4: the bitmask oracle
    # (cross-checked by full enumeration) finds exactly one majority district.
    assert SUITE[1][2] == 1
    assert suite_optimum(1) == 1


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.integers(2, 6), st.integers(1, 4), st.floats(0, 0.3), st.integers(0, 2**32))
def test_make_grid_round_trips_through_files(w, h, n, noise, seed):
    spec = GridSpec(w, h, min(n, w * h), 0.1, (((0, 0, 1, 2), 0.6),), 0.1, 100, noise, seed)
    inst = make_grid(spec)
    with tempfile.TemporaryDirectory() as out:
        write_instance(inst, out)
        back = load_instance_dir(out)
    assert dict(back.blocks) == dict(inst.blocks)
    assert back.graph.edges == inst.graph.edges
    assert back.n_districts == inst.n_districts and back.epsilon == inst.epsilon


def test_file_formats(tmp_path):
    inst = make_grid(GridSpec(2, 2, 2))
    write_instance(inst, tmp_path)
    raw = (tmp_path / "blocks.csv").read_bytes()
    assert raw.splitlines()[0].decode() == ",".join(BLOCK_COLUMNS)
    assert b"\r" not in raw
    adj = json.loads((tmp_path / "adjacency.json").read_text())
    assert {"a": "0-0", "b": "0-1", "shared_border": 1.0} in adj


def _plan():
    inst = path_instance([100, 100, 100, 100], 2)
    return inst, Plan((District({"b0", "b1"}), District({"b2", "b3"})), {"seed": 1})


def test_plan_round_trip(tmp_path):
    inst, plan = _plan()
    save_plan(plan, tmp_path / "p.json")
    back = load_plan(tmp_path / "p.json", inst)
    assert back.assignment() == plan.assignment()
    assert back.provenance == {"seed": 1}
    assert plan_to_json(back) == plan_to_json(plan)


def test_plan_block_assigned_twice(tmp_path):
    inst, plan = _plan()
    (tmp_path / "p.json").write_text('{"assignment": {"b0": 0, "b1": 0, "b2": 1, "b3": 1, "b0": 1}}')
    with pytest.raises(PartitionError):
        load_plan(tmp_path / "p.json", inst)


def test_plan_index_out_of_range(tmp_path):
    inst, plan = _plan()
    (tmp_path / "p.json").write_text('{"assignment": {"b0": 0, "b1": 0, "b2": 1, "b3": 2}}')
    with pytest.raises(SchemaError):
        load_plan(tmp_path / "p.json", inst)


def test_plan_validation_names_district(tmp_path):
    inst, plan = _plan()
    (tmp_path / "p.json").write_text('{"assignment": {"b0": 0, "b1": 1, "b2": 1, "b3": 1}}')
    with pytest.raises(PlanValidationError) as exc:
        load_plan(tmp_path / "p.json", inst)
    assert exc.value.district == 0


def test_suite_instances_load_cleanly(tmp_path):
    for k in range(len(SUITE)):
        write_instance(suite_instance(k), tmp_path / str(k))
        assert len(load_instance_dir(tmp_path / str(k)).blocks) == 36
