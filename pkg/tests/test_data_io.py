import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from svsde.data_io import (Individual, Segment, TrajectorySet, empirical_speeds, fill_gaps,
                           from_simulation, load_trajectories, save_trajectories,
                           split_exit_segments, write_speeds)
from svsde.errors import ParseError, ValidationError
from svsde.geometry import NestGeometry, four_chamber_nest, quadrant_sections
from svsde.presets import recovery_preset
from svsde.sde import simulate_individuals

NEST = four_chamber_nest()


def write_csv(path, rows, header="id,t,x,y"):
    path.write_text(header + "\n" + "\n".join(",".join(map(str, r)) for r in rows) + "\n")
    return path


# -- geometry ----------------------------------------------------------------

def test_four_chamber_layout():
    assert NEST.bounds == (0.0, 65.0, 0.0, 160.0)
    assert NEST.section_names == ["Ia", "Ib", "IIa", "IIb", "IIIa", "IIIb", "IVa", "IVb"]
    assert NEST.section_of(*NEST.exit) == "IVb"
    d = NEST.section_distances("IVb")
    order = ["IVb", "IVa", "IIIb", "IIIa", "IIb", "IIa", "Ib", "Ia"]
    assert [d[n] for n in order] == list(range(8))


def test_geometry_round_trip(tmp_path):
    p = tmp_path / "nest.json"
    NEST.save(p)
    g = NestGeometry.load(p)
    assert g == NEST
    np.testing.assert_array_equal(g.solid_segments, NEST.solid_segments)


def test_geometry_section_dict_form():
    g = NestGeometry.from_dict({"bounds": [0, 2, 0, 1],
                                "sections": {"L": [0, 1, 0, 1], "R": [1, 2, 0, 1]}})
    assert g.section_of(1.5, 0.5) == "R"
    assert g.section_distances("L") == {"L": 0, "R": 1}


@pytest.mark.parametrize("d", [
    {"bounds": [0, 1, 0, 1], "sections": [{"name": "a", "rect": [0, 1, 0, 1]},
                                           {"name": "b", "rect": [0.5, 1, 0, 1]}]},
    {"bounds": [0, 1, 0, 1], "sections": [{"name": "a", "rect": [0, 2, 0, 1]}]},
    {"bounds": [0, 1, 0, 1], "walls": [[0, 0.5, 1, 0.5]], "doorways": [[0, 0.7, 0.2, 0.7]]},
    {"bounds": [1, 0, 0, 1]},
])
def test_geometry_validation(d):
    with pytest.raises(ValidationError):
        NestGeometry.from_dict(d)


def test_geometry_parse_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ParseError):
        NestGeometry.load(p)
    with pytest.raises(ParseError):
        NestGeometry.from_dict({"walls": []})


def test_doorway_cut_from_wall():
    # the chamber IV barrier at y = 20 keeps only [0, 53]
    segs = NEST.solid_segments
    on_line = segs[(segs[:, 1] == 20.0) & (segs[:, 3] == 20.0)]
    assert on_line.tolist() == [[0.0, 20.0, 53.0, 20.0]]


# -- fill_gaps -----------------------------------------------------------------

def test_fill_gaps_interpolates():
    out = fill_gaps(Segment([1, 4], [0.0, 3.0], [0.0, 0.0]), max_gap=2)
    assert len(out) == 1
    np.testing.assert_array_equal(out[0].t, [1, 2, 3, 4])
    np.testing.assert_allclose(out[0].x, [0, 1, 2, 3])


def test_fill_gaps_no_gap_unchanged():
    s = Segment([3, 4, 5], [1.0, 2.0, 4.0], [0.0, 1.0, 0.0])
    out = fill_gaps(s)
    assert len(out) == 1
    np.testing.assert_array_equal(out[0].x, s.x)
    np.testing.assert_array_equal(out[0].t, s.t)


def test_fill_gaps_long_gap_splits():
    out = fill_gaps(Segment([1, 2, 13, 14], [0.0, 1, 2, 3], [0.0, 0, 0, 0]), max_gap=3)
    assert [o.t.tolist() for o in out] == [[1, 2], [13, 14]]


@given(st.lists(st.integers(1, 4), min_size=1, max_size=30), st.integers(0, 5))
def test_fill_gaps_output_is_unit_stride(steps, max_gap):
    t = np.cumsum([0] + steps)
    x = np.sin(t.astype(float))
    out = fill_gaps(Segment(t, x, -x), max_gap)
    for seg in out:
        seg.validate()
    kept = np.concatenate([o.t for o in out])
    assert set(t.tolist()) <= set(kept.tolist())
    assert sum(len(o) for o in out) == len(t) + sum(s - 1 for s in steps if s - 1 <= max_gap)


# -- split_exit_segments --------------------------------------------------------

def test_continuous_presence_single_segment():
    t = np.arange(10)
    segs, counts = split_exit_segments(t, np.full(10, 5.0), np.full(10, 5.0), NEST)
    assert len(segs) == 1 and counts["outside"] == 0


def test_absence_span_splits():
    t = np.concatenate([np.arange(10), np.arange(110, 120)])
    segs, _ = split_exit_segments(t, np.full(20, 5.0), np.full(20, 5.0), NEST)
    assert [len(s) for s in segs] == [10, 10]


def test_out_of_bounds_records_split_and_short_fragment_dropped():
    x = np.array([5.0, 5, 5, 5, -30, -30, 5, 5, -30, 5, 5, 5])
    t = np.arange(x.size)
    segs, counts = split_exit_segments(t, x, np.full(x.size, 5.0), NEST)
    assert [len(s) for s in segs] == [4, 3]
    assert counts == {"outside": 3, "clamped": 0, "short_segment_rows": 2}


def test_marginal_coordinates_clamped():
    segs, counts = split_exit_segments(np.arange(3), [-0.5, 1.0, 65.4], [1.0, 1.0, 1.0], NEST)
    assert counts["clamped"] == 2
    np.testing.assert_array_equal(segs[0].x, [0.0, 1.0, 65.0])


# -- load / save -----------------------------------------------------------------

def test_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    inds = [Individual(str(j), [Segment(np.arange(1, 21), rng.uniform(1, 60, 20),
                                        rng.uniform(1, 150, 20))]) for j in range(3)]
    data = TrajectorySet(inds, 1.0)
    p = tmp_path / "a.csv"
    save_trajectories(p, data)
    back = load_trajectories(p, NEST)
    q = tmp_path / "b.csv"
    save_trajectories(q, back)
    assert p.read_bytes() == q.read_bytes()
    for a, b in zip(data.segments(), back.segments()):
        assert a[0] == b[0]
        np.testing.assert_array_equal(a[1].x, b[1].x)
        np.testing.assert_array_equal(a[1].t, b[1].t)


def test_duplicates_keep_first(tmp_path):
    p = write_csv(tmp_path / "d.csv", [("a", 1, 1.0, 1.0), ("a", 2, 2.0, 1.0), ("a", 2, 9.0, 9.0),
                                       ("a", 3, 3.0, 1.0)])
    data = load_trajectories(p, NEST)
    assert data.report.duplicates == 1
    np.testing.assert_array_equal(data.individuals[0].segments[0].x, [1, 2, 3])


def test_doorway_gap_filled(tmp_path):
    rows = [("a", t, float(t), 10.0) for t in (1, 2, 3, 6, 7)]
    data = load_trajectories(write_csv(tmp_path / "g.csv", rows), NEST)
    assert data.report.interpolated == 2
    seg = data.individuals[0].segments[0]
    np.testing.assert_array_equal(seg.t, np.arange(1, 8))
    np.testing.assert_allclose(seg.x, np.arange(1, 8))


def test_unsorted_input_and_multiple_ids(tmp_path):
    rows = [("b", 3, 3.0, 3.0), ("a", 2, 2.0, 2.0), ("b", 1, 1.0, 1.0), ("a", 1, 1.0, 1.0),
            ("b", 2, 2.0, 2.0), ("a", 3, 3.0, 3.0)]
    data = load_trajectories(write_csv(tmp_path / "u.csv", rows), NEST)
    assert [i.id for i in data.individuals] == ["b", "a"]
    data.validate()


def test_record_conservation(tmp_path):
    rng = np.random.default_rng(5)
    rows = []
    for ident in "abc":
        t = np.sort(rng.choice(400, 250, replace=False))
        for ti in t:
            x = rng.uniform(-20, 80)
            rows.append((ident, int(ti), x, rng.uniform(0, 160)))
        rows.append((ident, int(t[5]), 1.0, 1.0))
    data = load_trajectories(write_csv(tmp_path / "c.csv", rows), NEST, max_gap=3)
    r = data.report
    assert r.rows == len(rows)
    assert r.output_rows == data.n_observations
    assert r.rows == r.output_rows + r.dropped + r.duplicates - r.interpolated
    data.validate()
    for _, seg in data.segments():
        assert len(seg) >= 3


def test_report_json(tmp_path):
    p = write_csv(tmp_path / "r.csv", [("a", t, 1.0, 1.0) for t in range(1, 6)])
    data = load_trajectories(p, NEST)
    out = tmp_path / "report.json"
    data.report.write_json(out)
    rep = json.loads(out.read_text())
    assert rep["rows"] == 5 and rep["dropped"] == 0


@pytest.mark.parametrize("body,line", [
    ("id,t,x,y\na,1,1.0,2.0\na,2,oops,2.0\n", 3),
    ("id,t,x,y\na,1,1.0\n", 2),
    ("id,t,x,y\na,1.5,1.0,2.0\n", 2),
    ("id,t,x\na,1,1.0\n", 1),
    ("", 1),
])
def test_malformed_rows(tmp_path, body, line):
    p = tmp_path / "m.csv"
    p.write_text(body)
    with pytest.raises(ParseError) as info:
        load_trajectories(p)
    assert info.value.line == line


def test_segment_validation():
    with pytest.raises(ValidationError):
        Segment([1, 3], [0.0, 1.0], [0.0, 1.0]).validate()
    with pytest.raises(ValidationError):
        Segment([1, 2], [0.0, np.inf], [0.0, 1.0]).validate()
    with pytest.raises(ValidationError):
        fill_gaps(Segment([2, 1], [0.0, 1.0], [0.0, 1.0]))


def test_from_simulation_thinning():
    pre = recovery_preset(n_obs=101)
    paths = simulate_individuals(pre.config, pre.params, 2)
    data = from_simulation(paths, 0.1, thin=5)
    assert data.delta == pytest.approx(0.5)
    seg = data.individuals[0].segments[0]
    np.testing.assert_array_equal(seg.x, paths[0][1].x[::5])
    np.testing.assert_array_equal(seg.t, np.arange(1, 22))


# -- speeds ----------------------------------------------------------------------

def test_stationary_speeds_zero():
    data = TrajectorySet([Individual("a", [Segment(np.arange(5), np.full(5, 10.0),
                                                   np.full(5, 10.0))])], 1.0)
    sp = empirical_speeds(data, NEST)
    assert np.all(sp["IVb"] == 0) and sp["IVb"].size == 4


def test_unit_speed_path():
    x = np.arange(1.0, 11.0)
    data = TrajectorySet([Individual("a", [Segment(np.arange(10), x, np.full(10, 10.0))])], 1.0)
    sp = empirical_speeds(data, NEST)
    np.testing.assert_allclose(sp["IVb"], 1.0)
    data2 = TrajectorySet(data.individuals, 0.5)
    np.testing.assert_allclose(empirical_speeds(data2, NEST)["IVb"], 2.0)


def test_simulated_quadrant_speeds(tmp_path):
    pre = recovery_preset()
    data = from_simulation(simulate_individuals(pre.config, pre.params, 5), 0.1)
    sp = empirical_speeds(data, quadrant_sections())
    others = np.concatenate([sp[k] for k in ("II", "III", "IV")])
    assert sp["I"].mean() < others.mean()
    out = tmp_path / "speeds.csv"
    write_speeds(out, sp)
    assert out.read_text().splitlines()[0] == "section,speed"
