import json
import xml.etree.ElementTree as ET

from fcba.engine import run
from fcba.export import STYLE, events_csv, space_time_svg, table_csv, trajectories
from fcba.model import Configuration, Exponential, InitialConfig, Side, sample_initial_config, validate_params

SVG = "{http://www.w3.org/2000/svg}"


def _trace(prm, seed=4):
    return run(sample_initial_config(InitialConfig(200, 0.15, Side.TWO_SIDED, Exponential(), seed)), prm)


def test_events_csv_layout(classical):
    tr = run(Configuration.from_species([0.0, 2.0], "><"), classical)
    lines = events_csv(tr, {"seed": 1}).splitlines()
    assert json.loads(lines[0][2:]) == {"seed": 1}
    assert lines[1] == "time,position,kind,left_id,right_id,created_id"
    assert lines[2] == "1.0,1.0,MUTUAL,0,1,"
    assert len(lines) == 3


def test_events_csv_round_trips_floats(thirds):
    tr = _trace(thirds)
    rows = events_csv(tr).splitlines()[1:]
    assert len(rows) == len(tr.events)
    for row, ev in zip(rows, tr.events):
        t, x = row.split(",")[:2]
        assert float(t) == ev.time and float(x) == ev.position


def test_trajectory_styles(thirds):
    tr = _trace(thirds)
    keys = {s[4] for s in trajectories(tr)}
    assert keys <= {"blockade", "generated_blockade", "arrow"}
    assert "arrow" in keys and "blockade" in keys


def test_svg_is_well_formed_and_styled(thirds):
    tr = _trace(thirds)
    text = space_time_svg(tr, meta={"seed": 4})
    root = ET.fromstring(text.encode())
    assert root.tag == SVG + "svg"
    assert (root.get("width"), root.get("height")) == tuple(str(v) for v in STYLE["size"])
    strokes = {g.get("stroke") for g in root.iter(SVG + "g") if g.get("stroke")}
    assert {STYLE["blockade"]["stroke"], STYLE["arrow"]["stroke"]} <= strokes
    circles = list(root.iter(SVG + "circle"))
    assert len(circles) == sum(1 for e in tr.events if e.time <= tr.end_time * 1.1)
    assert json.loads(root.find(SVG + "metadata").text) == {"seed": 4}
    assert space_time_svg(tr, meta={"seed": 4}) == text


def test_table_csv_formats_floats():
    text = table_csv([{"p": 0.1, "q": 1.0, "branch": "x"}], ["p", "q", "branch"])
    assert text == "p,q,branch\n0.1,1.0,x\n"
