"""SVG emitter tests: structural checks on well-formed output rather than
pixel comparisons."""

import xml.etree.ElementTree as ET

import numpy as np
import pytest

from hqrl.env import VrpInstance
from hqrl.svgplot import emit_curve_svg, emit_route_svg, moving_average


def _instance():
    return VrpInstance(n_customers=2, n_vehicles=1,
                       depot=np.array([0.5, 0.5]),
                       customers=np.array([[0.2, 0.8], [0.9, 0.1]]),
                       seed=0)


def _tags(doc: str, name: str) -> list[ET.Element]:
    root = ET.fromstring(doc)
    return [el for el in root.iter() if el.tag.endswith(name)]


def test_route_svg_structure():
    doc = emit_route_svg(_instance(), {0: [0, 1]})
    polylines = _tags(doc, "polyline")
    assert len(polylines) == 1
    points = polylines[0].attrib["points"].split()
    assert len(points) == 4  # depot, two customers, back to depot
    assert points[0] == points[-1]
    assert len(_tags(doc, "path")) == 3      # one arrowhead per leg
    assert len(_tags(doc, "circle")) == 2    # one dot per customer
    assert len(_tags(doc, "polygon")) == 1   # depot marker
    labels = {el.text for el in _tags(doc, "text")}
    assert {"0", "1"} <= labels


def test_route_svg_empty_routes_draws_only_markers():
    doc = emit_route_svg(_instance(), {0: []})
    assert _tags(doc, "polyline") == []
    assert len(_tags(doc, "circle")) == 2
    assert len(_tags(doc, "polygon")) == 1


def test_route_svg_writes_file(tmp_path):
    out = tmp_path / "routes.svg"
    doc = emit_route_svg(_instance(), {0: [1, 0]}, out)
    assert out.read_text() == doc


def test_curve_svg_one_polyline_per_series():
    rng = np.random.default_rng(0)
    doc = emit_curve_svg([("a", rng.normal(size=30)), ("b", rng.normal(size=25))])
    assert len(_tags(doc, "polyline")) == 2
    legend_labels = {el.text for el in _tags(doc, "text")}
    assert {"a", "b"} <= legend_labels


def test_curve_svg_constant_series_is_horizontal():
    doc = emit_curve_svg([("flat", np.full(12, -3.0))])
    (polyline,) = _tags(doc, "polyline")
    ys = {pair.split(",")[1] for pair in polyline.attrib["points"].split()}
    assert len(ys) == 1


def test_curve_svg_rejects_empty_input():
    with pytest.raises(ValueError):
        emit_curve_svg([])
    with pytest.raises(ValueError):
        emit_curve_svg([("a", np.array([]))])


def test_moving_average_partial_windows():
    np.testing.assert_allclose(moving_average(np.array([1.0, 2.0, 3.0, 4.0]), window=2),
                               [1.0, 1.5, 2.5, 3.5])
    np.testing.assert_allclose(moving_average(np.array([2.0, 4.0, 6.0]), window=10),
                               [2.0, 3.0, 4.0])
    constant = moving_average(np.full(20, 5.0))
    np.testing.assert_allclose(constant, 5.0)
