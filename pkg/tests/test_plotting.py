import pytest

from qubitbath.errors import InvalidInputError
from qubitbath.plotting import emit_plot

RATES = {"e": [-2.0, 0.0, 2.0, 1.0], "gamma": [0.1, 0.0, 0.1, 0.05]}
TRAJ = {"times": [0.0, 1.0, 10.0, 1000.0], "series": {"+|-": [0.5, 0.4, 0.2, 0.0]}}
SCALING = {"n": [1, 2, 3], "series": {"max rate": [1.0, 4.0, 9.0]}, "slopes": {"max rate": 2.0}}


@pytest.mark.parametrize("kind,data", [("rates", RATES), ("trajectory", TRAJ), ("scaling", SCALING)])
def test_svg_is_byte_stable(tmp_path, kind, data):
    a = emit_plot(kind, data, tmp_path / "a.svg", description="run 1")
    b = emit_plot(kind, data, tmp_path / "b.svg", description="run 1")
    text = a.read_bytes()
    assert text == b.read_bytes()
    assert text.lstrip().startswith(b"<?xml")
    assert b"run 1" in text


def test_unknown_kind_and_empty_data(tmp_path):
    with pytest.raises(InvalidInputError):
        emit_plot("histogram", RATES, tmp_path / "x.svg")
    with pytest.raises(InvalidInputError):
        emit_plot("rates", {"e": [], "gamma": []}, tmp_path / "x.svg")
    with pytest.raises(InvalidInputError):
        emit_plot("trajectory", {"times": [0.0], "series": {}}, tmp_path / "y.svg")
    assert not (tmp_path / "x.svg").exists()
