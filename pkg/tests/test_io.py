import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from retrodict.discrete import entropy_report, random_system
from retrodict.io import (
    InputFormatError,
    format_float,
    load_distribution,
    load_kernel,
    report_to_json_dict,
    write_csv,
)

REPORT_KEYS = [
    "s0", "st", "avg_st", "avg_sr", "mutual_info",
    "kl_t_t", "kl_t_pt", "kl_pt_t", "kl_r_r", "kl_r_p0", "kl_p0_r",
]


def test_kernel_csv_round_trip(tmp_path):
    path = tmp_path / "kernel.csv"
    path.write_text("a,b\n0.9,0.1\n0.2,0.8\n")
    kernel = load_kernel(path)
    assert kernel.target_labels == ("a", "b")
    assert kernel.n_source == 2
    assert_allclose(kernel.rows, [[0.9, 0.1], [0.2, 0.8]])


def test_prior_csv(tmp_path):
    path = tmp_path / "prior.csv"
    path.write_text("a,b,c\n0.5,0.25,0.25\n")
    prior = load_distribution(path)
    assert prior.labels == ("a", "b", "c")
    assert_allclose(prior.mass, [0.5, 0.25, 0.25])


def test_kernel_json(tmp_path):
    path = tmp_path / "kernel.json"
    path.write_text(json.dumps({"labels": ["x", "y"], "rows": [[0.5, 0.5], [0.1, 0.9]]}))
    kernel = load_kernel(path)
    assert kernel.source_labels == ("x", "y")
    assert_allclose(kernel.rows, [[0.5, 0.5], [0.1, 0.9]])


def test_csv_error_carries_line_and_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n0.9,oops\n")
    with pytest.raises(InputFormatError, match=r"line 2, column 2"):
        load_kernel(path)


def test_csv_error_on_ragged_row(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("a,b\n0.9,0.1\n0.5\n")
    with pytest.raises(InputFormatError, match=r"line 3"):
        load_kernel(path)


def test_json_error_carries_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"labels": [1, 2], "rows": [[0.5, 0.5],]}')
    with pytest.raises(InputFormatError, match=r"line 1, column"):
        load_kernel(path)


def test_prior_rejects_multiple_rows(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("a,b\n0.5,0.5\n0.1,0.9\n")
    with pytest.raises(InputFormatError, match="exactly one"):
        load_distribution(path)


def test_report_json_has_fixed_flat_keys():
    kernel, prior = random_system(4, 0)
    payload = report_to_json_dict(entropy_report(kernel, prior))
    assert list(payload) == REPORT_KEYS
    assert all(isinstance(v, float) for v in payload.values())


def test_format_float_round_trips_doubles():
    rng = np.random.default_rng(0)
    for x in rng.standard_normal(100) * 10.0 ** rng.integers(-12, 12, size=100):
        assert float(format_float(float(x))) == float(x)
    assert format_float(math.inf) == "inf"
    assert format_float(-math.inf) == "-inf"


def test_write_csv_uses_17_significant_digits(tmp_path):
    path = tmp_path / "out.csv"
    value = 1 / 3
    write_csv(path, ["name", "x"], [["row", value]])
    text = path.read_text().splitlines()
    assert text[0] == "name,x"
    assert float(text[1].split(",")[1]) == value
