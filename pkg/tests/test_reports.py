import io
import json
import math

import pytest

from qtheta.reports import REPORT_FIELDS, CheckReport, combine, write_reports


def test_pass_derived_from_residual():
    assert CheckReport("x", 1e-13, 1e-12).passed
    assert not CheckReport("x", 1e-12, 1e-12).passed
    assert not CheckReport("x", math.nan, 1.0).passed


def test_record_round_trip():
    r = CheckReport("relations", 1.2345678901234567e-14, 1e-12,
                    params={"N": 4, "alpha": 0.3, "beta": 1 + 2j, "tag": "x"})
    line = r.to_record()
    assert "\n" not in line
    assert tuple(json.loads(line)) == REPORT_FIELDS
    back = CheckReport.from_record(line)
    assert back.residual == r.residual and back.tolerance == r.tolerance and back.passed
    assert back.params["beta"] == [1.0, 2.0]


def test_nonfinite_values_are_strings():
    line = CheckReport("x", math.inf, 1.0).to_record()
    assert json.loads(line)["residual"] == "inf"
    assert math.isinf(CheckReport.from_record(line).residual)


def test_rejects_foreign_record():
    with pytest.raises(ValueError):
        CheckReport.from_record('{"name": "x"}')


def test_combine_takes_worst():
    c = combine("all", [CheckReport("a", 1e-14, 1e-12), CheckReport("b", 3e-13, 1e-12)], 1e-12, N=3)
    assert c.residual == 3e-13 and c.passed
    assert c.params["components"] == {"a": 1e-14, "b": 3e-13} and c.params["N"] == 3


def test_combine_propagates_nan():
    c = combine("all", [CheckReport("a", 1e-14, 1e-12), CheckReport("b", math.nan, 1e-12)])
    assert math.isnan(c.residual) and not c.passed


def test_combine_respects_component_failure():
    # a component can fail its own tighter tolerance while under the combined one
    c = combine("all", [CheckReport("a", 1e-10, 1e-12)], 1e-6)
    assert not c.passed


def test_write_reports():
    buf = io.StringIO()
    write_reports([CheckReport("a", 0.0, 1.0), CheckReport("b", 2.0, 1.0)], buf)
    lines = buf.getvalue().splitlines()
    assert [json.loads(x)["pass"] for x in lines] == [True, False]
