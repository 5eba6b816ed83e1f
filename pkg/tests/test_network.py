import json
from dataclasses import replace

import pytest

from psps.errors import ParseError, ValidationError
from psps.network import (
    Generator,
    coarsen_horizon,
    load_network,
    save_network,
    validate_network,
)


def test_toy3_counts(toy3):
    assert len(toy3.buses) == 3
    assert len(toy3.lines) == 2
    assert len(toy3.generators) == 2
    assert toy3.horizon == 3
    assert toy3.step_hours == 1.0


def test_toy3_field_content(toy3):
    g1 = toy3.generators[0]
    assert g1.bus == 1 and g1.p_max == 100.0 and g1.marginal_cost == 5.0
    assert g1.initially_on is False
    l2 = toy3.line(2)
    assert l2.from_bus == 1 and l2.to_bus == 3
    assert l2.endpoints == ((34.0, -117.0), (33.9, -117.1))
    d1 = toy3.demands[0]
    assert d1.base_profile == (30.0, 40.0, 35.0)


def test_roundtrip_identity(toy3, tmp_path):
    out = tmp_path / "copy.json"
    save_network(toy3, out)
    again = load_network(out)
    assert again == toy3


def test_missing_file_is_parse_error(tmp_path):
    with pytest.raises(ParseError):
        load_network(tmp_path / "nope.json")


def test_bad_json_reports_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n "buses": [,]\n}\n')
    with pytest.raises(ParseError) as exc:
        load_network(p)
    assert exc.value.line == 2


def test_missing_top_key(tmp_path, toy3_doc):
    del toy3_doc["horizon"]
    p = tmp_path / "case.json"
    p.write_text(json.dumps(toy3_doc))
    with pytest.raises(ParseError, match="horizon"):
        load_network(p)


def test_missing_entity_field(tmp_path, toy3_doc):
    del toy3_doc["generators"][1]["p_max"]
    p = tmp_path / "case.json"
    p.write_text(json.dumps(toy3_doc))
    with pytest.raises(ParseError, match="generator 2"):
        load_network(p)


def test_unknown_bus_named_in_diagnostic(tmp_path, toy3_doc):
    toy3_doc["generators"][0]["bus"] = 99
    p = tmp_path / "case.json"
    p.write_text(json.dumps(toy3_doc))
    with pytest.raises(ValidationError) as exc:
        load_network(p)
    assert any("generator 1" in d and "99" in d for d in exc.value.diagnostics)


def test_validate_flags_pmin_above_pmax(toy3):
    bad = replace(toy3.generators[0], p_min=10.0, p_max=5.0)
    net = replace(toy3, generators=(bad, toy3.generators[1]))
    diags = validate_network(net)
    assert len(diags) == 1
    assert "generator 1" in diags[0] and "p_min" in diags[0]


def test_validate_flags_zero_min_up(toy3):
    bad = Generator(id=7, bus=1, p_min=0, p_max=10, ramp_down=-10, ramp_up=10,
                    min_up=0, min_down=1, marginal_cost=1, startup_cost=0,
                    shutdown_cost=0)
    net = replace(toy3, generators=(bad,))
    diags = validate_network(net)
    assert any("min_up" in d and ">= 1" in d for d in diags)


def test_validate_clean_case_is_empty(toy3):
    assert validate_network(toy3) == []


def test_validate_voll_must_dominate_cost(tmp_path, toy3_doc):
    toy3_doc["demands"][0]["voll"] = 12.0  # below gen 2's marginal 15
    p = tmp_path / "case.json"
    p.write_text(json.dumps(toy3_doc))
    with pytest.raises(ValidationError, match="voll"):
        load_network(p)


def test_validate_noncontiguous_bus_ids(tmp_path, toy3_doc):
    toy3_doc["buses"][2]["id"] = 5
    for rec in toy3_doc["generators"] + toy3_doc["demands"]:
        if rec["bus"] == 3:
            rec["bus"] = 5
    for rec in toy3_doc["lines"]:
        if rec["to_bus"] == 3:
            rec["to_bus"] = 5
    p = tmp_path / "case.json"
    p.write_text(json.dumps(toy3_doc))
    with pytest.raises(ValidationError, match="contiguous"):
        load_network(p)


def test_validate_line_flow_box_contains_zero(tmp_path, toy3_doc):
    toy3_doc["lines"][0]["flow_min"] = 5.0
    p = tmp_path / "case.json"
    p.write_text(json.dumps(toy3_doc))
    with pytest.raises(ValidationError, match="line 1"):
        load_network(p)


def test_profile_length_must_match_horizon(tmp_path, toy3_doc):
    toy3_doc["demands"][1]["base_profile"] = [1.0, 2.0]
    p = tmp_path / "case.json"
    p.write_text(json.dumps(toy3_doc))
    with pytest.raises(ValidationError, match="demand 2"):
        load_network(p)


def test_coarsen_horizon_stride_and_scaling(toy3):
    coarse = coarsen_horizon(toy3, 2)
    assert coarse.horizon == 2
    assert coarse.step_hours == 2.0
    assert coarse.demands[0].base_profile == (30.0, 35.0)
    g = coarse.generators[0]
    assert g.ramp_up == 200.0 and g.ramp_down == -200.0
    assert g.min_up == 1
    # source untouched
    assert toy3.horizon == 3 and toy3.generators[0].ramp_up == 100.0


def test_coarsen_factor_one_is_noop(toy3):
    assert coarsen_horizon(toy3, 1) is toy3
