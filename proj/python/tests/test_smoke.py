import json
import math
import pathlib

import pytest

import joda

FIXTURES = pathlib.Path(__file__).resolve().parents[2] / "tests" / "fixtures"


def read(rel):
    return (FIXTURES / rel).read_text()


def test_template_library():
    names = joda.template_names()
    assert len(names) == 13
    assert "detent_internal" in names


def test_pchip_two_knots_is_linear():
    assert joda.pchip_eval([0, 1], [0.5, -1.5], [0.3]) == pytest.approx([-0.1])


def test_compile_matches_golden():
    out = joda.compile(read("context_door.json"), read("proposals/p01_door_soft_close.json"))
    assert out == read("golden/door_composed.json")


def test_validation_error_carries_path():
    with pytest.raises(joda.JodaError) as info:
        joda.validate_proposal(read("bad_interval_proposal.json"))
    assert info.value.path == "effect_proposals[1].start_ratio"


def test_simulate_and_analyze():
    composed = read("golden/door_composed.json")
    traj = joda.simulate(composed, {"initial": {"s": 0.9, "v": 0.0}, "steps": 100, "force": {"constant": -0.3}})
    assert len(traj) == 101
    assert all(math.isfinite(r["q"]) for r in traj)
    assert joda.analyze(composed) == json.loads(read("golden/door_analysis.json"))
    assert joda.plot_svg(composed, 201, True, True) == read("golden/door_profile.svg")


def test_optimize_runs():
    composed = read("golden/door_composed.json")
    sim = joda.simulate(composed, {"initial": {"s": 0.9, "v": 0.0}, "steps": 80})
    csv = "t,q,v,f_ext,f_hand\n" + "".join(
        f"{r['t']!r},{r['q']!r},{r['v']!r},{r['f_ext']!r},{r['f_hand']!r}\n" for r in sim
    )
    report, refined = joda.optimize(composed, [csv], iters=2)
    assert len(report["loss_history"]) == 3
    assert json.loads(refined)["format_version"] == "1"
