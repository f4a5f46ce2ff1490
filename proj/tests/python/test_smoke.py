import json
import math
import os
from pathlib import Path

import pytest

import syncdmpc

CONFIGS = Path(os.environ.get("SYNCDMPC_SOURCE_DIR", Path(__file__).resolve().parents[2])) / "configs"


def test_default_config_round_trips():
    text = syncdmpc.default_config()
    cfg = json.loads(text)
    assert cfg["controller"] == "scdmpc"
    assert syncdmpc.normalize_config(text) == text


def test_unknown_key_is_rejected():
    with pytest.raises(syncdmpc.SyncDmpcError, match="bogus"):
        syncdmpc.normalize_config('{"bogus": 1}')


def test_vehicle_step_straight_line():
    x, y, psi, v = syncdmpc.vehicle_step((0.0, 0.0, 0.0, 0.5), (0.0, 0.0))
    dt = json.loads(syncdmpc.default_config())["vehicle"]["dt"]
    assert x == pytest.approx(0.5 * dt)
    assert (y, psi, v) == (0.0, 0.0, 0.5)


def test_dubins_straight_path():
    word, length = syncdmpc.dubins((0.0, 0.0, 0.0), (2.0, 0.0, 0.0), 0.5)
    assert word in {"LSL", "RSR"}
    assert length == pytest.approx(2.0)


def test_spanning_tree():
    assert syncdmpc.has_spanning_tree(3, [(1, 2), (2, 3)])
    assert not syncdmpc.has_spanning_tree(4, [(1, 2), (3, 4)])


def test_run_pair_config():
    out = syncdmpc.run(CONFIGS / "pair.json")
    m = out["metrics"]
    assert m["status"] == "ok"
    assert m["num_agents"] == 2
    assert m["max_disagreement"] <= 1.0
    assert out["trajectory_csv"].startswith("step,agent,")
    agents = {row["agent"] for row in out["log"]}
    assert agents == {1, 2}
    assert all(math.isfinite(row["x"]) for row in out["log"])


def test_run_is_deterministic_and_controllers_agree_for_one_agent():
    a = syncdmpc.run({"num_agents": 1, "seed": 2}, controller="scdmpc")
    b = syncdmpc.run({"num_agents": 1, "seed": 2}, controller="cmpc")
    assert a["trajectory_csv"] == syncdmpc.run({"num_agents": 1, "seed": 2})["trajectory_csv"]
    for ra, rb in zip(a["log"], b["log"]):
        assert ra["a"] == pytest.approx(rb["a"], abs=1e-6)
        assert ra["delta"] == pytest.approx(rb["delta"], abs=1e-6)


def test_placement_failure_raises():
    with pytest.raises(syncdmpc.SyncDmpcError, match="fewer agents"):
        syncdmpc.run(CONFIGS / "degenerate_arena.json")


def test_compare_rows():
    out = syncdmpc.compare({"topology": {"kind": "ring"}}, agents=[2, 3], seeds=[1])
    lines = out["compare_csv"].strip().splitlines()
    assert len(lines) == 1 + 2 * 2
    assert len(out["runs"]) == 4
