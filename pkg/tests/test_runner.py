from __future__ import annotations

import json

import pytest

from bab.agents import AgentSpec
from bab.runner import RunConfig, run_benchmark, run_episode
from bab.stages import StageOverrides, load_stage
from bab.types import StageLoadError


def config(stage_id=4, primary="random", **kw):
    return RunConfig(
        stage_id=stage_id,
        seeds=[0],
        primary=AgentSpec(backend=primary, seed=1),
        reference=AgentSpec(backend="random", seed=2),
        **kw,
    )


def test_world_hash_pins():
    """Canonical serialization regression guard: any change to layout
    generation or field order shows up here first."""
    assert load_stage(1, 7).world_hash() == (
        "1e9215f7b6dfb807ea0456735a2ef3ed7c2094091bb4636eea87acdf4bb4a671"
    )
    assert load_stage(5, 0).world_hash() == (
        "32cbc3f98761de2e34deab975f1d8aff6759b289faf47ae049baac548b236faa"
    )


def test_primary_secondary_isolation(tmp_path):
    """Swapping the primary backend must not change what secondary agents
    see before the first divergent primary action."""
    log_a = tmp_path / "a.jsonl"
    log_b = tmp_path / "b.jsonl"
    run_episode(config(primary="random"), 0, log_a)
    run_episode(config(primary="greedy"), 0, log_b)

    def rows(path, agent_id):
        out = {}
        for line in path.read_text().splitlines():
            d = json.loads(line)
            if d.get("kind") == "turn" and d["agent"] == agent_id:
                out[d["turn"]] = d
        return out

    primary_a, primary_b = rows(log_a, 1), rows(log_b, 1)
    divergence = min(
        (t for t in primary_a if t in primary_b
         and primary_a[t]["action"] != primary_b[t]["action"]),
        default=max(primary_a) + 1,
    )
    secondary_a, secondary_b = rows(log_a, 2), rows(log_b, 2)
    for t in range(min(divergence, max(secondary_a, default=-1) + 1)):
        if t in secondary_a and t in secondary_b:
            assert secondary_a[t]["prompt_sha256"] == secondary_b[t]["prompt_sha256"]
    assert 0 in secondary_a and 0 in secondary_b  # at least the opening turn


def test_npc_overflow_is_a_load_error():
    with pytest.raises(StageLoadError, match="NPC tanks"):
        load_stage(2, 0, StageOverrides(npcs=500))


def test_benchmark_survives_episode_failures(tmp_path):
    bad = RunConfig(
        stage_id=1,
        seeds=[0],
        primary=AgentSpec(backend="canned", transcript_path="/nonexistent.jsonl"),
        reference=AgentSpec(backend="random", seed=2),
    )
    good = config(stage_id=1)
    out = run_benchmark([bad, good], tmp_path / "suite")
    assert (out / "failures.txt").exists()
    assert (out / "episodes.csv").exists()  # the good episode still reported


def test_run_episode_counts_remote_failures_as_invalid_turns(tmp_path):
    # a backend that always raises produces format-invalid turns, not aborts
    from bab import runner as runner_mod
    from bab.agents import AgentError

    class ExplodingBackend:
        def decide(self, prompt, world, agent_id):
            raise AgentError("simulated outage")

    original = runner_mod.make_backend
    try:
        runner_mod.make_backend = lambda *a, **k: ExplodingBackend()
        result = run_episode(config(stage_id=1, overrides=StageOverrides(turns=5)), 0)
    finally:
        runner_mod.make_backend = original
    assert result.summary.f_acc == 0.0
    assert result.world.turn == 5
    assert all(r.error for r in result.records)
