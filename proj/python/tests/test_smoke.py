import math

import pytest

import eam


@pytest.fixture(scope="module")
def env():
    return eam.SynthEnv.generate(k=3, depth=3, goals=6, forced_steps=1, seed=7)


def test_env_is_seeded(env, tmp_path):
    assert eam.SynthEnv.generate(k=3, depth=3, goals=6, forced_steps=1, seed=7) == env
    assert len(env.tasks) == 6
    assert env.horizon == 6
    path = tmp_path / "env.json"
    env.save(str(path))
    assert eam.SynthEnv.load(str(path)) == env


def test_exact_oracle_recovers_every_task(env):
    for task in env.tasks:
        greedy, best = eam.greedy_and_optimal(env, task.id)
        assert greedy == best == 1.0
        top = eam.extract(env, task.id, strategy="mcts", iters=100)[0]
        assert eam.is_success(env, task.id, top["states"], top["actions"])
        assert len(top["node_q"]) == len(top["actions"])


def test_uniform_q_values_are_probabilities(env):
    q = eam.uniform_q(env, env.tasks[0].id)
    assert q
    assert all(0.0 <= v <= 1.0 for v in q.values())


def test_explore_build_and_group(env, tmp_path):
    jsonl = eam.explore(env, env.tasks[0].id, k=3, seed=1, p_flip=0.3)
    graph = eam.build_kg(jsonl, feature_dim=16)
    assert graph.validate() == []
    for a in env.tasks[0].optimal["actions"]:
        assert a in graph.action_ids
    path = tmp_path / "graph.json"
    graph.save(str(path))
    assert eam.KnowledgeGraph.load(str(path)) == graph

    grouped = eam.with_action_groups(env.truth, delta_f=3)
    assert any(grouped.is_group(a) for a in grouped.action_ids)


def test_mine_groups_golden():
    rules = eam.mine_groups([["a", "b", "c"]] * 3, delta_f=2)
    assert [(r["left"], r["right"], r["frequency"]) for r in rules][0] == ("a", "b", 3)
    assert rules[1]["left"] == rules[0]["new_id"]
    assert rules[1]["right"] == "c"


def test_self_train_and_model_round_trip(env, tmp_path):
    reports, model = eam.self_train(env, train=4, rounds=2, batch=4, iters=30, hidden=16, seed=3)
    assert [r["round"] for r in reports] == [1, 2]
    assert all(0.0 <= r["success_rate"] <= 1.0 for r in reports)
    path = tmp_path / "model.json"
    model.save(str(path))
    back = eam.QScorer.load(str(path))
    assert back == model
    task = env.tasks[0]
    a = task.optimal["actions"][0]
    s = task.optimal["states"][0]
    assert back.score(env.truth, task.instruction, s, a) == model.score(env.truth, task.instruction, s, a)


def test_bench_csv():
    csv = eam.run_bench("iterations", ["10"], instances=1)
    lines = csv.strip().splitlines()
    assert lines[0] == "axis,value,instance,seed,success,margin,latency_ms,schema_version"
    assert len(lines) == 2


def test_theory_helpers():
    mse, excess, holds = eam.pinsker_check([0.5, 0.5], [0.0, 1.0])
    assert mse == pytest.approx(0.25)
    assert excess == pytest.approx(math.log(2))
    assert holds
    n = eam.simulation_budget(2, 1.0, 1.0, 2, 0.05)

    def need(x):
        return 32 * 1.0 * math.log(2 * x / 0.05) + 2 * (2 + math.pi**2 / 3)

    assert n >= need(n)
    assert n - 1 < need(n - 1)


def test_errors_carry_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema_version": 99}')
    with pytest.raises(eam.EamError) as info:
        eam.KnowledgeGraph.load(str(bad))
    assert info.value.code == "schema_mismatch"
    with pytest.raises(eam.EamError) as info:
        eam.KnowledgeGraph.load(str(tmp_path / "missing.json"))
    assert info.value.code == "io"
