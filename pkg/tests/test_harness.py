import io
import json

import pytest

from dynmatch import cli
from dynmatch.harness import (
    COPY_RATE,
    MODELS,
    EpochState,
    RunOptions,
    UpdateSequence,
    gen_sequence,
    run,
    validate_updates,
)
from dynmatch.offline_oracle import SequenceError
from dynmatch.params import Config, derive


def test_empty_random_sequence():
    seq = gen_sequence("random", 8, 0, 1)
    assert seq.updates == [] and seq.n == 8


@pytest.mark.parametrize("model", MODELS)
def test_generators_valid_and_deterministic(model):
    a = gen_sequence(model, 16, 250, 4, density=0.5)
    b = gen_sequence(model, 16, 250, 4, density=0.5)
    assert a.updates == b.updates and len(a) == 250
    validate_updates(16, a.updates)
    assert gen_sequence(model, 16, 250, 5).updates != a.updates


def test_sliding_window_deletes_three_insertions_later():
    seq = gen_sequence("sliding-window", 12, 140, 3, window=3)
    inserted = []
    for op, u, v in seq.updates:
        if op == "+":
            inserted.append((u, v))
        else:
            # the edge w insertions back is the one removed
            assert (u, v) == inserted[len(inserted) - 1 - 3]


def test_generator_rejects_bad_parameters():
    with pytest.raises(ValueError):
        gen_sequence("zigzag", 8, 10, 1)
    with pytest.raises(ValueError):
        gen_sequence("random", 8, 10_000, 1)
    with pytest.raises(ValueError):
        gen_sequence("random", 8, 10, 1, density=0)
    with pytest.raises(ValueError):
        gen_sequence("sliding-window", 4, 10, 1, window=6)


def test_sequence_text_round_trip(tmp_path):
    seq = gen_sequence("offline-stress", 10, 100, 2)
    path = tmp_path / "s.txt"
    seq.write(path)
    text = path.read_text()
    assert text.startswith("n=10\n")
    back = UpdateSequence.read(path)
    assert back.updates == seq.updates and back.provenance["model"] == "offline-stress"


@pytest.mark.parametrize(
    "text,index",
    [
        ("n=4\n+ 0 1\n- 2 3\n", 1),
        ("n=4\n+ 0 1\n+ 1 0\n", 1),
        ("n=4\n+ 0 4\n", 0),
        ("n=4\n+ 2 2\n", 0),
        ("n=4\n* 0 1\n", 0),
    ],
)
def test_malformed_sequences(text, index):
    with pytest.raises(SequenceError) as info:
        UpdateSequence.parse(text)
    assert info.value.index == index


def test_missing_header():
    with pytest.raises(SequenceError):
        UpdateSequence.parse("+ 0 1\n")


def test_replay_is_byte_identical():
    seq = gen_sequence("churn-matched-proxy", 24, 400, 6, density=0.6)
    cfg = Config(n=24, seed=6)
    streams = []
    for _ in range(2):
        buf = io.StringIO()
        r = run(seq, cfg, RunOptions(audit="every", metrics=buf))
        streams.append((buf.getvalue(), r.digest))
        assert r.ok
    assert streams[0] == streams[1]
    first = json.loads(streams[0][0].splitlines()[0])
    for key in ("t", "op", "steps_total", "steps_by_scheduler", "|M|", "tf_adversary", "tf_algorithm",
                "per_level_queue_sizes", "violations"):
        assert key in first


def test_offline_run_has_no_high_level_hits():
    seq = gen_sequence("offline-stress", 64, 1500, 3, density=0.6)
    r = run(seq, Config(n=64, seed=3, mode="offline"), RunOptions(audit="none"))
    assert r.summary["hits_at_or_above_cut"] == 0
    assert r.summary["max_queue_at_or_above_cut"] == 0


def test_long_sequence_requires_epoching():
    seq = gen_sequence("random", 8, 80, 1, allow_long=True)
    with pytest.raises(ValueError):
        run(seq, Config(n=8), RunOptions(audit="none"))
    r = run(seq, Config(n=8, epoching=True), RunOptions(audit="every"))
    assert r.ok and r.summary["epoch_boundaries"] == 80 // 64


def _toggle(st, i, present):
    st.step(i, "-" if present else "+", 14, 15)
    return not present


def test_epoch_copy_rate_and_skip_rule():
    p = derive(Config(n=16, seed=1))
    st = EpochState(p, None, False, 0, False)
    edges = [(a, b) for a in range(14) for b in range(a + 1, 14)][:40]
    i = 0
    for u, v in edges:
        st.step(i, "+", u, v)
        i += 1
    present = False
    while not st.at_boundary(i - 1):
        present = _toggle(st, i, present)
        i += 1
    st.swap()
    assert len(st.snapshot) == len(st.edges)
    # an edge deleted before its copy slot is never copied
    victim = st.snapshot[-1]
    st.step(i, "-", *victim)
    i += 1
    steps = 1
    while st.cursor < len(st.snapshot):
        present = _toggle(st, i, present)
        i += 1
        steps += 1
    assert not st.new.engine.graph.has_edge(*victim)
    assert steps <= -(-len(st.snapshot) // COPY_RATE)
    assert set(st.new.engine.graph.edges()) == st.edges


def test_two_epochs_on_static_graph_agree():
    seq_updates = [("+", 0, 1), ("+", 1, 2), ("+", 3, 4)]
    toggles = [("+", 5, 6), ("-", 5, 6)] * 70
    seq = UpdateSequence(8, seq_updates + toggles[: 2 * 64 - 3 + 1])
    seq.validate()
    p = derive(Config(n=8, seed=2))
    st = EpochState(p, None, False, 0, False)
    boundary_edges = []
    for i, (op, u, v) in enumerate(seq.updates):
        st.step(i, op, u, v)
        if st.at_boundary(i):
            boundary_edges.append(sorted(st.new.engine.graph.edges()))
            st.swap()
    assert len(boundary_edges) == 2 and boundary_edges[0] == boundary_edges[1]


def test_combine_mode_runs_valid():
    seq = gen_sequence("random", 32, 800, 2, density=0.3)
    r = run(seq, Config(n=32, seed=2), RunOptions(audit="none", combine=True, approx_checkpoints=20))
    t = r.summary["transform"]
    assert t["invalid"] == 0 and t["bound_failures"] == 0
    assert all("combined" in c for c in r.checkpoints)


def test_cli_gen_run_audit(tmp_path, capsys, monkeypatch):
    path = tmp_path / "seq.txt"
    assert cli.main(["gen", "--model", "random", "--n", "16", "--length", "200", "--seed", "3", "--out", str(path)]) == 0
    assert cli.main(["run", str(path), "--audit", "5", "--mode", "offline"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["summary"]["mode"] == "offline" and out["summary"]["updates"] == 200
    assert cli.main(["audit", str(path)]) == 0
    capsys.readouterr()
    monkeypatch.setenv("DYNMATCH_SEED", "11")
    assert cli.main(["run", str(path), "--audit", "none"]) == 0
    assert json.loads(capsys.readouterr().out)["summary"]["engine"] is not None


def test_cli_metrics_and_errors(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text("n=4\n- 0 1\n")
    assert cli.main(["run", str(path)]) == 2
    assert "error" in capsys.readouterr().err
    good = tmp_path / "ok.txt"
    gen_sequence("random", 8, 30, 1).write(good)
    metrics = tmp_path / "m.jsonl"
    assert cli.main(["run", str(good), "--metrics", str(metrics)]) == 0
    assert len(metrics.read_text().splitlines()) == 30


def test_cli_game_and_bench(tmp_path, capsys):
    assert cli.main(["game", "bins", "--N", "8", "--k", "10"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("round,bin_sizes")
    assert cli.main(["game", "shuffle", "--eps-hat", "0.08", "--horizon", "500"]) == 0
    assert capsys.readouterr().out.startswith("step,bad_fraction")
    matrix = tmp_path / "m.json"
    matrix.write_text(json.dumps([{"n": 16, "model": "random", "length": 100, "seed": 1, "audit": "every"},
                                  {"n": 16, "model": "offline-stress", "length": 100, "mode": "offline"}]))
    csv_path = tmp_path / "bench.csv"
    assert cli.main(["bench", str(matrix), "--out", str(csv_path)]) == 0
    rows = csv_path.read_text().splitlines()
    assert rows[0].startswith("n,model") and len(rows) == 3 and rows[1].endswith(",ok")
