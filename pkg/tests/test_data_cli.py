import json
import subprocess
import sys
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from veriedit.cli import main, parse_config_file, parse_weights
from veriedit.data import ClaimInstance, load_instances, write_instances


def run_cli(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "veriedit.cli", *args],
        capture_output=True,
        text=True,
    )
    return proc


class TestLoadInstances:
    def test_basic_line(self, tmp_path):
        p = tmp_path / "d.jsonl"
        p.write_text('{"id":"1","claim":"a b","evidence":["a b c"]}\n')
        instances, issues = load_instances(p)
        assert not issues
        assert instances[0].claim == "a b"
        assert len(instances[0].evidence) == 1

    def test_empty_file(self, tmp_path):
        p = tmp_path / "d.jsonl"
        p.write_text("")
        instances, issues = load_instances(p)
        assert instances == [] and issues == []

    def test_missing_claim_reports_line_and_loads_rest(self, tmp_path):
        p = tmp_path / "d.jsonl"
        p.write_text(
            '{"id":"1","claim":"a"}\n{"id":"2"}\n{"id":"3","claim":"c"}\n'
        )
        instances, issues = load_instances(p)
        assert [i.id for i in instances] == ["1", "3"]
        assert issues[0].line == 2 and "claim" in issues[0].reason

    def test_bad_json_reported(self, tmp_path):
        p = tmp_path / "d.jsonl"
        p.write_text("{oops\n")
        instances, issues = load_instances(p)
        assert not instances and issues[0].line == 1

    instances_strategy = st.lists(
        st.builds(
            ClaimInstance,
            id=st.text(alphabet="abc123", min_size=1, max_size=6),
            claim=st.text(alphabet="xyz ", min_size=1, max_size=12).filter(str.strip),
            evidence=st.lists(st.text(alphabet="pq ", max_size=8), max_size=3).map(tuple),
            gold=st.none() | st.text(alphabet="xz ", min_size=1, max_size=8).filter(str.strip),
            label=st.sampled_from([None, "SUPPORTED", "REFUTED"]),
        ),
        max_size=5,
    )

    @given(instances=instances_strategy)
    def test_round_trip(self, instances):
        import tempfile

        with tempfile.TemporaryDirectory() as tmp:
            p = Path(tmp) / "d.jsonl"
            write_instances(p, instances)
            loaded, issues = load_instances(p)
        assert not issues
        assert loaded == list(instances)


class TestConfigParsing:
    def test_weights_flag(self):
        w = parse_weights("1,0.5,2")
        assert (w.w_lm, w.w_v, w.w_h) == (1.0, 0.5, 2.0)

    def test_key_value_file(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("iterations = 7\nseed = 3  # comment\n\n# full line comment\n")
        assert parse_config_file(str(p)) == {"iterations": "7", "seed": "3"}


@pytest.fixture()
def small_dataset(tmp_path):
    data = tmp_path / "in.jsonl"
    rows = [
        {
            "id": "keep-1",
            "claim": "the fort stands near the sea",
            "evidence": ["the fort stands near the sea"] * 3,
            "label": "SUPPORTED",
        },
        {
            "id": "keep-2",
            "claim": "a tower rises by the lake",
            "evidence": ["a tower rises by the lake"] * 3,
            "label": "SUPPORTED",
        },
    ]
    data.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return data


class TestCorrectCommand:
    def test_iterations_zero_rejected(self, small_dataset, tmp_path):
        proc = run_cli("correct", str(small_dataset), str(tmp_path / "o.jsonl"), "--iterations", "0")
        assert proc.returncode == 1

    def test_deterministic_outputs_and_traces(self, small_dataset, tmp_path):
        out1, out2 = tmp_path / "o1.jsonl", tmp_path / "o2.jsonl"
        tr1, tr2 = tmp_path / "t1.jsonl", tmp_path / "t2.jsonl"
        for out, tr in ((out1, tr1), (out2, tr2)):
            proc = run_cli(
                "correct", str(small_dataset), str(out),
                "--seed", "7", "--trace", str(tr),
            )
            assert proc.returncode == 0, proc.stderr
        assert out1.read_bytes() == out2.read_bytes()
        assert tr1.read_bytes() == tr2.read_bytes()

    def test_jobs_do_not_change_bytes(self, small_dataset, tmp_path):
        out1, out2 = tmp_path / "o1.jsonl", tmp_path / "o2.jsonl"
        assert run_cli("correct", str(small_dataset), str(out1), "--seed", "5").returncode == 0
        assert (
            run_cli("correct", str(small_dataset), str(out2), "--seed", "5", "--jobs", "2").returncode
            == 0
        )
        assert out1.read_bytes() == out2.read_bytes()

    def test_supported_claim_returned_unchanged(self, small_dataset, tmp_path):
        """Fully covered claim: the untouched input is already the 1-edit
        energy minimum (oracle check below), so the output must equal it."""
        out = tmp_path / "o.jsonl"
        assert run_cli("correct", str(small_dataset), str(out), "--seed", "3").returncode == 0
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        assert rows[0]["corrected"] == "the fort stands near the sea"

        from veriedit.engine import EnergyCache, SamplerConfig
        from veriedit.energy import EnergyWeights
        from veriedit.proposal import ProposalKernel
        from veriedit.reference import build_reference_scorers
        from veriedit.state import apply_edit, build_evidence, make_state, tokenize

        claim = tokenize("the fort stands near the sea")
        evidence = build_evidence([claim] * 3, claim)
        scorers, proposer = build_reference_scorers(claim, evidence)
        state = make_state(claim, evidence)
        kern = ProposalKernel(proposer=proposer, saliency=scorers.saliency)
        cache = EnergyCache(scorers, EnergyWeights())
        base = cache(state).total
        for action, _ in kern.enumerate_actions(state):
            neighbor = apply_edit(state, action)
            if neighbor.tokens != state.tokens:
                assert cache(neighbor).total > base

    def test_config_file_with_cli_override(self, small_dataset, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("iterations = 2\nseed = 9\n")
        out1, out2, out3 = (tmp_path / f"o{i}.jsonl" for i in (1, 2, 3))
        tr1, tr3 = tmp_path / "t1.jsonl", tmp_path / "t3.jsonl"
        assert run_cli(
            "correct", str(small_dataset), str(out1), "--config", str(cfg), "--trace", str(tr1)
        ).returncode == 0
        assert run_cli("correct", str(small_dataset), str(out2), "--seed", "9", "--iterations", "2").returncode == 0
        assert out1.read_bytes() == out2.read_bytes()
        header1 = json.loads(tr1.read_text().splitlines()[0])
        assert header1["seed"] == 9 and header1["iterations"] == 2
        # CLI flag wins over the file
        assert run_cli(
            "correct", str(small_dataset), str(out3), "--config", str(cfg), "--seed", "1",
            "--trace", str(tr3),
        ).returncode == 0
        header3 = json.loads(tr3.read_text().splitlines()[0])
        assert header3["seed"] == 1 and header3["iterations"] == 2
        assert tr3.read_bytes() != tr1.read_bytes()

    def test_missing_input_is_data_error(self, tmp_path):
        proc = run_cli("correct", str(tmp_path / "nope.jsonl"), str(tmp_path / "o.jsonl"))
        assert proc.returncode == 2

    def test_endpoint_env_var_reaches_transport(self, small_dataset, tmp_path, monkeypatch):
        """Remote scoring with an unreachable endpoint from the environment
        variable must fail with the transport exit code."""
        import os

        env = dict(os.environ, VERIEDIT_ENDPOINT="tcp:127.0.0.1:1")
        proc = subprocess.run(
            [
                sys.executable, "-m", "veriedit.cli", "correct",
                str(small_dataset), str(tmp_path / "o.jsonl"), "--scorer", "remote",
            ],
            capture_output=True, text=True, env=env,
        )
        assert proc.returncode == 3

    def test_remote_without_endpoint_is_usage_error(self, small_dataset, tmp_path):
        proc = run_cli(
            "correct", str(small_dataset), str(tmp_path / "o.jsonl"), "--scorer", "remote"
        )
        assert proc.returncode == 1


class TestEvalCommand:
    def test_outputs_identical_to_gold(self, small_dataset, tmp_path):
        out = tmp_path / "o.jsonl"
        rows = [
            {"id": "keep-1", "corrected": "the fort stands near the sea"},
            {"id": "keep-2", "corrected": "a tower rises by the lake"},
        ]
        out.write_text("".join(json.dumps(r) + "\n" for r in rows))
        proc = run_cli("eval", str(out), str(small_dataset))
        assert proc.returncode == 0
        assert "1.0000" in proc.stdout

    def test_disjoint_ids_mismatch(self, small_dataset, tmp_path):
        out = tmp_path / "o.jsonl"
        out.write_text(json.dumps({"id": "zzz", "corrected": "x"}) + "\n")
        proc = run_cli("eval", str(out), str(small_dataset))
        assert proc.returncode == 2

    def test_report_written(self, small_dataset, tmp_path):
        out, rep = tmp_path / "o.jsonl", tmp_path / "r.jsonl"
        rows = [
            {"id": "keep-1", "corrected": "the fort stands near the sea"},
            {"id": "keep-2", "corrected": "a tower rises by the lake"},
        ]
        out.write_text("".join(json.dumps(r) + "\n" for r in rows))
        assert run_cli("eval", str(out), str(small_dataset), "--report", str(rep)).returncode == 0
        lines = [json.loads(l) for l in rep.read_text().splitlines()]
        assert lines[0]["kind"] == "corpus"
        assert len(lines) == 3


class TestSelfcheckCommand:
    def test_single_state_space(self):
        proc = run_cli("selfcheck", "--space", "single-state")
        assert proc.returncode == 0
        assert "0.000e+00" in proc.stdout

    def test_full_run_exits_zero_and_prints_residual(self):
        proc = run_cli("selfcheck", "--steps", "20000")
        assert proc.returncode == 0
        assert "stationarity residual (full)" in proc.stdout
        assert proc.stdout.count("FAIL") == 0

    def test_mutation_hook_fails(self):
        proc = run_cli("selfcheck", "--mutation", "corrupt-reverse")
        assert proc.returncode == 4
        assert "PASS" in proc.stdout  # detection itself succeeded


class TestTraceView:
    def test_renders_table(self, small_dataset, tmp_path):
        out, tr = tmp_path / "o.jsonl", tmp_path / "t.jsonl"
        assert run_cli("correct", str(small_dataset), str(out), "--trace", str(tr)).returncode == 0
        proc = run_cli("trace-view", str(tr), "--instance", "keep-1")
        assert proc.returncode == 0
        assert "keep-1" in proc.stdout

    def test_unknown_schema_rejected(self, tmp_path):
        tr = tmp_path / "t.jsonl"
        tr.write_text('{"schema":"other"}\n')
        assert run_cli("trace-view", str(tr)).returncode == 2


def test_usage_error_exit_code():
    proc = run_cli("correct")  # missing positionals
    assert proc.returncode == 1
