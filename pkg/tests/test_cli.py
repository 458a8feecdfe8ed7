import json
from pathlib import Path

import pytest

from tvn.artifacts import load_artifact
from tvn.cli import main

TINY = [
    "--population", "8",
    "--generations", "3",
    "--pool-size", "20",
]


@pytest.fixture()
def prompts_file(tmp_path):
    path = tmp_path / "prompts.json"
    path.write_text(
        json.dumps(
            [
                {"id": "p01", "text": "A photo of a cat."},
                {"id": "p02", "text": "A bird flying in the sky."},
            ]
        )
    )
    return str(path)


def _craft(tmp_path, prompts_file, out="craft", extra=()):
    out_dir = tmp_path / out
    code = main(
        [
            "craft",
            "--target", "c1",
            "--zoo-seed", "42",
            "--seed", "5",
            "--prompts", prompts_file,
            "--out", str(out_dir),
            *TINY,
            *extra,
        ]
    )
    assert code == 0
    return out_dir / "prompt-c1.json"


class TestZooCommand:
    def test_build_and_inspect(self, tmp_path, capsys):
        out = tmp_path / "zoo"
        assert main(["zoo", "build", "--seed", "42", "--out", str(out)]) == 0
        body = load_artifact(out / "zoo.json", "tvn.zoo/1")
        assert len(body["closed"]) == 4 and len(body["open"]) == 8
        assert main(["zoo", "inspect", "--zoo", str(out / "zoo.json")]) == 0
        captured = capsys.readouterr().out
        assert "reference" in captured


class TestCraftCommand:
    def test_writes_manifest_then_artifact(self, tmp_path, prompts_file):
        path = _craft(tmp_path, prompts_file)
        body = load_artifact(path, "tvn.prompt/1")
        assert body["target"] == "c1"
        assert len(body["suffix"]) == 5
        assert body["target_drop"] == body["no_attack_score"] - body["attacked_score"]
        manifest = load_artifact(path.parent / "manifest-craft.json", "tvn.manifest/1")
        assert str(path) in manifest["artifacts"]

    def test_zero_generations_flagged_unevolved(self, tmp_path, prompts_file):
        path = _craft(
            tmp_path, prompts_file, out="g0",
            extra=["--generations", "0"],
        )
        assert load_artifact(path, "tvn.prompt/1")["unevolved"] is True

    def test_replay_reproduces_artifact_bytes(self, tmp_path, prompts_file):
        a = _craft(tmp_path, prompts_file, out="one")
        b = _craft(tmp_path, prompts_file, out="two")
        assert a.read_text() == b.read_text()

    def test_unknown_substitute_is_config_error(self, tmp_path, prompts_file):
        code = main(
            [
                "craft", "--target", "c1", "--substitutes", "nope",
                "--prompts", prompts_file, "--out", str(tmp_path / "x"), *TINY,
            ]
        )
        assert code == 2


class TestFitVerifyCommands:
    def test_fit_then_verify_target_accepts(self, tmp_path, prompts_file):
        prompt = _craft(tmp_path, prompts_file)
        out = tmp_path / "fit"
        code = main(
            [
                "fit", "--prompt", str(prompt), "--samples", "10",
                "--zoo-seed", "42", "--seed", "5", "--out", str(out),
            ]
        )
        assert code == 0
        band_path = out / "band-c1.json"
        band = load_artifact(band_path, "tvn.band/1")
        assert band["high"] == pytest.approx(band["mu"] + 3 * band["sigma"])
        code = main(
            [
                "verify", "--band", str(band_path), "--shots", "5",
                "--zoo-seed", "42", "--seed", "5",
                "--out", str(tmp_path / "verify"),
            ]
        )
        assert code == 0
        decision = load_artifact(
            tmp_path / "verify" / "decision-c1-5shot.json", "tvn.decision/1"
        )
        assert decision["verdict"] is True

    def test_verify_impostor_rejected(self, tmp_path, prompts_file):
        prompt = _craft(tmp_path, prompts_file)
        out = tmp_path / "fit"
        main(
            [
                "fit", "--prompt", str(prompt), "--samples", "10",
                "--zoo-seed", "42", "--seed", "5", "--out", str(out),
            ]
        )
        code = main(
            [
                "verify", "--band", str(out / "band-c1.json"),
                "--shots", "5", "--zoo-model", "c2",
                "--zoo-seed", "42", "--seed", "5",
                "--out", str(tmp_path / "imp"),
            ]
        )
        assert code == 0
        decision = load_artifact(
            tmp_path / "imp" / "decision-c1-5shot.json", "tvn.decision/1"
        )
        assert decision["verdict"] is False

    def test_fit_needs_two_samples(self, tmp_path, prompts_file):
        prompt = _craft(tmp_path, prompts_file)
        code = main(
            [
                "fit", "--prompt", str(prompt), "--samples", "1",
                "--zoo-seed", "42", "--out", str(tmp_path / "bad"),
            ]
        )
        assert code == 2

    def test_missing_artifact_is_artifact_error(self, tmp_path):
        code = main(
            ["fit", "--prompt", str(tmp_path / "gone.json"), "--out", str(tmp_path / "o")]
        )
        assert code == 3


class TestEvaluateCommand:
    def test_small_closed_evaluation(self, tmp_path, prompts_file, capsys):
        out = tmp_path / "eval"
        code = main(
            [
                "evaluate", "--setting", "closed", "--trials", "20",
                "--shots", "1", "--target", "c1", "--zoo-seed", "42",
                "--seed", "5", "--prompts", prompts_file,
                "--out", str(out), *TINY,
            ]
        )
        assert code == 0
        body = load_artifact(out / "metrics-closed-1shot.json", "tvn.metrics/1")
        assert body["per_target"][0]["target"] == "c1"
        rendered = capsys.readouterr().out
        assert "| Average |" in rendered

    def test_zero_trials_is_config_error(self, tmp_path, prompts_file):
        code = main(
            [
                "evaluate", "--trials", "0", "--target", "c1",
                "--prompts", prompts_file, "--out", str(tmp_path / "e"), *TINY,
            ]
        )
        assert code == 2


class TestReportCommand:
    def test_band_report_layout(self, tmp_path, prompts_file, capsys):
        prompt = _craft(tmp_path, prompts_file)
        out = tmp_path / "fit"
        main(
            [
                "fit", "--prompt", str(prompt), "--samples", "10",
                "--zoo-seed", "42", "--seed", "5", "--out", str(out),
            ]
        )
        capsys.readouterr()
        assert main(["report", "--artifact", str(out / "band-c1.json")]) == 0
        rendered = capsys.readouterr().out
        assert "| Model | Mean | SD | Threshold |" in rendered

    def test_prompt_report(self, tmp_path, prompts_file, capsys):
        prompt = _craft(tmp_path, prompts_file)
        capsys.readouterr()
        assert main(["report", "--artifact", str(prompt)]) == 0
        assert "target drop" in capsys.readouterr().out

    def test_artifact_with_unknown_fields_rejected(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"schema": "tvn.band/1", "mystery": 1}))
        assert main(["report", "--artifact", str(bad)]) == 3


class TestConfigFile:
    def test_flags_override_config(self, tmp_path, prompts_file):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"target": "c2", "population": 8,
                                   "generations": 2, "pool_size": 10,
                                   "zoo_seed": 42, "seed": 5}))
        out = tmp_path / "cfgout"
        code = main(
            [
                "craft", "--config", str(cfg), "--target", "c1",
                "--prompts", prompts_file, "--out", str(out),
            ]
        )
        assert code == 0
        assert (out / "prompt-c1.json").exists()


class TestTraceAndEnv:
    def test_craft_trace_rendered_by_report(self, tmp_path, prompts_file, capsys):
        out = tmp_path / "traced"
        code = main(
            [
                "craft", "--target", "c1", "--zoo-seed", "42", "--seed", "5",
                "--prompts", prompts_file, "--out", str(out), "--trace", *TINY,
            ]
        )
        assert code == 0
        traces = sorted(out.glob("trace-c1-*.jsonl"))
        assert len(traces) == 2  # one per base prompt
        capsys.readouterr()
        assert main(["report", "--artifact", str(traces[0])]) == 0
        rendered = capsys.readouterr().out
        assert "| Generation | Best f1 |" in rendered

    def test_out_dir_env_var_is_default_root(self, tmp_path, monkeypatch):
        monkeypatch.setenv("TVN_OUT_DIR", str(tmp_path / "envout"))
        assert main(["zoo", "build", "--seed", "42"]) == 0
        assert (tmp_path / "envout" / "zoo.json").exists()


class TestRemoteScoring:
    def test_verify_against_score_endpoint(self, tmp_path, prompts_file):
        import json as _json
        import threading
        from http.server import BaseHTTPRequestHandler, HTTPServer

        prompt = _craft(tmp_path, prompts_file)
        out = tmp_path / "fit"
        main(
            [
                "fit", "--prompt", str(prompt), "--samples", "10",
                "--zoo-seed", "42", "--seed", "5", "--out", str(out),
            ]
        )
        band = load_artifact(out / "band-c1.json", "tvn.band/1")

        class ScoreHandler(BaseHTTPRequestHandler):
            def log_message(self, *a):
                pass

            def do_POST(self):
                length = int(self.headers["Content-Length"])
                body = _json.loads(self.rfile.read(length))
                assert "prompt" in body and "text" in body
                data = _json.dumps({"score": band["mu"]}).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

        server = HTTPServer(("127.0.0.1", 0), ScoreHandler)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            code = main(
                [
                    "verify", "--band", str(out / "band-c1.json"),
                    "--shots", "3",
                    "--endpoint", f"http://127.0.0.1:{server.server_port}",
                    "--out", str(tmp_path / "remote"),
                ]
            )
            assert code == 0
            decision = load_artifact(
                tmp_path / "remote" / "decision-c1-3shot.json", "tvn.decision/1"
            )
            assert decision["verdict"] is True
        finally:
            server.shutdown()
            thread.join(timeout=5)


class TestReferenceFlag:
    def test_reference_can_be_a_zoo_model(self, tmp_path, prompts_file):
        out = tmp_path / "ref"
        code = main(
            [
                "craft", "--target", "c1", "--reference", "o1",
                "--zoo-seed", "42", "--seed", "5",
                "--prompts", prompts_file, "--out", str(out), *TINY,
            ]
        )
        assert code == 0
        body = load_artifact(out / "prompt-c1.json", "tvn.prompt/1")
        assert body["reference"] == "o1"

    def test_reference_cannot_be_target(self, tmp_path, prompts_file):
        code = main(
            [
                "craft", "--target", "c1", "--reference", "c1",
                "--zoo-seed", "42", "--prompts", prompts_file,
                "--out", str(tmp_path / "bad"), *TINY,
            ]
        )
        assert code == 2
