import io
import json

from refdetect.protocol import WORKER_NAME, serve_protocol


def run_session(requests, models_dir):
    """Feed raw request lines through the loop, return parsed responses."""
    stdin = io.StringIO("".join(line + "\n" for line in requests))
    stdout = io.StringIO()
    serve_protocol(stdin, stdout, models_dir)
    return [json.loads(line) for line in stdout.getvalue().splitlines()]


def req(obj):
    return json.dumps(obj)


class TestProtocol:
    def test_init(self, tmp_path):
        replies = run_session([req({"cmd": "init"})], tmp_path)
        assert replies == [{"ok": True, "name": WORKER_NAME}]

    def test_full_session(self, dataset, tmp_path):
        manifest, records = dataset
        replies = run_session(
            [
                req({"cmd": "init"}),
                req({"cmd": "train", "manifest": str(manifest),
                     "init_model": None, "budget": 100, "out_model": "m1"}),
                req({"cmd": "detect", "manifest": str(manifest),
                     "model": "m1", "conf": 0.5}),
                req({"cmd": "shutdown"}),
            ],
            tmp_path,
        )
        assert [r["ok"] for r in replies] == [True] * 4
        assert replies[1]["model"] == "m1"
        dets = replies[2]["detections"]
        assert {d["image_id"] for d in dets} == {r["image_id"] for r in records}
        for d in dets:
            assert set(d) == {"image_id", "class_id", "box", "score"}
            assert len(d["box"]) == 4

    def test_incremental_training_chains_models(self, dataset, tmp_path):
        manifest, _ = dataset
        replies = run_session(
            [
                req({"cmd": "train", "manifest": str(manifest),
                     "init_model": None, "budget": 1, "out_model": "m1"}),
                req({"cmd": "train", "manifest": str(manifest),
                     "init_model": "m1", "budget": 1, "out_model": "m2"}),
                req({"cmd": "detect", "manifest": str(manifest),
                     "model": "m2", "conf": 0.5}),
            ],
            tmp_path,
        )
        assert all(r["ok"] for r in replies)
        assert (tmp_path / "m1.npz").is_file()
        assert (tmp_path / "m2.npz").is_file()

    def test_unknown_model_is_error_and_loop_survives(self, dataset, tmp_path):
        manifest, _ = dataset
        replies = run_session(
            [
                req({"cmd": "detect", "manifest": str(manifest),
                     "model": "ghost", "conf": 0.5}),
                req({"cmd": "init"}),
            ],
            tmp_path,
        )
        assert replies[0]["ok"] is False
        assert "unknown model" in replies[0]["error"]
        assert replies[1]["ok"] is True

    def test_malformed_request_line(self, tmp_path):
        replies = run_session(["this is not json", req({"cmd": "init"})], tmp_path)
        assert replies[0]["ok"] is False
        assert "malformed" in replies[0]["error"]
        assert replies[1]["ok"] is True

    def test_unknown_command(self, tmp_path):
        replies = run_session([req({"cmd": "reticulate"})], tmp_path)
        assert replies[0]["ok"] is False
        assert "unknown command" in replies[0]["error"]

    def test_missing_fields(self, tmp_path):
        replies = run_session([req({"cmd": "train"})], tmp_path)
        assert replies[0]["ok"] is False

    def test_model_id_path_escape_rejected(self, dataset, tmp_path):
        manifest, _ = dataset
        replies = run_session(
            [req({"cmd": "train", "manifest": str(manifest),
                  "init_model": None, "budget": 1, "out_model": "../evil"})],
            tmp_path,
        )
        assert replies[0]["ok"] is False
        assert "invalid model id" in replies[0]["error"]

    def test_eof_without_shutdown_exits_cleanly(self, tmp_path):
        assert run_session([], tmp_path) == []

    def test_shutdown_stops_serving(self, tmp_path):
        replies = run_session(
            [req({"cmd": "shutdown"}), req({"cmd": "init"})], tmp_path
        )
        assert replies == [{"ok": True}]
