import json
import logging

from polaring.events import (
    Event,
    EventEmitter,
    EventType,
    batch_finished_event,
    realization_excluded_event,
    run_failed_event,
    run_started_event,
)


def test_to_dict():
    event = run_started_event("dynamics", "abc123", 10, 4)
    d = event.to_dict()
    assert set(d) == {"type", "timestamp", "iso_time", "source", "data"}
    assert d["type"] == "run_started"
    assert d["source"] == "polaring"
    assert d["data"] == {"experiment": "dynamics", "config_hash": "abc123", "ensemble_size": 10, "threads": 4}
    assert d["iso_time"].endswith("+00:00")


def test_optional_step():
    assert "step" not in realization_excluded_event(3, "nan").data
    assert realization_excluded_event(3, "nan", step=120).data["step"] == 120


def test_batch_event_rounds_elapsed():
    event = batch_finished_event(0, 0, 16, [2, 5], 1.23456)
    assert event.data["elapsed_s"] == 1.235
    assert event.data["excluded"] == [2, 5]


def test_failed_event_records_error_type():
    event = run_failed_event("spectra", ValueError("bad grid"))
    assert event.data == {"experiment": "spectra", "error": "ValueError", "message": "bad grid"}


def test_file_handler_appends_json_lines(tmp_path):
    path = tmp_path / "events.jsonl"
    emitter = EventEmitter()
    emitter.add_file_handler(path)
    emitter.emit(run_started_event("statics", "h", 1, 1))
    emitter.emit(Event(EventType.RUN_FINISHED, 0.0, {"files": []}))
    lines = path.read_text(encoding="utf-8").splitlines()
    assert [json.loads(line)["type"] for line in lines] == ["run_started", "run_finished"]


def test_failing_handler_is_logged(caplog):
    seen = []

    def broken(event):
        raise OSError("disk full")

    emitter = EventEmitter()
    emitter.add_handler(broken)
    emitter.add_handler(seen.append)
    with caplog.at_level(logging.WARNING):
        emitter.emit(run_started_event("msd", "h", 1, 1))
    assert len(seen) == 1
    assert "disk full" in caplog.text
