import socket
import threading
import time

import numpy as np
import pytest

from gaitway.model import SensorSample, SessionState
from gaitway.protocol import Message, MessageKind, decode, encode
from gaitway.server.service import (
    AuthError,
    AuthorizationError,
    IngestionService,
    NotFoundError,
    ServiceError,
)
from gaitway.server.stream import start_stream_server
from gaitway.simulator import preset, run_client
from gaitway.storage import load_session


@pytest.fixture
def service(tmp_path):
    svc = IngestionService(tmp_path)
    svc.add_project("alpha", "Alpha study", "alpha-secret", ["impaired", "typical"])
    svc.add_project("beta", "Beta study", "beta-secret", ["stroke", "control"])
    return svc


@pytest.fixture
def token(service):
    t = service.authenticate("alpha", "alpha-secret")
    service.add_participant(t, "p1")
    return t


def make_batch(sid, seq, n=5, t0=None, rate=50.0):
    t0 = (seq - 1) * n / rate if t0 is None else t0
    samples = [SensorSample(t0 + i / rate, 0.0, 0.1, 1.0) for i in range(n)]
    return Message(kind=MessageKind.SAMPLE_BATCH, session_id=sid, seq=seq, samples=samples)


def armed_session(service, token, participant="p1"):
    sid = service.create_session(token, participant)
    live = service.get_live(sid)
    hello = Message(kind=MessageKind.HELLO, project_id="alpha",
                    participant_id=participant, session_id=sid)
    service.attach_client(hello)
    return live


class TestAuth:
    def test_login_and_use(self, service, token):
        assert service.list_participants(token)[0].id == "p1"

    def test_wrong_secret(self, service):
        with pytest.raises(AuthError, match="bad secret"):
            service.authenticate("alpha", "nope")

    def test_unknown_project(self, service):
        with pytest.raises(AuthError, match="unknown project"):
            service.authenticate("gamma", "x")

    def test_repeated_failures_still_plain_error(self, service):
        for _ in range(3):
            with pytest.raises(AuthError):
                service.authenticate("alpha", "nope")
        assert service.authenticate("alpha", "alpha-secret")

    def test_expired_token(self, tmp_path):
        svc = IngestionService(tmp_path / "exp", token_lifetime_s=0.05)
        svc.add_project("p", "p", "s")
        t = svc.authenticate("p", "s")
        time.sleep(0.1)
        with pytest.raises(AuthError, match="expired"):
            svc.list_participants(t)

    def test_invalid_token(self, service):
        with pytest.raises(AuthError, match="invalid token"):
            service.list_participants("bogus")


class TestProjectIsolation:
    def test_cross_project_denied_across_verbs(self, service, token):
        live = armed_session(service, token)
        service.press_record(token, live.id)
        service.ingest(live, make_batch(live.id, 1, n=120))
        rec = service.stop_and_finalize(token, live.id)

        beta = service.authenticate("beta", "beta-secret")
        probes = [
            lambda: service.session_status(beta, rec.id),
            lambda: service.get_session(beta, rec.id),
            lambda: service.session_features(beta, rec.id),
            lambda: service.session_dashboard(beta, rec.id),
            lambda: service.set_video_sync(beta, rec.id, 1.0),
            lambda: service.annotate(beta, rec.id, 0.0, 1.0, "walk"),
            lambda: service.mark_event(beta, rec.id, 0.5, "ToeOff"),
            lambda: service.set_label(beta, "p1", "stroke"),
            lambda: service.press_record(beta, rec.id),
        ]
        for probe in probes:
            with pytest.raises((NotFoundError, AuthorizationError)):
                probe()
        assert rec.id not in [s["session_id"] for s in service.list_all_sessions(beta)]


class TestSessionLifecycle:
    def test_create_session_unique_ids(self, service, token):
        a = service.create_session(token, "p1")
        b = service.create_session(token, "p1")  # both Off: allowed
        assert a != b

    def test_unknown_participant(self, service, token):
        with pytest.raises(NotFoundError):
            service.create_session(token, "ghost")

    def test_second_live_session_rejected(self, service, token):
        armed_session(service, token)
        with pytest.raises(ServiceError, match="live session"):
            armed_session(service, token)

    def test_press_record_requires_armed_client(self, service, token):
        sid = service.create_session(token, "p1")
        with pytest.raises(ServiceError, match="client not armed"):
            service.press_record(token, sid)

    def test_double_record_press_single_start(self, service, token):
        live = armed_session(service, token)
        service.press_record(token, live.id)
        service.press_record(token, live.id)  # idempotent
        starts = 0
        while not live.outbox.empty():
            msg = live.outbox.get()
            starts += msg is not None and msg.kind == MessageKind.START
        assert starts == 1

    def test_stop_requires_streaming(self, service, token):
        sid = service.create_session(token, "p1")
        with pytest.raises(ServiceError, match="cannot stop"):
            service.stop_and_finalize(token, sid)

    def test_double_stop_idempotent(self, service, token):
        live = armed_session(service, token)
        service.press_record(token, live.id)
        service.ingest(live, make_batch(live.id, 1, n=150))
        first = service.stop_and_finalize(token, live.id)
        second = service.stop_and_finalize(token, live.id)
        assert first is second


class TestIngest:
    def test_in_order_batches_append(self, service, token):
        live = armed_session(service, token)
        service.press_record(token, live.id)
        for seq in (1, 2, 3):
            ack = service.ingest(live, make_batch(live.id, seq))
            assert ack.kind == MessageKind.ACK and ack.seq == seq
        assert len(live.samples) == 15

    def test_duplicate_discarded_silently(self, service, token):
        live = armed_session(service, token)
        service.press_record(token, live.id)
        service.ingest(live, make_batch(live.id, 1))
        service.ingest(live, make_batch(live.id, 2))
        dup = service.ingest(live, make_batch(live.id, 2))
        assert dup.kind == MessageKind.ACK and dup.seq == 2
        assert len(live.samples) == 10
        ack = service.ingest(live, make_batch(live.id, 3))
        assert ack.seq == 3

    def test_gap_rejected_with_expected_seq(self, service, token):
        live = armed_session(service, token)
        service.press_record(token, live.id)
        service.ingest(live, make_batch(live.id, 1))
        reply = service.ingest(live, make_batch(live.id, 5))
        assert reply.kind == MessageKind.ERROR and reply.expected_seq == 2
        assert len(live.samples) == 5

    def test_batch_rejected_outside_streaming(self, service, token):
        live = armed_session(service, token)  # Ready, record not pressed
        reply = service.ingest(live, make_batch(live.id, 1))
        assert reply.kind == MessageKind.ERROR

    def test_out_of_order_timestamps_rejected(self, service, token):
        live = armed_session(service, token)
        service.press_record(token, live.id)
        bad = make_batch(live.id, 1)
        bad.samples[2] = SensorSample(bad.samples[1].t, 0.0, 0.0, 1.0)
        reply = service.ingest(live, bad)
        assert reply.kind == MessageKind.ERROR
        assert len(live.samples) == 0

    def test_durability_acked_equals_persisted(self, service, token):
        live = armed_session(service, token)
        service.press_record(token, live.id)
        for seq in range(1, 11):
            service.ingest(live, make_batch(live.id, seq, n=25))
        rec = service.stop_and_finalize(token, live.id)
        loaded = load_session(service.data_dir, "alpha", rec.id)
        assert len(loaded.track) == 250 == len(live.samples)


class TestAnnotations:
    @pytest.fixture
    def finalized(self, service, token):
        live = armed_session(service, token)
        service.press_record(token, live.id)
        service.ingest(live, make_batch(live.id, 1, n=200))  # 4 s at 50 Hz
        return service.stop_and_finalize(token, live.id)

    def test_sync_offset_persists(self, service, token, finalized):
        service.set_video_sync(token, finalized.id, 1.25)
        assert load_session(service.data_dir, "alpha", finalized.id).video_sync_offset_s == 1.25
        service.set_video_sync(token, finalized.id, -0.5)
        assert load_session(service.data_dir, "alpha", finalized.id).video_sync_offset_s == -0.5

    def test_nan_offset_rejected(self, service, token, finalized):
        with pytest.raises(ServiceError, match="finite"):
            service.set_video_sync(token, finalized.id, float("nan"))

    def test_segment_stored_and_persisted(self, service, token, finalized):
        service.annotate(token, finalized.id, 0.0, 3.5, "6MWT")
        loaded = load_session(service.data_dir, "alpha", finalized.id)
        assert loaded.activity_segments == [(0.0, 3.5, "6MWT")]

    def test_overlapping_segments_allowed(self, service, token, finalized):
        service.annotate(token, finalized.id, 0.0, 2.0, "walk")
        service.annotate(token, finalized.id, 1.0, 3.0, "turn")
        assert len(service.get_session(token, finalized.id).activity_segments) == 2

    def test_degenerate_segment_rejected(self, service, token, finalized):
        with pytest.raises(ServiceError):
            service.annotate(token, finalized.id, 2.0, 2.0, "point")

    def test_out_of_range_segment_rejected(self, service, token, finalized):
        with pytest.raises(ServiceError, match="outside track"):
            service.annotate(token, finalized.id, 0.0, 99.0, "too-long")

    def test_mark_event_appends_and_persists(self, service, token, finalized):
        service.mark_event(token, finalized.id, 1.2, "InitialContact")
        service.mark_event(token, finalized.id, 1.2, "ToeOff")  # same t allowed
        loaded = load_session(service.data_dir, "alpha", finalized.id)
        assert loaded.gait_event_marks == [(1.2, "InitialContact"), (1.2, "ToeOff")]

    def test_unknown_event_name_rejected(self, service, token, finalized):
        with pytest.raises(ServiceError, match="Midswing"):
            service.mark_event(token, finalized.id, 1.0, "Midswing")

    def test_mark_out_of_range_rejected(self, service, token, finalized):
        with pytest.raises(ServiceError, match="outside track"):
            service.mark_event(token, finalized.id, 99.0, "ToeOff")

    def test_set_label(self, service, token):
        service.set_label(token, "p1", "impaired")
        assert service.list_participants(token)[0].class_label == "impaired"
        service.set_label(token, "p1", "typical")  # relabel overwrites
        assert service.list_participants(token)[0].class_label == "typical"
        with pytest.raises(ServiceError, match="not in project label set"):
            service.set_label(token, "p1", "TD")


class TestStreamingEndToEnd:
    @pytest.fixture
    def stack(self, service, token):
        server = start_stream_server(service)
        yield service, token, server
        server.shutdown()

    def _start_client(self, server_port, participant="p1", duration=8.0, seed=1, **kw):
        result = {}

        def run():
            kwargs = dict(speedup=500.0, start_timeout_s=15.0, project_id="alpha")
            kwargs.update(kw)
            try:
                result["sid"] = run_client(
                    preset("typical_child", seed), f"127.0.0.1:{server_port}",
                    participant, duration, **kwargs
                )
            except Exception as e:  # surfaced by the waiting test
                result["error"] = e

        th = threading.Thread(target=run)
        th.start()
        return th, result

    def _wait_ready(self, service, token, timeout=10.0):
        deadline = time.time() + timeout
        while time.time() < deadline:
            ready = [s for s in service.list_all_sessions(token) if s["state"] == "Ready"]
            if ready:
                return ready[0]["session_id"]
            time.sleep(0.02)
        raise AssertionError("no session reached Ready")

    def test_record_button_starts_stream(self, stack):
        service, token, server = stack
        th, result = self._start_client(server.port)
        sid = self._wait_ready(service, token)
        service.press_record(token, sid)
        deadline = time.time() + 5
        live = service.get_live(sid)
        while time.time() < deadline and not live.samples:
            time.sleep(0.02)
        assert live.samples, "no samples within one batch interval"
        th.join(timeout=30)
        assert "error" not in result
        status = service.session_status(token, sid)
        assert status["state"] == "Finalized"
        assert status["samples"] == 400  # 8 s * 50 Hz

    def test_start_never_arrives_client_gives_up(self, stack):
        service, token, server = stack
        th, result = self._start_client(server.port, duration=6.0, start_timeout_s=0.3)
        sid = self._wait_ready(service, token)
        th.join(timeout=10)
        assert "error" not in result
        # client disconnected from Ready: session back to Off
        assert service.session_status(token, sid)["state"] == "Off"

    def test_mid_stream_disconnect_retains_acked_prefix(self, stack):
        service, token, server = stack

        def kamikaze():
            sock = socket.create_connection(("127.0.0.1", server.port), timeout=15.0)
            f = sock.makefile("rb")
            sock.sendall(encode(Message(kind=MessageKind.HELLO, project_id="alpha",
                                        participant_id="p1")))
            armed = decode(f.readline())
            while True:  # wait for Start
                msg = decode(f.readline())
                if msg.kind == MessageKind.START:
                    break
            for seq in (1, 2, 3):
                sock.sendall(encode(make_batch(armed.session_id, seq, n=50)))
                decode(f.readline())
            sock.close()  # die mid-stream, 150 samples acked
            return armed.session_id

        holder = {}
        th = threading.Thread(target=lambda: holder.update(sid=kamikaze()))
        th.start()
        sid = self._wait_ready(service, token)
        service.press_record(token, sid)
        th.join(timeout=10)
        time.sleep(0.1)
        live = service.get_live(sid)
        assert len(live.samples) == 150
        rec = service.stop_and_finalize(token, sid)
        assert len(rec.track) == 150

    def test_fault_injected_client_still_delivers_everything(self, stack):
        service, token, server = stack
        th, result = self._start_client(server.port, duration=10.0, seed=5, fault_rate=0.2)
        sid = self._wait_ready(service, token)
        service.press_record(token, sid)
        th.join(timeout=30)
        assert "error" not in result, result.get("error")
        status = service.session_status(token, sid)
        assert status["state"] == "Finalized"
        assert status["samples"] == 500
        loaded = load_session(service.data_dir, "alpha", sid)
        assert np.all(np.diff(loaded.track.t) > 0)

    def test_implicit_session_creation_via_hello(self, stack):
        service, token, server = stack
        th, result = self._start_client(server.port, duration=6.0)
        sid = self._wait_ready(service, token)
        service.press_record(token, sid)
        th.join(timeout=20)
        assert not th.is_alive(), "client did not finish"
        assert "error" not in result, result.get("error")
        assert result["sid"] == sid
