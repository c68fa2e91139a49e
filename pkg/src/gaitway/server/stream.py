"""Threaded TCP listener for the newline-delimited JSON data plane.

Each connection owns one session. A writer thread drains the session's
outbox (the record button pushes Start there; finalize pushes Stop), while
the handler thread answers inbound messages. A per-connection lock keeps
the two writers from interleaving lines.
"""

from __future__ import annotations

import socketserver
import threading
from typing import Optional

from ..model import SessionState
from ..protocol import Message, MessageKind, ProtocolError, decode, encode
from .service import IngestionService, ServiceError


class StreamServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], service: IngestionService) -> None:
        super().__init__(address, StreamHandler)
        self.service = service

    @property
    def port(self) -> int:
        return self.server_address[1]


class StreamHandler(socketserver.StreamRequestHandler):
    def setup(self) -> None:
        super().setup()
        self.write_lock = threading.Lock()
        self.session = None
        self.writer: Optional[threading.Thread] = None

    def send(self, msg: Message) -> None:
        with self.write_lock:
            self.wfile.write(encode(msg))
            self.wfile.flush()

    def _pump_outbox(self) -> None:
        while True:
            msg = self.session.outbox.get()
            if msg is None:
                return
            try:
                self.send(msg)
            except OSError:
                return

    def handle(self) -> None:
        service: IngestionService = self.server.service
        try:
            for line in self.rfile:
                try:
                    msg = decode(line)
                except ProtocolError as e:
                    self.send(Message(kind=MessageKind.ERROR, reason=str(e)))
                    continue
                try:
                    reply = self._dispatch(service, msg)
                except ServiceError as e:
                    reply = Message(
                        kind=MessageKind.ERROR, session_id=msg.session_id, reason=str(e)
                    )
                if reply is not None:
                    self.send(reply)
                if self.session is not None and self.writer is None:
                    # pump only after Armed is on the wire, so Start can
                    # never overtake it
                    self.writer = threading.Thread(target=self._pump_outbox, daemon=True)
                    self.writer.start()
                if reply is not None and reply.kind == MessageKind.STOP:
                    return  # finalized: close the connection
        except OSError:
            pass

    def _dispatch(self, service: IngestionService, msg: Message) -> Optional[Message]:
        if msg.kind == MessageKind.HELLO:
            if self.session is not None:
                raise ServiceError("connection already bound to a session")
            self.session, armed = service.attach_client(msg)
            return armed
        if self.session is None:
            raise ServiceError("Hello required before any other message")
        if msg.kind == MessageKind.SAMPLE_BATCH:
            return service.ingest(self.session, msg)
        if msg.kind == MessageKind.STOP:
            if self.session.state == SessionState.READY:
                # unilateral disconnect from Ready
                service.client_disconnected(self.session)
                self.session.outbox.put(None)
                return Message(kind=MessageKind.STOP, session_id=self.session.id)
            service.stop_and_finalize(None, self.session.id, origin="client")
            return Message(kind=MessageKind.STOP, session_id=self.session.id)
        if msg.kind in (MessageKind.ACK, MessageKind.ERROR):
            return None  # informational from the client; nothing to do
        raise ServiceError(f"unexpected {msg.kind.value} from client")

    def finish(self) -> None:
        if self.session is not None:
            self.server.service.client_disconnected(self.session)
            self.session.outbox.put(None)
        super().finish()


def start_stream_server(
    service: IngestionService, host: str = "127.0.0.1", port: int = 0
) -> StreamServer:
    """Start the data-plane listener on a background thread."""
    server = StreamServer((host, port), service)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server
