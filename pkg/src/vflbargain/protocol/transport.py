"""Transports carrying encoded messages between the task side and a data agent.

The task side owns the session loop and talks through a :class:`Transport`.
The data side is any object with ``handle(msg) -> list[Message]``; it is
either called in-process or served over a TCP socket on its own thread.
"""

from __future__ import annotations

import socket
import threading
from collections import deque
from typing import Callable, Optional, Protocol

from .messages import TERMINAL, DecodeError, Message, decode, encode

Handler = Callable[[Message], list]


class TransportError(RuntimeError):
    """The peer timed out, hung up or sent something unusable."""


class Transport(Protocol):
    name: str

    def send(self, msg: Message) -> None: ...

    def receive(self) -> Message: ...

    def close(self) -> None: ...


class InMemoryTransport:
    """Synchronous queue pair; every message still passes through the wire codec."""

    name = "memory"

    def __init__(self, handler: Handler) -> None:
        self._handler = handler
        self._inbox: deque[str] = deque()

    def send(self, msg: Message) -> None:
        for reply in self._handler(decode(encode(msg))):
            self._inbox.append(encode(reply))

    def receive(self) -> Message:
        if not self._inbox:
            raise TransportError("peer sent no reply")
        return decode(self._inbox.popleft())

    def close(self) -> None:
        self._inbox.clear()

    def __enter__(self) -> "InMemoryTransport":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class StreamTransport:
    """Blocking line protocol over a TCP connection."""

    name = "stream"

    def __init__(self, host: str, port: int, timeout: float = 5.0) -> None:
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {host}:{port}: {exc}") from exc
        self._sock.settimeout(timeout)
        self._file = self._sock.makefile("rwb")

    @classmethod
    def connect(cls, endpoint: str, timeout: float = 5.0) -> "StreamTransport":
        host, _, port = endpoint.rpartition(":")
        return cls(host or "127.0.0.1", int(port), timeout)

    def send(self, msg: Message) -> None:
        try:
            self._file.write((encode(msg) + "\n").encode("utf-8"))
            self._file.flush()
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def receive(self) -> Message:
        try:
            line = self._file.readline()
        except socket.timeout:
            raise TransportError("receive timed out") from None
        except OSError as exc:
            raise TransportError(f"receive failed: {exc}") from exc
        if not line:
            raise TransportError("peer closed the connection")
        try:
            return decode(line.decode("utf-8"))
        except (DecodeError, UnicodeDecodeError) as exc:
            raise TransportError(f"undecodable message: {exc}") from exc

    def close(self) -> None:
        for closer in (self._file.close, self._sock.close):
            try:
                closer()
            except OSError:
                pass

    def __enter__(self) -> "StreamTransport":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class DataServer:
    """Serves one data-agent connection on a background thread."""

    def __init__(self, handler: Handler, host: str = "127.0.0.1", port: int = 0) -> None:
        self._handler = handler
        self._listener = socket.create_server((host, port))
        self.address: tuple[str, int] = self._listener.getsockname()[:2]
        self.error: Optional[BaseException] = None
        self._thread = threading.Thread(target=self._serve, daemon=True)
        self._thread.start()

    @property
    def endpoint(self) -> str:
        return f"{self.address[0]}:{self.address[1]}"

    def _serve(self) -> None:
        try:
            conn, _ = self._listener.accept()
        except OSError:
            return
        with conn, conn.makefile("rwb") as fh:
            try:
                for raw in fh:
                    msg = decode(raw.decode("utf-8"))
                    for reply in self._handler(msg):
                        fh.write((encode(reply) + "\n").encode("utf-8"))
                    fh.flush()
                    if isinstance(msg, TERMINAL):
                        break
            except (OSError, DecodeError) as exc:
                self.error = exc

    def close(self, wait: float = 5.0) -> None:
        try:
            self._listener.close()
        except OSError:
            pass
        self._thread.join(wait)

    def __enter__(self) -> "DataServer":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
