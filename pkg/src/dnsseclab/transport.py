"""Transport interface: real UDP/TCP sockets, or the simulated network."""

from __future__ import annotations

import random
import socket
import struct
import threading


class TransportError(Exception):
    pass


class Timeout(TransportError):
    pass


class Transport:
    """Sends one query wire to a server address and returns the reply wire."""

    def query(self, address: str, wire: bytes, tcp: bool = False,
              timeout: float = 2.0) -> bytes:
        raise NotImplementedError

    def new_txid(self) -> int:
        raise NotImplementedError


class SocketTransport(Transport):
    """UDP with a 2-byte length-prefixed TCP variant, against real servers.

    source_port="fixed" reuses one query socket for every UDP query (the
    regime the Kaminsky attack exploits); "random" takes a fresh OS-assigned
    port per query.
    """

    def __init__(self, port: int = 5353, timeout: float = 2.0,
                 source_port: str = "random"):
        if source_port not in ("fixed", "random"):
            raise ValueError(f"source_port {source_port!r}")
        self.port = port
        self.timeout = timeout
        self.source_port = source_port
        self._rng = random.SystemRandom()
        self._fixed_sock: socket.socket | None = None
        self._lock = threading.Lock()

    def new_txid(self) -> int:
        return self._rng.randrange(65536)

    def _split(self, address: str) -> tuple[str, int]:
        if ":" in address:
            host, _, port = address.rpartition(":")
            return host, int(port)
        return address, self.port

    def query(self, address: str, wire: bytes, tcp: bool = False,
              timeout: float | None = None) -> bytes:
        host, port = self._split(address)
        timeout = self.timeout if timeout is None else timeout
        if tcp:
            return self._query_tcp(host, port, wire, timeout)
        return self._query_udp(host, port, wire, timeout)

    def close(self) -> None:
        with self._lock:
            if self._fixed_sock is not None:
                self._fixed_sock.close()
                self._fixed_sock = None

    def _query_udp(self, host: str, port: int, wire: bytes,
                   timeout: float) -> bytes:
        if self.source_port == "fixed":
            with self._lock:
                if self._fixed_sock is None:
                    self._fixed_sock = socket.socket(socket.AF_INET,
                                                     socket.SOCK_DGRAM)
                    self._fixed_sock.bind(("", 0))
                return self._exchange(self._fixed_sock, host, port, wire,
                                      timeout)
        with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
            return self._exchange(sock, host, port, wire, timeout)

    @staticmethod
    def _exchange(sock: socket.socket, host: str, port: int, wire: bytes,
                  timeout: float) -> bytes:
        sock.settimeout(timeout)
        try:
            sock.sendto(wire, (host, port))
            while True:
                data, sender = sock.recvfrom(65535)
                if sender[0] == host and sender[1] == port:
                    return data
        except socket.timeout as exc:
            raise Timeout(f"udp query to {host}:{port} timed out") from exc
        except OSError as exc:
            # ICMP port-unreachable and friends: retryable like a timeout.
            raise Timeout(f"udp query to {host}:{port}: {exc}") from exc

    def _query_tcp(self, host: str, port: int, wire: bytes,
                   timeout: float) -> bytes:
        try:
            with socket.create_connection((host, port), timeout=timeout) as sock:
                sock.sendall(struct.pack(">H", len(wire)) + wire)
                header = self._read_exact(sock, 2)
                (length,) = struct.unpack(">H", header)
                return self._read_exact(sock, length)
        except socket.timeout as exc:
            raise Timeout(f"tcp query to {host}:{port} timed out") from exc
        except OSError as exc:
            raise TransportError(str(exc)) from exc

    @staticmethod
    def _read_exact(sock: socket.socket, count: int) -> bytes:
        data = b""
        while len(data) < count:
            chunk = sock.recv(count - len(data))
            if not chunk:
                raise TransportError("tcp connection closed mid-message")
            data += chunk
        return data
