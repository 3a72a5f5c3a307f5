"""Socket test client for the stream protocol."""

import socket
import time

from charconductor import protocol


class StreamClient:
    def __init__(self, host, port, timeout=5.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.decoder = protocol.FrameDecoder()
        self.inbox = []
        self._seq = 0

    def send(self, msg, session="client"):
        payload = protocol.encode_message(msg, session, self._seq)
        self._seq += 1
        self.sock.sendall(protocol.encode_frame(payload))

    def send_raw(self, data: bytes):
        self.sock.sendall(data)

    def pump(self, duration=0.1):
        """Read whatever arrives within `duration` seconds."""
        deadline = time.monotonic() + duration
        self.sock.settimeout(0.05)
        while time.monotonic() < deadline:
            try:
                data = self.sock.recv(65536)
            except socket.timeout:
                continue
            except OSError:
                break
            if not data:
                break
            for payload in self.decoder.feed(data):
                self.inbox.append(protocol.decode_message(payload))
        return self.inbox

    def wait_for(self, predicate, timeout=5.0, min_count=1):
        """Collect messages until `predicate` matches `min_count` of them."""
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            matches = [m for m in self.inbox if predicate(m[0])]
            if len(matches) >= min_count:
                return matches
            self.pump(0.05)
        matches = [m for m in self.inbox if predicate(m[0])]
        if len(matches) >= min_count:
            return matches
        raise TimeoutError(
            f"no matching message within {timeout}s; saw "
            f"{[type(m[0]).__name__ for m in self.inbox]}"
        )

    def events(self):
        return [m for m in self.inbox if isinstance(m[0], protocol.Event)]

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass
