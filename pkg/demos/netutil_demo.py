"""Minimal stream-protocol client used by the live demos."""

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

    def send(self, msg, session="demo-client"):
        payload = protocol.encode_message(msg, session, self._seq)
        self._seq += 1
        self.sock.sendall(protocol.encode_frame(payload))

    def pump(self, duration=0.1):
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

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass
