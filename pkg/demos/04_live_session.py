#!/usr/bin/env python3
"""Run the full two-process architecture on localhost for ten seconds.

A server thread owns the generation loop; this script then plays the part
of two clients at once: a stream client reading events and sending weight
gestures, and a hardware-style controller pushing the same kind of update
over OSC. The stream's event rate is capped by the server; the control
path stays responsive regardless.
"""

import socket
import sys
import threading
import time
from pathlib import Path

from charconductor.protocol import (
    Event,
    ModelList,
    SetWeights,
    build_osc_message,
)
from charconductor.server import SessionConfig, serve
from netutil_demo import StreamClient  # shared with the test suite

RUNS = Path(__file__).parent / "runs"


def gesture_thread(client: StreamClient, stop: threading.Event):
    """Sweep the mixer back and forth like a slider drag."""
    t0 = time.monotonic()
    while not stop.is_set():
        phase = (time.monotonic() - t0) / 4.0 % 1.0
        w = 2 * phase if phase < 0.5 else 2 * (1 - phase)
        client.send(SetWeights(weights=[1.0 - w, w]))
        time.sleep(0.2)


def main():
    if not (RUNS / "manifest.json").exists():
        sys.exit("run demos/01_train_styles.py first")
    config = SessionConfig.from_manifest(RUNS / "manifest.json", chars_per_second=30.0)
    handle = serve(config)
    print(f"server up: stream {handle.stream.port}, OSC {handle.osc.port}")

    client = StreamClient(handle.stream.host, handle.stream.port)
    stop = threading.Event()
    threading.Thread(target=gesture_thread, args=(client, stop), daemon=True).start()

    # a one-shot OSC packet, as a MIDI/controller bridge would send
    osc = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    osc.sendto(build_osc_message("/mix/weights", [0.5, 0.5]), (handle.osc.host, handle.osc.port))
    osc.close()

    deadline = time.monotonic() + 10
    transcript = []
    try:
        while time.monotonic() < deadline:
            client.pump(0.1)
            for msg, _session, _seq in client.inbox:
                if isinstance(msg, ModelList) and not transcript:
                    print("models:", ", ".join(m["name"] for m in msg.models))
                if isinstance(msg, Event) and msg.step >= len(transcript):
                    transcript.append(chr(msg.char))
                    sys.stdout.write(transcript[-1])
                    sys.stdout.flush()
    finally:
        stop.set()
        client.close()
        handle.stop()
    print(f"\n\nstreamed {len(transcript)} chars in 10s (server-capped at 30/s)")


if __name__ == "__main__":
    main()
