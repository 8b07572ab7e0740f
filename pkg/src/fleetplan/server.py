"""Line-delimited JSON wire protocol for the operator console.

One bidirectional TCP socket, one scenario session at a time.  The server
side streams snapshots at a configurable rate plus every executor event;
frames carry a strictly increasing ``seq``.  Client commands enter the
simulator through an ordered queue owned by the session loop, so the
simulation itself stays single-threaded.

    client -> server: {"type": "goal"|"move_human"|"move_object"|
                       "pause"|"resume"|"speed", ...}
    server -> client: {"type": "snapshot"|"event"|"plan"|"error",
                       "seq": n, ...}
"""

from __future__ import annotations

import json
import queue
import socket
import threading
import time
from typing import Optional

from .executor import ExecConfig, RhpEngine, exec_config_from
from .instructions import NameSource, SceneSymbols, translate_text
from .scenario import Scenario
from .sim import Outcome


class Session:
    """Drives one engine at wall-clock speed and talks to one client."""

    def __init__(self, scenario: Scenario, snapshot_hz: float = 10.0,
                 speed: float = 1.0, exec_config: Optional[ExecConfig] = None):
        self.scenario = scenario
        self.snapshot_hz = snapshot_hz
        self.speed = speed
        self.paused = False
        self.seq = 0
        self.commands: "queue.Queue[dict]" = queue.Queue()
        self.outbox: "queue.Queue[Optional[str]]" = queue.Queue()
        self.engine = self._build_engine(exec_config)
        self.engine.event_sink = lambda event: self._send("event", event=event)
        self._stop = threading.Event()

    def _build_engine(self, exec_config: Optional[ExecConfig]) -> RhpEngine:
        scn = self.scenario
        sim = scn.build_sim()
        symbols = SceneSymbols(objects=tuple(sorted(sim.objects)),
                               humans=tuple(sorted(sim.humans)),
                               locations=tuple(sorted(sim.locations)))
        names = NameSource(1)
        spec = scn.explicit_spec()
        if spec is None and scn.instruction:
            spec = translate_text(scn.instruction, symbols, names=names)
        # no instruction: an idle session awaiting its first goal command
        cfg = exec_config or (exec_config_from(scn.config) if scn.config else ExecConfig())
        return RhpEngine(sim, spec, cfg, tick=scn.tick, symbols=symbols, names=names)

    def _send(self, kind: str, **payload):
        self.seq += 1
        self.outbox.put(json.dumps({"type": kind, "seq": self.seq, **payload}))

    def handle_command(self, command: dict):
        kind = command.get("type")
        sim = self.engine.sim
        if kind == "goal":
            self.engine._handle_outcome(
                Outcome(sim.now, None, None, "goal", str(command.get("text", ""))))
        elif kind == "move_human":
            human = sim.humans.get(command.get("id"))
            if human is None:
                raise ValueError(f"unknown human {command.get('id')!r}")
            target = (float(command["x"]), float(command["y"]))
            # a drag is a short walk to the dragged point
            human.waypoints = [target]
            human.speed = float(command.get("speed", 2.0))
        elif kind == "move_object":
            obj = sim.objects.get(command.get("id"))
            if obj is None:
                raise ValueError(f"unknown object {command.get('id')!r}")
            if obj.held_by is None:
                obj.pos = (float(command["x"]), float(command["y"]))
        elif kind == "pause":
            self.paused = True
        elif kind == "resume":
            self.paused = False
        elif kind == "speed":
            self.speed = max(0.1, min(50.0, float(command.get("value", 1.0))))
        else:
            raise ValueError(f"unknown command type {kind!r}")

    def run(self):
        tick = self.scenario.tick
        last_snapshot = 0.0
        self._send("snapshot", snapshot=self.engine.snapshot())
        next_wall = time.monotonic()
        while not self._stop.is_set():
            try:
                while True:
                    command = self.commands.get_nowait()
                    try:
                        self.handle_command(command)
                    except Exception as exc:
                        self._send("error", message=str(exc))
            except queue.Empty:
                pass
            if not self.paused and self.engine.finished is None:
                self.engine.tick()
            now = time.monotonic()
            if now - last_snapshot >= 1.0 / self.snapshot_hz:
                last_snapshot = now
                self._send("snapshot", snapshot=self.engine.snapshot())
            next_wall += tick / self.speed
            delay = next_wall - time.monotonic()
            if delay > 0:
                time.sleep(min(delay, 0.25))
            else:
                next_wall = time.monotonic()
        self.outbox.put(None)

    def stop(self):
        self._stop.set()


def serve(scenario: Scenario, port: int, host: str = "127.0.0.1",
          snapshot_hz: float = 10.0, speed: float = 1.0,
          exec_config: Optional[ExecConfig] = None,
          ready: Optional[threading.Event] = None,
          stop: Optional[threading.Event] = None) -> None:
    """Accepts one client at a time; each connection gets a fresh session."""
    stop = stop or threading.Event()

    server_socket = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    server_socket.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    server_socket.bind((host, port))
    server_socket.listen(1)
    server_socket.settimeout(0.25)
    if ready is not None:
        ready.set()

    try:
        while not stop.is_set():
            try:
                conn, _ = server_socket.accept()
            except socket.timeout:
                continue
            session = Session(scenario, snapshot_hz, speed, exec_config)
            _run_connection(conn, session, stop)
    finally:
        server_socket.close()


def _run_connection(conn: socket.socket, session: Session, stop: threading.Event):
    writer_done = threading.Event()

    def writer():
        try:
            while True:
                line = session.outbox.get()
                if line is None:
                    break
                conn.sendall(line.encode() + b"\n")
        except OSError:
            pass
        finally:
            writer_done.set()

    def loop():
        session.run()

    threads = [threading.Thread(target=writer, daemon=True),
               threading.Thread(target=loop, daemon=True)]
    for t in threads:
        t.start()
    buffer = b""
    conn.settimeout(0.25)
    try:
        while not stop.is_set() and not writer_done.is_set():
            try:
                chunk = conn.recv(4096)
            except socket.timeout:
                continue
            except OSError:
                break
            if not chunk:
                break
            buffer += chunk
            while b"\n" in buffer:
                line, buffer = buffer.split(b"\n", 1)
                if not line.strip():
                    continue
                try:
                    command = json.loads(line.decode())
                except Exception as exc:
                    session._send("error", message=f"malformed frame: {exc}")
                    continue
                session.commands.put(command)
    finally:
        session.stop()
        writer_done.wait(timeout=2.0)
        try:
            conn.close()
        except OSError:
            pass
