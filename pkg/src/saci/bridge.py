"""Line-delimited JSON wire protocol for driving environments remotely.

One message per UTF-8 line; numeric fields survive with full double
precision because encoding uses shortest round-trip decimals.  Stepping is
lock-step: each reset/step request carries a sequence number that the reply
must echo.  Protocol violations raise `ProtocolError` for the caller to
handle; they never kill the serving process.
"""

from __future__ import annotations

import json
import math
import selectors
import socket
import time
from dataclasses import dataclass

import numpy as np

from .envs import EnvSpec, StepResult, env_reset
from .errors import ProtocolError

PROTOCOL_VERSION = 1

# required payload fields per message kind
_SCHEMAS = {
    "hello": ("version",),
    "spec": ("name", "obs_dim", "act_dim", "max_steps"),
    "reset": ("seed", "seq"),
    "obs": ("obs", "seq"),
    "step": ("action", "seq"),
    "result": ("obs", "reward_raw", "components", "done", "cause", "info", "seq"),
    "close": (),
    "error": ("message",),
}


@dataclass
class WireMessage:
    kind: str
    payload: dict

    def __getitem__(self, key):
        return self.payload[key]


class EncodeError(ProtocolError):
    """Message cannot be represented on the wire (non-finite numbers, ...)."""


def _check_finite(value, path):
    if isinstance(value, float) and not math.isfinite(value):
        raise EncodeError(f"non-finite number at field {path!r}")
    if isinstance(value, dict):
        for k, v in value.items():
            _check_finite(v, f"{path}.{k}")
    if isinstance(value, (list, tuple)):
        for i, v in enumerate(value):
            _check_finite(v, f"{path}[{i}]")


def encode(msg: WireMessage) -> str:
    """Single-line JSON rendering of the message; raises EncodeError on
    non-finite numerics or missing fields."""
    if msg.kind not in _SCHEMAS:
        raise EncodeError(f"unknown message kind {msg.kind!r}")
    for field in _SCHEMAS[msg.kind]:
        if field not in msg.payload:
            raise EncodeError(f"{msg.kind} message missing field {field!r}")
    body = {"kind": msg.kind, **msg.payload}
    _check_finite(body, msg.kind)
    try:
        line = json.dumps(body, allow_nan=False)
    except ValueError as exc:
        raise EncodeError(str(exc)) from None
    if "\n" in line:
        raise EncodeError("encoded message contains a newline")
    return line


def _reject_constant(token):
    raise ProtocolError(f"non-finite number {token!r} on the wire")


def decode(line: str) -> WireMessage:
    """Parse one line into a WireMessage; malformed input raises
    ProtocolError naming the offending position or field."""
    try:
        body = json.loads(line, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed message at column {exc.pos}: {exc.msg}") from None
    if not isinstance(body, dict):
        raise ProtocolError("message is not a JSON object")
    kind = body.pop("kind", None)
    if kind not in _SCHEMAS:
        raise ProtocolError(f"unknown message kind {kind!r}")
    for field in _SCHEMAS[kind]:
        if field not in body:
            raise ProtocolError(f"{kind} message missing field {field!r}")
    return WireMessage(kind, body)


class SocketTransport:
    """Blocking line transport over a connected socket, with deadlines."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self._buf = b""

    def send_line(self, line: str):
        self.sock.sendall(line.encode("utf-8") + b"\n")

    def recv_line(self, timeout: float = None) -> str:
        deadline = None if timeout is None else time.monotonic() + timeout
        while b"\n" not in self._buf:
            if deadline is not None:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise ProtocolError("timed out waiting for a reply")
                self.sock.settimeout(remaining)
            else:
                self.sock.settimeout(None)
            try:
                chunk = self.sock.recv(65536)
            except socket.timeout:
                raise ProtocolError("timed out waiting for a reply") from None
            if not chunk:
                raise ProtocolError("connection closed")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line.decode("utf-8")

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


class StreamTransport:
    """Line transport over binary file objects (subprocess stdio)."""

    def __init__(self, reader, writer):
        self.reader = reader
        self.writer = writer

    def send_line(self, line: str):
        self.writer.write(line.encode("utf-8") + b"\n")
        self.writer.flush()

    def recv_line(self, timeout: float = None) -> str:
        if timeout is not None and hasattr(self.reader, "fileno"):
            sel = selectors.DefaultSelector()
            sel.register(self.reader, selectors.EVENT_READ)
            ready = sel.select(timeout)
            sel.close()
            if not ready:
                raise ProtocolError("timed out waiting for a reply")
        line = self.reader.readline()
        if not line:
            raise ProtocolError("connection closed")
        return line.decode("utf-8").rstrip("\n")

    def close(self):
        for fh in (self.reader, self.writer):
            try:
                fh.close()
            except OSError:
                pass


def _normalize_info(info: dict) -> dict:
    out = dict(info)
    if out.get("bomb_center") is not None:
        out["bomb_center"] = tuple(out["bomb_center"])
    return out


class RemoteEnv:
    """Environment proxy satisfying the reset/step contract over a transport.

    Lock-step: one outstanding request; replies must echo the request's
    sequence number.  Use `set_seed` (or the `seed=` argument of reset) to
    control the remote stream.
    """

    def __init__(self, transport, timeout: float = 30.0):
        self.transport = transport
        self.timeout = timeout
        self._seq = 0
        self._next_seed = 0
        self.transport.send_line(encode(WireMessage("hello",
                                                    {"version": PROTOCOL_VERSION})))
        reply = self._recv()
        if reply.kind != "spec":
            raise ProtocolError(f"expected spec after hello, got {reply.kind!r}")
        self.spec = EnvSpec(reply["name"], int(reply["obs_dim"]),
                            int(reply["act_dim"]), int(reply["max_steps"]))

    def _recv(self) -> WireMessage:
        msg = decode(self.transport.recv_line(self.timeout))
        if msg.kind == "error":
            raise ProtocolError(f"remote error: {msg['message']}")
        return msg

    def _roundtrip(self, kind: str, payload: dict, reply_kind: str) -> WireMessage:
        self._seq += 1
        payload = {**payload, "seq": self._seq}
        self.transport.send_line(encode(WireMessage(kind, payload)))
        reply = self._recv()
        if reply.kind != reply_kind:
            raise ProtocolError(f"expected {reply_kind!r}, got {reply.kind!r}")
        if reply["seq"] != self._seq:
            raise ProtocolError(
                f"out-of-order reply: expected seq {self._seq}, got {reply['seq']}")
        return reply

    def set_seed(self, seed: int):
        self._next_seed = int(seed)

    def reset(self, seed: int = None) -> np.ndarray:
        if seed is not None:
            self._next_seed = int(seed)
        reply = self._roundtrip("reset", {"seed": self._next_seed}, "obs")
        obs = np.array(reply["obs"], dtype=float)
        if obs.shape != (self.spec.obs_dim,):
            raise ProtocolError(
                f"obs length {obs.shape[0]} != negotiated {self.spec.obs_dim}")
        return obs

    def step(self, action) -> StepResult:
        action = [float(a) for a in np.asarray(action).ravel()]
        if len(action) != self.spec.act_dim:
            raise ProtocolError(
                f"action length {len(action)} != negotiated {self.spec.act_dim}")
        reply = self._roundtrip("step", {"action": action}, "result")
        obs = np.array(reply["obs"], dtype=float)
        if obs.shape != (self.spec.obs_dim,):
            raise ProtocolError(
                f"obs length {obs.shape[0]} != negotiated {self.spec.obs_dim}")
        return StepResult(obs, float(reply["reward_raw"]),
                          {k: float(v) for k, v in reply["components"].items()},
                          bool(reply["done"]), str(reply["cause"]),
                          _normalize_info(reply["info"]))

    def close(self):
        try:
            self.transport.send_line(encode(WireMessage("close", {})))
        except (ProtocolError, OSError):
            pass
        self.transport.close()


def remote_env_adapter(transport, timeout: float = 30.0) -> RemoteEnv:
    """Handshake and return an environment proxy over the transport."""
    return RemoteEnv(transport, timeout)


def _result_payload(res: StepResult, seq: int) -> dict:
    info = dict(res.info)
    if info.get("bomb_center") is not None:
        info["bomb_center"] = list(info["bomb_center"])
    return {
        "obs": [float(v) for v in res.obs],
        "reward_raw": res.reward_raw,
        "components": {k: float(v) for k, v in res.reward_components.items()},
        "done": res.done,
        "cause": res.cause,
        "info": info,
        "seq": seq,
    }


def serve_env(env, transport, max_requests: int = None):
    """Answer hello/reset/step requests for one built-in environment.

    Runs until a close message, connection loss, or `max_requests`.
    Malformed requests get an error reply; the loop keeps serving.
    """
    served = 0
    while max_requests is None or served < max_requests:
        try:
            line = transport.recv_line(None)
        except ProtocolError:
            return
        served += 1
        try:
            msg = decode(line)
            if msg.kind == "close":
                return
            if msg.kind == "hello":
                if msg["version"] != PROTOCOL_VERSION:
                    raise ProtocolError(
                        f"unsupported protocol version {msg['version']}")
                reply = WireMessage("spec", {
                    "name": env.spec.name, "obs_dim": env.spec.obs_dim,
                    "act_dim": env.spec.act_dim, "max_steps": env.spec.max_steps,
                })
            elif msg.kind == "reset":
                obs = env_reset(env, int(msg["seed"]))
                reply = WireMessage("obs", {"obs": [float(v) for v in obs],
                                            "seq": msg["seq"]})
            elif msg.kind == "step":
                res = env.step(np.array(msg["action"], dtype=float))
                reply = WireMessage("result", _result_payload(res, msg["seq"]))
            else:
                raise ProtocolError(f"unexpected message kind {msg.kind!r}")
        except Exception as exc:  # keep serving on bad input
            try:
                transport.send_line(encode(WireMessage("error",
                                                       {"message": str(exc)})))
            except (ProtocolError, OSError):
                return
            continue
        transport.send_line(encode(reply))
