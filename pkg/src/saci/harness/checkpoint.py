"""Binary checkpoints: a named-tensor table plus a config snapshot.

Layout (all integers little-endian):

    magic   b"SACI"
    u32     format version (1)
    u32     tensor count
    per tensor, sorted by name:
        u32     name length, then UTF-8 name
        u64     rank, then u64 dims
        f64[.]  row-major IEEE-754 binary64 payload
    u64     config snapshot length, then UTF-8 text

Tensor order is fixed by sorting, so save -> load -> save is byte-identical.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import CheckpointError
from ..numcore import MlpParams
from ..sac import SacAgent, make_temperature
from ..saci import SaciAgent

MAGIC = b"SACI"
VERSION = 1


def _mlp_tensors(prefix: str, params: MlpParams) -> dict:
    out = {}
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        out[f"{prefix}w{i}"] = w
        out[f"{prefix}b{i}"] = b
    return out


def _twin_tensors(prefix: str, twin) -> dict:
    out = {}
    out.update(_mlp_tensors(f"{prefix}q1.", twin.q1))
    out.update(_mlp_tensors(f"{prefix}q2.", twin.q2))
    out.update(_mlp_tensors(f"{prefix}q1_target.", twin.q1_target))
    out.update(_mlp_tensors(f"{prefix}q2_target.", twin.q2_target))
    return out


def sac_agent_tensors(agent: SacAgent) -> dict:
    tensors = _mlp_tensors("policy.", agent.policy.net)
    tensors.update(_twin_tensors("", agent.twin))
    tensors["log_alpha"] = np.array(agent.temp.log_alpha)
    return tensors


def saci_agent_tensors(agent: SaciAgent) -> dict:
    tensors = _mlp_tensors("policy.", agent.policy.net)
    tensors.update(_twin_tensors("twin_r.", agent.twin_r))
    tensors.update(_twin_tensors("twin_i.", agent.twin_i))
    tensors["log_alpha_r"] = np.array(agent.temp_r.log_alpha)
    tensors["log_alpha_i"] = np.array(agent.temp_i.log_alpha)
    if agent.inhibitory is not None:
        ip = agent.inhibitory
        tensors.update(_mlp_tensors("pi_i.policy.", ip.policy.net))
        tensors.update(_twin_tensors("pi_i.", ip.twin))
        tensors["pi_i.log_alpha"] = np.array(ip.temp.log_alpha)
    return tensors


def _assign_mlp(params: MlpParams, tensors: dict, prefix: str):
    from ..saci import _assign_mlp_from_tensors

    return _assign_mlp_from_tensors(params, tensors, prefix)


def load_sac_agent(agent: SacAgent, tensors: dict) -> SacAgent:
    agent.policy.net = _assign_mlp(agent.policy.net, tensors, "policy.")
    agent.twin.q1 = _assign_mlp(agent.twin.q1, tensors, "q1.")
    agent.twin.q2 = _assign_mlp(agent.twin.q2, tensors, "q2.")
    agent.twin.q1_target = _assign_mlp(agent.twin.q1_target, tensors, "q1_target.")
    agent.twin.q2_target = _assign_mlp(agent.twin.q2_target, tensors, "q2_target.")
    agent.temp = make_temperature(agent.temp.target_entropy,
                                  float(tensors["log_alpha"]))
    return agent


def load_saci_agent(agent: SaciAgent, tensors: dict) -> SaciAgent:
    agent.policy.net = _assign_mlp(agent.policy.net, tensors, "policy.")
    for name, twin in (("twin_r.", agent.twin_r), ("twin_i.", agent.twin_i)):
        twin.q1 = _assign_mlp(twin.q1, tensors, f"{name}q1.")
        twin.q2 = _assign_mlp(twin.q2, tensors, f"{name}q2.")
        twin.q1_target = _assign_mlp(twin.q1_target, tensors, f"{name}q1_target.")
        twin.q2_target = _assign_mlp(twin.q2_target, tensors, f"{name}q2_target.")
    agent.temp_r = make_temperature(agent.temp_r.target_entropy,
                                    float(tensors["log_alpha_r"]))
    agent.temp_i = make_temperature(agent.temp_i.target_entropy,
                                    float(tensors["log_alpha_i"]))
    if agent.inhibitory is not None and "pi_i.log_alpha" in tensors:
        ip = agent.inhibitory
        ip.policy.net = _assign_mlp(ip.policy.net, tensors, "pi_i.policy.")
        ip.twin.q1 = _assign_mlp(ip.twin.q1, tensors, "pi_i.q1.")
        ip.twin.q2 = _assign_mlp(ip.twin.q2, tensors, "pi_i.q2.")
        ip.twin.q1_target = _assign_mlp(ip.twin.q1_target, tensors,
                                        "pi_i.q1_target.")
        ip.twin.q2_target = _assign_mlp(ip.twin.q2_target, tensors,
                                        "pi_i.q2_target.")
        ip.temp = make_temperature(ip.temp.target_entropy,
                                   float(tensors["pi_i.log_alpha"]))
    return agent


def save_checkpoint(path, tensors: dict, config_text: str = ""):
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<II", VERSION, len(tensors))
    for name in sorted(tensors):
        arr = np.asarray(tensors[name], dtype=np.float64)
        encoded = name.encode("utf-8")
        blob += struct.pack("<I", len(encoded))
        blob += encoded
        blob += struct.pack("<Q", arr.ndim)
        for d in arr.shape:
            blob += struct.pack("<Q", d)
        blob += arr.tobytes(order="C")
    config_bytes = config_text.encode("utf-8")
    blob += struct.pack("<Q", len(config_bytes))
    blob += config_bytes
    with open(path, "wb") as fh:
        fh.write(blob)


def load_checkpoint(path):
    """Returns (tensors, config_text); raises CheckpointError on corruption."""
    with open(path, "rb") as fh:
        blob = fh.read()
    view = memoryview(blob)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(blob):
            raise CheckpointError(f"truncated checkpoint at byte {pos}")
        chunk = view[pos : pos + n]
        pos += n
        return chunk

    if bytes(take(4)) != MAGIC:
        raise CheckpointError("bad magic; not a checkpoint file")
    version, count = struct.unpack("<II", take(8))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = bytes(take(name_len)).decode("utf-8")
        (rank,) = struct.unpack("<Q", take(8))
        dims = tuple(struct.unpack("<Q", take(8))[0] for _ in range(rank))
        n_vals = 1
        for d in dims:
            n_vals *= d
        data = np.frombuffer(take(8 * n_vals), dtype="<f8").reshape(dims)
        tensors[name] = data.copy()
    (cfg_len,) = struct.unpack("<Q", take(8))
    config_text = bytes(take(cfg_len)).decode("utf-8")
    if pos != len(blob):
        raise CheckpointError(f"{len(blob) - pos} trailing bytes in checkpoint")
    return tensors, config_text
