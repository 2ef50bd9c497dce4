"""ACKP checkpoint files.

Layout (little-endian): ``b"ACKP"``, version u16, config length u32 + JSON
bytes, seed u64, epoch u32, array count u32, then per array: name length u16,
name bytes, rank u8, dims u32 * rank, float32 data.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .models import ModelConfig, build_model

MAGIC = b"ACKP"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: ModelConfig
    state: dict
    seed: int = 0
    epoch: int = 0

    def build(self):
        """Rebuild the network and load the stored parameters and BN statistics."""
        model = build_model(self.config)
        model.load_state_dict(self.state)
        return model.eval()


def save_checkpoint(path, model, seed=0, epoch=0):
    cfg_bytes = model.cfg.to_json().encode("utf-8")
    state = model.state_dict()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", VERSION, len(cfg_bytes)))
        fh.write(cfg_bytes)
        fh.write(struct.pack("<QII", seed, epoch, len(state)))
        for name, arr in state.items():
            raw = name.encode("utf-8")
            arr = np.asarray(arr, dtype="<f4")
            fh.write(struct.pack("<H", len(raw)) + raw)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr).tobytes())


def _take(blob, pos, n, path):
    if pos + n > len(blob):
        raise CheckpointError(f"{path}: truncated at byte {pos}")
    return blob[pos : pos + n], pos + n


def load_checkpoint(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {blob[:4]!r}")
    chunk, pos = _take(blob, 4, 6, path)
    version, cfg_len = struct.unpack("<HI", chunk)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    chunk, pos = _take(blob, pos, cfg_len, path)
    config = ModelConfig.from_json(chunk.decode("utf-8"))
    chunk, pos = _take(blob, pos, 16, path)
    seed, epoch, count = struct.unpack("<QII", chunk)
    state = {}
    for _ in range(count):
        chunk, pos = _take(blob, pos, 2, path)
        (nlen,) = struct.unpack("<H", chunk)
        chunk, pos = _take(blob, pos, nlen, path)
        name = chunk.decode("utf-8")
        chunk, pos = _take(blob, pos, 1, path)
        (rank,) = struct.unpack("<B", chunk)
        chunk, pos = _take(blob, pos, 4 * rank, path)
        dims = struct.unpack(f"<{rank}I", chunk)
        size = int(np.prod(dims)) if rank else 1
        chunk, pos = _take(blob, pos, 4 * size, path)
        state[name] = np.frombuffer(chunk, dtype="<f4").reshape(dims).astype(np.float32)
    return Checkpoint(config, state, seed, epoch)
