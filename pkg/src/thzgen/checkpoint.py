"""Binary checkpoint format for the DiT denoiser.

Layout: magic "THZW", u32 version, u32 JSON length + JSON metadata (the
DitConfig plus dataset bookkeeping needed for sampling), u32 record count,
then (u32 name length, name, u32 rank, rank x u64 shape, f32 data)
records for raw weights, EMA weights, Adam moments, and the step counter.
All integers and floats little-endian.
"""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .dit import DitConfig, DitDenoiser, init_params

MAGIC = b"THZW"
VERSION = 1


@dataclass
class CheckpointMeta:
    """Dataset-side bookkeeping carried along with the weights."""

    normalization_scalar: float = 1.0
    k_rx: int = 1
    k_tx: int = 1
    master_seed: int = 0
    tx_origin: tuple = (0.0, 0.0, 0.0)
    geometry: dict = field(default_factory=dict)


@dataclass
class Checkpoint:
    config: DitConfig
    params: dict
    ema_params: dict
    adam_m: dict
    adam_v: dict
    step: int
    meta: CheckpointMeta


def _write_record(f, name: str, array: np.ndarray) -> None:
    encoded = name.encode("utf-8")
    f.write(struct.pack("<I", len(encoded)))
    f.write(encoded)
    shape = array.shape
    f.write(struct.pack("<I", len(shape)))
    for dim in shape:
        f.write(struct.pack("<Q", dim))
    np.ascontiguousarray(array, dtype="<f4").tofile(f)


def _read_record(f):
    (name_len,) = struct.unpack("<I", f.read(4))
    name = f.read(name_len).decode("utf-8")
    (rank,) = struct.unpack("<I", f.read(4))
    shape = tuple(struct.unpack("<Q", f.read(8))[0] for _ in range(rank))
    count = int(np.prod(shape)) if shape else 1
    data = np.fromfile(f, dtype="<f4", count=count).astype(float).reshape(shape)
    return name, data


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    meta = {"config": asdict(ckpt.config), "meta": asdict(ckpt.meta)}
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    records = []
    for prefix, tensors in (
        ("param/", ckpt.params),
        ("ema/", ckpt.ema_params),
        ("adam_m/", ckpt.adam_m),
        ("adam_v/", ckpt.adam_v),
    ):
        for name in sorted(tensors):
            records.append((prefix + name, np.asarray(tensors[name])))
    records.append(("step", np.array([ckpt.step], dtype=float)))

    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        f.write(struct.pack("<I", len(records)))
        for name, array in records:
            _write_record(f, name, array)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise ValueError("not a checkpoint file: bad magic")
        (version,) = struct.unpack("<I", f.read(4))
        if version != VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        (blob_len,) = struct.unpack("<I", f.read(4))
        meta_json = json.loads(f.read(blob_len).decode("utf-8"))
        (n_records,) = struct.unpack("<I", f.read(4))
        records = dict(_read_record(f) for _ in range(n_records))

    config = DitConfig(**meta_json["config"])
    meta_dict = meta_json["meta"]
    meta_dict["tx_origin"] = tuple(meta_dict.get("tx_origin", (0.0, 0.0, 0.0)))
    meta = CheckpointMeta(**meta_dict)

    expected = {k: a.shape for k, a in init_params(config, np.random.default_rng(0)).items()}
    groups = {"param/": {}, "ema/": {}, "adam_m/": {}, "adam_v/": {}}
    step = 0
    for name, data in records.items():
        if name == "step":
            step = int(data[0])
            continue
        prefix, _, key = name.partition("/")
        prefix += "/"
        if prefix not in groups:
            raise ValueError(f"unknown checkpoint record {name!r}")
        if key not in expected:
            raise ValueError(f"unexpected parameter {key!r} in checkpoint")
        if data.shape != expected[key]:
            raise ValueError(
                f"checkpoint tensor {name!r} has shape {data.shape}, "
                f"config expects {expected[key]}"
            )
        groups[prefix][key] = data
    for prefix, tensors in groups.items():
        missing = set(expected) - set(tensors)
        if missing:
            raise ValueError(
                f"checkpoint is missing {prefix} tensors: {sorted(missing)[:3]}..."
            )
    return Checkpoint(
        config=config,
        params=groups["param/"],
        ema_params=groups["ema/"],
        adam_m=groups["adam_m/"],
        adam_v=groups["adam_v/"],
        step=step,
        meta=meta,
    )


def ema_denoiser(ckpt: Checkpoint) -> DitDenoiser:
    return DitDenoiser(ckpt.config, params=ckpt.ema_params)
