"""Resumable snapshots of tensor-train states.

A checkpoint is an ``.npz`` archive holding

* ``header``: JSON text with the format tag, site labels, physical dims,
  evolution time, orthogonality centre, log-norm and the truncation policy;
* ``site_0000``, ``site_0001``, ...: the site tensors stored as ``<c16``
  (little-endian IEEE-754 doubles, real and imaginary parts interleaved).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .mps import MPS, TruncationPolicy

FORMAT = "qhf-checkpoint/1"


@dataclass
class Checkpoint:
    state: MPS
    time: float
    policy: TruncationPolicy
    labels: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> Path:
    path = Path(path)
    state = ckpt.state
    header = {
        "format": FORMAT,
        "n_sites": len(state),
        "labels": list(ckpt.labels),
        "phys_dims": state.phys_dims,
        "bond_dims": state.bond_dims,
        "time": ckpt.time,
        "ortho_center": state.ortho_center,
        "norm_log": state.norm_log,
        "discarded_weight": state.discarded_weight,
        "policy": asdict(ckpt.policy),
        "extra": ckpt.extra,
    }
    blocks = {f"site_{k:04d}": np.ascontiguousarray(t, dtype="<c16") for k, t in enumerate(state.tensors)}
    tmp = path.with_name(path.name + ".tmp.npz")
    np.savez(tmp, header=np.array(json.dumps(header)), **blocks)
    tmp.replace(path)
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        if header.get("format") != FORMAT:
            raise ValueError(f"{path}: not a checkpoint (format {header.get('format')!r})")
        tensors = [data[f"site_{k:04d}"].astype(complex) for k in range(header["n_sites"])]
    state = MPS(tensors, header["ortho_center"], header["norm_log"])
    state.discarded_weight = header["discarded_weight"]
    if state.phys_dims != header["phys_dims"]:
        raise ValueError(f"{path}: tensor shapes disagree with the header")
    return Checkpoint(
        state,
        float(header["time"]),
        TruncationPolicy(**header["policy"]),
        header["labels"],
        header.get("extra", {}),
    )
