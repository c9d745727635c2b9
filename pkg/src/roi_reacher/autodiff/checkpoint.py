#  Copyright 2022, roi-reacher authors
#
#  Licensed under the Apache License, Version 2.0 (the "License");
#  you may not use this file except in compliance with the License.
#  You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
#  Unless required by applicable law or agreed to in writing, software
#  distributed under the License is distributed on an "AS IS" BASIS,
#  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#  See the License for the specific language governing permissions and
#  limitations under the License.

"""
Binary container for named float32 tensors. Byte layout is documented in docs/checkpoint_format.md.
"""

import hashlib
import json
import logging
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from roi_reacher.utils.errors import CheckpointError


MAGIC = b"RRCKPT\x00\x00"
FORMAT_VERSION = 1
HASH_SIZE = 32
_HEADER = struct.Struct("<8sI32s")
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")
_U8 = struct.Struct("<B")
_U64_PAIR = struct.Struct("<QQ")


@dataclass
class Checkpoint:
    """
    :param descriptor: architecture description, hashed into the header
    :param metadata: any JSON document (config hash, optimizer scalars, counters)
    :param tensors: named arrays, stored as float32 in insertion order
    """

    descriptor: Dict[str, Any]
    metadata: Dict[str, Any] = field(default_factory=dict)
    tensors: Dict[str, np.ndarray] = field(default_factory=OrderedDict)

    @property
    def architecture_hash(self) -> bytes:
        return architecture_hash(self.descriptor)


def architecture_hash(descriptor: Dict[str, Any]) -> bytes:
    text = json.dumps(descriptor, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).digest()


def to_bytes(checkpoint: Checkpoint) -> bytes:
    meta = json.dumps(
        {"descriptor": checkpoint.descriptor, "metadata": checkpoint.metadata}, sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, checkpoint.architecture_hash), _U32.pack(len(meta)), meta]
    parts.append(_U32.pack(len(checkpoint.tensors)))
    payloads = list()
    offset = 0
    for name, value in checkpoint.tensors.items():
        array = np.ascontiguousarray(value, dtype="<f4")
        encoded_name = name.encode("utf-8")
        parts.append(_U16.pack(len(encoded_name)))
        parts.append(encoded_name)
        parts.append(_U8.pack(array.ndim))
        parts.extend(_U32.pack(d) for d in array.shape)
        parts.append(_U64_PAIR.pack(offset, array.size))
        payloads.append(array.tobytes(order="C"))
        offset += array.size * 4
    return b"".join(parts + payloads)


class _Reader:
    def __init__(self, content: bytes):
        self.content = content
        self.position = 0

    def take(self, size: int) -> bytes:
        if self.position + size > len(self.content):
            raise CheckpointError("corrupt checkpoint: truncated header")
        chunk = self.content[self.position : self.position + size]
        self.position += size
        return chunk

    def unpack(self, fmt: struct.Struct):
        return fmt.unpack(self.take(fmt.size))


def from_bytes(content: bytes, expected_descriptor: Optional[Dict[str, Any]] = None) -> Checkpoint:
    reader = _Reader(content)
    if len(content) < _HEADER.size or content[: len(MAGIC)] != MAGIC:
        raise CheckpointError("not a checkpoint: bad magic")
    _, version, arch_hash = reader.unpack(_HEADER)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format version {version}, expected {FORMAT_VERSION}")
    if expected_descriptor is not None and arch_hash != architecture_hash(expected_descriptor):
        raise CheckpointError(
            "architecture hash mismatch: checkpoint was saved for another network "
            f"(expected {json.dumps(expected_descriptor, sort_keys=True)})"
        )
    (meta_size,) = reader.unpack(_U32)
    try:
        meta = json.loads(reader.take(meta_size).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"corrupt checkpoint: unreadable metadata ({e})")
    if not isinstance(meta, dict) or "descriptor" not in meta or "metadata" not in meta:
        raise CheckpointError("corrupt checkpoint: metadata block is incomplete")
    if architecture_hash(meta["descriptor"]) != arch_hash:
        raise CheckpointError("corrupt checkpoint: descriptor doesn't match the architecture hash")
    (count,) = reader.unpack(_U32)
    directory = list()
    for _ in range(count):
        (name_size,) = reader.unpack(_U16)
        name = reader.take(name_size).decode("utf-8")
        (ndim,) = reader.unpack(_U8)
        shape = tuple(reader.unpack(_U32)[0] for _ in range(ndim))
        offset, size = reader.unpack(_U64_PAIR)
        if int(np.prod(shape, dtype=np.int64)) != size:
            raise CheckpointError(f"corrupt checkpoint: tensor {name} has shape {shape} but {size} elements")
        directory.append((name, shape, offset, size))
    payload = content[reader.position :]
    expected_payload = sum(size for _, _, _, size in directory) * 4
    if len(payload) != expected_payload:
        raise CheckpointError(f"corrupt checkpoint: payload is {len(payload)} bytes, expected {expected_payload}")
    tensors = OrderedDict()
    for name, shape, offset, size in directory:
        if offset + size * 4 > len(payload):
            raise CheckpointError(f"corrupt checkpoint: tensor {name} is out of the payload")
        array = np.frombuffer(payload, dtype="<f4", count=size, offset=offset).reshape(shape)
        tensors[name] = array.astype(np.float32)
    return Checkpoint(descriptor=meta["descriptor"], metadata=meta["metadata"], tensors=tensors)


def save_checkpoint(checkpoint: Checkpoint, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as f:
        f.write(to_bytes(checkpoint))
    logging.info("checkpoint saved to %s (%d tensors)", path, len(checkpoint.tensors))


def load_checkpoint(path: Union[str, Path], expected_descriptor: Optional[Dict[str, Any]] = None) -> Checkpoint:
    """
    :param path: checkpoint file
    :param expected_descriptor: when provided, the architecture hash has to match
    :return: checkpoint content
    """
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    with path.open("rb") as f:
        return from_bytes(f.read(), expected_descriptor=expected_descriptor)
