"""检查点二进制格式

小端布局::

    b"XMAL" | u32 版本 | u32 配置长度 | 配置文本(UTF-8 TOML)
    重复直到文件结束:
        u32 名称长度 | 名称 | u32 秩 | 秩 × u32 维度 | fp64 数据

读写往返逐位一致。
"""

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Union

import numpy as np

from ..config import canonical_text, parse_bundle_config
from ..exceptions import CheckpointError
from ..logger import get_logger
from ..types.configs import BundleConfig

MAGIC = b"XMAL"
FORMAT_VERSION = 1

logger = get_logger(__name__)


@dataclass
class CheckpointFile:
    config: BundleConfig
    state: Dict[str, np.ndarray]
    version: int = FORMAT_VERSION


def encode_checkpoint(config: BundleConfig, state: Dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<I", FORMAT_VERSION)]
    config_bytes = canonical_text(config).encode("utf-8")
    parts.append(struct.pack("<I", len(config_bytes)))
    parts.append(config_bytes)
    for name in sorted(state):
        array = np.asarray(state[name], dtype=np.float64)
        name_bytes = name.encode("utf-8")
        parts.append(struct.pack("<I", len(name_bytes)))
        parts.append(name_bytes)
        parts.append(struct.pack("<I", array.ndim))
        parts.append(struct.pack(f"<{array.ndim}I", *array.shape))
        parts.append(array.astype("<f8").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.offset = 0
        self.path = path

    def take(self, size: int, what: str) -> bytes:
        if self.offset + size > len(self.data):
            raise CheckpointError(
                f"truncated checkpoint while reading {what}", path=self.path
            )
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    @property
    def exhausted(self) -> bool:
        return self.offset >= len(self.data)


def decode_checkpoint(data: bytes, path: str = "<bytes>") -> CheckpointFile:
    reader = _Reader(data, path)
    if reader.take(4, "magic") != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)", path=path)
    version = reader.u32("version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}", path=path)
    config_length = reader.u32("config length")
    config_text = reader.take(config_length, "config block").decode("utf-8")
    config = parse_bundle_config(config_text)

    state: Dict[str, np.ndarray] = {}
    while not reader.exhausted:
        name = reader.take(reader.u32("name length"), "parameter name").decode("utf-8")
        rank = reader.u32(f"rank of '{name}'")
        dims = struct.unpack(f"<{rank}I", reader.take(4 * rank, f"dims of '{name}'"))
        count = int(np.prod(dims)) if rank else 1
        payload = reader.take(8 * count, f"payload of '{name}'")
        if name in state:
            raise CheckpointError(
                f"duplicate parameter '{name}'", path=path, parameter=name
            )
        state[name] = (
            np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(dims)
        )
    return CheckpointFile(config=config, state=state, version=version)


def save_checkpoint(
    path: Union[str, Path], config: BundleConfig, state: Dict[str, np.ndarray]
) -> str:
    """写出检查点，返回其内容哈希"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = encode_checkpoint(config, state)
    path.write_bytes(data)
    digest = blob_hash(data)
    logger.debug(f"saved checkpoint {path} ({len(state)} tensors, {digest[:12]})")
    return digest


def load_checkpoint(path: Union[str, Path]) -> CheckpointFile:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}", path=str(path))
    return decode_checkpoint(path.read_bytes(), str(path))


def blob_hash(data: bytes) -> str:
    """git 风格的内容哈希：sha1(b"blob <len>\\0" + data)"""
    header = f"blob {len(data)}\0".encode("ascii")
    return hashlib.sha1(header + data).hexdigest()


def file_hash(path: Union[str, Path]) -> str:
    return blob_hash(Path(path).read_bytes())
