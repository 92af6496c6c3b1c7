"""
チェックポイントの保存と読み込み

バイト配置（全てリトルエンディアン）:
    8 bytes   マジック b'SRLCKPT\\x00'
    uint32    書式バージョン
    uint32    ヘッダ長 N
    N bytes   ヘッダ JSON（UTF-8、キー整列、区切り ',' ':'）
    uint32    テンソル数
    テンソルごと:
        uint16  名前長 K, K bytes 名前（UTF-8）
        uint8   次元数 R, R × uint32 形状
        float64 × 要素数（'<f8'、行優先）
"""
import json
import logging
import struct
from typing import Any, Dict, Tuple

import numpy as np

from srl_toolkit.exceptions import CheckpointError
from .tensor import ModelParams

logger = logging.getLogger(__name__)

MAGIC = b'SRLCKPT\x00'
FORMAT_VERSION = 1


def dumps(params: ModelParams, header: Dict[str, Any]) -> bytes:
    """同じ入力からは常に同じバイト列"""
    header = dict(header, frozen=sorted(params.frozen))
    header_bytes = json.dumps(header, sort_keys=True, separators=(',', ':'), ensure_ascii=False).encode('utf-8')
    chunks = [MAGIC, struct.pack('<II', FORMAT_VERSION, len(header_bytes)), header_bytes]
    chunks.append(struct.pack('<I', len(params)))
    for name, value in params.items():
        name_bytes = name.encode('utf-8')
        chunks.append(struct.pack('<H', len(name_bytes)))
        chunks.append(name_bytes)
        chunks.append(struct.pack('<B', value.ndim))
        chunks.append(struct.pack(f'<{value.ndim}I', *value.shape))
        chunks.append(np.ascontiguousarray(value, dtype='<f8').tobytes())
    return b''.join(chunks)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise CheckpointError("truncated checkpoint", offset=self.offset)
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def loads(data: bytes) -> Tuple[Dict[str, Any], ModelParams]:
    reader = _Reader(data)
    if reader.take(len(MAGIC)) != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version, header_length = reader.unpack('<II')
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        header = json.loads(reader.take(header_length).decode('utf-8'))
    except ValueError as e:
        raise CheckpointError(f"corrupt checkpoint header: {e}")

    (count,) = reader.unpack('<I')
    tensors = {}
    for _ in range(count):
        (name_length,) = reader.unpack('<H')
        name = reader.take(name_length).decode('utf-8')
        (ndim,) = reader.unpack('<B')
        shape = reader.unpack(f'<{ndim}I') if ndim else ()
        size = int(np.prod(shape)) if ndim else 1
        tensors[name] = np.frombuffer(reader.take(8 * size), dtype='<f8').reshape(shape).astype(np.float64)
    if reader.offset != len(data):
        raise CheckpointError("trailing bytes after last tensor", offset=reader.offset)
    frozen = header.pop('frozen', [])
    return header, ModelParams(tensors, frozen=frozen)


def save_checkpoint(path, params: ModelParams, header: Dict[str, Any]) -> None:
    data = dumps(params, header)
    with open(path, 'wb') as handle:
        handle.write(data)
    logger.info(f"event=checkpoint_saved path={path} tensors={len(params)} bytes={len(data)}")


def load_checkpoint(path) -> Tuple[Dict[str, Any], ModelParams]:
    try:
        with open(path, 'rb') as handle:
            data = handle.read()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint: {e.strerror}", path=path)
    return loads(data)
