"""
Binary checkpoints of field data.

Layout: magic ``HGLB``, format version (uint16), header length (uint32), UTF-8 JSON
header, then per entry a little-endian complex128 row-major payload followed by
its SHA-256 digest.
"""
import hashlib
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from core.errors import CheckpointError
from models.enums import FieldRole
from models.fields import HermitianField, MatrixFormField
from models.geometry import TorusGeometry

logger = logging.getLogger(__name__)

MAGIC = b'HGLB'
FORMAT_VERSION = 1
DIGEST_SIZE = 32
DTYPE = np.dtype('<c16')

FieldData = Union[HermitianField, MatrixFormField, np.ndarray]


@dataclass(eq=False)
class Checkpoint:
    """
    Decoded checkpoint.

    Attributes:
        geometry: Torus the fields live on
        rank: Bundle rank
        fields: Named fields (metrics as HermitianField, forms as MatrixFormField)
        meta: Free-form metadata stored in the header (seed, ε, t, command)
    """

    geometry: TorusGeometry
    rank: int
    fields: Dict[str, FieldData] = field(default_factory=dict)
    meta: Dict[str, Any] = field(default_factory=dict)


def _entries(name: str, data: FieldData):
    if isinstance(data, HermitianField):
        yield {'name': name, 'kind': 'hermitian', 'role': data.role.value}, data.values
    elif isinstance(data, MatrixFormField):
        if not data.components:
            yield {'name': name, 'kind': 'form', 'key': None, 'matrix_shape': list(data.matrix_shape)}, None
        for (I, J), values in sorted(data.components.items()):
            yield {'name': name, 'kind': 'form', 'key': [list(I), list(J)],
                   'matrix_shape': list(data.matrix_shape)}, values
    else:
        yield {'name': name, 'kind': 'array'}, np.asarray(data)


def save_checkpoint(path: Path, geometry: TorusGeometry, rank: int, fields: Dict[str, FieldData],
                    meta: Optional[Dict[str, Any]] = None) -> Path:
    """
    Write fields to a checkpoint file.

    Args:
        path: Output file
        geometry: Torus of every field
        rank: Bundle rank
        fields: Named fields
        meta: Extra header metadata

    Returns:
        Path written
    """
    path = Path(path)
    entries, payloads = [], []
    for name, data in fields.items():
        for entry, values in _entries(name, data):
            if values is None:
                entry['shape'] = []
                payloads.append(b'')
            else:
                array = np.ascontiguousarray(values, dtype=DTYPE)
                entry['shape'] = list(array.shape)
                payloads.append(array.tobytes(order='C'))
            entries.append(entry)

    header = {
        'n': geometry.n,
        'periods': list(geometry.periods),
        'grid': list(geometry.grid),
        'metric': {'re': np.real(geometry.metric).tolist(), 'im': np.imag(geometry.metric).tolist()},
        'dealias': geometry.dealias,
        'rank': rank,
        'entries': entries,
        'meta': meta or {},
    }
    raw_header = json.dumps(header).encode('utf-8')

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(MAGIC)
        f.write(struct.pack('<HI', FORMAT_VERSION, len(raw_header)))
        f.write(raw_header)
        for payload in payloads:
            f.write(payload)
            f.write(hashlib.sha256(payload).digest())
    logger.debug("checkpoint %s: %d entries", path, len(entries))
    return path


def _geometry_from_header(header: Dict[str, Any]) -> TorusGeometry:
    metric = np.array(header['metric']['re']) + 1j * np.array(header['metric']['im'])
    return TorusGeometry(n=header['n'], periods=tuple(header['periods']), grid=tuple(header['grid']),
                         metric=metric, dealias=header.get('dealias', True))


def load_checkpoint(path: Path, geometry: Optional[TorusGeometry] = None) -> Checkpoint:
    """
    Read a checkpoint file.

    Args:
        path: Checkpoint file
        geometry: Expected torus; a different resolution is refused

    Returns:
        Checkpoint

    Raises:
        CheckpointError: Bad magic, unsupported version, truncation, checksum
            mismatch or resolution mismatch
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e

    if data[:4] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint (bad magic)")
    if len(data) < 10:
        raise CheckpointError(f"{path} is truncated")
    version, header_len = struct.unpack('<HI', data[4:10])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}, expected {FORMAT_VERSION}")
    try:
        header = json.loads(data[10:10 + header_len].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"corrupt checkpoint header: {e}") from e

    stored = _geometry_from_header(header)
    if geometry is not None and not stored.compatible(geometry):
        raise CheckpointError(f"checkpoint grid {stored.grid} does not match the run grid {geometry.grid}")
    geometry = geometry or stored

    checkpoint = Checkpoint(geometry=geometry, rank=header['rank'], meta=header.get('meta', {}))
    offset = 10 + header_len
    for entry in header['entries']:
        count = int(np.prod(entry['shape'])) if entry['shape'] else 0
        size = count * DTYPE.itemsize
        payload = data[offset:offset + size]
        digest = data[offset + size:offset + size + DIGEST_SIZE]
        if len(payload) != size or len(digest) != DIGEST_SIZE:
            raise CheckpointError(f"checkpoint truncated in entry '{entry['name']}'")
        if hashlib.sha256(payload).digest() != digest:
            raise CheckpointError(f"checksum mismatch in entry '{entry['name']}'")
        offset += size + DIGEST_SIZE
        values = np.frombuffer(payload, dtype=DTYPE).reshape(entry['shape']) if count else None

        name = entry['name']
        if entry['kind'] == 'hermitian':
            checkpoint.fields[name] = HermitianField(geometry, values.copy(), FieldRole(entry['role']))
        elif entry['kind'] == 'form':
            form = checkpoint.fields.setdefault(
                name, MatrixFormField(geometry, {}, tuple(entry['matrix_shape'])))
            if entry['key'] is not None:
                form.components[(tuple(entry['key'][0]), tuple(entry['key'][1]))] = values.copy()
        else:
            checkpoint.fields[name] = values.copy()
    return checkpoint


__all__ = ['MAGIC', 'FORMAT_VERSION', 'Checkpoint', 'save_checkpoint', 'load_checkpoint']
