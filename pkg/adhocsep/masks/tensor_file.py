"""Binary tensor container shared by masks, spectrograms, filters and covariances.

Layout (little-endian):

```
8 bytes   magic "DSTNSR01"
u32       dtype code (1=float32, 2=float64, 3=complex64, 4=complex128)
u32       ndim
u32 * ndim  dims
...       row-major payload
```

An optional sidecar `<path>.json` holds free-form metadata (node id, step tag,
config hash, channel labels).
"""

import json
import os
import struct
from typing import Any

import numpy as np

from adhocsep.errors import FormatError

MAGIC = b"DSTNSR01"

DTYPE_CODES: dict[int, np.dtype] = {
    1: np.dtype("<f4"),
    2: np.dtype("<f8"),
    3: np.dtype("<c8"),
    4: np.dtype("<c16"),
}
_CODE_OF = {dtype: code for code, dtype in DTYPE_CODES.items()}


def sidecar_path(path: str) -> str:
    return f"{path}.json"


def write_tensor(
    path: str, array: np.ndarray, metadata: dict[str, Any] | None = None
) -> None:
    """Write `array` to `path`, plus the metadata sidecar when given."""
    array = np.asarray(array)
    dtype = array.dtype.newbyteorder("<")
    if dtype not in _CODE_OF:
        raise FormatError(f"Unsupported tensor dtype {array.dtype}")
    header = MAGIC + struct.pack(
        f"<II{array.ndim}I", _CODE_OF[dtype], array.ndim, *array.shape
    )
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(array, dtype=dtype).tobytes(order="C"))
    if metadata is not None:
        with open(sidecar_path(path), "w") as f:
            json.dump(metadata, f, indent=4)


def read_tensor(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < len(MAGIC) + 8 or blob[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: missing DSTNSR01 magic")
    offset = len(MAGIC)
    code, ndim = struct.unpack_from("<II", blob, offset)
    offset += 8
    if code not in DTYPE_CODES:
        raise FormatError(f"{path}: unknown dtype code {code}")
    if len(blob) < offset + 4 * ndim:
        raise FormatError(f"{path}: truncated header")
    dims = struct.unpack_from(f"<{ndim}I", blob, offset)
    offset += 4 * ndim
    dtype = DTYPE_CODES[code]
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    if len(blob) - offset != expected:
        raise FormatError(
            f"{path}: payload holds {len(blob) - offset} bytes, header declares {expected}"
        )
    return np.frombuffer(blob, dtype=dtype, offset=offset).reshape(dims).copy()


def read_tensor_metadata(path: str) -> dict[str, Any] | None:
    if not os.path.exists(sidecar_path(path)):
        return None
    with open(sidecar_path(path)) as f:
        return json.load(f)
