from __future__ import annotations

import hashlib
import json
import os
import re
import tempfile
import unicodedata
from pathlib import Path

_WS = re.compile(r"\s+")


def canonical_text(text: str) -> str:
    """NFC-normalize, trim, and collapse internal whitespace runs to one space."""
    return _WS.sub(" ", unicodedata.normalize("NFC", text)).strip()


def sha256_hex(data: str | bytes) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def text_key(text: str) -> str:
    return sha256_hex(canonical_text(text))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def derive_seed(root: int, *labels) -> int:
    """Deterministic 63-bit child seed from a root seed and a label path."""
    digest = hashlib.sha256(canonical_json([int(root), *[str(x) for x in labels]]).encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
