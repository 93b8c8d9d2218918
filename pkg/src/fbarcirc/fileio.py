"""Small file helpers shared by the exporters and the CLI."""

from __future__ import annotations

import hashlib
import os
import tempfile


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the same directory plus rename."""
    path = str(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp_", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fingerprint(text: str) -> str:
    """Short stable hash of a config text, for provenance comments."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
