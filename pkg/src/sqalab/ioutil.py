"""Small shared text I/O helpers."""

from __future__ import annotations

import os
from contextlib import contextmanager
from pathlib import Path


@contextmanager
def open_text(source):
    """Yield a readable text stream for a path, passing open files through."""
    if hasattr(source, "read"):
        yield source
    else:
        with open(source, "r", encoding="utf-8-sig", newline="") as f:
            yield f


def atomic_write_text(path, text: str) -> Path:
    """Write ``text`` to ``path`` via a same-directory temp file and rename.

    Readers never observe a partially written file.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)
    return path
