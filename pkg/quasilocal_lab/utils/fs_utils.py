import hashlib
import os
from pathlib import Path
from typing import Optional

from quasilocal_lab.constants import DEFAULT_OUT_DIRNAME, OUT_DIR_ENV


def resolve_out_dir(out_dir: Optional[Path] = None) -> Path:
    """Explicit argument, then $QLLAB_OUT_DIR, then ./_results."""
    if out_dir is not None:
        return Path(out_dir)
    env_dir = os.environ.get(OUT_DIR_ENV)
    if env_dir:
        return Path(env_dir)
    return Path.cwd() / DEFAULT_OUT_DIRNAME


def file_sha256(file_path: Path, chunk_size: int = 1024 * 1024) -> str:
    digest = hashlib.sha256()
    with open(file_path, "rb") as f:
        for chunk in iter(lambda: f.read(chunk_size), b""):
            digest.update(chunk)
    return digest.hexdigest()
