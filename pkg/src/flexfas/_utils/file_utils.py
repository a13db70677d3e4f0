import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Callable

from ..root import ROOT_PATH


def _get_proj_root() -> Path:
    return ROOT_PATH


def read_and_close_file_to_root(path_to_root_str: str) -> str:
    return read_and_close_file(_get_proj_root() / path_to_root_str)


def read_and_close_file(path: str | Path) -> str:
    if isinstance(path, str):
        path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except FileNotFoundError:
        raise FileNotFoundError(f'File {path} not found')

    return text


def atomic_write(path: str | Path, writer: Callable[[Path], None]):
    """
    Write through a temporary file in the destination directory, then rename it into place,
    so a reader never sees a half-written output.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f'.{path.name}.', suffix='.tmp', dir=path.parent)
    os.close(fd)
    tmp_path = Path(tmp_name)
    try:
        writer(tmp_path)
        os.replace(tmp_path, path)
    finally:
        if tmp_path.exists():
            tmp_path.unlink()


def atomic_write_text(path: str | Path, text: str):
    atomic_write(path, lambda tmp: tmp.write_text(text, encoding='utf-8'))


def atomic_write_json(path: str | Path, obj: Any):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + '\n')


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(',', ':'))


def sha256_of_obj(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode('utf-8')).hexdigest()


def sha256_of_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
