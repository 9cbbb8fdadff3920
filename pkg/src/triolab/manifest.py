"""Run manifests: everything needed to reproduce a run bit-for-bit."""

from __future__ import annotations

import json
import os
import tempfile
import time

from . import __version__


def build_manifest(command: str, seed: int, config_text: str, outputs: dict[str, str],
                   wall_clock_s: float, extra: dict | None = None) -> dict:
    manifest = {
        "command": command,
        "seed": seed,
        "version": __version__,
        "config": config_text,
        "outputs": outputs,
        "wall_clock_s": round(wall_clock_s, 3),
        "created_unix": int(time.time()),
    }
    if extra:
        manifest.update(extra)
    return manifest


def write_manifest(path: str, manifest: dict) -> None:
    """Atomic write: the manifest appears complete or not at all."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_manifest(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)
