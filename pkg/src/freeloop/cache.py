"""Content-addressed disk cache for realized operator data.

Keys are canonical JSON documents hashed with sha256; payloads are npz
archives stored next to their key document.  A corrupt or mismatched
entry is treated as a miss and recomputed, never trusted.
"""

from __future__ import annotations

import json
import warnings
from pathlib import Path

import numpy as np

from .loops import GnsWorkspace
from .reports import sha256_text


class CacheIntegrityWarning(UserWarning):
    pass


class DiskCache:
    def __init__(self, root: Path | str | None):
        self.root = Path(root) if root is not None else None
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)

    @property
    def enabled(self) -> bool:
        return self.root is not None

    @staticmethod
    def key_of(doc: dict) -> str:
        return sha256_text(json.dumps(doc, sort_keys=True, separators=(",", ":")))

    def store(self, doc: dict, arrays: dict[str, np.ndarray]) -> None:
        if not self.enabled:
            return
        key = self.key_of(doc)
        np.savez_compressed(self.root / f"{key}.npz", **arrays)
        (self.root / f"{key}.json").write_text(
            json.dumps(doc, sort_keys=True, indent=2), encoding="utf-8")

    def load(self, doc: dict) -> dict[str, np.ndarray] | None:
        if not self.enabled:
            return None
        key = self.key_of(doc)
        path = self.root / f"{key}.npz"
        if not path.exists():
            return None
        try:
            with np.load(path) as z:
                return {k: z[k] for k in z.files}
        except Exception:
            warnings.warn(f"cache entry {key} unreadable; recomputing",
                          CacheIntegrityWarning, stacklevel=2)
            return None


def _loop_key(loop: tuple[int, ...]) -> str:
    return ",".join(str(e) for e in loop[1:])


def save_word_entries(cache: DiskCache, ws: GnsWorkspace, graph_hash: str,
                      max_degree: int) -> int:
    """Persist realized word entries for loops up to the given degree."""
    if not cache.enabled:
        return 0
    arrays: dict[str, np.ndarray] = {}
    count = 0
    for loop in ws.basis.elements:
        if len(loop) - 1 > max_degree:
            continue
        r, c, d = ws.word_entries(loop)
        lk = _loop_key(loop)
        arrays[f"r{lk}"] = r
        arrays[f"c{lk}"] = c
        arrays[f"d{lk}"] = d
        count += 1
    doc = {"kind": "wick_entries", "graph": graph_hash,
           "cutoff": ws.cutoff, "max_degree": max_degree}
    cache.store(doc, arrays)
    return count


def load_word_entries(cache: DiskCache, ws: GnsWorkspace, graph_hash: str,
                      max_degree: int) -> int:
    """Prefill a workspace's word entries from the cache; returns the count."""
    doc = {"kind": "wick_entries", "graph": graph_hash,
           "cutoff": ws.cutoff, "max_degree": max_degree}
    arrays = cache.load(doc)
    if arrays is None:
        return 0
    count = 0
    for loop in ws.basis.elements:
        if len(loop) - 1 > max_degree:
            continue
        lk = _loop_key(loop)
        if f"r{lk}" not in arrays:
            warnings.warn("cache entry incomplete; recomputing",
                          CacheIntegrityWarning, stacklevel=2)
            return 0
        ws._entries[loop] = (arrays[f"r{lk}"], arrays[f"c{lk}"], arrays[f"d{lk}"])
        count += 1
    return count
