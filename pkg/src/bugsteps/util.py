"""Small shared helpers: seed derivation, canonical JSON, fingerprints."""

from __future__ import annotations

import hashlib
import json


def derive_seed(seed: int, label: str) -> int:
    """Stable named sub-seed so all randomness flows from one root seed."""
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def fingerprint(doc) -> str:
    """Content hash of a JSON-serializable document."""
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()
