from __future__ import annotations

import hashlib


class TraceDigest:
    """Running sha256 over processed events; equal digests mean equal traces."""

    def __init__(self) -> None:
        self._digest = hashlib.sha256()
        self.count = 0

    def update(self, time_ns: int, kind: int, node: int, detail: int = -1) -> None:
        self._digest.update(f"{time_ns}:{kind}:{node}:{detail};".encode("ascii"))
        self.count += 1

    def hexdigest(self) -> str:
        return self._digest.hexdigest()[:32]
