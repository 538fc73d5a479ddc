"""In-memory state behind the HTTP service."""

import threading
from dataclasses import dataclass, field


class RevisionConflictError(Exception):
    """An update named a revision that is no longer current."""


@dataclass
class StoredPattern:
    id: str
    revision: int
    document: object


class DocumentStore:
    """Id-keyed pattern store with version-check updates.

    Concurrent writers are serialized; an update must name the revision it
    read, and loses with a conflict if someone else committed first.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._rows = {}
        self._serial = 0

    def create(self, document) -> StoredPattern:
        with self._lock:
            self._serial += 1
            row = StoredPattern("p%d" % self._serial, 1, document)
            self._rows[row.id] = row
            return row

    def get(self, pattern_id: str):
        with self._lock:
            return self._rows.get(pattern_id)

    def list(self) -> list:
        with self._lock:
            return list(self._rows.values())

    def update(self, pattern_id: str, document, expected_revision: int) -> StoredPattern:
        with self._lock:
            row = self._rows.get(pattern_id)
            if row is None:
                raise KeyError(pattern_id)
            if row.revision != expected_revision:
                raise RevisionConflictError(
                    "pattern %s is at revision %d, update expected %d"
                    % (pattern_id, row.revision, expected_revision))
            row = StoredPattern(pattern_id, row.revision + 1, document)
            self._rows[pattern_id] = row
            return row

    def delete(self, pattern_id: str) -> bool:
        with self._lock:
            return self._rows.pop(pattern_id, None) is not None


@dataclass
class Session:
    """Playback state for one pattern; the session id is the pattern id."""

    pattern_id: str
    status: str = "STOPPED"
    cursor_ms: float = 0.0
    from_ms: float = 0.0
    frames: list = field(default_factory=list)
    served: int = 0


class SessionManager:
    """Sessions keyed by pattern id; one mutation at a time."""

    def __init__(self):
        self.lock = threading.Lock()
        self._rows = {}

    def session(self, pattern_id: str) -> Session:
        # call with self.lock held
        if pattern_id not in self._rows:
            self._rows[pattern_id] = Session(pattern_id)
        return self._rows[pattern_id]

    def drop(self, pattern_id: str):
        with self.lock:
            self._rows.pop(pattern_id, None)
