"""Blinded reader-study sessions: assembly, responses, confusion tables, kappa.

A session mixes real and generated images under opaque item ids, records
per-reader real/fake calls, and derives per-group confusion tables in the
true/false positive/negative layout plus pairwise Cohen's kappa. State is
persisted as an append-only JSON-lines event log and rebuilt by replay.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConflictError,
    FormatError,
    InvalidInputError,
    InvalidStateError,
    NotFoundError,
)
from .imageset import ImageSet

SOURCE_GROUPS = ("original", "vanilla_vae", "dfc_vae", "intro_vae", "style_gan")
LABELS = ("real", "fake")


@dataclass(frozen=True)
class StudyItem:
    item_id: str
    image: np.ndarray
    source_group: str


@dataclass
class StudySession:
    """Shuffled item queue plus per-reader responses.

    ``responses`` maps item_id -> reader_id -> {"label", "timestamp"}.
    """

    session_id: str
    items: list[StudyItem]
    order_seed: int
    responses: dict[str, dict[str, dict]] = field(default_factory=dict)

    def item(self, item_id: str) -> StudyItem:
        for it in self.items:
            if it.item_id == item_id:
                return it
        raise NotFoundError(item_id)

    def readers(self) -> list[str]:
        seen = {}
        for per_item in self.responses.values():
            for reader in per_item:
                seen[reader] = True
        return list(seen)

    def answered(self, reader_id: str) -> int:
        return sum(1 for per_item in self.responses.values() if reader_id in per_item)

    def next_item(self, reader_id: str) -> StudyItem | None:
        for it in self.items:
            if reader_id not in self.responses.get(it.item_id, {}):
                return it
        return None


def create_session(
    real: ImageSet,
    fakes: dict[str, ImageSet],
    n_per_group: int = 50,
    seed: int = 0,
    session_id: str | None = None,
) -> StudySession:
    """Draw n_per_group images per group, shuffle, and blind the item ids.

    Assembly is a pure function of the inputs: the same sets, count, and
    seed always produce the same session (including its id).
    """
    if n_per_group < 1:
        raise InvalidInputError(f"n_per_group must be >= 1, got {n_per_group}")
    groups: dict[str, ImageSet] = {"original": real}
    for name in sorted(fakes):
        if name not in SOURCE_GROUPS or name == "original":
            raise InvalidInputError(f"unknown source group {name!r}")
        groups[name] = fakes[name]
    shape = (real.height, real.width)
    for name, image_set in groups.items():
        if len(image_set) < n_per_group:
            raise InvalidInputError(
                f"group {name!r} has {len(image_set)} images, needs {n_per_group}"
            )
        if (image_set.height, image_set.width) != shape:
            raise InvalidInputError(
                f"group {name!r} images are {image_set.height}x{image_set.width}, "
                f"expected {shape[0]}x{shape[1]} (size differences would leak provenance)"
            )

    rng = np.random.default_rng(seed)
    pool: list[tuple[np.ndarray, str]] = []
    for name, image_set in groups.items():
        chosen = rng.choice(len(image_set), size=n_per_group, replace=False)
        pool.extend((image_set.images[i], name) for i in chosen)
    order = rng.permutation(len(pool))

    if session_id is None:
        digest = hashlib.sha256()
        digest.update(f"{n_per_group}:{seed}:".encode())
        for name, image_set in groups.items():
            digest.update(name.encode())
            digest.update(image_set.images.tobytes())
        session_id = f"study-{digest.hexdigest()[:12]}"

    items = [
        StudyItem(item_id=f"item-{rank:04d}", image=pool[idx][0], source_group=pool[idx][1])
        for rank, idx in enumerate(order)
    ]
    return StudySession(session_id=session_id, items=items, order_seed=seed)


def record_response(
    session: StudySession,
    reader_id: str,
    item_id: str,
    label: str,
    overwrite: bool = False,
    timestamp: float | None = None,
) -> dict:
    """Record one reader's call on one item; duplicates conflict by default."""
    if label not in LABELS:
        raise InvalidInputError(f"label must be one of {LABELS}, got {label!r}")
    if not reader_id:
        raise InvalidInputError("reader_id must be non-empty")
    session.item(item_id)  # raises NotFoundError for unknown ids
    per_item = session.responses.setdefault(item_id, {})
    if reader_id in per_item and not overwrite:
        raise ConflictError(f"reader {reader_id!r} already answered {item_id}")
    record = {"label": label, "timestamp": time.time() if timestamp is None else timestamp}
    per_item[reader_id] = record
    return record


@dataclass(frozen=True)
class ConfusionTable:
    """Per-group classification counts for one reader.

    Originals map classified-real to true positives and classified-fake to
    false negatives; generated groups map classified-real to false positives
    and classified-fake to true negatives.
    """

    reader_id: str
    partial: bool
    per_group: dict[str, dict]

    def to_dict(self) -> dict:
        return {"reader_id": self.reader_id, "partial": self.partial, "groups": self.per_group}

    def outcome_layout(self) -> dict[str, dict[str, float]]:
        """Rows TP/FP/TN/FN -> per-group percentages, zero where undefined."""
        rows = {
            "true_positives": {},
            "false_positives": {},
            "true_negatives": {},
            "false_negatives": {},
        }
        for group, cell in self.per_group.items():
            real_pct, fake_pct = cell["percent_real"], cell["percent_fake"]
            if group == "original":
                rows["true_positives"][group] = real_pct
                rows["false_negatives"][group] = fake_pct
                rows["false_positives"][group] = 0.0
                rows["true_negatives"][group] = 0.0
            else:
                rows["false_positives"][group] = real_pct
                rows["true_negatives"][group] = fake_pct
                rows["true_positives"][group] = 0.0
                rows["false_negatives"][group] = 0.0
        return rows


def confusion_table(session: StudySession, reader_id: str) -> ConfusionTable:
    """Aggregate one reader's answers per source group.

    Percentages are relative to the answered count per group; tables built
    from incomplete sessions are flagged partial.
    """
    answered = session.answered(reader_id)
    if answered == 0:
        raise InvalidStateError(f"reader {reader_id!r} has no responses")
    per_group: dict[str, dict] = {}
    for item in session.items:
        cell = per_group.setdefault(
            item.source_group,
            {"n_items": 0, "answered": 0, "classified_real": 0, "classified_fake": 0},
        )
        cell["n_items"] += 1
        response = session.responses.get(item.item_id, {}).get(reader_id)
        if response is None:
            continue
        cell["answered"] += 1
        if response["label"] == "real":
            cell["classified_real"] += 1
        else:
            cell["classified_fake"] += 1
    partial = answered < len(session.items)
    for group, cell in per_group.items():
        denom = cell["answered"]
        cell["percent_real"] = 100.0 * cell["classified_real"] / denom if denom else 0.0
        cell["percent_fake"] = 100.0 * cell["classified_fake"] / denom if denom else 0.0
        if group == "original":
            cell["true_positives"] = cell["classified_real"]
            cell["false_negatives"] = cell["classified_fake"]
        else:
            cell["false_positives"] = cell["classified_real"]
            cell["true_negatives"] = cell["classified_fake"]
    return ConfusionTable(reader_id=reader_id, partial=partial, per_group=per_group)


def cohen_kappa(responses_a, responses_b) -> float:
    """Chance-corrected agreement between two real/fake label sequences.

    Accepts aligned sequences or two dicts keyed by the same item ids.
    Unanimous identical sequences (expected agreement 1) return 1 by
    convention.
    """
    if isinstance(responses_a, dict) or isinstance(responses_b, dict):
        if set(responses_a) != set(responses_b):
            raise InvalidInputError("label dicts cover different items")
        keys = sorted(responses_a)
        a = [responses_a[k] for k in keys]
        b = [responses_b[k] for k in keys]
    else:
        a, b = list(responses_a), list(responses_b)
        if len(a) != len(b):
            raise InvalidInputError(f"sequence lengths differ: {len(a)} vs {len(b)}")
    if not a:
        raise InvalidInputError("cannot compute kappa over zero items")
    for label in a + b:
        if label not in LABELS:
            raise InvalidInputError(f"unknown label {label!r}")
    n = len(a)
    p_o = sum(1 for x, y in zip(a, b) if x == y) / n
    p_e = sum((a.count(c) / n) * (b.count(c) / n) for c in LABELS)
    if p_e == 1.0:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


def export_report(session: StudySession, unblind: bool = False) -> dict:
    """Full session state: per-reader tables, pairwise kappa, and (only when
    unblinded) the item-to-group answer key."""
    readers = session.readers()
    total = len(session.items)
    tables = {}
    for reader in readers:
        table = confusion_table(session, reader)
        tables[reader] = {**table.to_dict(), "outcomes": table.outcome_layout()}
    kappas = {}
    for i, ra in enumerate(readers):
        for rb in readers[i + 1 :]:
            common = {
                item_id: per_item
                for item_id, per_item in session.responses.items()
                if ra in per_item and rb in per_item
            }
            if not common:
                continue
            a = {item_id: per_item[ra]["label"] for item_id, per_item in common.items()}
            b = {item_id: per_item[rb]["label"] for item_id, per_item in common.items()}
            kappas[f"{ra}|{rb}"] = cohen_kappa(a, b)
    report = {
        "session_id": session.session_id,
        "n_items": total,
        "readers": readers,
        "progress": {reader: session.answered(reader) for reader in readers},
        "complete": {reader: session.answered(reader) == total for reader in readers},
        "confusion_tables": tables,
        "kappa": kappas,
        "unblinded": unblind,
        "items": [
            {
                "item_id": item.item_id,
                "responses": {
                    reader: rec["label"]
                    for reader, rec in session.responses.get(item.item_id, {}).items()
                },
                **({"source_group": item.source_group} if unblind else {}),
            }
            for item in session.items
        ],
    }
    return report


# ---------------------------------------------------------------------------
# event-log persistence


class SessionStore:
    """Append-only JSON-lines event log per session, replayed on load.

    Every write is flushed and fsynced before the call returns, so an
    acknowledged response survives a crash.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, StudySession] = {}

    def _path(self, session_id: str) -> Path:
        return self.directory / f"{session_id}.jsonl"

    def _append(self, session_id: str, event: dict) -> None:
        with open(self._path(session_id), "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def create(
        self,
        real: ImageSet,
        fakes: dict[str, ImageSet],
        n_per_group: int = 50,
        seed: int = 0,
        session_id: str | None = None,
    ) -> StudySession:
        session = create_session(real, fakes, n_per_group, seed, session_id)
        if session.session_id in self._sessions or self._path(session.session_id).exists():
            raise ConflictError(f"session {session.session_id!r} already exists")
        height, width = session.items[0].image.shape
        event = {
            "event": "create",
            "session_id": session.session_id,
            "order_seed": session.order_seed,
            "height": height,
            "width": width,
            "items": [
                {
                    "item_id": item.item_id,
                    "source_group": item.source_group,
                    "image_b64": base64.b64encode(item.image.astype("<f4").tobytes()).decode(),
                }
                for item in session.items
            ],
        }
        self._append(session.session_id, event)
        self._sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> StudySession:
        if session_id in self._sessions:
            return self._sessions[session_id]
        path = self._path(session_id)
        if not path.exists():
            raise NotFoundError(session_id)
        session = self._replay(path)
        self._sessions[session_id] = session
        return session

    def list_ids(self) -> list[str]:
        on_disk = {p.stem for p in self.directory.glob("*.jsonl")}
        return sorted(on_disk | set(self._sessions))

    def record_response(
        self, session_id: str, reader_id: str, item_id: str, label: str, overwrite: bool = False
    ) -> dict:
        session = self.get(session_id)
        record = record_response(session, reader_id, item_id, label, overwrite)
        self._append(
            session_id,
            {
                "event": "response",
                "reader_id": reader_id,
                "item_id": item_id,
                "label": label,
                "timestamp": record["timestamp"],
                "overwrite": overwrite,
            },
        )
        return record

    def export_report(self, session_id: str, unblind: bool = False) -> dict:
        report = export_report(self.get(session_id), unblind)
        if unblind:
            self._append(session_id, {"event": "unblind", "timestamp": time.time()})
        return report

    def _replay(self, path: Path) -> StudySession:
        session: StudySession | None = None
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    event = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise FormatError(f"{path}:{line_no}: bad event: {exc}") from exc
                kind = event.get("event")
                if kind == "create":
                    height, width = event["height"], event["width"]
                    items = [
                        StudyItem(
                            item_id=entry["item_id"],
                            image=np.frombuffer(
                                base64.b64decode(entry["image_b64"]), dtype="<f4"
                            ).reshape(height, width).astype(np.float64),
                            source_group=entry["source_group"],
                        )
                        for entry in event["items"]
                    ]
                    session = StudySession(
                        session_id=event["session_id"],
                        items=items,
                        order_seed=event["order_seed"],
                    )
                elif kind == "response":
                    if session is None:
                        raise FormatError(f"{path}:{line_no}: response before create")
                    record_response(
                        session,
                        event["reader_id"],
                        event["item_id"],
                        event["label"],
                        overwrite=event.get("overwrite", False),
                        timestamp=event["timestamp"],
                    )
                elif kind == "unblind":
                    continue
                else:
                    raise FormatError(f"{path}:{line_no}: unknown event {kind!r}")
        if session is None:
            raise FormatError(f"{path}: no create event found")
        return session
