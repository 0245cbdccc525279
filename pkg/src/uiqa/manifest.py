"""Dataset manifest: image inventory with reference/distortion lineage."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Iterator, Optional

from .errors import DataError

MANIFEST_VERSION = 1


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    path: str
    content_group_id: str
    is_reference: bool = True
    is_target: bool = True
    distortion: Optional[dict[str, Any]] = None
    reference_id: Optional[str] = None

    def to_json(self) -> dict[str, Any]:
        return {
            "image_id": self.image_id,
            "path": self.path,
            "content_group_id": self.content_group_id,
            "is_reference": self.is_reference,
            "is_target": self.is_target,
            "distortion": self.distortion,
            "reference_id": self.reference_id,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> ManifestEntry:
        try:
            return cls(
                image_id=str(obj["image_id"]),
                path=str(obj["path"]),
                content_group_id=str(obj["content_group_id"]),
                is_reference=bool(obj.get("is_reference", True)),
                is_target=bool(obj.get("is_target", True)),
                distortion=obj.get("distortion"),
                reference_id=obj.get("reference_id"),
            )
        except KeyError as exc:
            raise DataError(f"manifest entry missing field {exc.args[0]!r}: {obj}") from None


@dataclass
class DatasetManifest:
    """Ordered image inventory.

    ``root`` is the directory entry paths are resolved against; it is not
    serialized, so a manifest file stays valid when its directory moves.
    """

    entries: list[ManifestEntry] = field(default_factory=list)
    root: Path = field(default_factory=Path)

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        ids: dict[str, ManifestEntry] = {}
        for e in self.entries:
            if e.image_id in ids:
                raise DataError(f"duplicate image_id {e.image_id!r}")
            ids[e.image_id] = e
        for e in self.entries:
            if e.is_reference:
                if e.distortion is not None:
                    raise DataError(f"reference {e.image_id!r} must not carry a distortion")
                continue
            ref = ids.get(e.reference_id or "")
            if ref is None or not ref.is_reference:
                raise DataError(
                    f"entry {e.image_id!r} names missing reference {e.reference_id!r}"
                )
            if ref.content_group_id != e.content_group_id:
                raise DataError(
                    f"entry {e.image_id!r} is in group {e.content_group_id!r} but its "
                    f"reference is in {ref.content_group_id!r}"
                )

    def __iter__(self) -> Iterator[ManifestEntry]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def by_id(self) -> dict[str, ManifestEntry]:
        return {e.image_id: e for e in self.entries}

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.path)
        return p if p.is_absolute() else self.root / p

    def references(self) -> list[ManifestEntry]:
        return [e for e in self.entries if e.is_reference]

    def content_groups(self) -> dict[str, str]:
        return {e.image_id: e.content_group_id for e in self.entries}

    def with_root(self, root: Path) -> DatasetManifest:
        return DatasetManifest(list(self.entries), Path(root))

    def extended(self, new: Iterable[ManifestEntry]) -> DatasetManifest:
        return DatasetManifest(list(self.entries) + list(new), self.root)

    def to_json(self) -> dict[str, Any]:
        return {"version": MANIFEST_VERSION, "entries": [e.to_json() for e in self.entries]}

    @classmethod
    def from_json(cls, obj: dict[str, Any], root: Path = Path()) -> DatasetManifest:
        if obj.get("version") != MANIFEST_VERSION:
            raise DataError(f"unsupported manifest version {obj.get('version')!r}")
        return cls([ManifestEntry.from_json(e) for e in obj["entries"]], Path(root))


def read_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    return DatasetManifest.from_json(obj, root=path.parent)


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    text = json.dumps(manifest.to_json(), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def relocate(entry: ManifestEntry, path: str) -> ManifestEntry:
    return replace(entry, path=path)
