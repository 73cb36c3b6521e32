"""Versioned JSON model files and run manifests.

Files are written with a fixed key order and ``repr``-exact floats, so identical
runs produce byte-identical output.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .corpus import SeedLexicon
from .errors import ParseError
from .student import StudentModel
from .teacher import SeedQualityTable

FORMAT = "seeddistill.model"
FORMAT_VERSION = 1


@dataclass
class ModelBundle:
    """A student together with the teacher (lexicon + seed quality) it was paired with."""

    lexicon: SeedLexicon
    quality: SeedQualityTable
    student: StudentModel
    rounds: list[dict] = field(default_factory=list)
    cotrain: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "tool_version": __version__,
            "lexicon": {"aspects": list(self.lexicon.aspects), "seeds": [list(s) for s in self.lexicon.seeds]},
            "stem": self.lexicon.stem,
            "quality": self.quality.to_dict(),
            "student": self.student.to_dict(),
            "cotrain": dict(self.cotrain),
            "rounds": list(self.rounds),
            "inputs": dict(self.inputs),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelBundle":
        if obj.get("format") != FORMAT:
            raise ParseError(f"not a {FORMAT} file")
        if obj.get("version") != FORMAT_VERSION:
            raise ParseError(f"unsupported model version {obj.get('version')!r}")
        try:
            lex_obj = obj["lexicon"]
            lex = SeedLexicon(
                tuple(lex_obj["aspects"]), tuple(tuple(s) for s in lex_obj["seeds"]), bool(obj.get("stem", False))
            )
            return cls(
                lexicon=lex,
                quality=SeedQualityTable.from_dict(obj["quality"]),
                student=StudentModel.from_dict(obj["student"]),
                rounds=list(obj.get("rounds", [])),
                cotrain=dict(obj.get("cotrain", {})),
                inputs=dict(obj.get("inputs", {})),
            )
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed model file: {exc!r}") from exc


def dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":")) + "\n"


def save_model(path, bundle: ModelBundle) -> None:
    Path(path).write_text(dumps(bundle.to_dict()), encoding="utf-8")


def load_model(path) -> ModelBundle:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    return ModelBundle.from_dict(obj)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def describe_input(path) -> dict | None:
    if path is None:
        return None
    p = Path(path).resolve()
    return {"path": str(p), "sha256": file_digest(p)}
