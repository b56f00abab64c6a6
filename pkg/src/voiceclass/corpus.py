"""Labeled voice corpora: in-memory representation and directory layout.

A corpus is a set of subjects, each with one take per musical scale and
two subject-level labels (gender M/F, choral status S/N).  On disk a
corpus is a directory of WAV files plus a versioned manifest; the same
manifest format serves synthetic and real recordings interchangeably.

Manifest format (v1), line oriented:
    # voiceclass-manifest v1
    subject_id,gender,choral,scale,path,seed
    s000,M,S,do,takes/s000_do.wav,1234
    ...
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, FormatError
from .spectra import AudioSignal, decode_audio, encode_wav
from .tasks import CHORAL_LABELS, GENDER_LABELS, SCALE_LABELS, joint_index

MANIFEST_HEADER = "# voiceclass-manifest v1"
_COLUMNS = ["subject_id", "gender", "choral", "scale", "path", "seed"]


@dataclass(frozen=True)
class Take:
    """One recorded (or generated) note: a subject singing one scale."""

    subject_id: str
    gender: str   # "M" | "F"
    choral: str   # "S" | "N"
    scale: int    # index into SCALE_LABELS
    signal: AudioSignal
    seed: int = 0

    def label(self, task: str) -> int:
        if task == "scale":
            return self.scale
        if task == "gender":
            return GENDER_LABELS.index(self.gender)
        if task == "choral":
            return CHORAL_LABELS.index(self.choral)
        if task == "joint":
            return joint_index(GENDER_LABELS.index(self.gender),
                               CHORAL_LABELS.index(self.choral))
        raise KeyError(f"unknown task {task!r}")


@dataclass
class Corpus:
    takes: list[Take]
    manifest: dict = field(default_factory=dict)

    @property
    def subject_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for t in self.takes:
            seen.setdefault(t.subject_id, None)
        return list(seen)

    def subject_info(self) -> dict[str, tuple[str, str]]:
        """subject_id -> (gender, choral); labels must be consistent per subject."""
        info: dict[str, tuple[str, str]] = {}
        for t in self.takes:
            pair = (t.gender, t.choral)
            if info.setdefault(t.subject_id, pair) != pair:
                raise ConfigError(f"subject {t.subject_id} has inconsistent labels")
        return info

    def validate(self) -> None:
        """Every subject must have exactly one take per scale."""
        per_subject: dict[str, set[int]] = {}
        for t in self.takes:
            scales = per_subject.setdefault(t.subject_id, set())
            if t.scale in scales:
                raise ConfigError(
                    f"subject {t.subject_id} has duplicate takes for scale {t.scale}"
                )
            scales.add(t.scale)
        for sid, scales in per_subject.items():
            if scales != set(range(len(SCALE_LABELS))):
                raise ConfigError(f"subject {sid} is missing scales")


def save_corpus(corpus: Corpus, out_dir: str | Path) -> Path:
    """Write one WAV per take plus the manifest; returns the manifest path."""
    out = Path(out_dir)
    takes_dir = out / "takes"
    takes_dir.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_COLUMNS)
    for t in corpus.takes:
        name = f"{t.subject_id}_{t.scale:02d}.wav"
        (takes_dir / name).write_bytes(encode_wav(t.signal))
        writer.writerow([t.subject_id, t.gender, t.choral,
                         SCALE_LABELS[t.scale], f"takes/{name}", t.seed])
    manifest = out / "manifest.csv"
    manifest.write_text(MANIFEST_HEADER + "\n" + buf.getvalue())
    return manifest


def load_corpus(manifest_path: str | Path) -> Corpus:
    """Read a corpus directory back through its manifest."""
    path = Path(manifest_path)
    if path.is_dir():
        path = path / "manifest.csv"
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read manifest: {exc}") from exc
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# voiceclass-manifest"):
        raise FormatError("missing manifest version header")
    if lines[0].strip() != MANIFEST_HEADER:
        raise FormatError(f"unsupported manifest version: {lines[0].strip()!r}")
    reader = csv.DictReader(lines[1:])
    if reader.fieldnames != _COLUMNS:
        raise FormatError(f"manifest columns {reader.fieldnames} != {_COLUMNS}")
    takes = []
    base = path.parent
    for row in reader:
        if row["gender"] not in GENDER_LABELS or row["choral"] not in CHORAL_LABELS:
            raise FormatError(f"bad labels in manifest row: {row}")
        if row["scale"] not in SCALE_LABELS:
            raise FormatError(f"unknown scale {row['scale']!r} in manifest")
        signal = decode_audio((base / row["path"]).read_bytes())
        takes.append(Take(
            subject_id=row["subject_id"],
            gender=row["gender"],
            choral=row["choral"],
            scale=SCALE_LABELS.index(row["scale"]),
            signal=signal,
            seed=int(row["seed"]),
        ))
    if not takes:
        raise FormatError("manifest lists no takes")
    corpus = Corpus(takes=takes, manifest={"path": str(path)})
    corpus.validate()
    return corpus
