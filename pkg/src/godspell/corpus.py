"""Corpus ingestion and segmentation.

Reads a manifest of novels plus plain-text files, and splits each novel
two ways: fixed word-count segments for topic modeling and word-capped
passages (greedy paragraph packing) for annotation.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

GENDERS = ("female", "male", "unknown")
AWARD_STATUSES = ("winner", "finalist")

MANIFEST_COLUMNS = [
    "id", "title", "authors", "genders", "publisher", "year",
    "series_tag", "award_category", "award_status", "award_year", "path",
]

_PARAGRAPH_RE = re.compile(r"\n\s*\n")
_SENTENCE_RE = re.compile(r"(?<=[.!?])\s+")


class ManifestError(ValueError):
    """Raised for unreadable or inconsistent corpus manifests."""


@dataclass
class Author:
    name: str
    gender: str = "unknown"


@dataclass
class AwardEntry:
    category: str
    status: str
    award_year: int


@dataclass
class Novel:
    id: str
    title: str
    authors: list[Author]
    publisher: str
    year: int
    series_tag: str | None
    awards: list[AwardEntry]
    source_path: Path

    def gender_group(self) -> str:
        """'female' or 'male' for single-gender author teams, 'mixed' for
        male+female co-authorship, 'unknown' when any gender is unknown."""
        genders = {a.gender for a in self.authors}
        if "unknown" in genders:
            return "unknown"
        if genders == {"female"}:
            return "female"
        if genders == {"male"}:
            return "male"
        return "mixed"


@dataclass
class Passage:
    """A word-capped annotation unit with word offsets into its novel."""

    novel_id: str
    index: int
    text: str
    word_count: int
    word_start: int
    word_end: int
    normalized_position: float

    @property
    def ref(self) -> str:
        return f"{self.novel_id}:{self.index}"

    def to_dict(self) -> dict:
        return {
            "novel_id": self.novel_id,
            "index": self.index,
            "text": self.text,
            "word_count": self.word_count,
            "word_start": self.word_start,
            "word_end": self.word_end,
            "normalized_position": self.normalized_position,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Passage":
        return cls(
            novel_id=d["novel_id"],
            index=d["index"],
            text=d["text"],
            word_count=d["word_count"],
            word_start=d["word_start"],
            word_end=d["word_end"],
            normalized_position=d["normalized_position"],
        )


@dataclass
class Segment:
    """A fixed-size topic-modeling unit (word list, order preserved)."""

    novel_id: str
    index: int
    words: list[str]
    word_start: int
    word_end: int


@dataclass
class Corpus:
    novels: list[Novel]
    texts: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._by_id = {n.id: n for n in self.novels}

    def novel(self, novel_id: str) -> Novel:
        return self._by_id[novel_id]

    def text(self, novel_id: str) -> str:
        return self.texts[novel_id]


def word_tokenize(text: str) -> list[str]:
    """Split into words: maximal runs of non-whitespace."""
    return text.split()


def _parse_row(row: dict, row_number: int, base_dir: Path) -> Novel:
    def bad(msg: str) -> ManifestError:
        return ManifestError(f"manifest row {row_number}: {msg}")

    novel_id = (row.get("id") or "").strip()
    if not novel_id:
        raise bad("missing id")
    title = (row.get("title") or "").strip()
    if not title:
        raise bad("missing title")

    names = [a.strip() for a in (row.get("authors") or "").split(";") if a.strip()]
    if not names:
        raise bad("authors must be non-empty")
    genders = [g.strip().lower() for g in (row.get("genders") or "").split(";")]
    genders = [g for g in genders if g]
    # A missing or short genders field falls back to unknown per author.
    genders += ["unknown"] * (len(names) - len(genders))
    if len(genders) != len(names):
        raise bad(f"{len(genders)} genders for {len(names)} authors")
    for g in genders:
        if g not in GENDERS:
            raise bad(f"unrecognized gender {g!r}")
    authors = [Author(name=n, gender=g) for n, g in zip(names, genders)]

    try:
        year = int((row.get("year") or "").strip())
    except ValueError:
        raise bad(f"year {row.get('year')!r} is not an integer") from None
    if not 1400 <= year <= 2100:
        raise bad(f"year {year} outside [1400, 2100]")

    series_tag = (row.get("series_tag") or "").strip() or None

    categories = [c.strip() for c in (row.get("award_category") or "").split(";") if c.strip()]
    statuses = [s.strip().lower() for s in (row.get("award_status") or "").split(";") if s.strip()]
    years_raw = [y.strip() for y in (row.get("award_year") or "").split(";") if y.strip()]
    if not (len(categories) == len(statuses) == len(years_raw)):
        raise bad("award_category/award_status/award_year lengths differ")
    awards = []
    for cat, status, ystr in zip(categories, statuses, years_raw):
        if status not in AWARD_STATUSES:
            raise bad(f"unrecognized award status {status!r}")
        try:
            awards.append(AwardEntry(cat, status, int(ystr)))
        except ValueError:
            raise bad(f"award_year {ystr!r} is not an integer") from None

    path_str = (row.get("path") or "").strip()
    if not path_str:
        raise bad("missing path")
    source_path = Path(path_str)
    if not source_path.is_absolute():
        source_path = base_dir / source_path

    return Novel(
        id=novel_id,
        title=title,
        authors=authors,
        publisher=(row.get("publisher") or "").strip(),
        year=year,
        series_tag=series_tag,
        awards=awards,
        source_path=source_path,
    )


def ingest(manifest: Path | str) -> Corpus:
    """Load a manifest CSV and every novel text it references.

    Fatal on duplicate ids, malformed rows, and missing text files.
    """
    manifest = Path(manifest)
    if not manifest.is_file():
        raise ManifestError(f"manifest not found: {manifest}")
    base_dir = manifest.parent

    novels: list[Novel] = []
    texts: dict[str, str] = {}
    with manifest.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in MANIFEST_COLUMNS if c not in header]
        if missing:
            raise ManifestError(f"manifest header missing columns: {', '.join(missing)}")
        for row_number, row in enumerate(reader, start=2):
            novel = _parse_row(row, row_number, base_dir)
            if novel.id in texts:
                raise ManifestError(f"duplicate novel id {novel.id!r}")
            if not novel.source_path.is_file():
                raise ManifestError(
                    f"text file for novel {novel.id!r} not found: {novel.source_path}"
                )
            texts[novel.id] = novel.source_path.read_text(encoding="utf-8")
            novels.append(novel)
    return Corpus(novels=novels, texts=texts)


def segment_fixed(novel: Novel, text: str, segment_size: int = 300) -> list[Segment]:
    """Chop a novel into consecutive segments of exactly segment_size words;
    only the final segment may be shorter."""
    if segment_size < 1:
        raise ValueError("segment_size must be >= 1")
    words = word_tokenize(text)
    segments = []
    for index, start in enumerate(range(0, len(words), segment_size)):
        chunk = words[start:start + segment_size]
        segments.append(Segment(
            novel_id=novel.id,
            index=index,
            words=chunk,
            word_start=start,
            word_end=start + len(chunk),
        ))
    return segments


def _paragraph_units(paragraph: str, para_id: int, cap: int) -> list[tuple[int, str, int]]:
    """Decompose one paragraph into packable (para_id, text, word_count) units.

    A paragraph within the cap is a single unit; an oversized paragraph
    splits at sentence boundaries; an oversized sentence is hard-split
    into cap-word chunks.
    """
    wc = len(word_tokenize(paragraph))
    if wc <= cap:
        return [(para_id, paragraph, wc)]
    units = []
    for sentence in _SENTENCE_RE.split(paragraph):
        words = word_tokenize(sentence)
        if not words:
            continue
        if len(words) <= cap:
            units.append((para_id, sentence.strip(), len(words)))
        else:
            for start in range(0, len(words), cap):
                chunk = words[start:start + cap]
                units.append((para_id, " ".join(chunk), len(chunk)))
    return units


def segment_capped(novel: Novel, text: str, cap: int = 500) -> list[Passage]:
    """Greedy paragraph packing into passages of at most cap words.

    Paragraphs (blank-line delimited) accumulate into a passage while the
    running total stays within the cap. Trailing fragments are kept as
    standalone passages.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    total_words = len(word_tokenize(text))
    if total_words == 0:
        return []

    units: list[tuple[int, str, int]] = []
    for para_id, paragraph in enumerate(_PARAGRAPH_RE.split(text)):
        paragraph = paragraph.strip()
        if not paragraph:
            continue
        units.extend(_paragraph_units(paragraph, para_id, cap))

    passages: list[Passage] = []
    current: list[tuple[int, str, int]] = []
    current_wc = 0
    word_start = 0

    def flush() -> None:
        nonlocal current, current_wc, word_start
        if not current:
            return
        parts = [current[0][1]]
        for (prev_para, _, _), (para, unit_text, _) in zip(current, current[1:]):
            parts.append(("\n\n" if para != prev_para else " ") + unit_text)
        passage_text = "".join(parts)
        end = word_start + current_wc
        passages.append(Passage(
            novel_id=novel.id,
            index=len(passages),
            text=passage_text,
            word_count=current_wc,
            word_start=word_start,
            word_end=end,
            normalized_position=(word_start + end) / (2 * total_words),
        ))
        word_start = end
        current = []
        current_wc = 0

    for unit in units:
        if current and current_wc + unit[2] > cap:
            flush()
        current.append(unit)
        current_wc += unit[2]
    flush()
    return passages


def segment_corpus(corpus: Corpus, cap: int = 500) -> list[Passage]:
    """Annotation passages for every novel, in manifest order."""
    passages = []
    for novel in corpus.novels:
        passages.extend(segment_capped(novel, corpus.text(novel.id), cap=cap))
    return passages


def segment_corpus_fixed(corpus: Corpus, segment_size: int = 300) -> list[Segment]:
    """Fixed topic-modeling segments for every novel, in manifest order."""
    segments = []
    for novel in corpus.novels:
        segments.extend(segment_fixed(novel, corpus.text(novel.id), segment_size=segment_size))
    return segments


@dataclass
class PassageStatistics:
    passage_count: int
    novel_count: int
    mean_per_novel: float
    min_per_novel: int
    max_per_novel: int
    mean_word_length: float

    def to_dict(self) -> dict:
        return {
            "passage_count": self.passage_count,
            "novel_count": self.novel_count,
            "mean_per_novel": self.mean_per_novel,
            "min_per_novel": self.min_per_novel,
            "max_per_novel": self.max_per_novel,
            "mean_word_length": self.mean_word_length,
        }


def passage_statistics(passages: list[Passage]) -> PassageStatistics:
    """Per-corpus passage summary; means rounded to 2 decimals."""
    if not passages:
        return PassageStatistics(0, 0, 0.0, 0, 0, 0.0)
    per_novel: dict[str, int] = {}
    for p in passages:
        per_novel[p.novel_id] = per_novel.get(p.novel_id, 0) + 1
    counts = list(per_novel.values())
    mean_len = sum(p.word_count for p in passages) / len(passages)
    return PassageStatistics(
        passage_count=len(passages),
        novel_count=len(per_novel),
        mean_per_novel=round(len(passages) / len(per_novel), 2),
        min_per_novel=min(counts),
        max_per_novel=max(counts),
        mean_word_length=round(mean_len, 2),
    )


def write_passages(passages: list[Passage], path: Path | str) -> None:
    """One JSON line per passage."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for p in passages:
            fh.write(json.dumps(p.to_dict(), ensure_ascii=False) + "\n")


def read_passages(path: Path | str) -> list[Passage]:
    passages = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                passages.append(Passage.from_dict(json.loads(line)))
    return passages
