"""Two-stage divine-action annotation against a local inference endpoint.

Stage 1 detects acts of God in a passage; stage 2 filters out generic
supernatural events; a passage is positive only when both stages say YES.
Two follow-up prompts characterize each detected act (who is affected,
and whether the act is loving or punishing). All responses are
schema-constrained JSON, parsed strictly, and cached for resume.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import requests

from .corpus import Passage

log = logging.getLogger(__name__)

PLACEHOLDER = "[INSERT TEXT HERE]"

STAGE1 = "stage1"
STAGE2 = "stage2"
AFFECT = "affect"
IMPACT = "impact"

STAGE_TEMPLATES = {
    STAGE1: "act_of_god",
    STAGE2: "supernatural_check",
    AFFECT: "affect",
    IMPACT: "impact",
}


class TransportError(RuntimeError):
    """Endpoint unreachable, timed out, or returned a non-success status."""


class MalformedResponse(ValueError):
    """Response body failed strict schema parsing."""


class PipelineError(RuntimeError):
    """Retries exhausted for one passage; carries the failure kind."""

    def __init__(self, kind: str, message: str, stage: str | None = None,
                 passage_ref: str | None = None):
        super().__init__(message)
        self.kind = kind
        self.stage = stage
        self.passage_ref = passage_ref


@dataclass
class OutputField:
    name: str
    kind: str                      # "text" | "enum"
    values: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("text", "enum"):
            raise ValueError(f"unknown field kind {self.kind!r}")
        if self.kind == "enum" and len(self.values) < 2:
            raise ValueError(f"enum field {self.name!r} needs at least 2 values")


@dataclass
class OutputSchema:
    fields: list[OutputField]

    def names(self) -> list[str]:
        return [f.name for f in self.fields]

    def to_json_schema(self) -> dict:
        properties = {}
        for f in self.fields:
            spec: dict = {"type": "string"}
            if f.kind == "enum":
                spec["enum"] = list(f.values)
            properties[f.name] = spec
        return {"type": "object", "properties": properties, "required": self.names()}


@dataclass
class PromptTemplate:
    name: str
    version: str
    body: str
    schema: OutputSchema

    def __post_init__(self) -> None:
        if self.body.count(PLACEHOLDER) != 1:
            raise ValueError(
                f"template {self.name}@{self.version} must contain exactly one "
                f"{PLACEHOLDER!r} placeholder"
            )


def render_prompt(template: PromptTemplate, text: str) -> str:
    """Substitute the passage text verbatim; no escaping or other mutation."""
    return template.body.replace(PLACEHOLDER, text)


def parse_response(raw: str, schema: OutputSchema) -> dict[str, str]:
    """Strictly parse a JSON response body against the schema.

    Every schema field must be present; enum values match case-insensitively
    and normalize to canonical upper-case; extra fields are ignored.
    """
    try:
        payload = json.loads(raw)
    except (json.JSONDecodeError, TypeError) as e:
        raise MalformedResponse(f"response is not valid JSON: {e}") from None
    if not isinstance(payload, dict):
        raise MalformedResponse("response JSON is not an object")
    parsed = {}
    for f in schema.fields:
        if f.name not in payload:
            raise MalformedResponse(f"missing field {f.name!r}")
        value = payload[f.name]
        if not isinstance(value, str):
            raise MalformedResponse(f"field {f.name!r} is not a string")
        if f.kind == "enum":
            canonical = value.strip().upper()
            if canonical not in f.values:
                raise MalformedResponse(
                    f"field {f.name!r} value {value!r} not in {list(f.values)}"
                )
            parsed[f.name] = canonical
        else:
            parsed[f.name] = value
    return parsed


def _affect_body() -> str:
    return "\n".join([
        "You will be given a description of an act of the Christian God in a novel",
        "passage. Decide who the Christian God is affecting in the passage.",
        "",
        "Choose one of the following codes:",
        "- INDIVIDUAL: God affects one person.",
        "- GROUP: God affects a group or community (e.g., a church, a town, a book",
        "club).",
        "",
        "Please respond with:",
        "- god_affect_explanation: Explain why you chose INDIVIDUAL or GROUP",
        "- god_affect: INDIVIDUAL or GROUP",
        "",
        "<text>",
        PLACEHOLDER,
        "</text>",
    ])


def _impact_body() -> str:
    return "\n".join([
        "You will be given a description of an act of the Christian God in a novel",
        "passage. Decide what kind of action it is.",
        "",
        "Choose one of the following codes:",
        "- LOVING: God's action is kind (for example it invovles mercy, love,",
        "forgiveness, or help).",
        "- PUNISHING: God's action is meant to punish or judge (for example it involves",
        "anger, vengeance, violence, or judgment).",
        "- BOTH: God's action has elements of both love and punishment.",
        "- NEUTRAL: God's action is neutral or ambiguous. Avoid using this label when",
        "possible.",
        "",
        "Please respond with:",
        "- god_impact_explanation: Explain why you chose LOVING, PUNISHING, BOTH, or",
        "NEUTRAL",
        "- god_impact: LOVING, PUNISHING, BOTH, or NEUTRAL",
        "",
        "<text>",
        PLACEHOLDER,
        "</text>",
    ])


def _stage1_body() -> str:
    return "\n".join([
        "You will be given a passage from a novel. Decide whether the passage",
        "describes an act of the Christian God.",
        "",
        "Label the passage YES if:",
        "- Something in the passage is clearly ascribed to God.",
        "- God performs an action, or is described as one who does an action",
        '(for example, "God provided" or "the One who gives me marching orders").',
        "- A Bible quote or story in the passage describes an act of God.",
        "",
        "Label the passage NO if:",
        "- No action by God is mentioned in the passage.",
        '- God is described only in the future tense ("God will...").',
        '- The passage only describes qualities of God ("God is kind") or of a',
        'person ("God\'s chosen one").',
        "- A character prays or speaks to God but God does not act or respond.",
        "- The passage leaves doubt about whether God acted.",
        "",
        "Please respond with:",
        "- explanation: Explain why you chose YES or NO",
        "- label: YES or NO",
        "- act_description: If YES, describe the act of God in one sentence.",
        "If NO, write NONE.",
        "- affected_description: If YES, describe who is affected by the act.",
        "If NO, write NONE.",
        "",
        "<text>",
        PLACEHOLDER,
        "</text>",
    ])


def _stage2_body() -> str:
    return "\n".join([
        "You will be given a passage from a novel. The passage may describe an",
        "act of the Christian God or a different supernatural or magical event.",
        "Decide whether the acting force in the passage is the Christian God.",
        "",
        "Label the passage YES if:",
        "- The action is performed by the Christian God, including actions",
        "described in Bible quotes or stories.",
        "",
        "Label the passage NO if:",
        "- The action is performed by another supernatural force, such as magic,",
        "sorcery, ghosts, or mythical beings.",
        "- The action is a supernatural event that is not attributed to the",
        "Christian God.",
        "",
        "Please respond with:",
        "- explanation: Explain why you chose YES or NO",
        "- label: YES or NO",
        "",
        "<text>",
        PLACEHOLDER,
        "</text>",
    ])


def default_registry() -> "PromptRegistry":
    registry = PromptRegistry()
    registry.register(PromptTemplate(
        name="act_of_god", version="v1", body=_stage1_body(),
        schema=OutputSchema([
            OutputField("explanation", "text"),
            OutputField("label", "enum", ("YES", "NO")),
            OutputField("act_description", "text"),
            OutputField("affected_description", "text"),
        ]),
    ))
    registry.register(PromptTemplate(
        name="supernatural_check", version="v1", body=_stage2_body(),
        schema=OutputSchema([
            OutputField("explanation", "text"),
            OutputField("label", "enum", ("YES", "NO")),
        ]),
    ))
    registry.register(PromptTemplate(
        name="affect", version="v1", body=_affect_body(),
        schema=OutputSchema([
            OutputField("god_affect_explanation", "text"),
            OutputField("god_affect", "enum", ("INDIVIDUAL", "GROUP")),
        ]),
    ))
    registry.register(PromptTemplate(
        name="impact", version="v1", body=_impact_body(),
        schema=OutputSchema([
            OutputField("god_impact_explanation", "text"),
            OutputField("god_impact", "enum", ("LOVING", "PUNISHING", "BOTH", "NEUTRAL")),
        ]),
    ))
    return registry


class PromptRegistry:
    """Versioned prompt store; (name, version) pairs are unique."""

    def __init__(self) -> None:
        self._templates: dict[tuple[str, str], PromptTemplate] = {}

    def register(self, template: PromptTemplate) -> None:
        key = (template.name, template.version)
        if key in self._templates:
            raise ValueError(f"template {template.name}@{template.version} already registered")
        self._templates[key] = template

    def get(self, name: str, version: str) -> PromptTemplate:
        try:
            return self._templates[(name, version)]
        except KeyError:
            raise KeyError(f"no template {name}@{version} in registry") from None

    def __len__(self) -> int:
        return len(self._templates)


def load_registry(path: Path | str) -> PromptRegistry:
    """Read a JSON prompt registry file (same field layout as the built-in
    templates); validation happens at load."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    registry = PromptRegistry()
    for entry in payload["templates"]:
        fields = [
            OutputField(f["name"], f["kind"], tuple(f.get("values", ())))
            for f in entry["fields"]
        ]
        registry.register(PromptTemplate(
            name=entry["name"],
            version=entry["version"],
            body=entry["body"],
            schema=OutputSchema(fields),
        ))
    return registry


@dataclass
class ModelConfig:
    model: str
    endpoint: str = "http://localhost:11434"
    temperature: float = 0.0
    max_retries: int = 3
    timeout: float = 120.0
    backoff_base: float = 1.0

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


Transport = Callable[[ModelConfig, str, OutputSchema], str]


def http_transport(config: ModelConfig, prompt: str, schema: OutputSchema) -> str:
    """One completion request against an Ollama-compatible generate endpoint,
    with the output constrained to the schema."""
    url = config.endpoint.rstrip("/") + "/api/generate"
    payload = {
        "model": config.model,
        "prompt": prompt,
        "stream": False,
        "options": {"temperature": config.temperature},
        "format": schema.to_json_schema(),
    }
    try:
        response = requests.post(url, json=payload, timeout=config.timeout)
    except requests.RequestException as e:
        raise TransportError(f"request to {url} failed: {e}") from None
    if response.status_code != 200:
        raise TransportError(f"endpoint returned HTTP {response.status_code}")
    try:
        return response.json()["response"]
    except (ValueError, KeyError):
        raise MalformedResponse("endpoint body lacked a response field") from None


def call_model(
    config: ModelConfig,
    prompt: str,
    schema: OutputSchema,
    transport: Transport | None = None,
) -> str:
    """Issue one schema-constrained completion, retrying transport failures
    and malformed bodies with exponential backoff (base 1s, factor 2)."""
    transport = transport or http_transport
    delay = config.backoff_base
    last_error: Exception | None = None
    for attempt in range(config.max_retries + 1):
        try:
            raw = transport(config, prompt, schema)
            parse_response(raw, schema)
            return raw
        except (TransportError, MalformedResponse) as e:
            last_error = e
            if attempt < config.max_retries:
                time.sleep(delay)
                delay *= 2
    kind = "transport" if isinstance(last_error, TransportError) else "malformed"
    raise PipelineError(kind, f"retries exhausted: {last_error}") from last_error


@dataclass
class ActAnnotation:
    """The cascade's verdict for one passage."""

    novel_id: str
    index: int
    status: str                      # "ok" | "unresolved"
    stage1: dict | None = None
    stage2: dict | None = None
    final_label: str | None = None
    affect: str | None = None
    impact: str | None = None
    cache_key: str | None = None
    failed_stage: str | None = None
    error: str | None = None

    @property
    def ref(self) -> str:
        return f"{self.novel_id}:{self.index}"

    def check_invariants(self) -> None:
        """The three structural rules for resolved annotations."""
        if self.status != "ok":
            return
        s1_yes = self.stage1 is not None and self.stage1["label"] == "YES"
        s2_yes = self.stage2 is not None and self.stage2["label"] == "YES"
        if (self.stage2 is not None) != s1_yes:
            raise AssertionError(f"{self.ref}: stage2 presence must track stage1 YES")
        if (self.final_label == "YES") != (s1_yes and s2_yes):
            raise AssertionError(f"{self.ref}: final label must be the stage conjunction")
        if (self.affect is not None) != (self.final_label == "YES"):
            raise AssertionError(f"{self.ref}: affect present iff final YES")
        if (self.impact is not None) != (self.final_label == "YES"):
            raise AssertionError(f"{self.ref}: impact present iff final YES")

    def to_dict(self) -> dict:
        return {
            "passage": self.ref,
            "novel_id": self.novel_id,
            "index": self.index,
            "status": self.status,
            "stage1": self.stage1,
            "stage2": self.stage2,
            "final_label": self.final_label,
            "affect": self.affect,
            "impact": self.impact,
            "cache_key": self.cache_key,
            "failed_stage": self.failed_stage,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ActAnnotation":
        return cls(
            novel_id=d["novel_id"],
            index=d["index"],
            status=d["status"],
            stage1=d.get("stage1"),
            stage2=d.get("stage2"),
            final_label=d.get("final_label"),
            affect=d.get("affect"),
            impact=d.get("impact"),
            cache_key=d.get("cache_key"),
            failed_stage=d.get("failed_stage"),
            error=d.get("error"),
        )


def cache_key(model_name: str, template: PromptTemplate, text: str, stage: str) -> str:
    payload = json.dumps(
        [model_name, f"{template.name}@{template.version}", text, stage],
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class AnnotationCache:
    """One JSON file per (stage, key); atomic writes so concurrent workers
    and interrupted runs never leave partial entries."""

    def __init__(self, directory: Path | str):
        self.directory = Path(directory)

    def _path(self, stage: str, key: str) -> Path:
        return self.directory / stage / f"{key}.json"

    def get(self, stage: str, key: str) -> dict | None:
        path = self._path(stage, key)
        if not path.is_file():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def put(self, stage: str, key: str, fields: dict) -> None:
        path = self._path(stage, key)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".tmp-{uuid.uuid4().hex}")
        tmp.write_text(json.dumps(fields, ensure_ascii=False), encoding="utf-8")
        os.replace(tmp, path)


def _run_stage(
    stage: str,
    text: str,
    config: ModelConfig,
    registry: PromptRegistry,
    versions: dict[str, str],
    cache: AnnotationCache | None,
    transport: Transport | None,
    passage_ref: str,
) -> tuple[dict[str, str], str]:
    """Execute (or look up) one stage; returns parsed fields and cache key."""
    template = registry.get(STAGE_TEMPLATES[stage], versions.get(stage, "v1"))
    key = cache_key(config.model, template, text, stage)
    if cache is not None:
        cached = cache.get(stage, key)
        if cached is not None:
            return cached, key
    try:
        raw = call_model(config, render_prompt(template, text), template.schema, transport)
    except PipelineError as e:
        e.stage = stage
        e.passage_ref = passage_ref
        raise
    fields = parse_response(raw, template.schema)
    if cache is not None:
        cache.put(stage, key, fields)
    return fields, key


def classify_act(
    passage: Passage,
    config: ModelConfig,
    registry: PromptRegistry | None = None,
    cache: AnnotationCache | None = None,
    transport: Transport | None = None,
    versions: dict[str, str] | None = None,
) -> dict[str, str]:
    """Stage-1 detection for one passage."""
    if not passage.text.strip():
        raise ValueError(f"passage {passage.ref} has empty text")
    registry = registry or default_registry()
    fields, _ = _run_stage(
        STAGE1, passage.text, config, registry, versions or {}, cache, transport, passage.ref
    )
    return fields


def disambiguate_supernatural(
    passage: Passage,
    stage1: dict[str, str],
    config: ModelConfig,
    registry: PromptRegistry | None = None,
    cache: AnnotationCache | None = None,
    transport: Transport | None = None,
    versions: dict[str, str] | None = None,
) -> dict[str, str] | None:
    """Stage-2 supernatural check; skipped entirely when stage 1 said NO."""
    if stage1["label"] != "YES":
        return None
    registry = registry or default_registry()
    fields, _ = _run_stage(
        STAGE2, passage.text, config, registry, versions or {}, cache, transport, passage.ref
    )
    return fields


def characterize(
    act_description: str,
    config: ModelConfig,
    registry: PromptRegistry | None = None,
    cache: AnnotationCache | None = None,
    transport: Transport | None = None,
    versions: dict[str, str] | None = None,
    passage_ref: str = "",
) -> tuple[str, str]:
    """Affect and impact labels for a confirmed act, prompted with the
    stage-1 act description rather than the raw passage."""
    if not act_description.strip():
        raise PipelineError("malformed", "empty act description", AFFECT, passage_ref)
    registry = registry or default_registry()
    versions = versions or {}
    affect_fields, _ = _run_stage(
        AFFECT, act_description, config, registry, versions, cache, transport, passage_ref
    )
    impact_fields, _ = _run_stage(
        IMPACT, act_description, config, registry, versions, cache, transport, passage_ref
    )
    return affect_fields["god_affect"], impact_fields["god_impact"]


def _annotate_one(
    passage: Passage,
    config: ModelConfig,
    registry: PromptRegistry,
    cache: AnnotationCache | None,
    transport: Transport | None,
    versions: dict[str, str],
) -> ActAnnotation:
    ref = passage.ref
    stage1 = stage2 = None
    try:
        stage1, key = _run_stage(
            STAGE1, passage.text, config, registry, versions, cache, transport, ref
        )
        if stage1["label"] == "YES":
            stage2, _ = _run_stage(
                STAGE2, passage.text, config, registry, versions, cache, transport, ref
            )
            final = "YES" if stage2["label"] == "YES" else "NO"
        else:
            final = "NO"
        affect = impact = None
        if final == "YES":
            affect, impact = characterize(
                stage1["act_description"], config, registry, cache, transport, versions, ref
            )
        return ActAnnotation(
            novel_id=passage.novel_id,
            index=passage.index,
            status="ok",
            stage1=stage1,
            stage2=stage2,
            final_label=final,
            affect=affect,
            impact=impact,
            cache_key=key,
        )
    except PipelineError as e:
        log.warning("passage %s unresolved at %s (%s)", ref, e.stage, e.kind)
        return ActAnnotation(
            novel_id=passage.novel_id,
            index=passage.index,
            status="unresolved",
            stage1=stage1,
            stage2=stage2,
            failed_stage=e.stage,
            error=e.kind,
        )


def run_pipeline(
    passages: Sequence[Passage],
    config: ModelConfig,
    registry: PromptRegistry | None = None,
    cache_dir: Path | str | None = None,
    transport: Transport | None = None,
    workers: int = 4,
    versions: dict[str, str] | None = None,
) -> list[ActAnnotation]:
    """Annotate every passage, resuming from the cache.

    Failed passages are recorded as unresolved without aborting the batch.
    Output order follows input order regardless of worker completion order.
    """
    registry = registry or default_registry()
    cache = AnnotationCache(cache_dir) if cache_dir is not None else None
    versions = versions or {}

    def work(passage: Passage) -> ActAnnotation:
        return _annotate_one(passage, config, registry, cache, transport, versions)

    if workers <= 1:
        return [work(p) for p in passages]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(work, passages))


def write_annotations(annotations: Sequence[ActAnnotation], path: Path | str) -> None:
    """One JSON line per annotation, in input order."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for ann in annotations:
            fh.write(json.dumps(ann.to_dict(), ensure_ascii=False) + "\n")


def read_annotations(path: Path | str) -> list[ActAnnotation]:
    annotations = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                annotations.append(ActAnnotation.from_dict(json.loads(line)))
    return annotations


_TEXT_SPAN_RE = re.compile(r"<text>\n(.*)\n</text>", re.DOTALL)

_MOCK_GOD_RE = re.compile(r"\b(God|Lord)\b")
_MOCK_SUPERNATURAL_RE = re.compile(
    r"\b(magic|magical|wizard|sorcer\w*|spell|enchant\w*|ghost|vampire|fairy)\b", re.IGNORECASE
)
_MOCK_GROUP_RE = re.compile(
    r"\b(crowd|nation|people|city|town|village|church|congregation|army|families|tribe)\b",
    re.IGNORECASE,
)
_MOCK_PUNISH_RE = re.compile(
    r"\b(plague\w*|wrath|smote|smite\w*|punish\w*|judgment|destroy\w*|scatter\w*|storm)\b",
    re.IGNORECASE,
)
_MOCK_LOVE_RE = re.compile(
    r"\b(heal\w*|bless\w*|comfort\w*|save[ds]?|saved|mercy|merciful|forgave|forgiv\w*"
    r"|provide[ds]?|provision|protect\w*|love[ds]?|answer\w*|restore\w*)\b",
    re.IGNORECASE,
)


class MockModel:
    """Deterministic offline stand-in for a live endpoint.

    Responses are scripted by regex rules over the passage text (extracted
    from the prompt's <text> block). Pass per-stage overrides to script
    custom behavior, including malformed output, in tests.
    """

    def __init__(self, overrides: dict[str, Callable[[str], dict]] | None = None):
        self.overrides = overrides or {}
        self.calls: dict[str, int] = {STAGE1: 0, STAGE2: 0, AFFECT: 0, IMPACT: 0}
        self._lock = threading.Lock()

    def reset_calls(self) -> None:
        with self._lock:
            for stage in self.calls:
                self.calls[stage] = 0

    @staticmethod
    def _stage_for(schema: OutputSchema) -> str:
        names = set(schema.names())
        if "act_description" in names:
            return STAGE1
        if "god_affect" in names:
            return AFFECT
        if "god_impact" in names:
            return IMPACT
        return STAGE2

    @staticmethod
    def _extract_text(prompt: str) -> str:
        match = _TEXT_SPAN_RE.search(prompt)
        return match.group(1) if match else prompt

    def _stage1(self, text: str) -> dict:
        match = _MOCK_GOD_RE.search(text)
        if not match:
            return {
                "explanation": "No action is ascribed to God in this passage.",
                "label": "NO",
                "act_description": "NONE",
                "affected_description": "NONE",
            }
        sentences = re.split(r"(?<=[.!?])\s+", text)
        acting = next((s for s in sentences if _MOCK_GOD_RE.search(s)), text)
        return {
            "explanation": "An action in the passage is ascribed to God.",
            "label": "YES",
            "act_description": " ".join(acting.split()),
            "affected_description": (
                "a group of people" if _MOCK_GROUP_RE.search(acting) else "one person"
            ),
        }

    def _stage2(self, text: str) -> dict:
        if _MOCK_SUPERNATURAL_RE.search(text):
            return {
                "explanation": "The event reads as magic or another supernatural force.",
                "label": "NO",
            }
        return {
            "explanation": "The acting force is the Christian God.",
            "label": "YES",
        }

    def _affect(self, text: str) -> dict:
        group = bool(_MOCK_GROUP_RE.search(text))
        return {
            "god_affect_explanation": (
                "The act reaches a community." if group else "The act reaches one person."
            ),
            "god_affect": "GROUP" if group else "INDIVIDUAL",
        }

    def _impact(self, text: str) -> dict:
        punishing = bool(_MOCK_PUNISH_RE.search(text))
        loving = bool(_MOCK_LOVE_RE.search(text))
        if punishing and loving:
            label = "BOTH"
        elif punishing:
            label = "PUNISHING"
        elif loving:
            label = "LOVING"
        else:
            label = "NEUTRAL"
        return {
            "god_impact_explanation": f"The described act reads as {label.lower()}.",
            "god_impact": label,
        }

    def transport(self, config: ModelConfig, prompt: str, schema: OutputSchema) -> str:
        stage = self._stage_for(schema)
        with self._lock:
            self.calls[stage] += 1
        text = self._extract_text(prompt)
        if stage in self.overrides:
            fields = self.overrides[stage](text)
        else:
            fields = getattr(self, f"_{stage}")(text)
        return json.dumps(fields, ensure_ascii=False)
