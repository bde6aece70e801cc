"""Policy document parsing, tokenization, and binary indicator scoring.

Documents are scored against a two-level indicator scheme (10 primary
dimensions, each with one or more secondary indicators). A secondary
indicator takes value 1 when its keyword rule is satisfied by the document's
token multiset: an ``any_of`` rule needs at least one listed term present,
an ``all_of`` rule needs every listed term. Rules are presence-based on
purpose (no frequency thresholds), which keeps scoring monotone: appending
text can only flip values 0 -> 1.

Tokenizer modes: whitespace split, character n-grams, and dictionary
longest-match (the default for scoring, with the scheme's own keywords as
the dictionary). Whitespace never becomes a token in any mode. Case folding
uses ``str.lower``, which leaves CJK characters untouched.
"""

from __future__ import annotations

import csv
import json
import warnings
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, DataError

EXPECTED_PRIMARIES = 10
EXPECTED_SECONDARIES = 47


class SchemeShapeWarning(UserWarning):
    """Scheme validates but its secondary count differs from the canonical 47."""


@dataclass(frozen=True)
class PolicyDocument:
    id: str
    title: str
    issuing_body: str
    issue_year: int
    body: str


@dataclass(frozen=True)
class KeywordRule:
    kind: str  # "any_of" | "all_of"
    terms: tuple[str, ...]

    def __post_init__(self):
        if self.kind not in ("any_of", "all_of"):
            raise ConfigError(f"rule kind must be any_of or all_of, got {self.kind!r}")
        if not self.terms:
            raise ConfigError("rule needs at least one term")
        object.__setattr__(self, "terms", tuple(self.terms))

    def satisfied_by(self, tokens: set[str], fold: bool) -> bool:
        terms = [t.lower() for t in self.terms] if fold else self.terms
        if self.kind == "any_of":
            return any(t in tokens for t in terms)
        return all(t in tokens for t in terms)


@dataclass(frozen=True)
class SecondaryIndicator:
    code: str
    label: str
    rule: KeywordRule


@dataclass(frozen=True)
class PrimaryIndicator:
    code: str
    label: str
    secondaries: tuple[SecondaryIndicator, ...]

    def __post_init__(self):
        object.__setattr__(self, "secondaries", tuple(self.secondaries))


@dataclass(frozen=True)
class IndicatorScheme:
    name: str
    primaries: tuple[PrimaryIndicator, ...]

    def __post_init__(self):
        object.__setattr__(self, "primaries", tuple(self.primaries))

    def validate(self) -> None:
        """Enforce the scheme invariants; warn (not error) on a non-47 total."""
        if len(self.primaries) != EXPECTED_PRIMARIES:
            raise ConfigError(
                f"scheme {self.name!r} must have exactly {EXPECTED_PRIMARIES} primary "
                f"indicators, found {len(self.primaries)}"
            )
        seen: set[str] = set()
        for primary in self.primaries:
            if primary.code in seen:
                raise ConfigError(f"duplicate indicator code {primary.code!r}")
            seen.add(primary.code)
            if not primary.secondaries:
                raise ConfigError(f"primary {primary.code!r} has no secondary indicators")
            for sec in primary.secondaries:
                if sec.code in seen:
                    raise ConfigError(f"duplicate indicator code {sec.code!r}")
                seen.add(sec.code)
        total = self.n_secondaries
        if total != EXPECTED_SECONDARIES:
            warnings.warn(
                f"scheme {self.name!r} has {total} secondary indicators "
                f"(canonical schemes have {EXPECTED_SECONDARIES})",
                SchemeShapeWarning,
                stacklevel=2,
            )

    @property
    def n_secondaries(self) -> int:
        return sum(len(p.secondaries) for p in self.primaries)

    def secondaries(self):
        for primary in self.primaries:
            yield from primary.secondaries

    def secondary_codes(self) -> list[str]:
        return [s.code for s in self.secondaries()]

    def dictionary(self) -> tuple[str, ...]:
        """All rule terms, deduplicated, sorted: the default scoring dictionary."""
        terms = {t for s in self.secondaries() for t in s.rule.terms}
        return tuple(sorted(terms))


@dataclass(frozen=True)
class Scorecard:
    document_id: str
    values: dict[str, int]

    def missing_codes(self, scheme: IndicatorScheme) -> list[str]:
        return [c for c in scheme.secondary_codes() if c not in self.values]


@dataclass(frozen=True)
class TokenizerConfig:
    mode: str = "dictionary"  # whitespace | char_ngram | dictionary
    ngram: int = 2
    dictionary: tuple[str, ...] = ()
    case_folding: bool = True
    min_token_length: int = 1

    def __post_init__(self):
        if self.mode not in ("whitespace", "char_ngram", "dictionary"):
            raise ConfigError(f"unknown tokenizer mode {self.mode!r}")
        if self.mode == "char_ngram" and self.ngram < 1:
            raise ConfigError("char_ngram needs n >= 1")
        if self.mode == "dictionary" and not self.dictionary:
            raise ConfigError("dictionary mode needs a non-empty dictionary")
        object.__setattr__(self, "dictionary", tuple(self.dictionary))


def default_tokenizer_for(scheme: IndicatorScheme) -> TokenizerConfig:
    """Dictionary longest-match over the scheme's own keywords."""
    return TokenizerConfig(mode="dictionary", dictionary=scheme.dictionary())


def tokenize(doc: PolicyDocument, cfg: TokenizerConfig) -> list[str]:
    """Deterministic token sequence for one document.

    Dictionary mode scans left to right emitting the longest dictionary term
    matching at each position; non-matching non-whitespace characters come
    through as single-character residual tokens.
    """
    if not doc.body:
        raise DataError(f"document {doc.id!r} has an empty body")
    text = doc.body.lower() if cfg.case_folding else doc.body
    if cfg.mode == "whitespace":
        tokens = text.split()
    elif cfg.mode == "char_ngram":
        n = cfg.ngram
        tokens = [text[i : i + n] for i in range(len(text) - n + 1)]
    else:
        terms = [t.lower() for t in cfg.dictionary] if cfg.case_folding else list(cfg.dictionary)
        by_first: dict[str, list[str]] = {}
        for t in terms:
            if t:
                by_first.setdefault(t[0], []).append(t)
        for bucket in by_first.values():
            bucket.sort(key=len, reverse=True)
        tokens = []
        pos = 0
        while pos < len(text):
            ch = text[pos]
            match = None
            for term in by_first.get(ch, ()):
                if text.startswith(term, pos):
                    match = term
                    break
            if match is not None:
                tokens.append(match)
                pos += len(match)
            else:
                if not ch.isspace():
                    tokens.append(ch)
                pos += 1
    return [t for t in tokens if len(t) >= cfg.min_token_length]


def term_frequency(tokens) -> dict[str, int]:
    """Term -> count; totals equal the token-sequence length."""
    return dict(Counter(tokens))


def score_document(doc: PolicyDocument, scheme: IndicatorScheme,
                   cfg: TokenizerConfig | None = None) -> Scorecard:
    """Binary scorecard for one document: one value per secondary indicator."""
    scheme.validate()
    if cfg is None:
        cfg = default_tokenizer_for(scheme)
    tokens = set(tokenize(doc, cfg))
    values = {
        sec.code: int(sec.rule.satisfied_by(tokens, cfg.case_folding))
        for sec in scheme.secondaries()
    }
    return Scorecard(document_id=doc.id, values=values)


def _parse_rule(raw, where: str) -> KeywordRule:
    if not isinstance(raw, dict) or "type" not in raw or "terms" not in raw:
        raise ConfigError(f"{where}: rule must be an object with 'type' and 'terms'")
    terms = raw["terms"]
    if not isinstance(terms, list) or not all(isinstance(t, str) for t in terms):
        raise ConfigError(f"{where}: rule terms must be a list of strings")
    return KeywordRule(kind=raw["type"], terms=tuple(terms))


def load_scheme(path) -> IndicatorScheme:
    """Load and validate an indicator scheme from its JSON file."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read scheme file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scheme file {path} is not valid JSON: {exc}") from exc
    return scheme_from_dict(payload)


def scheme_from_dict(payload: dict) -> IndicatorScheme:
    if not isinstance(payload, dict) or "primaries" not in payload:
        raise ConfigError("scheme must be an object with a 'primaries' list")
    primaries = []
    for i, p in enumerate(payload["primaries"]):
        where = f"primaries[{i}]"
        for key in ("code", "label", "secondaries"):
            if key not in p:
                raise ConfigError(f"{where}: missing key {key!r}")
        secondaries = tuple(
            SecondaryIndicator(
                code=s["code"],
                label=s.get("label", s["code"]),
                rule=_parse_rule(s.get("rule"), f"{where}.secondaries[{j}]"),
            )
            for j, s in enumerate(p["secondaries"])
        )
        primaries.append(
            PrimaryIndicator(code=p["code"], label=p["label"], secondaries=secondaries)
        )
    scheme = IndicatorScheme(name=payload.get("name", "unnamed"), primaries=tuple(primaries))
    scheme.validate()
    return scheme


def default_scheme() -> IndicatorScheme:
    """The shipped 10-primary / 47-secondary scheme (placeholder rules)."""
    from importlib import resources

    with resources.files("pmclogit.data").joinpath("default_scheme.json").open(
        encoding="utf-8"
    ) as fh:
        return scheme_from_dict(json.load(fh))


def load_corpus(directory, manifest_path) -> list[PolicyDocument]:
    """Read documents listed in a manifest CSV (id, title, issuing_body, issue_year, filename)."""
    directory = Path(directory)
    docs = []
    with open(manifest_path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"id", "title", "issuing_body", "issue_year", "filename"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            missing = sorted(required - set(reader.fieldnames or ()))
            raise DataError(f"corpus manifest missing columns: {', '.join(missing)}")
        for line_no, row in enumerate(reader, start=2):
            try:
                year = int(row["issue_year"])
            except ValueError:
                raise DataError(
                    f"corpus manifest line {line_no}: issue_year {row['issue_year']!r} "
                    "is not an integer"
                ) from None
            body_path = directory / row["filename"]
            try:
                body = body_path.read_text(encoding="utf-8")
            except OSError as exc:
                raise DataError(f"cannot read document file {body_path}: {exc}") from exc
            if not body.strip():
                raise DataError(f"document file {body_path} is empty")
            docs.append(
                PolicyDocument(
                    id=row["id"],
                    title=row["title"],
                    issuing_body=row["issuing_body"],
                    issue_year=year,
                    body=body,
                )
            )
    if not docs:
        raise DataError("corpus manifest lists no documents")
    return docs
