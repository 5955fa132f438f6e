"""Confusion-word lexicons and streaming trigger detection.

The detector watches an accumulating generation stream for whole-word,
case-insensitive lexicon matches. Matching is invariant to how the stream is
chunked: a match touching the current end of the text is held back until the
next chunk (or finish()) confirms its right word boundary. Text injected into
the stream by interventions is excluded from matching.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

# Surface forms that flag a confused reasoning state; matched exactly,
# no stemming ("confused" matches, "confusedly" does not).
OURS_WORDS = (
    "ambiguous",
    "complicating",
    "confusion",
    "confusing",
    "confused",
    "perplexity",
    "puzzle",
    "puzzled",
    "puzzling",
    "perplexed",
    "complication",
    "troubled",
    "tricky",
    "conflicts",
    "ambiguity",
)

PAUSE_VALIDATION_WORDS = (
    "wait",
    "check",
    "make sure",
    "hold on",
    "verify",
    "let me see",
    "confirm",
    "ensure",
    "evaluate",
    "examine",
)

BRANCH_EXTENSION_WORDS = (
    "alternatively",
    "another",
    "instead",
    "however",
    "while",
    "yet",
    "though",
    "rather",
    "otherwise",
    "on the other hand",
)

LEXICON_NAMES = ("ours", "pause_validation", "branch_extension")

DEFAULT_MIN_GAP = 20


@dataclass(frozen=True)
class TriggerLexicon:
    name: str
    entries: tuple[str, ...]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("lexicon entries must be non-empty")
        if len(set(self.entries)) != len(self.entries):
            raise ValueError("lexicon entries must be unique")
        for entry in self.entries:
            if not entry or entry != entry.lower():
                raise ValueError(f"lexicon entries must be lowercase: {entry!r}")

    def pattern(self) -> re.Pattern:
        # Longest-first alternation; lookarounds enforce whole-word matches
        # (phrases match with single spaces only).
        alternation = "|".join(
            re.escape(e) for e in sorted(self.entries, key=len, reverse=True)
        )
        return re.compile(rf"(?<!\w)(?:{alternation})(?!\w)", re.IGNORECASE)


def builtin_lexicon(name: str) -> TriggerLexicon:
    table = {
        "ours": OURS_WORDS,
        "pause_validation": PAUSE_VALIDATION_WORDS,
        "branch_extension": BRANCH_EXTENSION_WORDS,
    }
    if name not in table:
        raise ValueError(f"unknown lexicon {name!r}; built-ins: {LEXICON_NAMES}")
    return TriggerLexicon(name=name, entries=table[name])


def load_lexicon(path: str | Path, name: str = "custom") -> TriggerLexicon:
    """Read a lexicon from a plain-text file, one entry per line."""
    entries = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            entries.append(line)
    return TriggerLexicon(name=name, entries=tuple(dict.fromkeys(entries)))


def resolve_lexicon(name_or_path: str) -> TriggerLexicon:
    """Built-in lexicon by name, or a custom one loaded from a file path."""
    try:
        return builtin_lexicon(name_or_path)
    except ValueError:
        if Path(name_or_path).exists():
            return load_lexicon(name_or_path)
        raise


@dataclass(frozen=True)
class TriggerEvent:
    word: str          # matched entry, lowercase
    char_span: tuple[int, int]   # [start, end) in the accumulated text
    ordinal: int       # 1-based emission index within the stream


class StreamDetector:
    """Per-stream trigger matcher; single-owner, not thread-shared."""

    # Rewind margin when rescanning: longest phrase entry plus slack.
    _BACKOFF = 64

    def __init__(self, lexicon: TriggerLexicon):
        self.lexicon = lexicon
        self._pattern = lexicon.pattern()
        self._text = ""
        self._suppressed: list[tuple[int, int]] = []
        self._watermark = 0   # every match ending at or before this was handled
        self._count = 0

    @property
    def text(self) -> str:
        return self._text

    def feed(self, chunk: str) -> list[TriggerEvent]:
        self._text += chunk
        return self._scan(final=False)

    def finish(self) -> list[TriggerEvent]:
        """Flush matches whose right boundary was pending at stream end."""
        return self._scan(final=True)

    def inject(self, text: str) -> None:
        """Append intervention text; matches inside it are suppressed."""
        start = len(self._text)
        self._text += text
        self._suppressed.append((start, len(self._text)))
        self._watermark = len(self._text)

    def truncate_to(self, offset: int) -> None:
        """Discard stream text beyond offset (post-trigger cleanup)."""
        if offset > len(self._text):
            raise ValueError("cannot truncate beyond current text")
        self._text = self._text[:offset]
        self._suppressed = [(s, e) for s, e in self._suppressed if e <= offset]
        self._watermark = min(self._watermark, offset)

    def _scan(self, final: bool) -> list[TriggerEvent]:
        # Rescan a bounded tail: far enough back to catch matches crossing
        # the previous chunk boundary, aligned to a word boundary so the
        # slice cannot fabricate one.
        start = max(0, min(self._watermark, len(self._text) - self._BACKOFF))
        while start > 0 and (self._text[start - 1].isalnum() or self._text[start - 1] == "_"):
            start -= 1

        events = []
        for m in self._pattern.finditer(self._text, start):
            begin, end = m.span()
            if end <= self._watermark:
                continue
            if end == len(self._text) and not final:
                break  # right boundary unconfirmed until more text arrives
            if any(begin < se and ss < end for ss, se in self._suppressed):
                self._watermark = end
                continue
            self._count += 1
            events.append(TriggerEvent(
                word=m.group(0).lower(), char_span=(begin, end), ordinal=self._count,
            ))
            self._watermark = end
        return events


def count_matches(text: str, lexicon: TriggerLexicon) -> int:
    """One-shot whole-word occurrence count over a complete text."""
    detector = StreamDetector(lexicon)
    events = detector.feed(text)
    events += detector.finish()
    return len(events)


class InterventionPolicy:
    """Caps interventions at k and enforces a token gap between them."""

    def __init__(self, k: int = 3, min_gap: int = DEFAULT_MIN_GAP):
        if k < 0 or min_gap < 0:
            raise ValueError("k and min_gap must be non-negative")
        self.k = k
        self.min_gap = min_gap
        self.accepted = 0
        self._last_accept_at: int | None = None

    def accept(self, event: TriggerEvent, generated_tokens: int) -> bool:
        """True iff this trigger should fire an intervention, and record it."""
        if self.accepted >= self.k:
            return False
        if (self._last_accept_at is not None
                and generated_tokens - self._last_accept_at < self.min_gap):
            return False
        self.accepted += 1
        self._last_accept_at = generated_tokens
        return True

    def reset(self) -> None:
        self.accepted = 0
        self._last_accept_at = None
