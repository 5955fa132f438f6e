"""Narrative domain: entities, events, stories, questions, and the template parser.

Stories are sequences of templated English lines ("Alice entered the kitchen.",
"Bob moved the apple to the basket.") parsed into structured events with a
closed grammar. Questions ask for an object's location at some belief nesting
depth ("Where does Alice think Bob thinks the apple is?").
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import AdapterSchemaError, InconsistentEvent, UnparseableLine

AGENT = "agent"
OBJECT = "object"
CONTAINER = "container"
ROOM = "room"

EVENT_KINDS = (
    "enter",
    "exit",
    "place",
    "move",
    "private_tell",
    "public_tell",
    "distracted",
    "ambient",
)

# Event kinds that can change where an object is believed to be.
PLACEMENT_KINDS = ("place", "move", "private_tell", "public_tell")

GRAMMARS = ("strict", "lenient")


def normalize_name(surface: str) -> str:
    """Lowercase a surface form and collapse internal whitespace."""
    return " ".join(surface.strip().lower().split())


@dataclass(frozen=True)
class Entity:
    kind: str
    name: str      # normalized identity, unique per kind
    display: str   # surface form as first seen, used for rendering


@dataclass(frozen=True)
class Event:
    """One narrative step. Unused fields stay None depending on kind.

    agent is the actor (enter/exit/move/distracted) or the speaker (tells);
    target is the listener of a private tell; container is the destination
    or claimed container; from_container is filled in by the parser from the
    objective state at that point.
    """

    t: int
    kind: str
    raw: str
    agent: str | None = None
    target: str | None = None
    obj: str | None = None
    container: str | None = None
    from_container: str | None = None
    room: str | None = None


@dataclass(frozen=True)
class Story:
    id: str
    entities: tuple[Entity, ...]
    events: tuple[Event, ...]
    source: str = "custom"

    def names(self, kind: str) -> list[str]:
        return [e.name for e in self.entities if e.kind == kind]

    def display(self, name: str) -> str:
        for e in self.entities:
            if e.name == name:
                return e.display
        return name

    def has(self, kind: str, name: str) -> bool:
        return any(e.kind == kind and e.name == name for e in self.entities)

    def entity_names(self) -> set[str]:
        return {e.name for e in self.entities}


@dataclass(frozen=True)
class Question:
    story_id: str
    order: int
    chain: tuple[str, ...]
    obj: str
    choices: tuple[str, ...] | None = None
    gold: str | None = None

    def __post_init__(self):
        if self.order != len(self.chain):
            raise ValueError("question order must equal chain length")
        if self.choices is not None and self.gold is not None:
            if self.gold not in self.choices:
                raise ValueError("gold answer must be one of the choices")


# --------------------------------------------------------------------------
# Template grammar
# --------------------------------------------------------------------------

_ART = r"(?:the |a |an )?"
_NAME = r"([A-Za-z][A-Za-z' -]*?)"

# Most specific first: name slots may contain spaces, so the loose "is in"
# placement production must come after the tell productions it would shadow.
_PRODUCTIONS = [
    (
        "private_tell",
        re.compile(
            rf"^{_NAME} privately told {_NAME} that {_ART}{_NAME} is in {_ART}{_NAME}\.?$",
            re.IGNORECASE,
        ),
    ),
    (
        "public_tell",
        re.compile(
            rf"^{_NAME} publicly claimed that {_ART}{_NAME} is in {_ART}{_NAME}\.?$",
            re.IGNORECASE,
        ),
    ),
    ("move", re.compile(rf"^{_NAME} moved {_ART}{_NAME} to {_ART}{_NAME}\.?$", re.IGNORECASE)),
    ("enter", re.compile(rf"^{_NAME} entered {_ART}{_NAME}\.?$", re.IGNORECASE)),
    ("exit", re.compile(rf"^{_NAME} exited {_ART}{_NAME}\.?$", re.IGNORECASE)),
    ("distracted", re.compile(rf"^{_NAME} got distracted\.?$", re.IGNORECASE)),
    ("place", re.compile(rf"^{_ART}{_NAME} is in {_ART}{_NAME}\.?$", re.IGNORECASE)),
]


class _ParseState:
    """Objective state tracked while parsing, enough to validate events."""

    def __init__(self):
        self.entities: dict[tuple[str, str], Entity] = {}
        self.placements: dict[str, tuple[str, str]] = {}  # object -> (container, room)
        self.agent_rooms: dict[str, str | None] = {}
        self.container_rooms: dict[str, str] = {}
        self.scene_room: str | None = None

    def register(self, kind: str, surface: str) -> str:
        name = normalize_name(surface)
        if not name:
            raise ValueError("entity name must be non-empty")
        key = (kind, name)
        if key not in self.entities:
            self.entities[key] = Entity(kind=kind, name=name, display=surface.strip())
        return name


def _apply_parsed(state: _ParseState, t: int, kind: str, m: re.Match, raw: str) -> Event:
    """Resolve a matched production into an Event, updating parse state."""
    if kind == "enter":
        agent = state.register(AGENT, m.group(1))
        room = state.register(ROOM, m.group(2))
        state.agent_rooms[agent] = room
        state.scene_room = room
        return Event(t=t, kind=kind, raw=raw, agent=agent, room=room)

    if kind == "exit":
        agent = state.register(AGENT, m.group(1))
        room = state.register(ROOM, m.group(2))
        if state.agent_rooms.get(agent) != room:
            raise InconsistentEvent(t, f"{agent} exits {room} but is not there")
        state.agent_rooms[agent] = None
        state.scene_room = room
        return Event(t=t, kind=kind, raw=raw, agent=agent, room=room)

    if kind == "place":
        obj = state.register(OBJECT, m.group(1))
        container = state.register(CONTAINER, m.group(2))
        if obj in state.placements:
            raise InconsistentEvent(t, f"{obj} was already placed")
        if state.scene_room is None:
            raise InconsistentEvent(t, "placement before any room is on scene")
        room = state.scene_room
        state.placements[obj] = (container, room)
        state.container_rooms.setdefault(container, room)
        return Event(t=t, kind=kind, raw=raw, obj=obj, container=container, room=room)

    if kind == "move":
        agent = state.register(AGENT, m.group(1))
        obj = state.register(OBJECT, m.group(2))
        container = state.register(CONTAINER, m.group(3))
        if obj not in state.placements:
            raise InconsistentEvent(t, f"{obj} moved before being placed")
        from_container, room = state.placements[obj]
        if state.agent_rooms.get(agent) != room:
            raise InconsistentEvent(t, f"{agent} moves {obj} but is not in {room}")
        bound = state.container_rooms.get(container)
        if bound is not None and bound != room:
            raise InconsistentEvent(t, f"{container} is in {bound}, not {room}")
        state.placements[obj] = (container, room)
        state.container_rooms.setdefault(container, room)
        return Event(
            t=t, kind=kind, raw=raw, agent=agent, obj=obj,
            container=container, from_container=from_container, room=room,
        )

    if kind == "private_tell":
        speaker = state.register(AGENT, m.group(1))
        listener = state.register(AGENT, m.group(2))
        obj = state.register(OBJECT, m.group(3))
        container = state.register(CONTAINER, m.group(4))
        if speaker == listener:
            raise InconsistentEvent(t, f"{speaker} tells themselves")
        return Event(
            t=t, kind=kind, raw=raw, agent=speaker, target=listener,
            obj=obj, container=container,
        )

    if kind == "public_tell":
        speaker = state.register(AGENT, m.group(1))
        obj = state.register(OBJECT, m.group(2))
        container = state.register(CONTAINER, m.group(3))
        room = state.agent_rooms.get(speaker)
        if room is None:
            raise InconsistentEvent(t, f"{speaker} claims publicly but is in no room")
        return Event(
            t=t, kind=kind, raw=raw, agent=speaker, obj=obj,
            container=container, room=room,
        )

    if kind == "distracted":
        agent = state.register(AGENT, m.group(1))
        return Event(t=t, kind=kind, raw=raw, agent=agent)

    raise AssertionError(f"unhandled production {kind}")


def parse_story(
    lines: list[str],
    grammar: str = "strict",
    story_id: str = "story",
    source: str = "custom",
) -> Story:
    """Parse templated story lines into a Story.

    Grammar "strict" raises UnparseableLine for lines outside the template
    set; grammar "lenient" keeps them as no-op ambient events (scene
    descriptions, weather, etc.) that occupy a timestep but never touch
    state. Raises InconsistentEvent when an event contradicts the objective
    state built so far.
    """
    if grammar not in GRAMMARS:
        raise ValueError(f"unknown grammar {grammar!r}; registered: {GRAMMARS}")
    if not lines:
        raise ValueError("lines must be non-empty")

    state = _ParseState()
    events: list[Event] = []
    for i, raw in enumerate(lines):
        t = i + 1
        line = raw.strip()
        for kind, pattern in _PRODUCTIONS:
            m = pattern.match(line)
            if m:
                events.append(_apply_parsed(state, t, kind, m, raw))
                break
        else:
            if grammar == "strict":
                raise UnparseableLine(t, raw)
            events.append(Event(t=t, kind="ambient", raw=raw))

    return Story(
        id=story_id,
        entities=tuple(state.entities.values()),
        events=tuple(events),
        source=source,
    )


def render_story(story: Story) -> list[str]:
    """Inverse of parse_story on the surface level: the original lines."""
    return [e.raw for e in story.events]


# --------------------------------------------------------------------------
# Question parsing
# --------------------------------------------------------------------------

_Q_OBJECTIVE = re.compile(rf"^where is {_ART}{_NAME}(?: really)?\s*\??$", re.IGNORECASE)
_Q_LOOK = re.compile(rf"^where will {_NAME} look for {_ART}{_NAME}\s*\??$", re.IGNORECASE)
_Q_CHAIN_HEAD = re.compile(rf"^where does {_NAME} think(?: that)? ", re.IGNORECASE)
_Q_CHAIN_LINK = re.compile(rf"^{_NAME} thinks(?: that)? ", re.IGNORECASE)
_Q_CHAIN_TAIL = re.compile(rf"^{_ART}{_NAME} is\s*\??$", re.IGNORECASE)


def parse_question(text: str, story_id: str = "story",
                   choices: tuple[str, ...] | None = None,
                   gold: str | None = None) -> Question:
    """Parse a question string into (order, agent chain, object).

    Supported patterns: "Where is the X (really)?", "Where will A look for
    the X?", and think-chains "Where does A think (that) B thinks (that) the
    X is?" of any depth.
    """
    q = " ".join(text.strip().split())

    m = _Q_OBJECTIVE.match(q)
    if m:
        return Question(story_id, 0, (), normalize_name(m.group(1)), choices, gold)

    m = _Q_LOOK.match(q)
    if m:
        agent = normalize_name(m.group(1))
        return Question(story_id, 1, (agent,), normalize_name(m.group(2)), choices, gold)

    m = _Q_CHAIN_HEAD.match(q)
    if m:
        chain = [normalize_name(m.group(1))]
        rest = q[m.end():]
        while True:
            # Links first: the tail's name slot would otherwise swallow the
            # whole "B thinks the apple" remainder (names may contain spaces).
            link = _Q_CHAIN_LINK.match(rest)
            if link:
                chain.append(normalize_name(link.group(1)))
                rest = rest[link.end():]
                continue
            tail = _Q_CHAIN_TAIL.match(rest)
            if tail:
                return Question(
                    story_id, len(chain), tuple(chain),
                    normalize_name(tail.group(1)), choices, gold,
                )
            break

    raise AdapterSchemaError("question", f"unrecognized pattern: {text!r}")


def render_question(q: Question, display=lambda name: name) -> str:
    """Surface form of a question, used by generators and prompts."""
    obj = display(q.obj)
    if q.order == 0:
        return f"Where is the {obj} really?"
    parts = [f"Where does {display(q.chain[0])} think"]
    for agent in q.chain[1:]:
        parts.append(f"that {display(agent)} thinks")
    parts.append(f"the {obj} is?")
    return " ".join(parts)


# --------------------------------------------------------------------------
# Normalized items and dataset adapters
# --------------------------------------------------------------------------

ADAPTERS = ("tomi", "hitom", "exploretom")

_LINE_NUMBER = re.compile(r"^\s*\d+\s+")


@dataclass(frozen=True)
class NormalizedItem:
    """One evaluation item in the normalized JSONL schema."""

    id: str
    story: tuple[str, ...]
    question: str
    answer: str
    choices: tuple[str, ...] | None = None
    dataset: str = "custom"

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "story": list(self.story),
            "question": self.question,
            "answer": self.answer,
            "dataset": self.dataset,
        }
        if self.choices is not None:
            d["choices"] = list(self.choices)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizedItem":
        for key in ("id", "story", "question", "answer"):
            if key not in d:
                raise AdapterSchemaError(key)
        story = d["story"]
        if isinstance(story, str):
            story = [ln for ln in story.splitlines() if ln.strip()]
        choices = d.get("choices")
        return cls(
            id=str(d["id"]),
            story=tuple(story),
            question=str(d["question"]),
            answer=normalize_name(str(d["answer"])),
            choices=tuple(str(c) for c in choices) if choices is not None else None,
            dataset=str(d.get("dataset", "custom")),
        )


def _require(raw: dict, key: str, types) -> object:
    if key not in raw:
        raise AdapterSchemaError(key)
    value = raw[key]
    if not isinstance(value, types):
        raise AdapterSchemaError(key, f"expected {types}, got {type(value).__name__}")
    return value


def normalize_item(raw: dict, adapter: str) -> tuple[Story, Question]:
    """Convert an external dataset record into a (Story, Question) pair.

    All adapters read the same JSONL projection {id, story, question,
    choices?, answer}; they differ in line cleanup (ToMi numbers its lines)
    and in grammar (ExploreToM stories carry ambient scene lines).
    """
    if adapter not in ADAPTERS:
        raise ValueError(f"unknown adapter {adapter!r}; registered: {ADAPTERS}")

    story_field = _require(raw, "story", (str, list))
    question_text = _require(raw, "question", str)
    answer = _require(raw, "answer", str)
    item_id = str(raw.get("id", "item"))

    if isinstance(story_field, str):
        lines = [ln.strip() for ln in story_field.splitlines() if ln.strip()]
    else:
        lines = [str(ln).strip() for ln in story_field if str(ln).strip()]
    if adapter == "tomi":
        lines = [_LINE_NUMBER.sub("", ln) for ln in lines]
    if not lines:
        raise AdapterSchemaError("story", "no usable lines")

    choices = raw.get("choices")
    if choices is not None:
        if not isinstance(choices, list):
            raise AdapterSchemaError("choices", "expected a list")
        choices = tuple(normalize_name(str(c)) for c in choices)

    grammar = "lenient" if adapter == "exploretom" else "strict"
    story = parse_story(lines, grammar=grammar, story_id=item_id, source=adapter)
    gold = normalize_name(answer)
    if choices is not None and gold not in choices:
        choices = choices + (gold,)
    question = parse_question(question_text, story_id=item_id, choices=choices, gold=gold)
    return story, question


def item_to_pair(item: NormalizedItem) -> tuple[Story, Question]:
    """Parse an already-normalized item; generated corpora use the strict grammar."""
    grammar = "lenient" if item.dataset == "exploretom" else "strict"
    story = parse_story(list(item.story), grammar=grammar,
                        story_id=item.id, source=item.dataset)
    return story, parse_question(item.question, story_id=item.id,
                                 choices=item.choices, gold=item.answer)


def write_items_jsonl(items: list[NormalizedItem], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for item in items:
            fh.write(json.dumps(item.to_dict(), ensure_ascii=False) + "\n")


def read_items_jsonl(path: str | Path) -> list[NormalizedItem]:
    items = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                items.append(NormalizedItem.from_dict(json.loads(line)))
    return items
