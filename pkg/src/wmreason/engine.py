"""Temporal world model: objective state, nested beliefs, and state rendering.

The engine replays story events into immutable snapshots. Each snapshot holds
the objective placements/locations, a belief map over agent chains, and the
rendered timeline so far. Beliefs follow a witness semantics:

* an agent witnesses an event iff it is in the event's room, present, and
  attentive at that timestep; the actor of an event always witnesses it, and
  an exit is witnessed by everyone in the room including the exiter;
* a chain (a1, ..., an) updates on an event iff every ai witnessed it; for
  tells the chain's last agent must additionally be a listener, and the
  adopted value is the claimed container (claims are trusted unconditionally);
* private tells reach their listener wherever they are, unless distracted;
* distracted agents witness nothing until they next enter a room.

A chain's belief is therefore the container implied by the last event all its
agents witnessed, or "unknown" if there was none.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from functools import lru_cache

from .errors import InconsistentEvent, SchemaParseError, UnknownEntity
from .story import AGENT, OBJECT, Event, Question, Story

UNKNOWN = "unknown"

DEFAULT_MAX_ORDER = 4

# Characters of trailing reasoning scanned for entity mentions when scoping.
MENTION_WINDOW = 400


@dataclass(frozen=True)
class WorldState:
    t: int
    placements: dict[str, tuple[str, str]]   # object -> (container, room)
    agent_rooms: dict[str, str | None]
    attentive: dict[str, bool]


@dataclass(frozen=True)
class BeliefState:
    t: int
    # (agent chain, object) -> believed container; absent means unknown
    beliefs: dict[tuple[tuple[str, ...], str], str]


@dataclass(frozen=True)
class WorldModelSnapshot:
    state: WorldState
    beliefs: BeliefState
    timeline: tuple[str, ...]
    agents: tuple[str, ...]
    objects: tuple[str, ...]
    display: dict[str, str]
    max_order: int = DEFAULT_MAX_ORDER

    @property
    def t(self) -> int:
        return self.state.t


@dataclass(frozen=True)
class StateScope:
    """Which parts of a snapshot an intervention renders.

    entities filters objective and belief lines to the named agents/objects;
    first_order_objects forces every agent's first-order belief about those
    objects to be rendered, unknown included; full renders everything.
    """

    entities: frozenset[str] = frozenset()
    first_order_objects: frozenset[str] = frozenset()
    full: bool = False


def initial_snapshot(story: Story, max_order: int = DEFAULT_MAX_ORDER) -> WorldModelSnapshot:
    agents = tuple(sorted(story.names(AGENT)))
    objects = tuple(sorted(story.names(OBJECT)))
    display = {e.name: e.display for e in story.entities}
    return WorldModelSnapshot(
        state=WorldState(
            t=0,
            placements={},
            agent_rooms={a: None for a in agents},
            attentive={a: True for a in agents},
        ),
        beliefs=BeliefState(t=0, beliefs={}),
        timeline=(),
        agents=agents,
        objects=objects,
        display=display,
        max_order=max_order,
    )


@lru_cache(maxsize=4096)
def _chains_over(witnesses: frozenset, max_order: int) -> tuple[tuple[str, ...], ...]:
    """All distinct-agent chains of length 1..max_order over a witness set."""
    agents = sorted(witnesses)
    chains = []
    for k in range(1, min(max_order, len(agents)) + 1):
        chains.extend(itertools.permutations(agents, k))
    return tuple(chains)


def _event_summary(event: Event, display: dict[str, str]) -> str:
    d = lambda name: display.get(name, name)
    if event.kind == "enter":
        body = f"{d(event.agent)} entered {d(event.room)}"
    elif event.kind == "exit":
        body = f"{d(event.agent)} exited {d(event.room)}"
    elif event.kind == "place":
        body = f"{d(event.obj)} placed in {d(event.container)} ({d(event.room)})"
    elif event.kind == "move":
        body = (f"{d(event.agent)} moved {d(event.obj)} from "
                f"{d(event.from_container)} to {d(event.container)}")
    elif event.kind == "private_tell":
        body = (f"{d(event.agent)} privately told {d(event.target)} that "
                f"{d(event.obj)} is in {d(event.container)}")
    elif event.kind == "public_tell":
        body = (f"{d(event.agent)} publicly claimed in {d(event.room)} that "
                f"{d(event.obj)} is in {d(event.container)}")
    elif event.kind == "distracted":
        body = f"{d(event.agent)} got distracted"
    else:
        body = event.raw.strip()
    return f"t={event.t} | event | {body}"


def _witnesses(state: WorldState, event: Event) -> tuple[frozenset, frozenset]:
    """(witness set, listener set) of an event given the pre-event state."""
    in_room = lambda room: {
        a for a, r in state.agent_rooms.items()
        if r == room and state.attentive.get(a, True)
    }
    if event.kind in ("enter", "exit"):
        return frozenset(in_room(event.room) | {event.agent}), frozenset()
    if event.kind == "place":
        return frozenset(in_room(event.room)), frozenset()
    if event.kind == "move":
        return frozenset(in_room(event.room) | {event.agent}), frozenset()
    if event.kind == "private_tell":
        heard = {event.target} if state.attentive.get(event.target, True) else set()
        return frozenset({event.agent} | heard), frozenset(heard)
    if event.kind == "public_tell":
        witnesses = in_room(event.room) | {event.agent}
        return frozenset(witnesses), frozenset(witnesses - {event.agent})
    return frozenset(), frozenset()


def step(snapshot: WorldModelSnapshot, event: Event) -> WorldModelSnapshot:
    """Apply one event, returning a new snapshot; the input is not mutated."""
    state = snapshot.state
    if event.t != state.t + 1:
        raise InconsistentEvent(event.t, f"expected timestep {state.t + 1}")

    witnesses, listeners = _witnesses(state, event)

    placements = dict(state.placements)
    agent_rooms = dict(state.agent_rooms)
    attentive = dict(state.attentive)
    beliefs = dict(snapshot.beliefs.beliefs)

    if event.kind == "enter":
        agent_rooms[event.agent] = event.room
        attentive[event.agent] = True
    elif event.kind == "exit":
        if agent_rooms.get(event.agent) != event.room:
            raise InconsistentEvent(event.t, f"{event.agent} is not in {event.room}")
        agent_rooms[event.agent] = None
    elif event.kind == "place":
        if event.obj in placements:
            raise InconsistentEvent(event.t, f"{event.obj} was already placed")
        placements[event.obj] = (event.container, event.room)
    elif event.kind == "move":
        if event.obj not in placements:
            raise InconsistentEvent(event.t, f"{event.obj} moved before being placed")
        container, room = placements[event.obj]
        if container != event.from_container:
            raise InconsistentEvent(
                event.t, f"{event.obj} is in {container}, not {event.from_container}")
        placements[event.obj] = (event.container, room)
    elif event.kind == "distracted":
        attentive[event.agent] = False

    if event.kind in ("place", "move"):
        value = event.container
        for chain in _chains_over(witnesses, snapshot.max_order):
            beliefs[(chain, event.obj)] = value
    elif event.kind in ("private_tell", "public_tell"):
        value = event.container
        for chain in _chains_over(witnesses, snapshot.max_order):
            if chain[-1] in listeners:
                beliefs[(chain, event.obj)] = value

    return WorldModelSnapshot(
        state=WorldState(t=event.t, placements=placements,
                         agent_rooms=agent_rooms, attentive=attentive),
        beliefs=BeliefState(t=event.t, beliefs=beliefs),
        timeline=snapshot.timeline + (_event_summary(event, snapshot.display),),
        agents=snapshot.agents,
        objects=snapshot.objects,
        display=snapshot.display,
        max_order=snapshot.max_order,
    )


def replay(story: Story, max_order: int = DEFAULT_MAX_ORDER) -> list[WorldModelSnapshot]:
    """Snapshots after each event; snapshot[i] reflects events 1..i+1."""
    if not story.events:
        raise ValueError("story must contain at least one event")
    snapshots = []
    current = initial_snapshot(story, max_order=max_order)
    for event in story.events:
        current = step(current, event)
        snapshots.append(current)
    return snapshots


def _canonical_chain(chain: tuple[str, ...]) -> tuple[str, ...]:
    # Belief value depends only on the chain's agent set and last agent, so
    # repeated agents collapse onto the distinct chain keeping last positions.
    seen: list[str] = []
    for agent in reversed(chain):
        if agent not in seen:
            seen.append(agent)
    return tuple(reversed(seen))


def answer(snapshot: WorldModelSnapshot, q: Question) -> str:
    """Ground-truth answer for a question against a (final) snapshot."""
    if q.obj not in snapshot.objects:
        raise UnknownEntity(q.obj)
    for agent in q.chain:
        if agent not in snapshot.agents:
            raise UnknownEntity(agent)
    if q.order == 0:
        placed = snapshot.state.placements.get(q.obj)
        return placed[0] if placed else UNKNOWN
    chain = _canonical_chain(q.chain)
    if len(chain) > snapshot.max_order:
        raise ValueError(f"question order {q.order} exceeds max_order {snapshot.max_order}")
    return snapshot.beliefs.beliefs.get((chain, q.obj), UNKNOWN)


# --------------------------------------------------------------------------
# Rendering
# --------------------------------------------------------------------------

def _belief_line(t: int, chain: tuple[str, ...], obj: str, value: str,
                 display: dict[str, str]) -> str:
    d = lambda name: display.get(name, name)
    links = " -> ".join(d(a) for a in chain)
    return f"t={t} | belief | {links} -> {d(obj)} in {d(value)}"


def render_information(snapshot: WorldModelSnapshot, scope: StateScope) -> str:
    """Render the structured state block injected into a reasoning stream.

    Output is deterministic: timeline in order, objective lines (objects then
    agents, lexicographic), belief lines by chain length then lexicographic.
    Starts with <information> and ends with </information>, no trailing
    whitespace. An empty scope renders timeline and objective state only.
    """
    for name in scope.entities | scope.first_order_objects:
        if name not in snapshot.agents and name not in snapshot.objects:
            raise UnknownEntity(name)

    t = snapshot.t
    display = snapshot.display
    d = lambda name: display.get(name, name)

    if scope.full or not scope.entities:
        objects_in = list(snapshot.objects)
        agents_in = list(snapshot.agents)
    else:
        objects_in = [o for o in snapshot.objects if o in scope.entities]
        agents_in = [a for a in snapshot.agents if a in scope.entities]

    lines: list[str] = list(snapshot.timeline)

    for obj in sorted(objects_in):
        placed = snapshot.state.placements.get(obj)
        if placed:
            container, room = placed
            lines.append(f"t={t} | objective | {d(obj)} in {d(container)} ({d(room)})")
    for agent in sorted(agents_in):
        room = snapshot.state.agent_rooms.get(agent)
        where = d(room) if room else "no room"
        suffix = "" if snapshot.state.attentive.get(agent, True) else " (distracted)"
        lines.append(f"t={t} | objective | {d(agent)} in {where}{suffix}")

    entries: dict[tuple[tuple[str, ...], str], str] = {}
    if scope.full:
        for (chain, obj), value in snapshot.beliefs.beliefs.items():
            entries[(chain, obj)] = value
        for agent in snapshot.agents:
            for obj in snapshot.objects:
                entries.setdefault(((agent,), obj), UNKNOWN)
    elif scope.entities:
        agent_set = set(agents_in)
        object_set = set(objects_in)
        for (chain, obj), value in snapshot.beliefs.beliefs.items():
            if obj in object_set and set(chain) <= agent_set:
                entries[(chain, obj)] = value
    if scope.first_order_objects and not scope.full:
        for obj in scope.first_order_objects:
            for agent in snapshot.agents:
                key = ((agent,), obj)
                entries[key] = snapshot.beliefs.beliefs.get(key, UNKNOWN)

    for chain, obj in sorted(entries, key=lambda k: (len(k[0]), k[0], k[1])):
        lines.append(_belief_line(t, chain, obj, entries[(chain, obj)], display))

    return "<information>\n" + "\n".join(lines) + "\n</information>"


def select_scope(q: Question, reasoning_suffix: str, attempt: int,
                 entity_names, window: int = MENTION_WINDOW) -> StateScope:
    """Pick what to render for the attempt-th intervention of an item.

    Attempt 1 scopes to the question's entities plus any known entity names
    mentioned in the trailing window of the reasoning; attempt 2 adds every
    agent's first-order belief about the question's object; attempt 3 and
    later escalate to the full snapshot.
    """
    if attempt < 1:
        raise ValueError("attempt is 1-based")
    if attempt >= 3:
        return StateScope(full=True)

    names = set(q.chain) | {q.obj}
    tail = reasoning_suffix[-window:].lower() if reasoning_suffix else ""
    if tail:
        for name in entity_names:
            if re.search(rf"(?<!\w){re.escape(name)}(?!\w)", tail):
                names.add(name)

    first_order = frozenset({q.obj}) if attempt == 2 else frozenset()
    return StateScope(entities=frozenset(names), first_order_objects=first_order)


# --------------------------------------------------------------------------
# Snapshot JSON schema (export + LLM world-model construction)
# --------------------------------------------------------------------------

def snapshot_to_json(snapshot: WorldModelSnapshot) -> dict:
    return {
        "t": snapshot.t,
        "timeline": list(snapshot.timeline),
        "objects": {
            obj: {"container": c, "room": r}
            for obj, (c, r) in sorted(snapshot.state.placements.items())
        },
        "agents": {
            a: {
                "room": snapshot.state.agent_rooms.get(a),
                "attentive": snapshot.state.attentive.get(a, True),
            }
            for a in snapshot.agents
        },
        "beliefs": [
            {"chain": list(chain), "object": obj, "container": value}
            for (chain, obj), value in sorted(snapshot.beliefs.beliefs.items())
        ],
        "all_objects": list(snapshot.objects),
        "display": dict(sorted(snapshot.display.items())),
        "max_order": snapshot.max_order,
    }


def snapshot_from_json(data: dict) -> WorldModelSnapshot:
    try:
        t = int(data["t"])
        timeline = tuple(str(x) for x in data["timeline"])
        agents = tuple(sorted(str(a) for a in data["agents"]))
        placements = {
            str(o): (str(spec["container"]), str(spec["room"]))
            for o, spec in data["objects"].items()
        }
        objects = tuple(sorted(set(data.get("all_objects", [])) | set(placements)))
        agent_rooms = {
            str(a): (str(spec["room"]) if spec["room"] is not None else None)
            for a, spec in data["agents"].items()
        }
        attentive = {str(a): bool(spec.get("attentive", True))
                     for a, spec in data["agents"].items()}
        beliefs = {}
        for entry in data["beliefs"]:
            chain = tuple(str(a) for a in entry["chain"])
            if not chain:
                raise KeyError("chain")
            beliefs[(chain, str(entry["object"]))] = str(entry["container"])
        display = {str(k): str(v) for k, v in data.get("display", {}).items()}
        max_order = int(data.get("max_order", DEFAULT_MAX_ORDER))
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise SchemaParseError(f"bad snapshot payload: {exc}") from exc
    return WorldModelSnapshot(
        state=WorldState(t=t, placements=placements,
                         agent_rooms=agent_rooms, attentive=attentive),
        beliefs=BeliefState(t=t, beliefs=beliefs),
        timeline=timeline,
        agents=agents,
        objects=objects,
        display=display,
        max_order=max_order,
    )


_WM_INSTRUCTION = """\
You maintain a structured world model for a short story. Read the story and
reply with ONLY a JSON object of this exact shape:

{"t": <number of events>,
 "timeline": ["t=1 | event | ...", ...],
 "objects": {"<object>": {"container": "<container>", "room": "<room>"}},
 "agents": {"<agent>": {"room": "<room or null>", "attentive": true/false}},
 "beliefs": [{"chain": ["<agent>", ...], "object": "<object>",
              "container": "<container>"}],
 "all_objects": ["<object>", ...],
 "display": {"<name>": "<Display Name>"},
 "max_order": 4}

A beliefs entry with chain [a, b] means "a thinks b thinks the object is in
that container". Track every event in order. No prose outside the JSON.
"""


def _extract_json_object(text: str) -> dict:
    start = text.find("{")
    if start < 0:
        raise SchemaParseError("no JSON object in reply")
    decoder = json.JSONDecoder()
    for i in range(start, len(text)):
        if text[i] != "{":
            continue
        try:
            obj, _ = decoder.raw_decode(text[i:])
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    raise SchemaParseError("no parseable JSON object in reply")


def llm_build_world_model(story: Story, provider) -> tuple[WorldModelSnapshot, int]:
    """Build a snapshot by prompting a world-model generation model.

    The provider is asked for the snapshot JSON schema; a schema-invalid
    reply is retried once. Returns the snapshot and the total prompt plus
    completion tokens the construction consumed.
    """
    from .provider import complete

    story_text = "\n".join(e.raw for e in story.events)
    messages = [
        {"role": "system", "content": _WM_INSTRUCTION},
        {"role": "user", "content": f"Story:\n{story_text}"},
    ]
    tokens_used = 0
    last_error: SchemaParseError | None = None
    for _ in range(2):
        text, usage = complete(provider, messages)
        tokens_used += usage.get("prompt_tokens", 0) + usage.get("completion_tokens", 0)
        try:
            return snapshot_from_json(_extract_json_object(text)), tokens_used
        except SchemaParseError as exc:
            last_error = exc
    raise last_error
