"""Independent brute-force oracle for belief questions.

Deliberately shares no code with wmreason.engine: instead of maintaining an
incremental belief map, it recomputes visibility from scratch for every query
and scans the event list backwards for the last placement-affecting event the
whole chain witnessed. Used to cross-check the engine on generated corpora.
"""

from __future__ import annotations


def _visibility_log(story):
    """Per event: (witness set, listener set, object, resulting container)."""
    rooms: dict[str, str | None] = {}
    attentive: dict[str, bool] = {}
    placements: dict[str, str] = {}
    obj_rooms: dict[str, str] = {}
    log = []
    for e in story.events:
        def present(room):
            return {a for a, r in rooms.items() if r == room and attentive.get(a, True)}

        witnesses: set[str] = set()
        listeners: set[str] = set()
        obj = None
        value = None
        if e.kind == "enter":
            witnesses = present(e.room) | {e.agent}
            rooms[e.agent] = e.room
            attentive[e.agent] = True
        elif e.kind == "exit":
            witnesses = present(e.room) | {e.agent}
            rooms[e.agent] = None
        elif e.kind == "place":
            witnesses = present(e.room)
            placements[e.obj] = e.container
            obj_rooms[e.obj] = e.room
            obj, value = e.obj, e.container
        elif e.kind == "move":
            witnesses = present(obj_rooms[e.obj]) | {e.agent}
            placements[e.obj] = e.container
            obj, value = e.obj, e.container
        elif e.kind == "private_tell":
            listeners = {e.target} if attentive.get(e.target, True) else set()
            witnesses = {e.agent} | listeners
            obj, value = e.obj, e.container
        elif e.kind == "public_tell":
            witnesses = present(e.room) | {e.agent}
            listeners = witnesses - {e.agent}
            obj, value = e.obj, e.container
        elif e.kind == "distracted":
            attentive[e.agent] = False
        log.append((frozenset(witnesses), frozenset(listeners), obj, value, e.kind))
    return log, placements


def brute_answer(story, q) -> str:
    """Answer a question by exhaustive backward scan over witnessed events."""
    log, placements = _visibility_log(story)

    if q.order == 0:
        return placements.get(q.obj, "unknown")

    chain_set = set(q.chain)
    last = q.chain[-1]
    for witnesses, listeners, obj, value, kind in reversed(log):
        if obj != q.obj or value is None:
            continue
        if not chain_set <= witnesses:
            continue
        if kind in ("private_tell", "public_tell") and last not in listeners:
            continue
        return value
    return "unknown"
