"""Cooperation-message routing between agents.

A request lands in the recipient's mailbox and surfaces in their next
observation. Whether the recipient accepts is inferred from their next
cooperation command: a request back to the proposer or #Keep_coop# means
accepted; #Stop_coop# or #No_coop# means rejected. Accepted pairs live
in the world's active-pair set until one side stops.

The stage topology gates delivery: intra-team stages route only between
teammates, inter-team only across teams, hybrid stages allow both. With
cooperation disabled (the ablation), every command is discarded and
mailboxes stay untouched.
"""

from __future__ import annotations

import logging

from .parsing import CoopKind, ParsedAction
from .types import (
    CoopMessage,
    CoopTopology,
    Disposition,
    TankKind,
    WorldState,
)

log = logging.getLogger(__name__)


def route_coop(
    world: WorldState,
    turn_actions: dict[int, ParsedAction],
    coop_enabled: bool = True,
) -> list[dict]:
    """Apply this turn's cooperation commands; returns loggable events.

    Event dicts carry: turn, kind (request/keep/stop/accept/reject/drop),
    from, and optionally to/message/reason.
    """
    if not coop_enabled:
        return []
    events: list[dict] = []
    for agent_id in sorted(turn_actions):
        parsed = turn_actions[agent_id]
        coop = parsed.coop
        if coop is None:
            continue
        sender = world.tanks.get(agent_id)
        if sender is None or not sender.alive:
            continue
        events.extend(_settle_pending(world, agent_id, coop))
        if coop.kind is CoopKind.REQUEST:
            events.append(_route_request(world, agent_id, coop))
        elif coop.kind is CoopKind.STOP:
            removed = _drop_pairs(world, agent_id)
            if removed:
                events.append({"turn": world.turn, "kind": "stop", "from": agent_id})
        elif coop.kind is CoopKind.KEEP:
            if _active_pairs(world, agent_id):
                events.append({"turn": world.turn, "kind": "keep", "from": agent_id})
    return events


def _settle_pending(world: WorldState, agent_id: int, coop) -> list[dict]:
    """Resolve requests the agent has already seen, per its command."""
    accepting = coop.kind in (CoopKind.REQUEST, CoopKind.KEEP)
    events: list[dict] = []
    for msg in world.coop_history:
        if (
            msg.to_id != agent_id
            or msg.disposition is not Disposition.PENDING
            or msg.turn >= world.turn
        ):
            continue
        accepted = accepting and (
            coop.kind is CoopKind.KEEP or coop.to_id == msg.from_id
        )
        if accepted:
            msg.disposition = Disposition.ACCEPTED
            world.coop_pairs.add(_pair(agent_id, msg.from_id))
            events.append(
                {"turn": world.turn, "kind": "accept", "from": agent_id, "to": msg.from_id}
            )
        else:
            msg.disposition = Disposition.REJECTED
            events.append(
                {"turn": world.turn, "kind": "reject", "from": agent_id, "to": msg.from_id}
            )
    return events


def _route_request(world: WorldState, sender_id: int, coop) -> dict:
    event = {
        "turn": world.turn,
        "kind": "request",
        "from": sender_id,
        "to": coop.to_id,
        "message": coop.message,
    }
    reason = _drop_reason(world, sender_id, coop.to_id)
    if reason is not None:
        log.debug("dropping coop request %s->%s: %s", sender_id, coop.to_id, reason)
        event.update(kind="drop", reason=reason)
        return event
    world.coop_history.append(
        CoopMessage(turn=world.turn, from_id=sender_id, to_id=coop.to_id, body=coop.message)
    )
    return event


def _drop_reason(world: WorldState, sender_id: int, to_id: int | None) -> str | None:
    sender = world.tanks[sender_id]
    if not sender.coop_capable:
        return "sender lacks cooperation capability"
    recipient = world.tanks.get(to_id) if to_id is not None else None
    if recipient is None or not recipient.alive or recipient.kind is not TankKind.AGENT:
        return "recipient is not a live agent"
    if recipient.id == sender_id:
        return "self-addressed request"
    topology = world.config.coop_topology
    same_team = sender.team == recipient.team
    if topology is CoopTopology.NONE:
        return "stage has no cooperation"
    if topology is CoopTopology.INTRA_TEAM and not same_team:
        return "cross-team request in an intra-team stage"
    if topology is CoopTopology.INTER_TEAM and same_team:
        return "same-team request in an inter-team stage"
    return None


def _pair(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def _active_pairs(world: WorldState, agent_id: int) -> list[tuple[int, int]]:
    return [p for p in world.coop_pairs if agent_id in p]


def _drop_pairs(world: WorldState, agent_id: int) -> list[tuple[int, int]]:
    dropped = _active_pairs(world, agent_id)
    for p in dropped:
        world.coop_pairs.discard(p)
        for msg in world.coop_history:
            if msg.disposition is Disposition.ACCEPTED and _pair(msg.from_id, msg.to_id) == p:
                msg.disposition = Disposition.STOPPED
    return dropped
