"""Realtime game rooms over WebSockets.

A room hosts a sequence of questions for a set of connected players. The
engine keeps logical millisecond time; this layer maps it onto the wall
clock: one reveal per 1/pacing seconds, an 8-second answer window after each
buzz, and a grace window after readout. `time_scale` compresses wall time
(scale 100 runs a room 100x faster) without touching logical timestamps, so
recorded event logs are identical at any speed.

All mutations of a room pass through one ordered command queue consumed by a
single task; readers see only messages that task sent. Buzz races are settled
by queue arrival order. Every outbound message is appended to the room's sent
log before delivery, which is what the condition-privacy audit inspects: an
interpretations message for a player must contain exactly the fields their
combo permits, and no other message type may carry interpretation content.
"""

from __future__ import annotations

import asyncio
import json
import random
import time
from pathlib import Path
from typing import Callable, Iterable, Sequence

from fastapi import Body, FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from .corpus import Question
from .engine import (
    ANSWER_WINDOW_MS,
    EventKind,
    EventLog,
    GameMode,
    GameState,
    Phase,
    StateError,
    advance,
    answer_timeout,
    buzz,
    create_game,
    end_question,
    event_log,
    event_log_lines,
    submit_answer,
)
from .guesser import Index, make_guess_fn
from .interpretations import ConditionCombo, InterpretationPayload, render
from .logstore import GameRecord, LogStore
from .sampler import ExposureHistory, assign_for_room, exposure_target

MESSAGE_VERSION = 1
MESSAGE_TYPES = (
    "join",
    "start",
    "reveal",
    "interpretations",
    "buzz",
    "floor_granted",
    "answer",
    "result",
    "scoreboard",
    "error",
)
DEFAULT_PACING_WPS = 4.0
DEFAULT_CAPACITY = 8
INTER_QUESTION_MS = 2000
_INTERPRETATION_KEYS = ("guesses", "question_highlights", "snippets")


class RoomError(Exception):
    pass


def interpretation_wire(payload: InterpretationPayload) -> dict:
    """Serialize a masked payload for the wire. Absent forms are explicit
    nulls so clients never have to guess whether a field was withheld."""
    return {
        "query_len": payload.query_len,
        "guesses": (
            [[g.label, g.score, g.source_doc] for g in payload.guesses.guesses]
            if payload.guesses is not None
            else None
        ),
        "question_highlights": (
            sorted(payload.question_highlights) if payload.question_highlights is not None else None
        ),
        "snippets": (
            [
                {
                    "doc_id": s.doc_id,
                    "start": s.start,
                    "tokens": list(s.tokens),
                    "highlighted": sorted(s.highlighted),
                }
                for s in payload.evidence
            ]
            if payload.evidence is not None
            else None
        ),
        "evidence_highlights_visible": payload.evidence_highlights_visible,
    }


def audit_messages(
    messages: Iterable[dict], assignments: Sequence[dict[str, str]]
) -> list[str]:
    """Check every sent message against each recipient's assigned combo.

    `assignments` maps question index -> player id -> combo name. Returns a
    list of violation descriptions; an empty list means the log is clean.
    """
    violations = []
    for msg in messages:
        payload = msg.get("payload") or {}
        where = f"seq {msg.get('seq')} ({msg.get('type')})"
        if msg.get("type") != "interpretations":
            for key in _INTERPRETATION_KEYS:
                if key in payload:
                    violations.append(f"{where}: carries interpretation field {key!r}")
            continue
        player = msg.get("player")
        question_index = payload.get("question_index")
        try:
            combo = ConditionCombo.from_name(assignments[question_index][player])
        except (IndexError, KeyError, TypeError, ValueError):
            violations.append(f"{where}: no assignment for player {player!r} on question {question_index!r}")
            continue
        if (payload.get("guesses") is not None) != combo.guesses:
            violations.append(f"{where}: guesses visibility does not match combo {combo.name}")
        if (payload.get("question_highlights") is not None) != combo.highlight:
            violations.append(f"{where}: highlight visibility does not match combo {combo.name}")
        if (payload.get("snippets") is not None) != combo.evidence:
            violations.append(f"{where}: evidence visibility does not match combo {combo.name}")
        visible = bool(payload.get("evidence_highlights_visible"))
        if visible != (combo.highlight and combo.evidence):
            violations.append(f"{where}: evidence_highlights_visible wrong for combo {combo.name}")
        if payload.get("snippets") and not visible:
            for snippet in payload["snippets"]:
                if snippet.get("highlighted"):
                    violations.append(f"{where}: masked snippet still carries highlight marks")
                    break
    return violations


class _Conn:
    __slots__ = ("send", "close")

    def __init__(self, send: Callable, close: Callable):
        self.send = send
        self.close = close


class Room:
    """A single game room. All state below is owned by the `run` task."""

    def __init__(
        self,
        room_id: str,
        questions: Sequence[Question],
        index: Index,
        mode: str,
        pacing_wps: float = DEFAULT_PACING_WPS,
        seed: int = 0,
        time_scale: float = 1.0,
        capacity: int = DEFAULT_CAPACITY,
        records_store: LogStore | None = None,
        message_log_dir: Path | None = None,
    ):
        if not questions:
            raise RoomError("a room needs at least one question")
        if pacing_wps <= 0:
            raise RoomError(f"pacing must be positive, got {pacing_wps}")
        if mode not in ("expert", "novice"):
            raise RoomError(f"unknown mode {mode!r}")
        if time_scale <= 0:
            raise RoomError(f"time_scale must be positive, got {time_scale}")
        self.id = room_id
        self.questions = list(questions)
        self.index = index
        self.group = mode
        self.mode = GameMode.EXPERT_COMPETITIVE if mode == "expert" else GameMode.NOVICE_SOLO
        self.capacity = 1 if mode == "novice" else capacity
        self.pacing_wps = pacing_wps
        self.word_ms = round(1000 / pacing_wps)
        self.seed = seed
        self.time_scale = time_scale
        self.rng = random.Random(seed)
        self.history = ExposureHistory(n_target=exposure_target(len(self.questions)))
        self.queue: asyncio.Queue = asyncio.Queue()
        self.players: dict[str, _Conn] = {}
        self.sent_log: list[dict] = []
        self.seq = 0
        self.status = "lobby"
        self.question_index = -1
        self.state: GameState | None = None
        self.assignments: list[dict[str, str]] = []
        self.event_logs: list[EventLog] = []
        self.records: list[GameRecord] = []
        self.total_scores: dict[str, int] = {}
        self.records_store = records_store
        self.message_log_dir = message_log_dir
        self._combos: dict[str, ConditionCombo] = {}
        self._events_seen = 0
        self._active_at_start: list[str] = []
        self._buzz_tops: dict[str, str] = {}
        self._answered: dict[str, int] = {}
        self._correct: dict[str, int] = {}
        self._between = False
        self._next_fire: float | None = None
        self._task: asyncio.Task | None = None

    # -- messaging -------------------------------------------------------

    def _message(self, type_: str, player: str | None, payload: dict) -> dict:
        self.seq += 1
        return {
            "v": MESSAGE_VERSION,
            "type": type_,
            "room": self.id,
            "player": player,
            "seq": self.seq,
            "payload": payload,
        }

    async def _deliver(self, conn: _Conn | None, msg: dict) -> None:
        if conn is None:
            return
        try:
            await conn.send(msg)
        except Exception:
            pass  # the reader task reports the disconnect through the queue

    async def _send(self, player: str, type_: str, payload: dict) -> None:
        msg = self._message(type_, player, payload)
        self.sent_log.append(msg)
        await self._deliver(self.players.get(player), msg)

    async def _broadcast(self, type_: str, payload: dict) -> None:
        for player in sorted(self.players):
            await self._send(player, type_, payload)

    # -- scheduling ------------------------------------------------------

    def _schedule(self, logical_ms: int) -> None:
        delay = max(logical_ms, 0) / 1000.0 / self.time_scale
        self._next_fire = asyncio.get_running_loop().time() + delay

    def _reschedule(self) -> None:
        state = self.state
        if self.status != "playing" or state is None:
            self._next_fire = None
            return
        if self._between:
            self._schedule(INTER_QUESTION_MS)
        elif state.phase == Phase.BUZZED:
            self._schedule(state.answer_deadline - state.clock)
        elif state.phase == Phase.READING and not state.readout_done:
            self._schedule(self.word_ms)
        elif state.phase == Phase.READING:
            self._schedule(state.grace_deadline - state.clock)
        else:
            self._next_fire = None

    # -- main loop -------------------------------------------------------

    async def run(self) -> None:
        loop = asyncio.get_running_loop()
        while self.status != "done":
            timeout = None
            if self._next_fire is not None:
                timeout = max(0.0, self._next_fire - loop.time())
            try:
                command = await asyncio.wait_for(self.queue.get(), timeout)
            except asyncio.TimeoutError:
                await self._on_timer()
                continue
            await self._handle(command)

    async def _handle(self, command: dict) -> None:
        op = command["op"]
        player = command.get("player")
        if op == "join":
            await self._join(player, command["send"], command["close"])
        elif op == "leave":
            conn = self.players.get(player)
            sender = command.get("send")
            # A refused connection (duplicate id, full room) also reports a
            # leave on close; only evict the player when the leave comes from
            # the connection that actually holds the seat.
            if conn is not None and (sender is None or conn.send == sender):
                self.players.pop(player, None)
                if self.status == "playing" and not self.players:
                    await self._finish_room()
        elif op == "start":
            await self._start(player)
        elif op == "buzz":
            await self._buzz(player)
        elif op == "answer":
            await self._answer(player, command.get("text", ""))

    async def _join(self, player: str, send: Callable, close: Callable) -> None:
        conn = _Conn(send, close)
        if player in self.players:
            msg = self._message("error", player, {"code": "duplicate_player", "message": f"{player!r} is already in the room"})
            self.sent_log.append(msg)
            await self._deliver(conn, msg)
            await self._try_close(close)
            return
        if len(self.players) >= self.capacity:
            msg = self._message("error", player, {"code": "room_full", "message": f"room {self.id} is at capacity {self.capacity}"})
            self.sent_log.append(msg)
            await self._deliver(conn, msg)
            await self._try_close(close)
            return
        self.players[player] = conn
        self.total_scores.setdefault(player, 0)
        self._answered.setdefault(player, 0)
        self._correct.setdefault(player, 0)
        roster = sorted(self.players)
        await self._send(
            player,
            "join",
            {
                "you": player,
                "players": roster,
                "mode": self.group,
                "question_count": len(self.questions),
                "pacing_wps": self.pacing_wps,
                "answer_window_ms": ANSWER_WINDOW_MS,
                "labels": self.index.labels,
            },
        )
        for other in roster:
            if other != player:
                await self._send(other, "join", {"player": player, "players": roster})

    @staticmethod
    async def _try_close(close: Callable) -> None:
        try:
            await close()
        except Exception:
            pass

    async def _start(self, player: str) -> None:
        if self.status != "lobby":
            await self._send(player, "error", {"code": "already_started", "message": "room already started"})
            return
        if not self.players:
            return
        self.status = "playing"
        await self._start_question(0)

    async def _start_question(self, question_index: int) -> None:
        if question_index >= len(self.questions) or not self.players:
            await self._finish_room()
            return
        self.question_index = question_index
        self._between = False
        question = self.questions[question_index]
        roster = sorted(self.players)
        self._combos = assign_for_room(self.history, roster, self.rng, question_id=question.id)
        self.assignments.append({p: c.name for p, c in self._combos.items()})
        self.state = create_game(
            question,
            [(p, self._combos[p]) for p in roster],
            self.mode,
            seed=self.seed + question_index,
            guess_fn=make_guess_fn(self.index, question),
        )
        self._events_seen = 0
        self._active_at_start = roster
        self._buzz_tops = {}
        await self._broadcast(
            "start",
            {
                "question_index": question_index,
                "question_id": question.id,
                "n_words": question.n,
                "players": roster,
            },
        )
        self._reschedule()

    async def _on_timer(self) -> None:
        state = self.state
        if self.status != "playing" or state is None:
            self._next_fire = None
            return
        if self._between:
            await self._start_question(self.question_index + 1)
            return
        if state.phase == Phase.BUZZED:
            answer_timeout(state, state.answer_deadline)
        elif state.phase == Phase.READING and not state.readout_done:
            advance(state, state.clock + self.word_ms)
        elif state.phase == Phase.READING:
            end_question(state, state.grace_deadline)
        await self._translate()
        self._reschedule()

    async def _buzz(self, player: str) -> None:
        state = self.state
        if self.status != "playing" or state is None or self._between:
            await self._send(player, "error", {"code": "no_question", "message": "no question in progress"})
            return
        if player not in state.players:
            await self._send(player, "error", {"code": "not_playing", "message": "joined mid-question; wait for the next one"})
            return
        buzz(state, player, state.clock)
        await self._translate()
        self._reschedule()

    async def _answer(self, player: str, text: str) -> None:
        state = self.state
        if self.status != "playing" or state is None or self._between:
            await self._send(player, "error", {"code": "no_question", "message": "no question in progress"})
            return
        try:
            submit_answer(state, player, text, state.clock)
        except StateError as exc:
            await self._send(player, "error", {"code": "answer_rejected", "message": str(exc)})
            return
        await self._translate()
        self._reschedule()

    # -- engine event translation ----------------------------------------

    async def _translate(self) -> None:
        state = self.state
        question_index = self.question_index
        for e in state.events[self._events_seen :]:
            self._events_seen += 1
            if e.kind == EventKind.REVEAL_WORD:
                await self._broadcast(
                    "reveal",
                    {
                        "question_index": question_index,
                        "word": e.payload["word"],
                        "revealed": e.payload["revealed"],
                        "n_words": state.n,
                    },
                )
            elif e.kind == EventKind.REFRESH_GUESSES:
                for player in state.players:
                    combo = self._combos[player]
                    wire = interpretation_wire(render(state.latest_guess_state, combo))
                    wire["question_index"] = question_index
                    wire["combo"] = combo.name
                    await self._send(player, "interpretations", wire)
            elif e.kind == EventKind.BUZZ:
                if e.payload["accepted"]:
                    top = state.latest_guess_state.guesses.top
                    self._buzz_tops[e.player] = top.label if top else ""
                    await self._broadcast(
                        "floor_granted",
                        {
                            "question_index": question_index,
                            "player": e.player,
                            "revealed": e.payload["revealed"],
                            "deadline_ms": e.payload["deadline"],
                            "answer_window_ms": ANSWER_WINDOW_MS,
                        },
                    )
                else:
                    await self._send(
                        e.player,
                        "error",
                        {"code": "buzz_rejected", "reason": e.payload["reason"], "question_index": question_index},
                    )
            elif e.kind == EventKind.SUBMIT_ANSWER:
                await self._broadcast(
                    "result",
                    {
                        "question_index": question_index,
                        "kind": "answer",
                        "player": e.player,
                        "correct": e.payload["correct"],
                        "points": e.payload["points"],
                        "late": e.payload["late"],
                    },
                )
            elif e.kind == EventKind.ANSWER_TIMEOUT:
                await self._broadcast(
                    "result",
                    {
                        "question_index": question_index,
                        "kind": "timeout",
                        "player": e.player,
                        "correct": False,
                        "points": e.payload["points"],
                    },
                )
            elif e.kind == EventKind.QUESTION_END:
                await self._broadcast(
                    "result",
                    {
                        "question_index": question_index,
                        "kind": "question_end",
                        "reason": e.payload["reason"],
                        "answer": state.question.answer,
                        "scores": e.payload["scores"],
                    },
                )
        if state.phase == Phase.FINISHED and not self._between:
            await self._finalize_question()

    async def _finalize_question(self) -> None:
        state = self.state
        self.event_logs.append(event_log(state))
        top_accuracy = max(
            (self._correct[p] / self._answered[p] for p in self._active_at_start if self._answered.get(p)),
            default=0.0,
        )
        now = time.time()
        for outcome in state.outcomes:
            player = outcome.player
            if player in self.total_scores:
                self.total_scores[player] += outcome.points
            answered = state.players[player].buzzed
            record = GameRecord(
                player_id=player,
                question_id=state.question.id,
                group=self.group,
                combo=self._combos[player],
                buzz_position_frac=outcome.buzz_position_frac,
                answered=answered,
                correct=outcome.correct,
                points=outcome.points,
                active_players=len(self._active_at_start),
                top_active_accuracy=top_accuracy if self.group == "expert" else 0.0,
                guess_shown=self._buzz_tops.get(player, ""),
                timestamp=now,
            )
            self.records.append(record)
            if self.records_store is not None:
                self.records_store.append(record)
        for outcome in state.outcomes:
            if state.players[outcome.player].buzzed:
                self._answered[outcome.player] = self._answered.get(outcome.player, 0) + 1
                if outcome.correct:
                    self._correct[outcome.player] = self._correct.get(outcome.player, 0) + 1
        await self._broadcast(
            "scoreboard",
            {
                "question_index": self.question_index,
                "scores": dict(sorted(self.total_scores.items())),
                "final": self.question_index + 1 >= len(self.questions),
            },
        )
        self._between = True

    async def _finish_room(self) -> None:
        self.status = "done"
        self._next_fire = None
        if self.message_log_dir is not None:
            save_room_logs(self, self.message_log_dir)


def save_room_logs(room: Room, directory: Path | str) -> tuple[Path, Path]:
    """Persist a room's message log and its per-question engine logs."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    messages_path = directory / f"{room.id}-messages.ndjson"
    with open(messages_path, "w", encoding="utf-8") as fh:
        for msg in room.sent_log:
            fh.write(json.dumps(msg, ensure_ascii=False) + "\n")
    games_path = directory / f"{room.id}-games.ndjson"
    with open(games_path, "w", encoding="utf-8") as fh:
        for log in room.event_logs:
            for line in event_log_lines(log):
                fh.write(line + "\n")
            fh.write("\n")
    return messages_path, games_path


def create_app(
    index: Index,
    questions: Sequence[Question],
    records_store: LogStore | None = None,
    message_log_dir: Path | str | None = None,
    default_time_scale: float = 1.0,
    default_mode: str = "expert",
    default_seed: int = 0,
) -> FastAPI:
    app = FastAPI(title="coopquiz")
    app.state.index = index
    app.state.questions = list(questions)
    app.state.rooms = {}
    app.state.room_counter = 0

    questions_by_id = {q.id: q for q in questions}

    @app.post("/rooms")
    async def create_room(body: dict = Body(default={})):
        mode = body.get("mode", default_mode)
        question_ids = body.get("question_ids")
        if question_ids is not None:
            missing = [qid for qid in question_ids if qid not in questions_by_id]
            if missing:
                raise HTTPException(status_code=400, detail=f"unknown question ids: {missing}")
            selected = [questions_by_id[qid] for qid in question_ids]
        else:
            count = int(body.get("question_count", len(app.state.questions)))
            selected = app.state.questions[:count]
        app.state.room_counter += 1
        room_id = f"r{app.state.room_counter:04d}"
        try:
            room = Room(
                room_id,
                selected,
                app.state.index,
                mode,
                pacing_wps=float(body.get("pacing", DEFAULT_PACING_WPS)),
                seed=int(body.get("seed", default_seed)),
                time_scale=float(body.get("time_scale", default_time_scale)),
                capacity=int(body.get("capacity", DEFAULT_CAPACITY)),
                records_store=records_store,
                message_log_dir=Path(message_log_dir) if message_log_dir is not None else None,
            )
        except RoomError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        app.state.rooms[room_id] = room
        room._task = asyncio.create_task(room.run())
        return {
            "room": room_id,
            "mode": mode,
            "questions": [q.id for q in selected],
        }

    @app.get("/rooms/{room_id}")
    async def room_status(room_id: str):
        room = app.state.rooms.get(room_id)
        if room is None:
            raise HTTPException(status_code=404, detail="no such room")
        return {
            "room": room.id,
            "status": room.status,
            "players": sorted(room.players),
            "question_index": room.question_index,
            "scores": room.total_scores,
        }

    @app.get("/rooms/{room_id}/log")
    async def room_log(room_id: str):
        room = app.state.rooms.get(room_id)
        if room is None:
            raise HTTPException(status_code=404, detail="no such room")
        return {"messages": room.sent_log, "assignments": room.assignments}

    @app.websocket("/ws/{room_id}/{player_id}")
    async def room_socket(ws: WebSocket, room_id: str, player_id: str):
        room = app.state.rooms.get(room_id)
        # Accept before closing so the client sees the 4404 close code
        # instead of a bare handshake rejection.
        await ws.accept()
        if room is None:
            await ws.close(code=4404)
            return
        joined = False
        try:
            while True:
                try:
                    raw = await ws.receive_json()
                except ValueError:
                    continue  # not JSON; ignore the frame
                if not isinstance(raw, dict):
                    continue
                mtype = raw.get("type")
                payload = raw.get("payload") or {}
                if mtype == "join" and not joined:
                    joined = True
                    await room.queue.put(
                        {"op": "join", "player": player_id, "send": ws.send_json, "close": ws.close}
                    )
                elif mtype == "start":
                    await room.queue.put({"op": "start", "player": player_id})
                elif mtype == "buzz":
                    await room.queue.put({"op": "buzz", "player": player_id})
                elif mtype == "answer":
                    await room.queue.put(
                        {"op": "answer", "player": player_id, "text": str(payload.get("text", ""))}
                    )
        except WebSocketDisconnect:
            pass
        finally:
            if joined:
                await room.queue.put(
                    {"op": "leave", "player": player_id, "send": ws.send_json}
                )

    return app
