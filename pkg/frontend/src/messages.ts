// Wire schema for room messages, version 1. Mirrors docs/protocol.md in the
// backend repository; every server frame is an envelope around a typed payload.

export const PROTOCOL_VERSION = 1;

export type ComboName =
  | "null"
  | "guesses"
  | "highlight"
  | "evidence"
  | "guesses+highlight"
  | "guesses+evidence"
  | "highlight+evidence"
  | "guesses+highlight+evidence";

export interface Envelope<T extends string, P> {
  v: number;
  type: T;
  room: string;
  player: string;
  seq: number;
  payload: P;
}

// "join" is sent both as the ack to the joiner (with `you`) and as a roster
// notice to everyone else.
export interface JoinAckPayload {
  you: string;
  players: string[];
  mode: "expert" | "novice";
  question_count: number;
  pacing_wps: number;
  answer_window_ms: number;
  labels: string[];
}

export interface RosterPayload {
  player: string;
  players: string[];
}

export function isJoinAck(p: JoinAckPayload | RosterPayload): p is JoinAckPayload {
  return "you" in p;
}

export interface StartPayload {
  question_index: number;
  question_id: string;
  n_words: number;
  players: string[];
}

export interface RevealPayload {
  question_index: number;
  word: string;
  revealed: number;
  n_words: number;
}

export interface Snippet {
  doc_id: string;
  start: number;
  tokens: string[];
  highlighted: number[];
}

// Withheld interpretation forms arrive as explicit nulls; the client renders
// exactly what is present and never reconstructs a masked form.
export interface InterpretationsPayload {
  question_index: number;
  combo: ComboName;
  query_len: number;
  guesses: [string, number, string][] | null;
  question_highlights: number[] | null;
  snippets: Snippet[] | null;
  evidence_highlights_visible: boolean;
}

export interface FloorGrantedPayload {
  question_index: number;
  player: string;
  revealed: number;
  deadline_ms: number;
  answer_window_ms: number;
}

export type ResultPayload =
  | { kind: "answer"; player: string; correct: boolean; points: number; late: boolean }
  | { kind: "timeout"; player: string; correct: false; points: number }
  | {
      kind: "question_end";
      reason: "answered" | "exhausted" | "grace_expired";
      answer: string;
      scores: Record<string, number>;
    };

export interface ScoreboardPayload {
  question_index: number;
  scores: Record<string, number>;
  final: boolean;
}

export interface ErrorPayload {
  code: string;
  reason?: string;
  message?: string;
}

export type RoomMessage =
  | Envelope<"join", JoinAckPayload | RosterPayload>
  | Envelope<"start", StartPayload>
  | Envelope<"reveal", RevealPayload>
  | Envelope<"interpretations", InterpretationsPayload>
  | Envelope<"floor_granted", FloorGrantedPayload>
  | Envelope<"result", ResultPayload>
  | Envelope<"scoreboard", ScoreboardPayload>
  | Envelope<"error", ErrorPayload>;

export type ClientFrame =
  | { type: "join" }
  | { type: "start" }
  | { type: "buzz" }
  | { type: "answer"; payload: { text: string } };
