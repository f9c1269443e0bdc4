// Room client: consumes the ordered server message stream, keeps the view
// state, and owns the buzz/answer interaction rules. Transport is injected so
// tests can drive frames without a socket.

import { Countdown } from "./countdown.js";
import {
  ClientFrame,
  InterpretationsPayload,
  RoomMessage,
  isJoinAck,
} from "./messages.js";
import { View, ViewState, filterLabels, initialViewState } from "./view.js";

export interface SocketLike {
  send(data: string): void;
}

export interface ClientHandlers {
  // Fired when the stream's sequence numbers go backwards; the owner is
  // expected to reconnect and rejoin for a fresh, consistent stream.
  onDesync?: (lastSeq: number, gotSeq: number) => void;
  onFinal?: (scores: Record<string, number>) => void;
}

export class RoomClient {
  readonly state: ViewState;
  labels: string[] = [];
  me = "";

  private lastSeq = -1;
  private buzzPending = false;
  private floorHolder: string | null = null;
  private answeredThisQuestion = false;
  private readonly countdown: Countdown;

  constructor(
    private readonly socket: SocketLike,
    private readonly view: View,
    private readonly handlers: ClientHandlers = {},
  ) {
    this.state = initialViewState();
    this.countdown = new Countdown(
      (ms) => {
        this.state.countdownMs = ms;
        this.view.renderCountdown(ms);
      },
      () => this.submit(""),
    );
    this.view.buzzButton.addEventListener("click", () => this.buzz());
    this.view.answerInput.addEventListener("input", () => this.refreshSuggestions());
    this.view.answerInput.addEventListener("keydown", (ev) => {
      if ((ev as KeyboardEvent).key === "Enter") this.submitTyped();
    });
    this.view.answerOptions.addEventListener("click", (ev) => {
      const target = ev.target as HTMLElement;
      if (target.classList.contains("answer-option")) this.submit(target.textContent ?? "");
    });
  }

  // -- outgoing ------------------------------------------------------------

  join(): void {
    this.sendFrame({ type: "join" });
  }

  startRoom(): void {
    this.sendFrame({ type: "start" });
  }

  buzz(): void {
    // One buzz per attempt: repeated space keydowns while the first buzz is
    // still unresolved, or after this player has already answered, are dropped.
    if (this.state.phase !== "reading") return;
    if (this.buzzPending || this.answeredThisQuestion) return;
    if (this.floorHolder !== null) return;
    this.buzzPending = true;
    this.sendFrame({ type: "buzz" });
  }

  submitTyped(): void {
    const typed = this.view.answerInput.value.trim();
    const canonical = this.labels.find((l) => l.toLowerCase() === typed.toLowerCase());
    if (canonical !== undefined) {
      this.submit(canonical);
      return;
    }
    const options = filterLabels(this.labels, typed);
    if (options.length === 1) this.submit(options[0]);
    // Otherwise keep the box open; the countdown will submit empty if the
    // player never narrows it down.
  }

  submit(text: string): void {
    if (this.floorHolder !== this.me || this.answeredThisQuestion) return;
    this.answeredThisQuestion = true;
    this.countdown.stop();
    this.state.countdownMs = null;
    this.view.hideAnswerBox();
    this.sendFrame({ type: "answer", payload: { text } });
    this.render();
  }

  private sendFrame(frame: ClientFrame): void {
    this.socket.send(JSON.stringify(frame));
  }

  // -- incoming ------------------------------------------------------------

  handleRaw(data: string): void {
    let msg: RoomMessage;
    try {
      msg = JSON.parse(data) as RoomMessage;
    } catch {
      return; // not a protocol frame
    }
    this.handleFrame(msg);
  }

  handleFrame(msg: RoomMessage): void {
    if (msg.seq <= this.lastSeq) {
      this.handlers.onDesync?.(this.lastSeq, msg.seq);
      return;
    }
    this.lastSeq = msg.seq;

    switch (msg.type) {
      case "join":
        if (isJoinAck(msg.payload)) {
          this.me = msg.payload.you;
          this.labels = msg.payload.labels;
        }
        break;
      case "start":
        this.state.phase = "reading";
        this.state.words = [];
        this.state.nWords = msg.payload.n_words;
        this.state.payload = null;
        this.state.notice = "";
        this.buzzPending = false;
        this.floorHolder = null;
        this.answeredThisQuestion = false;
        this.view.hideAnswerBox();
        break;
      case "reveal":
        this.state.words.push(msg.payload.word);
        break;
      case "interpretations":
        this.state.payload = msg.payload as InterpretationsPayload;
        break;
      case "floor_granted":
        this.buzzPending = false;
        this.floorHolder = msg.payload.player;
        if (msg.payload.player === this.me) {
          this.state.phase = "answering";
          this.view.showAnswerBox();
          this.refreshSuggestions();
          this.countdown.start(msg.payload.answer_window_ms);
        }
        break;
      case "result":
        if (msg.payload.kind === "question_end") {
          this.state.phase = "between";
          this.state.notice = `answer: ${msg.payload.answer}`;
          this.countdown.stop();
          this.state.countdownMs = null;
          this.view.hideAnswerBox();
        } else {
          this.floorHolder = null;
          if (msg.payload.player === this.me) {
            // Covers the server-side timeout path where we never sent text.
            this.answeredThisQuestion = true;
            this.countdown.stop();
            this.state.countdownMs = null;
            this.view.hideAnswerBox();
          }
          if (this.state.phase !== "done") this.state.phase = "reading";
        }
        break;
      case "scoreboard":
        this.state.scores = msg.payload.scores;
        if (msg.payload.final) {
          this.state.phase = "done";
          this.handlers.onFinal?.(msg.payload.scores);
        }
        break;
      case "error":
        if (msg.payload.code === "buzz_rejected") this.buzzPending = false;
        this.state.notice = msg.payload.reason ?? msg.payload.message ?? msg.payload.code;
        break;
    }
    this.render();
  }

  private refreshSuggestions(): void {
    this.view.renderSuggestions(filterLabels(this.labels, this.view.answerInput.value));
  }

  private render(): void {
    this.view.render(this.state);
  }
}

// Space buzzes from anywhere on the page except the answer input, where a
// space is just a space.
export function bindSpaceKey(client: RoomClient, view: View, doc: Document): void {
  doc.addEventListener("keydown", (ev) => {
    const key = (ev as KeyboardEvent).key;
    if (key !== " ") return;
    if (ev.target === view.answerInput) return;
    ev.preventDefault();
    client.buzz();
  });
}
