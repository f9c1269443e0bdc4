// DOM layer. The page is a two-column grid: interpretation guesses down the
// left edge, the question in the middle, evidence snippets in a row directly
// under the question sharing its column (and therefore its width).

import { InterpretationsPayload } from "./messages.js";

export type Phase = "lobby" | "reading" | "answering" | "between" | "done";

export interface ViewState {
  phase: Phase;
  words: string[]; // revealed words, in reveal order
  nWords: number;
  payload: InterpretationsPayload | null; // latest interpretations, as received
  countdownMs: number | null;
  scores: Record<string, number>;
  notice: string;
}

export function initialViewState(): ViewState {
  return {
    phase: "lobby",
    words: [],
    nWords: 0,
    payload: null,
    countdownMs: null,
    scores: {},
    notice: "",
  };
}

const GRID_AREAS = '"guesses question" "guesses evidence"';
const MAX_GUESS_ROWS = 10;

export class View {
  readonly root: HTMLElement;
  readonly guessesPanel: HTMLElement;
  readonly questionArea: HTMLElement;
  readonly questionText: HTMLElement;
  readonly evidencePanel: HTMLElement;
  readonly buzzButton: HTMLButtonElement;
  readonly countdownEl: HTMLElement;
  readonly answerBox: HTMLElement;
  readonly answerInput: HTMLInputElement;
  readonly answerOptions: HTMLElement;
  readonly scoreboardEl: HTMLElement;
  readonly noticeEl: HTMLElement;

  constructor(doc: Document) {
    this.root = doc.createElement("div");
    this.root.className = "game";
    this.root.style.display = "grid";
    this.root.style.gridTemplateColumns = "240px 1fr";
    this.root.style.gridTemplateAreas = GRID_AREAS;

    this.guessesPanel = doc.createElement("aside");
    this.guessesPanel.className = "guesses-panel";
    this.guessesPanel.style.gridArea = "guesses";

    this.questionArea = doc.createElement("main");
    this.questionArea.className = "question-area";
    this.questionArea.style.gridArea = "question";

    this.questionText = doc.createElement("p");
    this.questionText.className = "question-text";

    const controls = doc.createElement("div");
    controls.className = "controls";
    this.buzzButton = doc.createElement("button");
    this.buzzButton.className = "buzz-button";
    this.buzzButton.textContent = "Buzz (space)";
    this.countdownEl = doc.createElement("span");
    this.countdownEl.className = "countdown";
    this.noticeEl = doc.createElement("span");
    this.noticeEl.className = "notice";
    controls.append(this.buzzButton, this.countdownEl, this.noticeEl);

    this.answerBox = doc.createElement("div");
    this.answerBox.className = "answer-box";
    this.answerBox.hidden = true;
    this.answerInput = doc.createElement("input");
    this.answerInput.className = "answer-input";
    this.answerInput.placeholder = "type an answer…";
    this.answerOptions = doc.createElement("ul");
    this.answerOptions.className = "answer-options";
    this.answerBox.append(this.answerInput, this.answerOptions);

    this.scoreboardEl = doc.createElement("div");
    this.scoreboardEl.className = "scoreboard";

    this.questionArea.append(this.questionText, controls, this.answerBox, this.scoreboardEl);

    this.evidencePanel = doc.createElement("section");
    this.evidencePanel.className = "evidence-panel";
    this.evidencePanel.style.gridArea = "evidence";
    // Snippets fill the question column so the two are directly comparable.
    this.evidencePanel.style.width = "100%";

    this.root.append(this.guessesPanel, this.questionArea, this.evidencePanel);
  }

  render(state: ViewState): void {
    this.renderQuestion(state);
    this.renderGuesses(state.payload);
    this.renderEvidence(state.payload);
    this.renderScores(state.scores);
    this.renderCountdown(state.countdownMs);
    this.noticeEl.textContent = state.notice;
    this.buzzButton.disabled = state.phase !== "reading";
  }

  renderQuestion(state: ViewState): void {
    const doc = this.root.ownerDocument;
    const marked = new Set(state.payload?.question_highlights ?? []);
    this.questionText.replaceChildren();
    state.words.forEach((word, position) => {
      const span = doc.createElement("span");
      span.className = "word";
      span.dataset.position = String(position);
      span.textContent = word;
      if (marked.has(position)) {
        const mark = doc.createElement("mark");
        mark.append(span);
        this.questionText.append(mark);
      } else {
        this.questionText.append(span);
      }
      this.questionText.append(doc.createTextNode(" "));
    });
  }

  renderGuesses(payload: InterpretationsPayload | null): void {
    const doc = this.root.ownerDocument;
    const guesses = payload?.guesses ?? null;
    this.guessesPanel.hidden = guesses === null;
    this.guessesPanel.replaceChildren();
    if (guesses === null) return;
    const list = doc.createElement("ol");
    list.className = "guess-list";
    for (const [label, score] of guesses.slice(0, MAX_GUESS_ROWS)) {
      const item = doc.createElement("li");
      item.className = "guess";
      item.dataset.label = label;
      item.textContent = `${label} ${formatScore(score)}`;
      list.append(item);
    }
    this.guessesPanel.append(list);
  }

  renderEvidence(payload: InterpretationsPayload | null): void {
    const doc = this.root.ownerDocument;
    const snippets = payload?.snippets ?? null;
    this.evidencePanel.hidden = snippets === null;
    this.evidencePanel.replaceChildren();
    if (snippets === null) return;
    for (const snippet of snippets) {
      const row = doc.createElement("div");
      row.className = "snippet";
      row.dataset.docId = snippet.doc_id;
      const marked = new Set(snippet.highlighted);
      snippet.tokens.forEach((token, i) => {
        const span = doc.createElement("span");
        span.className = "token";
        span.textContent = token;
        if (marked.has(i)) {
          const mark = doc.createElement("mark");
          mark.append(span);
          row.append(mark);
        } else {
          row.append(span);
        }
        row.append(doc.createTextNode(" "));
      });
      this.evidencePanel.append(row);
    }
  }

  renderScores(scores: Record<string, number>): void {
    const parts = Object.keys(scores)
      .sort()
      .map((p) => `${p}: ${scores[p]}`);
    this.scoreboardEl.textContent = parts.join("  ");
  }

  renderCountdown(remainingMs: number | null): void {
    this.countdownEl.textContent = remainingMs === null ? "" : formatCountdown(remainingMs);
  }

  showAnswerBox(): void {
    this.answerBox.hidden = false;
    this.answerInput.value = "";
    this.answerInput.focus();
  }

  hideAnswerBox(): void {
    this.answerBox.hidden = true;
    this.answerOptions.replaceChildren();
  }

  renderSuggestions(options: string[]): void {
    const doc = this.root.ownerDocument;
    this.answerOptions.replaceChildren();
    for (const label of options) {
      const item = doc.createElement("li");
      item.className = "answer-option";
      item.textContent = label;
      this.answerOptions.append(item);
    }
  }
}

export function formatScore(score: number): string {
  // Raw retrieval scores, truncated (not rounded) to two decimals.
  return (Math.trunc(score * 100) / 100).toFixed(2);
}

export function formatCountdown(remainingMs: number): string {
  return (Math.max(0, remainingMs) / 1000).toFixed(1);
}

export function filterLabels(labels: string[], prefix: string): string[] {
  const p = prefix.trim().toLowerCase();
  if (!p) return labels.slice();
  return labels.filter((label) => label.toLowerCase().startsWith(p));
}

// Compares what the DOM shows against what the payload permits. Returns one
// string per violation; tests run it across every condition combination.
export function auditInterpretationDom(view: View, payload: InterpretationsPayload): string[] {
  const violations: string[] = [];

  if (payload.guesses === null) {
    if (!view.guessesPanel.hidden) violations.push("guesses panel visible without guesses");
    if (view.guessesPanel.querySelector(".guess")) violations.push("guess rows present without guesses");
  } else {
    if (view.guessesPanel.hidden) violations.push("guesses panel hidden despite guesses");
    const rows = view.guessesPanel.querySelectorAll(".guess");
    const expected = Math.min(payload.guesses.length, MAX_GUESS_ROWS);
    if (rows.length !== expected) violations.push(`expected ${expected} guess rows, found ${rows.length}`);
  }

  const questionMarks = view.questionText.querySelectorAll("mark");
  if (payload.question_highlights === null) {
    if (questionMarks.length > 0) violations.push("question marks present without highlights");
  } else {
    const shown = new Set<number>();
    questionMarks.forEach((mark) => {
      const span = mark.querySelector<HTMLElement>(".word");
      if (span?.dataset.position !== undefined) shown.add(Number(span.dataset.position));
    });
    const revealed = view.questionText.querySelectorAll(".word").length;
    const expected = new Set(payload.question_highlights.filter((p) => p < revealed));
    for (const p of shown) {
      if (!expected.has(p)) violations.push(`word ${p} marked but not highlighted`);
    }
    for (const p of expected) {
      if (!shown.has(p)) violations.push(`highlight ${p} not marked`);
    }
  }

  const snippetRows = view.evidencePanel.querySelectorAll(".snippet");
  if (payload.snippets === null) {
    if (!view.evidencePanel.hidden) violations.push("evidence panel visible without snippets");
    if (snippetRows.length > 0) violations.push("snippet rows present without snippets");
  } else {
    if (view.evidencePanel.hidden) violations.push("evidence panel hidden despite snippets");
    if (snippetRows.length !== payload.snippets.length) {
      violations.push(`expected ${payload.snippets.length} snippet rows, found ${snippetRows.length}`);
    }
    const evidenceMarks = view.evidencePanel.querySelectorAll("mark").length;
    if (!payload.evidence_highlights_visible && evidenceMarks > 0) {
      violations.push("evidence marks shown while highlights are masked");
    }
  }

  return violations;
}
