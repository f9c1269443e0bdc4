// Browser entry point. Query parameters pick the room and player id:
//   index.html?room=r0001&player=alice&server=127.0.0.1:8000

import { RoomClient, bindSpaceKey } from "./client.js";
import { View } from "./view.js";

function param(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

function connect(): void {
  const server = param("server", window.location.host || "127.0.0.1:8000");
  const room = param("room", "r0001");
  const player = param("player", "player1");

  const view = new View(document);
  document.body.replaceChildren(view.root);

  const startButton = document.createElement("button");
  startButton.className = "start-button";
  startButton.textContent = "Start room";
  view.questionArea.prepend(startButton);

  const socket = new WebSocket(`ws://${server}/ws/${room}/${player}`);
  const client = new RoomClient(socket, view, {
    onDesync: () => {
      // The stream is no longer trustworthy; reconnect for a fresh one.
      socket.close();
      window.setTimeout(connect, 250);
    },
  });

  socket.addEventListener("open", () => client.join());
  socket.addEventListener("message", (ev) => client.handleRaw(String(ev.data)));
  startButton.addEventListener("click", () => client.startRoom());
  bindSpaceKey(client, view, document);
}

connect();
