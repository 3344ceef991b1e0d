import { ApiClient } from "./api.js";
import { FeedbackController } from "./feedback.js";
import { DEFAULT_POLL_INTERVAL_MS, StatusPoller } from "./poller.js";
import { applyViewModel, renderModel, renderPeriodStrips } from "./view.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? "http://127.0.0.1:8787";

const client = new ApiClient(base);
const poller = new StatusPoller(client, DEFAULT_POLL_INTERVAL_MS);
const feedback = new FeedbackController(client);

function note(text: string): void {
  const el = document.getElementById("feedback-note");
  if (el) el.textContent = text;
}

poller.onUpdate((view) => {
  applyViewModel(renderModel(view, feedback.canSend(view.status)), document);
});

for (const [id, action] of [
  ["btn-like", "like"],
  ["btn-dislike", "dislike"],
] as const) {
  document.getElementById(id)?.addEventListener("click", async () => {
    const outcome = await feedback.send(action, poller.current.status);
    note(outcome.message);
    applyViewModel(renderModel(poller.current, feedback.canSend(poller.current.status)), document);
  });
}

async function refreshReport(): Promise<void> {
  try {
    renderPeriodStrips(await client.getReport(), document);
  } catch {
    // service unreachable: the stale badge already says so
  }
}

poller.start();
void refreshReport();
setInterval(() => void refreshReport(), 10_000);
