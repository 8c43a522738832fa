import { api } from './api.js';
import type { AgentOutput, RecommendationCard } from './types.js';

export interface DialogPanel {
  root: HTMLElement;
  start(): Promise<void>;
  submit(text: string): Promise<void>;
  sessionId: () => string | null;
  cards: () => RecommendationCard[];
}

export interface DialogCallbacks {
  onCards?: (cards: RecommendationCard[]) => void;
  onDone?: (card: RecommendationCard | null) => void;
}

function bubble(role: string, text: string): HTMLElement {
  const el = document.createElement('div');
  el.className = `turn turn-${role}`;
  el.textContent = text;
  return el;
}

/** One placement card; values are shown exactly as the API delivered them. */
export function renderCard(card: RecommendationCard): HTMLElement {
  const el = document.createElement('div');
  el.className = 'card';
  el.dataset.placementId = card.placement_id;
  el.dataset.surface = card.surface;
  el.dataset.outlet = card.outlet;

  const title = document.createElement('div');
  title.className = 'card-title';
  title.textContent = `${card.surface} · ${card.outlet} · gain ${card.gain}`;
  el.appendChild(title);

  const scores = document.createElement('div');
  scores.className = 'card-scores';
  for (const [label, value] of [
    ['perf', card.perf_score],
    ['ux', card.ux_score],
    ['total', card.total],
  ] as const) {
    const span = document.createElement('span');
    span.className = `score score-${label}`;
    span.textContent = `${label} ${value.toFixed(2)}`;
    scores.appendChild(span);
  }
  el.appendChild(scores);

  const why = document.createElement('div');
  why.className = 'card-rationale';
  why.textContent = card.rationale;
  el.appendChild(why);
  return el;
}

export function createDialogPanel(
  container: HTMLElement,
  callbacks: DialogCallbacks = {},
): DialogPanel {
  container.classList.add('dialog-panel');

  const banner = document.createElement('div');
  banner.className = 'banner banner-hidden';
  banner.textContent = 'Hub unreachable — dialog paused.';
  container.appendChild(banner);

  const transcript = document.createElement('div');
  transcript.className = 'transcript';
  container.appendChild(transcript);

  const cardList = document.createElement('div');
  cardList.className = 'card-list';
  container.appendChild(cardList);

  const form = document.createElement('form');
  form.className = 'dialog-form';
  const input = document.createElement('input');
  input.type = 'text';
  input.placeholder = 'Answer the agent…';
  const send = document.createElement('button');
  send.type = 'submit';
  send.textContent = 'Send';
  form.appendChild(input);
  form.appendChild(send);
  container.appendChild(form);

  let sid: string | null = null;
  let inFlight = false;
  let lastCards: RecommendationCard[] = [];

  function setDegraded(on: boolean): void {
    banner.classList.toggle('banner-hidden', !on);
    input.disabled = on || inFlight;
    send.disabled = on || inFlight;
  }

  function renderOutput(output: AgentOutput): void {
    transcript.appendChild(bubble('agent', output.text));
    if (output.kind === 'recommendations' || output.kind === 'done') {
      cardList.replaceChildren();
      lastCards = output.recommendations;
      for (const card of output.recommendations) {
        const el = renderCard(card);
        if (output.kind === 'recommendations') {
          const accept = document.createElement('button');
          accept.type = 'button';
          accept.className = 'accept';
          accept.textContent = 'Accept';
          accept.addEventListener('click', () => {
            void panel.submit(`accept ${card.placement_id}`);
          });
          el.appendChild(accept);
        }
        cardList.appendChild(el);
      }
      if (output.kind === 'recommendations') {
        const more = document.createElement('button');
        more.type = 'button';
        more.className = 'alternatives';
        more.textContent = 'Request alternatives';
        more.addEventListener('click', () => {
          void panel.submit('alternatives');
        });
        cardList.appendChild(more);
      }
      callbacks.onCards?.(output.recommendations);
    }
    if (output.kind === 'done') {
      input.disabled = true;
      send.disabled = true;
      callbacks.onDone?.(output.recommendations[0] ?? null);
    }
    transcript.scrollTop = transcript.scrollHeight;
  }

  const panel: DialogPanel = {
    root: container,

    async start(): Promise<void> {
      try {
        const created = await api.createSession();
        sid = created.session_id;
        setDegraded(false);
        renderOutput(created.output);
      } catch {
        setDegraded(true);
      }
    },

    async submit(text: string): Promise<void> {
      const message = text.trim();
      if (!message || sid === null || inFlight) return;
      inFlight = true;
      input.disabled = true;
      send.disabled = true;
      transcript.appendChild(bubble('user', message));
      try {
        const response = await api.sendMessage(sid, message);
        inFlight = false;
        setDegraded(false);
        renderOutput(response.output);
      } catch {
        inFlight = false;
        setDegraded(true);
      }
    },

    sessionId: () => sid,
    cards: () => lastCards,
  };

  form.addEventListener('submit', (ev) => {
    ev.preventDefault();
    const text = input.value;
    input.value = '';
    void panel.submit(text);
  });

  return panel;
}
