import { api } from './api.js';
import { createDialogPanel } from './dialog.js';
import { bindCardHover, createGraphView } from './graphview.js';
import { createHealthDashboard } from './health.js';

function mount(): void {
  const dialogRoot = document.getElementById('dialog')!;
  const graphRoot = document.getElementById('graph')!;
  const healthRoot = document.getElementById('health')!;

  const graphView = createGraphView(graphRoot);
  const panel = createDialogPanel(dialogRoot, {
    onCards: (cards) => {
      graphView.setCards(cards);
      const sid = panel.sessionId();
      if (sid !== null) {
        void api.getSession(sid).then((view) => graphView.render(view.graph)).then(
          () => graphView.setCards(panel.cards()),
          () => undefined,
        );
      }
    },
  });
  bindCardHover(dialogRoot, graphView);

  void panel.start().then(async () => {
    const sid = panel.sessionId();
    if (sid !== null) {
      try {
        const view = await api.getSession(sid);
        graphView.render(view.graph);
      } catch {
        graphView.render({ rooms: [] } as never);
      }
    }
  });

  const dashboard = createHealthDashboard(healthRoot, 2000);
  dashboard.start();
}

document.addEventListener('DOMContentLoaded', mount);
