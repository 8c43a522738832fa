import type { EnvironmentGraphView, RecommendationCard } from './types.js';

const SVG_NS = 'http://www.w3.org/2000/svg';

export interface GraphView {
  root: HTMLElement;
  render(graph: EnvironmentGraphView): void;
  setCards(cards: RecommendationCard[]): void;
  highlight(card: RecommendationCard | null): void;
}

interface NodePosition {
  x: number;
  y: number;
}

/** Deterministic layout: rooms side by side, their nodes stacked inside. */
function layout(graph: EnvironmentGraphView): Map<string, NodePosition> {
  const positions = new Map<string, NodePosition>();
  const roomWidth = 180;
  graph.rooms.forEach((room, i) => {
    positions.set(`room:${room}`, { x: 40 + i * roomWidth, y: 24 });
    const members: string[] = [
      ...graph.surfaces.filter((s) => s.room === room).map((s) => `surface:${s.id}`),
      ...graph.outlets.filter((o) => o.room === room).map((o) => `outlet:${o.id}`),
      ...graph.appliances.filter((a) => a.room === room).map((a) => `appliance:${a.id}`),
    ];
    for (const surface of graph.surfaces.filter((s) => s.room === room)) {
      for (const obj of graph.objects.filter((ob) => ob.surface === surface.id)) {
        members.push(`object:${obj.id}`);
      }
    }
    members.forEach((key, j) => {
      positions.set(key, { x: 60 + i * roomWidth, y: 70 + j * 46 });
    });
  });
  return positions;
}

function svgEl<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string>,
): SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) el.setAttribute(k, v);
  return el;
}

export function createGraphView(container: HTMLElement): GraphView {
  container.classList.add('graph-view');
  let svg: SVGSVGElement | null = null;
  let feasibleNodes = new Set<string>();
  let currentGraph: EnvironmentGraphView | null = null;

  function nodeId(kind: string, id: string): string {
    return `${kind}:${id}`;
  }

  function applyFeasibility(): void {
    if (!svg) return;
    for (const node of svg.querySelectorAll<SVGGElement>('g.node')) {
      const key = node.dataset.key ?? '';
      const relevant = key.startsWith('surface:') || key.startsWith('outlet:');
      node.classList.toggle(
        'infeasible',
        relevant && feasibleNodes.size > 0 && !feasibleNodes.has(key),
      );
    }
  }

  const view: GraphView = {
    root: container,

    render(graph: EnvironmentGraphView): void {
      container.replaceChildren();
      currentGraph = graph;
      if (!graph || !Array.isArray(graph.rooms) || graph.rooms.length === 0) {
        const pane = document.createElement('div');
        pane.className = 'error-pane';
        pane.textContent = 'Environment graph is malformed or empty.';
        container.appendChild(pane);
        return;
      }
      const positions = layout(graph);
      const width = 40 + graph.rooms.length * 180 + 40;
      const height =
        Math.max(
          ...[...positions.values()].map((p) => p.y),
          120,
        ) + 60;
      svg = svgEl('svg', {
        viewBox: `0 0 ${width} ${height}`,
        width: String(width),
        height: String(height),
      });

      // room boxes and adjacency edges first (under the nodes)
      graph.adjacency.forEach(([a, b]) => {
        const pa = positions.get(`room:${a}`);
        const pb = positions.get(`room:${b}`);
        if (!pa || !pb) return;
        svg!.appendChild(
          svgEl('line', {
            class: 'edge edge-adjacent',
            x1: String(pa.x + 60),
            y1: String(pa.y),
            x2: String(pb.x + 60),
            y2: String(pb.y),
          }),
        );
      });
      graph.reaches.forEach((reach) => {
        const po = positions.get(`outlet:${reach.outlet}`);
        const ps = positions.get(`surface:${reach.surface}`);
        if (!po || !ps) return;
        const line = svgEl('line', {
          class: 'edge edge-reach',
          x1: String(po.x),
          y1: String(po.y),
          x2: String(ps.x),
          y2: String(ps.y),
        });
        line.dataset.reach = `${reach.outlet}->${reach.surface}`;
        svg!.appendChild(line);
      });

      const addNode = (key: string, label: string, cls: string, pos: NodePosition) => {
        const group = svgEl('g', { class: `node ${cls}` });
        group.dataset.key = key;
        group.appendChild(
          svgEl('circle', { cx: String(pos.x), cy: String(pos.y), r: '14' }),
        );
        const text = svgEl('text', {
          x: String(pos.x + 18),
          y: String(pos.y + 4),
        });
        text.textContent = label;
        group.appendChild(text);
        svg!.appendChild(group);
      };

      for (const room of graph.rooms) {
        const pos = positions.get(`room:${room}`)!;
        addNode(nodeId('room', room), room, 'node-room', pos);
      }
      for (const s of graph.surfaces) {
        addNode(nodeId('surface', s.id), `${s.id} (${s.material})`, 'node-surface', positions.get(`surface:${s.id}`)!);
      }
      for (const o of graph.outlets) {
        addNode(nodeId('outlet', o.id), o.id, 'node-outlet', positions.get(`outlet:${o.id}`)!);
      }
      for (const a of graph.appliances) {
        addNode(nodeId('appliance', a.id), a.id, 'node-appliance', positions.get(`appliance:${a.id}`)!);
      }
      for (const obj of graph.objects) {
        addNode(nodeId('object', obj.id), `${obj.id} [${obj.tag}]`, 'node-object', positions.get(`object:${obj.id}`)!);
      }
      container.appendChild(svg);
      applyFeasibility();
    },

    setCards(cards: RecommendationCard[]): void {
      feasibleNodes = new Set<string>();
      for (const card of cards) {
        feasibleNodes.add(`surface:${card.surface}`);
        feasibleNodes.add(`outlet:${card.outlet}`);
      }
      applyFeasibility();
    },

    highlight(card: RecommendationCard | null): void {
      if (!svg) return;
      for (const node of svg.querySelectorAll<SVGGElement>('g.node')) {
        const key = node.dataset.key ?? '';
        node.classList.toggle(
          'highlight',
          card !== null &&
            (key === `surface:${card.surface}` || key === `outlet:${card.outlet}`),
        );
      }
    },
  };
  return view;
}

/** Wire card hover -> node highlighting (used by main and the tests). */
export function bindCardHover(cardList: HTMLElement, view: GraphView): void {
  cardList.addEventListener('mouseover', (ev) => {
    const card = (ev.target as HTMLElement).closest<HTMLElement>('.card');
    if (!card) return;
    view.highlight({
      surface: card.dataset.surface ?? '',
      outlet: card.dataset.outlet ?? '',
    } as RecommendationCard);
  });
  cardList.addEventListener('mouseout', () => view.highlight(null));
}
