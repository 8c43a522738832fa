import { api } from './api.js';
import type { DeviceHealth, HealthReport } from './types.js';

export interface HealthDashboard {
  root: HTMLElement;
  start(): void;
  stop(): void;
  /** One poll cycle; exposed so tests can drive it with fake timers. */
  tick(): Promise<void>;
}

function fmt(value: number | null, digits = 1, suffix = ''): string {
  return value === null ? '—' : `${value.toFixed(digits)}${suffix}`;
}

function deviceRow(dev: DeviceHealth, stale: boolean): HTMLElement {
  const row = document.createElement('tr');
  row.className = 'device-row';
  row.dataset.deviceId = String(dev.device_id);
  const cells = [
    String(dev.device_id),
    fmt(dev.measured_rate_mean_hz, 0, ' Hz'),
    fmt(dev.measured_rate_std_hz, 0, ' Hz'),
    `${dev.loss_pct.toFixed(1)}%`,
    `${dev.recovered_pct.toFixed(1)}%`,
    dev.last_seen_us === null ? '—' : `${(dev.last_seen_us / 1e6).toFixed(1)}s`,
  ];
  for (const text of cells) {
    const td = document.createElement('td');
    td.textContent = text;
    row.appendChild(td);
  }
  const badge = document.createElement('td');
  if (stale) {
    const span = document.createElement('span');
    span.className = 'badge badge-stale';
    span.textContent = 'stale';
    badge.appendChild(span);
  }
  row.appendChild(badge);
  return row;
}

export function createHealthDashboard(
  container: HTMLElement,
  pollPeriodMs = 2000,
): HealthDashboard {
  container.classList.add('health-dashboard');

  const banner = document.createElement('div');
  banner.className = 'banner banner-hidden';
  banner.textContent = 'Hub unreachable — showing last known data.';
  container.appendChild(banner);

  const summary = document.createElement('div');
  summary.className = 'health-summary';
  container.appendChild(summary);

  const table = document.createElement('table');
  table.className = 'health-table';
  const head = document.createElement('tr');
  for (const title of ['device', 'rate mean', 'rate std', 'loss', 'recovered', 'last seen', '']) {
    const th = document.createElement('th');
    th.textContent = title;
    head.appendChild(th);
  }
  table.appendChild(head);
  const body = document.createElement('tbody');
  table.appendChild(body);
  container.appendChild(table);

  const empty = document.createElement('div');
  empty.className = 'empty-state';
  empty.textContent = 'No devices reporting yet.';
  container.appendChild(empty);

  // staleness: a device is flagged after its last_seen stops advancing for
  // more than 3 poll periods
  const lastSeen = new Map<number, number | null>();
  const unchangedPolls = new Map<number, number>();
  let timer: ReturnType<typeof setInterval> | null = null;
  let inFlight = false;

  function render(report: HealthReport): void {
    summary.textContent =
      `disk free ${(report.disk_bytes_free / 1e9).toFixed(1)} GB · ` +
      `uptime ${report.uptime_s.toFixed(0)} s · ` +
      `header errors ${report.header_invalid}`;
    body.replaceChildren();
    empty.style.display = report.devices.length === 0 ? 'block' : 'none';
    table.style.display = report.devices.length === 0 ? 'none' : 'table';
    for (const dev of report.devices) {
      const prev = lastSeen.get(dev.device_id);
      if (prev !== undefined && prev === dev.last_seen_us) {
        unchangedPolls.set(dev.device_id, (unchangedPolls.get(dev.device_id) ?? 0) + 1);
      } else {
        unchangedPolls.set(dev.device_id, 0);
      }
      lastSeen.set(dev.device_id, dev.last_seen_us);
      const stale = (unchangedPolls.get(dev.device_id) ?? 0) > 3;
      body.appendChild(deviceRow(dev, stale));
    }
  }

  const dashboard: HealthDashboard = {
    root: container,

    async tick(): Promise<void> {
      if (inFlight) return; // in-flight de-duplication
      inFlight = true;
      try {
        const report = await api.health();
        banner.classList.add('banner-hidden');
        render(report);
      } catch {
        banner.classList.remove('banner-hidden');
        for (const row of body.querySelectorAll<HTMLElement>('tr.device-row')) {
          const id = Number(row.dataset.deviceId);
          unchangedPolls.set(id, (unchangedPolls.get(id) ?? 0) + 1);
          if ((unchangedPolls.get(id) ?? 0) > 3 && !row.querySelector('.badge-stale')) {
            const span = document.createElement('span');
            span.className = 'badge badge-stale';
            span.textContent = 'stale';
            row.lastElementChild?.appendChild(span);
          }
        }
      } finally {
        inFlight = false;
      }
    },

    start(): void {
      void dashboard.tick();
      timer = setInterval(() => void dashboard.tick(), pollPeriodMs);
    },

    stop(): void {
      if (timer !== null) clearInterval(timer);
      timer = null;
    },
  };
  return dashboard;
}
