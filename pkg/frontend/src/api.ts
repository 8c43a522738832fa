import type {
  HealthReport,
  MessageResponse,
  SessionCreated,
  SessionView,
} from './types.js';

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(path, init);
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (body && typeof body.error === 'string') detail = body.error;
    } catch {
      // non-JSON error body
    }
    throw new ApiError(response.status, detail);
  }
  return response.json() as Promise<T>;
}

export const api = {
  health: (): Promise<HealthReport> => request('/health'),

  createSession: (): Promise<SessionCreated> =>
    request('/recommend/session', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: '{}',
    }),

  sendMessage: (sessionId: string, message: string): Promise<MessageResponse> =>
    request(`/recommend/session/${sessionId}/message`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ message }),
    }),

  getSession: (sessionId: string): Promise<SessionView> =>
    request(`/recommend/session/${sessionId}`),
};
