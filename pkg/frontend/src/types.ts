// Payload shapes of the hub HTTP API. The UI renders these as delivered and
// never recomputes scores, totals, ordering, or feasibility.

export interface RecommendationCard {
  surface: string;
  outlet: string;
  gain: number;
  orientation: string;
  placement_id: string;
  perf_score: number;
  ux_score: number;
  total: number;
  rationale: string;
}

export interface AgentOutput {
  kind: 'question' | 'recommendations' | 'message' | 'done';
  text: string;
  field: string | null;
  recommendations: RecommendationCard[];
}

export interface SessionCreated {
  session_id: string;
  output: AgentOutput;
}

export interface MessageResponse {
  output: AgentOutput;
  phase: string;
}

export interface TranscriptTurn {
  role: 'user' | 'agent' | 'system';
  text: string;
}

export interface GraphSurface {
  id: string;
  room: string;
  material: string;
  visibility: number;
}

export interface GraphOutlet {
  id: string;
  room: string;
}

export interface GraphAppliance {
  id: string;
  room: string;
}

export interface GraphObject {
  id: string;
  surface: string;
  tag: string;
}

export interface GraphReach {
  outlet: string;
  surface: string;
  meters: number;
}

export interface EnvironmentGraphView {
  rooms: string[];
  adjacency: [string, string][];
  surfaces: GraphSurface[];
  outlets: GraphOutlet[];
  appliances: GraphAppliance[];
  objects: GraphObject[];
  reaches: GraphReach[];
}

export interface SessionView {
  session_id: string;
  phase: string;
  transcript: TranscriptTurn[];
  pending_question: string | null;
  cards: RecommendationCard[];
  selected: RecommendationCard | null;
  graph: EnvironmentGraphView;
}

export interface DeviceHealth {
  device_id: number;
  measured_rate_mean_hz: number | null;
  measured_rate_std_hz: number | null;
  loss_pct: number;
  recovered_pct: number;
  last_seen_us: number | null;
  received: number;
  lost: number;
  recovered: number;
  unrecoverable: number;
  stored_samples: number;
  missing_samples: number;
  data_rate_gb_per_day: number | null;
}

export interface HealthReport {
  devices: DeviceHealth[];
  disk_bytes_free: number;
  uptime_s: number;
  header_invalid: number;
  unknown_device: number;
}
