export interface AgentView {
  name: string;
  role: string;
  backend_id: string;
  pinned: boolean;
  session_state: string;
  heartbeat_age: number | null;
  respawn_count: number;
  last_kick: number | null;
}

export interface StatusSnapshot {
  at: number;
  governor: { mode: string; queue_size: number };
  repos: Record<string, number>;
  agents: AgentView[];
  coverage: { current_pct: number | null; target_pct: number };
  intensity: number;
}

export interface SparklinePoint {
  bucket_start: number;
  value: number;
}

export interface SparklinePayload {
  agent: string;
  bucket_secs: number;
  window_secs: number;
  series: Record<string, SparklinePoint[]>;
}

export type ConnectionState = "live" | "reconnecting";
