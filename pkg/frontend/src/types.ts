// JSON shapes of the admin API, mirrored field for field.

export interface EndpointConfig {
  read_ip: string;
  read_port: number;
  send_ip: string;
  send_port: number;
  listen_rate_hz: number;
}

export interface ModelConfig {
  d_in: number;
  d_out: number;
  sigma_f: number;
  length_scales: number[];
  sigma_n: number;
  max_leaves: number;
  max_local_data: number;
  rng_seed: number;
}

// PUT /api/slots/{id}/config body: rng_seed is optional on the way in.
export type ModelConfigRequest = Omit<ModelConfig, "rng_seed"> & { rng_seed?: number };

export interface Metrics {
  received_quantity: number;
  stored_quantity: number;
  malformed_quantity: number;
  send_error_quantity: number;
  compute_error_quantity: number;
  last_read_time: number;
  last_compute_time: number;
  last_send_time: number;
  mean_read_time: number;
  mean_compute_time: number;
  mean_send_time: number;
}

export interface SlotDoc {
  id: number;
  endpoint: EndpointConfig;
  udp_active: boolean;
  gp_active: boolean;
  running: boolean;
  preset: string | null;
  model: ModelConfig | null;
  metrics: Metrics;
}

export interface PresetDoc {
  name: string;
  note: string;
  d_in: number;
  d_out: number;
  sigma_f: number;
  length_scales: number[];
  sigma_n: number;
  max_leaves: number;
  max_local_data: number;
}

export interface HostInfo {
  hostname: string;
  addresses: string[];
}

// One frame of GET /api/slots/{id}/events (5 Hz).
export interface EventFrame {
  time: number;
  slot: Omit<SlotDoc, "metrics">;
  metrics: Metrics;
}

export interface ApiErrorBody {
  error: { code: string; message: string };
}

export const DEFAULT_READ_PORT = 8000;
export const DEFAULT_SEND_PORT = 8050;
