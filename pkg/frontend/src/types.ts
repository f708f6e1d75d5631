export type Severity = "debug" | "info" | "warn" | "error" | "fatal";

export type BrowserEventKind =
  | "console_error"
  | "unhandled_rejection"
  | "network_stack_trace"
  | "manual_report";

export interface BrowserEventPayload {
  kind: BrowserEventKind;
  message: string;
  stack?: string;
  page_url: string;
  clicked_element?: string;
  state_snapshot?: unknown;
}

/** Canonical browser-plane event wire document (one JSONL line each). */
export interface BrowserEvent {
  v: 1;
  plane: "browser";
  timestamp_ms: number;
  severity: Severity;
  correlation_id?: string;
  session_id?: string;
  payload: BrowserEventPayload;
}

/** Posts one ndjson batch; resolve {ok:false} or reject both mean "retry later". */
export type Transport = (url: string, body: string) => Promise<{ ok: boolean }>;

export interface SdkConfig {
  /** Ingestion service base URL, e.g. "https://telemetry.example.com". */
  endpoint: string;
  /** Header injected into outgoing requests (default "X-Correlation-Id"). */
  correlationHeader?: string;
  /** Called once at install; its value rides on every event. */
  sessionIdFactory?: () => string;
  /** Queue length that triggers an eager flush (default 10). */
  batchSize?: number;
  /** Timer-driven flush period in ms (default 2000). */
  flushIntervalMs?: number;
  /** Optional app-state snapshot attached to manual reports (sanitized server-side). */
  stateSnapshotProvider?: () => unknown;
  /** Delivery override for tests; defaults to the page's original fetch. */
  transport?: Transport;
  /** Retained-event cap; oldest are dropped beyond it (default 200). */
  maxQueue?: number;
  /** Upper bound for retry backoff in ms (default 60000). */
  backoffCapMs?: number;
}

export interface Diagnostics {
  queueLength: number;
  dropped: number;
  correlationId: string;
  consecutiveFailures: number;
  nextAttemptAt: number;
}

export interface UninstallHandle {
  uninstall(): void;
}
