import { BoundedQueue } from "./queue";
import type {
  BrowserEvent,
  BrowserEventKind,
  Diagnostics,
  SdkConfig,
  Transport,
  UninstallHandle,
} from "./types";

const DEFAULT_CORRELATION_HEADER = "X-Correlation-Id";
const DEFAULT_BATCH_SIZE = 10;
const DEFAULT_FLUSH_INTERVAL_MS = 2000;
const DEFAULT_MAX_QUEUE = 200;
const DEFAULT_BACKOFF_CAP_MS = 60_000;

function randomCorrelationId(): string {
  // 128-bit hex, one id per page load.
  const bytes = new Uint8Array(16);
  if (typeof crypto !== "undefined" && crypto.getRandomValues) {
    crypto.getRandomValues(bytes);
  } else {
    for (let i = 0; i < bytes.length; i += 1) {
      bytes[i] = Math.floor(Math.random() * 256);
    }
  }
  return Array.from(bytes, (b) => b.toString(16).padStart(2, "0")).join("");
}

function selectorFor(element: Element): string {
  const parts: string[] = [];
  let node: Element | null = element;
  let depth = 0;
  while (node && depth < 3) {
    let part = node.tagName.toLowerCase();
    if (node.id) {
      parts.unshift(`${part}#${node.id}`);
      break;
    }
    if (typeof node.className === "string" && node.className.trim()) {
      part += "." + node.className.trim().split(/\s+/).slice(0, 2).join(".");
    }
    parts.unshift(part);
    node = node.parentElement;
    depth += 1;
  }
  return parts.join(" > ");
}

function describeReason(reason: unknown): { message: string; stack?: string } {
  if (reason instanceof Error) {
    return { message: reason.message || String(reason), stack: reason.stack ?? undefined };
  }
  return { message: typeof reason === "string" ? reason : JSON.stringify(reason) ?? "unknown" };
}

class Sdk {
  readonly correlationId = randomCorrelationId();
  private readonly sessionId: string | undefined;
  private readonly queue: BoundedQueue<BrowserEvent>;
  private readonly transport: Transport;
  private readonly url: string;
  private readonly correlationHeader: string;
  private readonly batchSize: number;
  private readonly flushIntervalMs: number;
  private readonly backoffCapMs: number;

  private lastClicked: string | undefined;
  private consecutiveFailures = 0;
  private nextAttemptAt = 0;
  private flushing = false;
  private timer: ReturnType<typeof setInterval> | undefined;

  private readonly originalFetch: typeof window.fetch;
  private readonly originalXhrOpen: typeof XMLHttpRequest.prototype.open;
  private readonly originalXhrSend: typeof XMLHttpRequest.prototype.send;
  private readonly onError = (event: ErrorEvent) => this.captureError(event);
  private readonly onRejection = (event: Event) => this.captureRejection(event);
  private readonly onClick = (event: Event) => this.captureClick(event);

  constructor(private readonly config: SdkConfig) {
    if (!config.endpoint) {
      throw new Error("SdkConfig.endpoint must be non-empty");
    }
    this.batchSize = config.batchSize ?? DEFAULT_BATCH_SIZE;
    if (this.batchSize < 1) {
      throw new Error("SdkConfig.batchSize must be >= 1");
    }
    this.correlationHeader = config.correlationHeader ?? DEFAULT_CORRELATION_HEADER;
    this.flushIntervalMs = config.flushIntervalMs ?? DEFAULT_FLUSH_INTERVAL_MS;
    this.backoffCapMs = config.backoffCapMs ?? DEFAULT_BACKOFF_CAP_MS;
    this.queue = new BoundedQueue(config.maxQueue ?? DEFAULT_MAX_QUEUE);
    this.sessionId = config.sessionIdFactory ? config.sessionIdFactory() : undefined;
    this.url = config.endpoint.replace(/\/+$/, "") + "/api/v1/events/browser";

    this.originalFetch = window.fetch;
    this.originalXhrOpen = XMLHttpRequest.prototype.open;
    this.originalXhrSend = XMLHttpRequest.prototype.send;
    this.transport = config.transport ?? this.fetchTransport;
  }

  private readonly fetchTransport: Transport = async (url, body) => {
    const response = await this.originalFetch.call(window, url, {
      method: "POST",
      headers: { "Content-Type": "application/x-ndjson" },
      body,
      keepalive: true,
    });
    return { ok: response.ok };
  };

  install(): void {
    window.addEventListener("error", this.onError);
    window.addEventListener("unhandledrejection", this.onRejection);
    document.addEventListener("click", this.onClick, true);
    this.wrapFetch();
    this.wrapXhr();
    this.timer = setInterval(() => {
      void this.flushInternal(false);
    }, this.flushIntervalMs);
  }

  uninstall(): void {
    window.removeEventListener("error", this.onError);
    window.removeEventListener("unhandledrejection", this.onRejection);
    document.removeEventListener("click", this.onClick, true);
    window.fetch = this.originalFetch;
    XMLHttpRequest.prototype.open = this.originalXhrOpen;
    XMLHttpRequest.prototype.send = this.originalXhrSend;
    if (this.timer !== undefined) {
      clearInterval(this.timer);
      this.timer = undefined;
    }
  }

  // -- capture hooks ---------------------------------------------------------

  private captureError(event: ErrorEvent): void {
    const stack =
      event.error instanceof Error && event.error.stack ? event.error.stack : undefined;
    this.enqueue("console_error", event.message || "uncaught error", { stack });
  }

  private captureRejection(event: Event): void {
    const reason = (event as PromiseRejectionEvent).reason;
    const { message, stack } = describeReason(reason);
    this.enqueue("unhandled_rejection", `Unhandled promise rejection: ${message}`, { stack });
  }

  private captureClick(event: Event): void {
    const target = event.target;
    if (target instanceof Element) {
      this.lastClicked = selectorFor(target);
    }
  }

  private wrapFetch(): void {
    const sdk = this;
    const original = this.originalFetch;
    window.fetch = function wrappedFetch(
      input: RequestInfo | URL,
      init?: RequestInit
    ): Promise<Response> {
      const initiationStack = new Error().stack ?? undefined;
      let method = init?.method ?? "GET";
      let urlText: string;
      if (typeof input === "string" || input instanceof URL) {
        urlText = String(input);
      } else {
        urlText = input.url;
        method = init?.method ?? input.method ?? "GET";
      }

      // Inject the correlation header without clobbering an explicit one.
      try {
        if (typeof input === "object" && input instanceof Request && !init) {
          const headers = new Headers(input.headers);
          if (!headers.has(sdk.correlationHeader)) {
            headers.set(sdk.correlationHeader, sdk.correlationId);
          }
          input = new Request(input, { headers });
        } else {
          const headers = new Headers(init?.headers ?? {});
          if (!headers.has(sdk.correlationHeader)) {
            headers.set(sdk.correlationHeader, sdk.correlationId);
          }
          init = { ...(init ?? {}), headers };
        }
      } catch {
        // Header injection must never break the application's request.
      }

      return original.call(window, input as RequestInfo, init).then(
        (response) => {
          if (response.status === 0 || response.status >= 400) {
            sdk.enqueue(
              "network_stack_trace",
              `${method.toUpperCase()} ${urlText} failed with status ${response.status}`,
              { stack: initiationStack }
            );
          }
          return response;
        },
        (error: unknown) => {
          const { message } = describeReason(error);
          sdk.enqueue(
            "network_stack_trace",
            `${method.toUpperCase()} ${urlText} failed: ${message}`,
            { stack: initiationStack }
          );
          throw error;
        }
      );
    };
  }

  private wrapXhr(): void {
    const sdk = this;
    const originalOpen = this.originalXhrOpen;
    const originalSend = this.originalXhrSend;

    XMLHttpRequest.prototype.open = function wrappedOpen(
      this: XMLHttpRequest,
      method: string,
      url: string | URL,
      ...rest: unknown[]
    ) {
      (this as any).__failctx = {
        method,
        url: String(url),
        stack: new Error().stack ?? undefined,
      };
      return (originalOpen as any).call(this, method, url, ...rest);
    };

    XMLHttpRequest.prototype.send = function wrappedSend(
      this: XMLHttpRequest,
      body?: Document | XMLHttpRequestBodyInit | null
    ) {
      const meta = (this as any).__failctx as
        | { method: string; url: string; stack?: string }
        | undefined;
      try {
        this.setRequestHeader(sdk.correlationHeader, sdk.correlationId);
      } catch {
        // send() after an unusual open() state; never break the request.
      }
      if (meta) {
        this.addEventListener("loadend", () => {
          if (this.status === 0 || this.status >= 400) {
            sdk.enqueue(
              "network_stack_trace",
              `${meta.method.toUpperCase()} ${meta.url} failed with status ${this.status}`,
              { stack: meta.stack }
            );
          }
        });
      }
      return originalSend.call(this, body as any);
    };
  }

  // -- event assembly and delivery -------------------------------------------

  enqueue(
    kind: BrowserEventKind,
    message: string,
    extra: { stack?: string; state_snapshot?: unknown } = {}
  ): void {
    const event: BrowserEvent = {
      v: 1,
      plane: "browser",
      timestamp_ms: Date.now(),
      severity: "error",
      correlation_id: this.correlationId,
      ...(this.sessionId !== undefined ? { session_id: this.sessionId } : {}),
      payload: {
        kind,
        message,
        ...(extra.stack !== undefined ? { stack: extra.stack } : {}),
        page_url: window.location.href,
        ...(this.lastClicked !== undefined ? { clicked_element: this.lastClicked } : {}),
        ...(extra.state_snapshot !== undefined ? { state_snapshot: extra.state_snapshot } : {}),
      },
    };
    this.queue.push(event);
    if (this.queue.length >= this.batchSize) {
      void this.flushInternal(false);
    }
  }

  reportIssue(message: string): void {
    if (!message) {
      throw new Error("reportIssue requires a non-empty message");
    }
    const snapshot = this.config.stateSnapshotProvider
      ? this.config.stateSnapshotProvider()
      : undefined;
    this.enqueue("manual_report", message, { state_snapshot: snapshot });
    void this.flushInternal(true);
  }

  /** Force a delivery attempt; resolves true when the batch was accepted. */
  flush(): Promise<boolean> {
    return this.flushInternal(true);
  }

  private async flushInternal(force: boolean): Promise<boolean> {
    if (this.queue.length === 0) {
      return true;
    }
    if (this.flushing) {
      return false;
    }
    if (!force && Date.now() < this.nextAttemptAt) {
      return false;
    }
    this.flushing = true;
    const batch = this.queue.drain();
    const body = batch.map((event) => JSON.stringify(event)).join("\n");
    let delivered = false;
    try {
      const result = await this.transport(this.url, body);
      delivered = result.ok;
    } catch {
      delivered = false;
    } finally {
      this.flushing = false;
    }
    if (delivered) {
      this.consecutiveFailures = 0;
      this.nextAttemptAt = 0;
      return true;
    }
    // Delivery is best-effort: retain and retry with exponential backoff.
    this.queue.requeueFront(batch);
    this.consecutiveFailures += 1;
    const delay = Math.min(
      this.backoffCapMs,
      this.flushIntervalMs * 2 ** (this.consecutiveFailures - 1)
    );
    this.nextAttemptAt = Date.now() + delay;
    return false;
  }

  diagnostics(): Diagnostics {
    return {
      queueLength: this.queue.length,
      dropped: this.queue.dropped,
      correlationId: this.correlationId,
      consecutiveFailures: this.consecutiveFailures,
      nextAttemptAt: this.nextAttemptAt,
    };
  }
}

let active: Sdk | undefined;

/** Hook error sources and start shipping events; throws on double-install. */
export function install(config: SdkConfig): UninstallHandle {
  if (active) {
    throw new Error("failctx SDK is already installed; uninstall first");
  }
  const sdk = new Sdk(config);
  sdk.install();
  active = sdk;
  return {
    uninstall() {
      if (active === sdk) {
        sdk.uninstall();
        active = undefined;
      }
    },
  };
}

function requireInstalled(): Sdk {
  if (!active) {
    throw new Error("failctx SDK is not installed");
  }
  return active;
}

/** Queue a manual issue report and flush immediately. */
export function reportIssue(message: string): void {
  requireInstalled().reportIssue(message);
}

/** Force a delivery attempt for everything queued. */
export function flush(): Promise<boolean> {
  return requireInstalled().flush();
}

/** Queue/backoff/correlation state for monitoring and tests. */
export function diagnostics(): Diagnostics {
  return requireInstalled().diagnostics();
}
