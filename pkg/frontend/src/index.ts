export { install, reportIssue, flush, diagnostics } from "./sdk";
export type {
  BrowserEvent,
  BrowserEventKind,
  BrowserEventPayload,
  Diagnostics,
  SdkConfig,
  Severity,
  Transport,
  UninstallHandle,
} from "./types";
