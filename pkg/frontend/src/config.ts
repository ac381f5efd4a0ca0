/**
 * API base resolution: build-time VITE_API_BASE wins, then a runtime
 * global for static deployments, then same-origin.
 */

export function apiBase(): string {
  const fromBuild = (import.meta as { env?: Record<string, string> }).env?.VITE_API_BASE;
  if (fromBuild) return fromBuild.replace(/\/$/, "");
  const fromRuntime = (globalThis as Record<string, unknown>).SWCAPTCHA_API_BASE;
  if (typeof fromRuntime === "string" && fromRuntime) return fromRuntime.replace(/\/$/, "");
  return "";
}
