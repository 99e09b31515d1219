/** Shared test scaffolding: a happy-dom page, a scripted fetch, and fixture
 * payloads shaped like real service responses. */

import { Window } from "happy-dom";
import type {
  FetchLike,
  NetworkInfo,
  ObservationResponse,
  SessionSnapshot,
} from "../src/api.js";
import type { ConsoleController } from "../src/controller.js";

export function makePage(): { root: HTMLElement; window: Window } {
  const window = new Window();
  const doc = window.document;
  const root = doc.createElement("div");
  root.id = "app";
  doc.body.appendChild(root);
  return { root: root as unknown as HTMLElement, window };
}

export function query(root: HTMLElement, selector: string): HTMLElement {
  const node = root.querySelector(selector);
  if (node === null) throw new Error(`missing element: ${selector}`);
  return node as HTMLElement;
}

export function queryAll(root: HTMLElement, selector: string): HTMLElement[] {
  return Array.from(root.querySelectorAll(selector)) as HTMLElement[];
}

export function fireChange(window: Window, node: HTMLElement): void {
  node.dispatchEvent(new window.Event("change", { bubbles: true }) as unknown as Event);
}

/** Wait for the controller's in-flight request to settle. */
export async function flush(controller: ConsoleController, limit = 2000): Promise<void> {
  const start = Date.now();
  while (controller.state.inFlight) {
    if (Date.now() - start > limit) throw new Error("request never settled");
    await new Promise((resolve) => setTimeout(resolve, 5));
  }
}

interface Deferred {
  resolve(status: number, body: unknown): void;
  reject(error: Error): void;
}

export interface ScriptedFetch {
  fetch: FetchLike;
  calls: { url: string; method: string; body: unknown }[];
  /** Queue an immediate JSON response. */
  respond(status: number, body: unknown): void;
  /** Queue a rejection, as from a connection failure. */
  fail(message: string): void;
  /** Queue a response the test resolves later. */
  defer(): Deferred;
}

export function scriptedFetch(): ScriptedFetch {
  const queue: (() => Promise<Response>)[] = [];
  const calls: ScriptedFetch["calls"] = [];

  const fetchFn: FetchLike = (url, init) => {
    const body = typeof init?.body === "string" ? JSON.parse(init.body) : undefined;
    calls.push({ url, method: init?.method ?? "GET", body });
    const responder = queue.shift();
    if (responder === undefined) {
      return Promise.reject(new Error(`unscripted request: ${url}`));
    }
    return responder();
  };

  function jsonResponse(status: number, body: unknown): Response {
    return new Response(JSON.stringify(body), {
      status,
      headers: { "content-type": "application/json" },
    });
  }

  return {
    fetch: fetchFn,
    calls,
    respond(status, body) {
      queue.push(() => Promise.resolve(jsonResponse(status, body)));
    },
    fail(message) {
      queue.push(() => Promise.reject(new Error(message)));
    },
    defer() {
      let settle: (response: Response) => void = () => undefined;
      let abort: (error: Error) => void = () => undefined;
      const pending = new Promise<Response>((resolve, reject) => {
        settle = resolve;
        abort = reject;
      });
      queue.push(() => pending);
      return {
        resolve(status, body) {
          settle(jsonResponse(status, body));
        },
        reject(error) {
          abort(error);
        },
      };
    },
  };
}

export const NETWORKS: NetworkInfo[] = [
  {
    network_id: "demo",
    node_count: 4,
    diagnosis: "D",
    diagnosis_values: ["d1", "d2", "d3"],
    features: ["F", "G", "H"],
    feature_values: { F: ["t", "f"], G: ["t", "f"], H: ["lo", "hi"] },
  },
  {
    network_id: "other",
    node_count: 2,
    diagnosis: "D",
    diagnosis_values: ["y", "n"],
    features: ["F"],
    feature_values: { F: ["t", "f"] },
  },
];

export function demoSnapshot(): SessionSnapshot {
  return {
    session_id: "s0001",
    network_id: "demo",
    mode: "ad",
    diagnosis: "D",
    differential: [
      { diagnosis: "d1", p: 0.5 },
      { diagnosis: "d2", p: 0.3 },
      { diagnosis: "d3", p: 0.2 },
    ],
    observed: {},
    history: [],
    portions: [
      { id: 0, features: ["F", "G"] },
      { id: 1, features: ["H"] },
    ],
  };
}

export function demoObservation(): ObservationResponse {
  return {
    differential: [
      { diagnosis: "d2", p: 0.6 },
      { diagnosis: "d1", p: 0.25 },
      { diagnosis: "d3", p: 0.15 },
    ],
    touched_portions: [1],
    observed: { H: "hi" },
  };
}

export function boundedSnapshot(): SessionSnapshot {
  return {
    session_id: "s0002",
    network_id: "demo",
    mode: "bounded",
    diagnosis: "D",
    differential: [
      { diagnosis: "d1", lower: 0.5, upper: 0.5, retained: true },
      { diagnosis: "d2", lower: 0.3, upper: 0.3, retained: true },
      { diagnosis: "d3", lower: 0.2, upper: 0.2, retained: true },
    ],
    observed: {},
    history: [],
    portions: [
      { id: 0, features: ["F", "G"] },
      { id: 1, features: ["H"] },
    ],
    rank_uncertain: false,
  };
}

export function boundedObservation(): ObservationResponse {
  return {
    differential: [
      { diagnosis: "d1", lower: 0.084, upper: 0.526, retained: true },
      { diagnosis: "d2", lower: 0.075, upper: 0.473, retained: true },
      { diagnosis: "d3", lower: 0.0, upper: 0.84, retained: false },
    ],
    touched_portions: [0],
    observed: { F: "t" },
    rank_uncertain: true,
  };
}
