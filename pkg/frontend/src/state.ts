/** Console state and its pure transitions.
 *
 * The state is a value; every transition returns a fresh one. Displayed
 * probabilities are carried verbatim from the latest service response, and
 * no transition does arithmetic on them. Each request takes a sequence
 * token from beginRequest; a response whose token no longer matches the
 * state's sequence lost a race to a newer request and is dropped whole.
 */

import type {
  DifferentialEntry,
  HistoryItem,
  NetworkInfo,
  ObservationResponse,
  Portion,
  Retention,
  RetractionResponse,
  SessionMode,
  SessionSnapshot,
} from "./api.js";
import { isInterval } from "./api.js";

export interface PendingObservation {
  feature: string;
  value: string;
}

export type Notice =
  | { kind: "none" }
  | { kind: "impossible"; message: string }
  | { kind: "service-error"; code: string; message: string }
  | { kind: "network-failure"; message: string; retry: PendingObservation | null };

export type Failure =
  | { kind: "service"; status: number; code: string; message: string }
  | { kind: "malformed"; message: string }
  | { kind: "network"; message: string; retry: PendingObservation | null };

export interface SessionView {
  sessionId: string;
  networkId: string;
  mode: SessionMode;
  diagnosis: string;
  differential: DifferentialEntry[];
  observed: Record<string, string>;
  history: HistoryItem[];
  portions: Portion[];
  touchedPortions: number[];
  rankUncertain: boolean;
}

export interface ConsoleState {
  networks: NetworkInfo[];
  selectedNetwork: string | null;
  desiredMode: SessionMode;
  retention: Retention;
  session: SessionView | null;
  inFlight: boolean;
  sequence: number;
  notice: Notice;
}

export function initialState(): ConsoleState {
  return {
    networks: [],
    selectedNetwork: null,
    desiredMode: "ad",
    retention: { mode: "threshold", value: 1e-4 },
    session: null,
    inFlight: false,
    sequence: 0,
    notice: { kind: "none" },
  };
}

export function withNetworks(
  state: ConsoleState,
  networks: NetworkInfo[],
): ConsoleState {
  const known = networks.some((n) => n.network_id === state.selectedNetwork);
  return {
    ...state,
    networks,
    selectedNetwork: known ? state.selectedNetwork : null,
  };
}

export function applyNetworks(
  state: ConsoleState,
  token: number,
  networks: NetworkInfo[],
): ConsoleState {
  if (state.sequence !== token) return state;
  return withNetworks(
    { ...state, inFlight: false, notice: { kind: "none" } },
    networks,
  );
}

export function setDesiredMode(state: ConsoleState, mode: SessionMode): ConsoleState {
  return { ...state, desiredMode: mode };
}

export function setRetention(state: ConsoleState, retention: Retention): ConsoleState {
  return { ...state, retention };
}

export function dismissNotice(state: ConsoleState): ConsoleState {
  return { ...state, notice: { kind: "none" } };
}

/** Claim a sequence token and mark a request in flight. */
export function beginRequest(state: ConsoleState): {
  next: ConsoleState;
  token: number;
} {
  const token = state.sequence + 1;
  return { next: { ...state, sequence: token, inFlight: true }, token };
}

function stale(state: ConsoleState, token: number): boolean {
  return state.sequence !== token;
}

function sessionFromSnapshot(snapshot: SessionSnapshot): SessionView {
  return {
    sessionId: snapshot.session_id,
    networkId: snapshot.network_id,
    mode: snapshot.mode,
    diagnosis: snapshot.diagnosis,
    differential: snapshot.differential,
    observed: snapshot.observed,
    history: snapshot.history,
    portions: snapshot.portions,
    touchedPortions: [],
    rankUncertain: snapshot.rank_uncertain ?? false,
  };
}

export function applySnapshot(
  state: ConsoleState,
  token: number,
  snapshot: SessionSnapshot,
): ConsoleState {
  if (stale(state, token)) return state;
  return {
    ...state,
    selectedNetwork: snapshot.network_id,
    session: sessionFromSnapshot(snapshot),
    inFlight: false,
    notice: { kind: "none" },
  };
}

export function applyObservation(
  state: ConsoleState,
  token: number,
  observation: PendingObservation,
  response: ObservationResponse,
): ConsoleState {
  if (stale(state, token) || state.session === null) return state;
  return {
    ...state,
    session: {
      ...state.session,
      differential: response.differential,
      observed: response.observed,
      history: [
        ...state.session.history,
        { feature: observation.feature, value: observation.value },
      ],
      touchedPortions: response.touched_portions,
      rankUncertain: response.rank_uncertain ?? false,
    },
    inFlight: false,
    notice: { kind: "none" },
  };
}

export function applyRetraction(
  state: ConsoleState,
  token: number,
  feature: string,
  response: RetractionResponse,
): ConsoleState {
  if (stale(state, token) || state.session === null) return state;
  return {
    ...state,
    session: {
      ...state.session,
      differential: response.differential,
      observed: response.observed,
      history: state.session.history.filter((item) => item.feature !== feature),
      touchedPortions: [],
      rankUncertain: false,
    },
    inFlight: false,
    notice: { kind: "none" },
  };
}

/** Every failure leaves the session view untouched; only the notice and the
 * in-flight flag change. An impossible observation gets its own notice kind
 * because the service guarantees the session did not change. */
export function applyFailure(
  state: ConsoleState,
  token: number,
  failure: Failure,
): ConsoleState {
  if (stale(state, token)) return state;
  let notice: Notice;
  if (failure.kind === "service" && failure.code === "impossible_evidence") {
    notice = { kind: "impossible", message: failure.message };
  } else if (failure.kind === "service") {
    notice = { kind: "service-error", code: failure.code, message: failure.message };
  } else if (failure.kind === "malformed") {
    notice = {
      kind: "service-error",
      code: "malformed_response",
      message: failure.message,
    };
  } else {
    notice = { kind: "network-failure", message: failure.message, retry: failure.retry };
  }
  return { ...state, inFlight: false, notice };
}

/** Display order: descending probability, or descending lower bound for
 * intervals. The sort is stable, so entries the service ranked equal keep
 * its declaration order. */
export function rankedDifferential(
  entries: DifferentialEntry[],
): DifferentialEntry[] {
  const keyed = entries.map((entry) => ({
    entry,
    key: isInterval(entry) ? entry.lower : entry.p,
  }));
  keyed.sort((a, b) => b.key - a.key);
  return keyed.map((item) => item.entry);
}
