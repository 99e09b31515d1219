/** Wiring between the service client, the state transitions, and the view.
 *
 * Every mutation flows through commit(), so the page always reflects the
 * latest committed state. Observation submits and retractions are blocked
 * while a request is in flight; opening a session is allowed to supersede a
 * pending request, whose response then fails the sequence-token check and is
 * discarded.
 */

import type { Retention, SessionMode } from "./api.js";
import { MalformedResponseError, ServiceClient, ServiceError } from "./api.js";
import type { ConsoleState, Failure, PendingObservation } from "./state.js";
import {
  applyFailure,
  applyNetworks,
  applyObservation,
  applyRetraction,
  applySnapshot,
  beginRequest,
  dismissNotice,
  initialState,
  setDesiredMode,
  setRetention,
} from "./state.js";
import type { ViewHandlers } from "./view.js";
import { render } from "./view.js";

function classify(error: unknown, retry: PendingObservation | null): Failure {
  if (error instanceof ServiceError) {
    return {
      kind: "service",
      status: error.status,
      code: error.code,
      message: error.message,
    };
  }
  if (error instanceof MalformedResponseError) {
    return { kind: "malformed", message: error.message };
  }
  const message = error instanceof Error ? error.message : String(error);
  return { kind: "network", message, retry };
}

export class ConsoleController {
  state: ConsoleState;
  readonly handlers: ViewHandlers;

  constructor(
    private root: HTMLElement,
    private client: ServiceClient,
  ) {
    this.state = initialState();
    this.handlers = {
      selectNetwork: (networkId) => void this.openSession(networkId),
      toggleBounded: (on) => void this.setMode(on ? "bounded" : "ad"),
      setRetention: (retention) => void this.changeRetention(retention),
      observe: (feature, value) => void this.submitObservation(feature, value),
      retract: (feature) => void this.retractObservation(feature),
      retry: () => void this.retryObservation(),
      dismiss: () => this.commit(dismissNotice(this.state)),
    };
    this.commit(this.state);
  }

  private commit(next: ConsoleState): void {
    this.state = next;
    render(this.root, this.state, this.handlers);
  }

  async init(): Promise<void> {
    const { next, token } = beginRequest(this.state);
    this.commit(next);
    try {
      const networks = await this.client.listNetworks();
      this.commit(applyNetworks(this.state, token, networks));
    } catch (error) {
      this.commit(applyFailure(this.state, token, classify(error, null)));
    }
  }

  /** Open a fresh session on a network with the console's current mode and
   * retention settings. Supersedes any request still in flight. */
  async openSession(networkId: string, mode?: SessionMode): Promise<void> {
    const useMode = mode ?? this.state.desiredMode;
    const retention =
      useMode === "bounded" ? this.state.retention : undefined;
    const { next, token } = beginRequest({
      ...this.state,
      selectedNetwork: networkId,
    });
    this.commit(next);
    try {
      const snapshot = await this.client.createSession(
        networkId,
        useMode,
        retention,
      );
      this.commit(applySnapshot(this.state, token, snapshot));
    } catch (error) {
      this.commit(applyFailure(this.state, token, classify(error, null)));
    }
  }

  /** The bounded-mode toggle: reopen the current network in the new mode. */
  async setMode(mode: SessionMode): Promise<void> {
    this.commit(setDesiredMode(this.state, mode));
    if (this.state.selectedNetwork !== null) {
      await this.openSession(this.state.selectedNetwork, mode);
    }
  }

  /** Retention applies at session creation, so changing it while a bounded
   * session is active reopens that session under the new policy. */
  async changeRetention(retention: Retention): Promise<void> {
    this.commit(setRetention(this.state, retention));
    const session = this.state.session;
    if (session !== null && session.mode === "bounded") {
      await this.openSession(session.networkId, "bounded");
    }
  }

  async submitObservation(feature: string, value: string): Promise<void> {
    if (this.state.inFlight || this.state.session === null) return;
    const sessionId = this.state.session.sessionId;
    const { next, token } = beginRequest(this.state);
    this.commit(next);
    try {
      const response = await this.client.addObservation(sessionId, feature, value);
      this.commit(
        applyObservation(this.state, token, { feature, value }, response),
      );
    } catch (error) {
      this.commit(
        applyFailure(this.state, token, classify(error, { feature, value })),
      );
    }
  }

  async retractObservation(feature: string): Promise<void> {
    if (this.state.inFlight || this.state.session === null) return;
    const sessionId = this.state.session.sessionId;
    const { next, token } = beginRequest(this.state);
    this.commit(next);
    try {
      const response = await this.client.retractObservation(sessionId, feature);
      this.commit(applyRetraction(this.state, token, feature, response));
    } catch (error) {
      this.commit(applyFailure(this.state, token, classify(error, null)));
    }
  }

  async retryObservation(): Promise<void> {
    const notice = this.state.notice;
    if (notice.kind !== "network-failure" || notice.retry === null) return;
    this.commit(dismissNotice(this.state));
    await this.submitObservation(notice.retry.feature, notice.retry.value);
  }
}
