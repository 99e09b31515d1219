/** DOM rendering for the console.
 *
 * render() rebuilds the whole tree from the state on every call, so the
 * page is a pure function of the last committed state. Probability text and
 * the data-* attributes on differential entries come verbatim from the
 * service response values; the only client-side computation is percent
 * formatting and bar geometry.
 */

import type { DifferentialEntry, NetworkInfo, Retention } from "./api.js";
import { isInterval } from "./api.js";
import type { ConsoleState, SessionView } from "./state.js";
import { rankedDifferential } from "./state.js";

export interface ViewHandlers {
  selectNetwork(networkId: string): void;
  toggleBounded(on: boolean): void;
  setRetention(retention: Retention): void;
  observe(feature: string, value: string): void;
  retract(feature: string): void;
  retry(): void;
  dismiss(): void;
}

function el(
  doc: Document,
  tag: string,
  className?: string,
  text?: string,
): HTMLElement {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function formatPercent(p: number): string {
  return (100 * p).toFixed(1) + "%";
}

function barPercent(p: number): string {
  return (100 * p).toFixed(4) + "%";
}

function renderToolbar(
  doc: Document,
  state: ConsoleState,
  handlers: ViewHandlers,
): HTMLElement {
  const bar = el(doc, "header", "toolbar");

  const networkLabel = el(doc, "label", "network-label", "Network ");
  const select = doc.createElement("select");
  select.className = "network-select";
  const placeholder = doc.createElement("option");
  placeholder.value = "";
  placeholder.textContent = "choose a network";
  placeholder.disabled = true;
  placeholder.selected = state.selectedNetwork === null;
  select.appendChild(placeholder);
  for (const network of state.networks) {
    const option = doc.createElement("option");
    option.value = network.network_id;
    option.textContent = `${network.network_id} (${network.node_count} nodes)`;
    option.selected = network.network_id === state.selectedNetwork;
    select.appendChild(option);
  }
  select.addEventListener("change", () => {
    if (select.value) handlers.selectNetwork(select.value);
  });
  networkLabel.appendChild(select);
  bar.appendChild(networkLabel);

  const toggleLabel = el(doc, "label", "mode-toggle");
  const toggle = doc.createElement("input");
  toggle.type = "checkbox";
  toggle.className = "bounded-toggle";
  toggle.checked = state.desiredMode === "bounded";
  toggle.addEventListener("change", () => handlers.toggleBounded(toggle.checked));
  toggleLabel.appendChild(toggle);
  toggleLabel.appendChild(doc.createTextNode(" Bounded mode"));
  bar.appendChild(toggleLabel);

  if (state.desiredMode === "bounded") {
    const retention = el(doc, "span", "retention-controls");
    const modeSelect = doc.createElement("select");
    modeSelect.className = "retention-mode";
    for (const mode of ["threshold", "top_k"] as const) {
      const option = doc.createElement("option");
      option.value = mode;
      option.textContent = mode === "top_k" ? "keep top k" : "weight threshold";
      option.selected = state.retention.mode === mode;
      modeSelect.appendChild(option);
    }
    const valueInput = doc.createElement("input");
    valueInput.type = "number";
    valueInput.step = "any";
    valueInput.className = "retention-value";
    valueInput.value = String(state.retention.value);
    const commit = () => {
      const value = Number(valueInput.value);
      if (!Number.isFinite(value)) return;
      handlers.setRetention({
        mode: modeSelect.value === "top_k" ? "top_k" : "threshold",
        value,
      });
    };
    modeSelect.addEventListener("change", commit);
    valueInput.addEventListener("change", commit);
    retention.appendChild(modeSelect);
    retention.appendChild(valueInput);
    bar.appendChild(retention);
  }

  const label = state.session
    ? `session ${state.session.sessionId} · ${state.session.mode}`
    : "no session";
  bar.appendChild(el(doc, "span", "session-label", label));
  if (state.inFlight) {
    bar.appendChild(el(doc, "span", "busy-indicator", "updating…"));
  }
  return bar;
}

function renderNotice(
  doc: Document,
  state: ConsoleState,
  handlers: ViewHandlers,
): HTMLElement {
  const area = el(doc, "div", "notice-area");
  const notice = state.notice;
  if (notice.kind === "none") return area;

  const box = el(doc, "div", `notice ${notice.kind}`);
  box.setAttribute("role", "alert");
  if (notice.kind === "impossible") {
    box.appendChild(
      el(doc, "span", "notice-text",
        "Impossible observation: " + notice.message + " The session is unchanged."),
    );
  } else if (notice.kind === "service-error") {
    box.dataset.code = notice.code;
    box.appendChild(
      el(doc, "span", "notice-text", `${notice.code}: ${notice.message}`),
    );
  } else {
    box.appendChild(
      el(doc, "span", "notice-text", "Request failed: " + notice.message),
    );
    if (notice.retry) {
      const retry = el(doc, "button", "retry", "Retry") as HTMLButtonElement;
      retry.addEventListener("click", () => handlers.retry());
      box.appendChild(retry);
    }
  }
  const dismiss = el(doc, "button", "dismiss", "Dismiss") as HTMLButtonElement;
  dismiss.addEventListener("click", () => handlers.dismiss());
  box.appendChild(dismiss);
  area.appendChild(box);
  return area;
}

function renderEntry(doc: Document, entry: DifferentialEntry): HTMLElement {
  const item = el(doc, "li", "entry");
  item.dataset.diagnosis = entry.diagnosis;
  item.appendChild(el(doc, "span", "entry-label", entry.diagnosis));
  const bar = el(doc, "span", "bar");
  if (isInterval(entry)) {
    item.classList.add("interval");
    if (!entry.retained) item.classList.add("skipped");
    item.dataset.lower = String(entry.lower);
    item.dataset.upper = String(entry.upper);
    const band = el(doc, "span", "band");
    band.style.left = barPercent(entry.lower);
    band.style.width = barPercent(entry.upper - entry.lower);
    bar.appendChild(band);
    item.appendChild(bar);
    item.appendChild(
      el(doc, "span", "entry-value",
        `${formatPercent(entry.lower)} – ${formatPercent(entry.upper)}`),
    );
  } else {
    item.dataset.p = String(entry.p);
    const fill = el(doc, "span", "fill");
    fill.style.width = barPercent(entry.p);
    bar.appendChild(fill);
    item.appendChild(bar);
    item.appendChild(el(doc, "span", "entry-value", formatPercent(entry.p)));
  }
  return item;
}

function renderDifferential(doc: Document, session: SessionView): HTMLElement {
  const section = el(doc, "section", "differential");
  const heading = el(doc, "h2", undefined, "Differential");
  heading.appendChild(el(doc, "span", "diagnosis-node", " · " + session.diagnosis));
  section.appendChild(heading);
  if (session.rankUncertain) {
    const warning = el(
      doc,
      "div",
      "rank-warning",
      "Ranking uncertain: a diagnosis outside the retained set could outrank a retained one. Refine to resolve.",
    );
    warning.setAttribute("role", "alert");
    section.appendChild(warning);
  }
  const list = el(doc, "ol", "differential-list");
  for (const entry of rankedDifferential(session.differential)) {
    list.appendChild(renderEntry(doc, entry));
  }
  section.appendChild(list);
  return section;
}

function featureValues(
  state: ConsoleState,
  session: SessionView,
  feature: string,
): string[] {
  const network = state.networks.find((n) => n.network_id === session.networkId);
  return network?.feature_values[feature] ?? [];
}

function renderFeatureRow(
  doc: Document,
  state: ConsoleState,
  session: SessionView,
  feature: string,
  handlers: ViewHandlers,
): HTMLElement {
  const row = el(doc, "div", "feature");
  row.dataset.feature = feature;
  row.appendChild(el(doc, "span", "feature-name", feature));
  const observed = session.observed[feature];
  if (observed !== undefined) {
    // observed features lose their submit control entirely, so a conflicting
    // re-observation cannot be issued from the page
    row.classList.add("observed");
    row.appendChild(el(doc, "span", "observed-value", "= " + observed));
    const retract = el(doc, "button", "retract", "Retract") as HTMLButtonElement;
    retract.disabled = state.inFlight;
    retract.addEventListener("click", () => handlers.retract(feature));
    row.appendChild(retract);
    return row;
  }
  const select = doc.createElement("select");
  select.className = "value-select";
  for (const value of featureValues(state, session, feature)) {
    const option = doc.createElement("option");
    option.value = value;
    option.textContent = value;
    select.appendChild(option);
  }
  select.disabled = state.inFlight;
  const observe = el(doc, "button", "observe", "Observe") as HTMLButtonElement;
  observe.disabled = state.inFlight || select.options.length === 0;
  observe.addEventListener("click", () => {
    if (select.value) handlers.observe(feature, select.value);
  });
  row.appendChild(select);
  row.appendChild(observe);
  return row;
}

function renderPicker(
  doc: Document,
  state: ConsoleState,
  session: SessionView,
  handlers: ViewHandlers,
): HTMLElement {
  const section = el(doc, "section", "picker");
  section.appendChild(el(doc, "h2", undefined, "Features"));
  const touched = new Set(session.touchedPortions);
  for (const portion of session.portions) {
    const features = portion.features.filter((f) => f !== session.diagnosis);
    if (features.length === 0) continue;
    const group = doc.createElement("fieldset");
    group.className = touched.has(portion.id) ? "portion touched" : "portion";
    group.dataset.portionId = String(portion.id);
    const legend = doc.createElement("legend");
    legend.textContent = `Portion ${portion.id}`;
    group.appendChild(legend);
    for (const feature of features) {
      group.appendChild(renderFeatureRow(doc, state, session, feature, handlers));
    }
    section.appendChild(group);
  }
  return section;
}

function renderHistory(doc: Document, session: SessionView): HTMLElement {
  const section = el(doc, "section", "history");
  section.appendChild(el(doc, "h2", undefined, "History"));
  if (session.history.length === 0) {
    section.appendChild(el(doc, "p", "history-empty", "No observations yet."));
    return section;
  }
  const list = el(doc, "ol", "history-list");
  for (const item of session.history) {
    list.appendChild(el(doc, "li", undefined, `${item.feature} = ${item.value}`));
  }
  section.appendChild(list);
  return section;
}

export function render(
  root: HTMLElement,
  state: ConsoleState,
  handlers: ViewHandlers,
): void {
  const doc = root.ownerDocument;
  const container = el(doc, "div", "console");
  container.appendChild(renderToolbar(doc, state, handlers));
  container.appendChild(renderNotice(doc, state, handlers));
  const main = el(doc, "main", "panels");
  if (state.session === null) {
    main.appendChild(el(doc, "p", "placeholder", "Select a network to begin."));
  } else {
    main.appendChild(renderDifferential(doc, state.session));
    main.appendChild(renderPicker(doc, state, state.session, handlers));
    main.appendChild(renderHistory(doc, state.session));
  }
  container.appendChild(main);
  root.textContent = "";
  root.appendChild(container);
}
