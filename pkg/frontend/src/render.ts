/** DOM construction for each view. Data always lands via textContent. */

import { formatCount, formatFold, formatRate, formatSimilarity } from "./format.js";
import type { Session } from "./session.js";
import type { ReviewFlow } from "./state.js";
import { NONE_CHOICE, ROLES, type Projection, type Role, type Stats } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export interface SessionFormHandlers {
  onStart(session: Session): void;
}

export function renderSessionForm(doc: Document, handlers: SessionFormHandlers): HTMLElement {
  const panel = el(doc, "section", "session-form");
  panel.appendChild(el(doc, "h2", undefined, "Who is reviewing?"));
  panel.appendChild(
    el(
      doc,
      "p",
      "session-hint",
      "Your name and role are kept in this browser only and attached to every decision you submit.",
    ),
  );

  const nameLabel = el(doc, "label", "session-name", "Reviewer id ");
  const nameInput = el(doc, "input");
  nameInput.type = "text";
  nameInput.name = "reviewer";
  nameInput.placeholder = "e.g. jdoe";
  nameLabel.appendChild(nameInput);
  panel.appendChild(nameLabel);

  const roleGroup = el(doc, "div", "session-roles");
  const roleInputs: HTMLInputElement[] = [];
  for (const role of ROLES) {
    const label = el(doc, "label", "session-role");
    const input = el(doc, "input");
    input.type = "radio";
    input.name = "role";
    input.value = role;
    roleInputs.push(input);
    label.appendChild(input);
    label.appendChild(doc.createTextNode(" " + role));
    roleGroup.appendChild(label);
  }
  panel.appendChild(roleGroup);

  const error = el(doc, "p", "session-error");
  error.hidden = true;
  panel.appendChild(error);

  const start = el(doc, "button", "start-button", "Start reviewing");
  start.type = "button";
  start.addEventListener("click", () => {
    const reviewerId = nameInput.value.trim();
    const role = roleInputs.find((r) => r.checked)?.value as Role | undefined;
    if (!reviewerId || !role) {
      error.textContent = "Enter a reviewer id and pick a role.";
      error.hidden = false;
      return;
    }
    handlers.onStart({ reviewerId, role });
  });
  panel.appendChild(start);
  return panel;
}

export interface ScenarioHandlers {
  onSelect(choice: string): void;
  onSubmit(): void;
}

export function renderScenario(
  doc: Document,
  flow: ReviewFlow,
  handlers: ScenarioHandlers,
): HTMLElement {
  const scenario = flow.current();
  const panel = el(doc, "section", "scenario");
  if (scenario === null) {
    return panel;
  }

  const source = el(doc, "div", "source-course");
  source.appendChild(el(doc, "h2", "source-title", scenario.source_course.title));
  source.appendChild(
    el(
      doc,
      "p",
      "source-meta",
      `${scenario.source_course.id} at ${scenario.source_course.institution_id}; ` +
        `candidates from ${scenario.receiving_institution_id}`,
    ),
  );
  source.appendChild(el(doc, "p", "source-description", scenario.source_course.description));
  panel.appendChild(source);

  const options = el(doc, "div", "options");
  options.setAttribute("role", "radiogroup");

  const addOption = (
    choice: string,
    title: string,
    description: string | null,
    cosine: number | null,
  ) => {
    const label = el(doc, "label", choice === NONE_CHOICE ? "option option-none" : "option");
    label.dataset.choice = choice;
    const input = el(doc, "input");
    input.type = "radio";
    input.name = "choice";
    input.value = choice;
    input.checked = flow.selection === choice;
    const pick = () => handlers.onSelect(choice);
    input.addEventListener("change", pick);
    input.addEventListener("click", pick);
    label.appendChild(input);

    const body = el(doc, "span", "option-body");
    const heading = el(doc, "span", "option-heading");
    heading.appendChild(el(doc, "span", "option-title", title));
    if (cosine !== null) {
      heading.appendChild(
        el(doc, "span", "similarity", `model similarity ${formatSimilarity(cosine)}`),
      );
    }
    body.appendChild(heading);
    if (description !== null) {
      body.appendChild(el(doc, "span", "option-description", description));
    }
    label.appendChild(body);
    options.appendChild(label);
  };

  for (const candidate of scenario.candidates) {
    addOption(candidate.course_id, candidate.title, candidate.description, candidate.cosine);
  }
  addOption(NONE_CHOICE, "No suitable match", null, null);
  panel.appendChild(options);

  const actions = el(doc, "div", "actions");
  const submit = el(
    doc,
    "button",
    "submit-button",
    flow.submitPhase === "inflight" ? "Submitting..." : "Submit decision",
  );
  submit.type = "button";
  submit.disabled = !flow.canSubmit();
  submit.addEventListener("click", () => handlers.onSubmit());
  actions.appendChild(submit);
  panel.appendChild(actions);

  if (flow.submitPhase === "error" && flow.errorMessage !== null) {
    panel.appendChild(el(doc, "p", "submit-error", flow.errorMessage));
  }
  return panel;
}

export function renderEmpty(doc: Document): HTMLElement {
  const panel = el(doc, "section", "all-done");
  panel.appendChild(el(doc, "h2", undefined, "All scenarios reviewed"));
  panel.appendChild(
    el(doc, "p", undefined, "There is nothing waiting for you. Thank you for reviewing."),
  );
  return panel;
}

export function renderLoading(doc: Document): HTMLElement {
  return el(doc, "p", "loading", "Loading scenarios...");
}

export interface BannerHandlers {
  onRetry(): void;
}

export function renderUnavailable(
  doc: Document,
  message: string,
  handlers: BannerHandlers,
): HTMLElement {
  const banner = el(doc, "div", "banner banner-error");
  banner.appendChild(el(doc, "p", "banner-message", `The review service is unavailable: ${message}`));
  const retry = el(doc, "button", "retry-button", "Retry");
  retry.type = "button";
  retry.addEventListener("click", () => handlers.onRetry());
  banner.appendChild(retry);
  return banner;
}

export function renderStatsPanel(
  doc: Document,
  stats: Stats | null,
  projection: Projection | null,
): HTMLElement {
  const panel = el(doc, "aside", "stats");
  panel.appendChild(el(doc, "h2", undefined, "Adoption so far"));

  if (stats === null) {
    panel.appendChild(el(doc, "p", "stats-unavailable", "Statistics are unavailable."));
    return panel;
  }
  if (stats.total_decisions === 0) {
    panel.appendChild(el(doc, "p", "stats-empty", "No decisions yet."));
    return panel;
  }

  const table = el(doc, "table", "stats-table");
  const head = el(doc, "tr");
  for (const column of ["role", "decided", "accepted", "rate"]) {
    head.appendChild(el(doc, "th", undefined, column));
  }
  table.appendChild(head);
  for (const role of ROLES) {
    const entry = stats.by_role[role];
    if (entry === undefined) {
      continue;
    }
    const row = el(doc, "tr");
    row.dataset.role = role;
    row.appendChild(el(doc, "td", "role-name", role));
    row.appendChild(el(doc, "td", "role-decided", String(entry.decided)));
    row.appendChild(el(doc, "td", "role-accepted", String(entry.accepted)));
    row.appendChild(
      el(doc, "td", "role-rate", entry.rate === null ? "-" : formatRate(entry.rate)),
    );
    table.appendChild(row);
  }
  panel.appendChild(table);

  if (stats.overall_rate !== null) {
    const overall = el(doc, "p", "overall", "Overall adoption ");
    overall.appendChild(el(doc, "strong", "overall-rate", formatRate(stats.overall_rate)));
    panel.appendChild(overall);
  }

  if (projection !== null) {
    const card = el(doc, "section", "projection");
    card.appendChild(el(doc, "h3", undefined, "Projected catalog growth"));
    const list = el(doc, "dl");
    const add = (term: string, className: string, value: string) => {
      list.appendChild(el(doc, "dt", undefined, term));
      list.appendChild(el(doc, "dd", className, value));
    };
    add("Candidate pairs", "proj-candidates", formatCount(projection.candidates));
    add(`Adoption rate (${projection.rate_source})`, "proj-rate", formatRate(projection.rate));
    add("Projected acceptances", "proj-accepted", formatCount(projection.expected_accepted));
    add("Growth over existing", "proj-fold", formatFold(projection.fold_increase));
    card.appendChild(list);
    panel.appendChild(card);
  }
  return panel;
}
