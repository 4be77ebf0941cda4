/**
 * HTML rendering for the studio. Pure function of the SessionView so the
 * layout and the enabled/disabled logic are testable without a browser:
 * renderHTML returns the full markup string for the five panels.
 */

import { CommandType } from "./protocol.js";
import { SessionView } from "./state.js";

function esc(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function button(view: SessionView, cmd: CommandType, label: string): string {
  const dis = view.isEnabled(cmd) ? "" : " disabled";
  return `<button data-command="${cmd}"${dis}>${esc(label)}</button>`;
}

const GRADE_CAPTIONS: Record<string, string> = {
  noise: "Output is indistinguishable from random characters.",
  structured: "Shows word-like structure but little coherent text.",
  fluent: "Produces readable text in the style of the corpus.",
  memorized: "Mostly replays the corpus verbatim instead of generalizing.",
};

function dataPanel(view: SessionView): string {
  const rows = [...view.corpora.values()].map((c) => {
    const sel = c.id === view.selectedCorpus ? " class=\"selected\"" : "";
    const suff = c.sufficiency
      ? ` &mdash; ${c.sufficiency.tokens_per_parameter.toFixed(1)} tokens/param (${c.sufficiency.verdict})`
      : "";
    return `<li data-corpus="${esc(c.id)}"${sel}>${esc(c.name)}: ${c.token_count.toLocaleString()} tokens${suff}</li>`;
  });
  const badge = view.sufficiencyBadge();
  const warning =
    badge === "warning"
      ? `<p class="sufficiency-warning">This corpus is too small for the selected model; expect memorization.</p>`
      : badge === "caution"
        ? `<p class="sufficiency-caution">Corpus is on the small side for this model.</p>`
        : "";
  return `<section id="data-panel"><h2>Data</h2>
<ul id="corpus-list">${rows.join("")}</ul>
${warning}
${button(view, "ListCorpora", "Refresh")}
${button(view, "UploadCorpus", "Upload text file")}
${button(view, "SelectCorpus", "Use selected corpus")}
</section>`;
}

function modelPanel(view: SessionView): string {
  const presets = view.presets
    .map(
      (p) =>
        `<option value="${esc(p.name)}">${esc(p.name)} (${p.param_count.toLocaleString()} params)</option>`,
    )
    .join("");
  const current = view.modelConfig
    ? `<p id="model-summary">${view.paramCount?.toLocaleString()} parameters, step ${view.modelStep}</p>`
    : `<p id="model-summary">No model configured yet.</p>`;
  return `<section id="model-panel"><h2>Model</h2>
<select id="preset-select">${presets}</select>
${current}
${button(view, "ListPresets", "Load presets")}
${button(view, "ConfigureModel", "Build model")}
${button(view, "Import", "Load checkpoint")}
${button(view, "Export", "Save checkpoint")}
</section>`;
}

function trainingPanel(view: SessionView): string {
  const pts = view.lossSeries.points;
  const last = view.lossSeries.last;
  const status =
    view.phase === "training"
      ? `training, step ${last?.step ?? 0}, loss ${last ? last.loss.toFixed(4) : "-"}, ${view.tokensPerSec.toFixed(0)} tokens/sec`
      : view.phase === "paused"
        ? "paused"
        : "idle";
  const scale = view.logScale ? "log" : "linear";
  return `<section id="training-panel"><h2>Training</h2>
<p id="training-status">${esc(status)}</p>
<svg id="loss-chart" data-points="${pts.length}" data-scale="${scale}"></svg>
<label><input type="checkbox" id="log-scale"${view.logScale ? " checked" : ""}> log scale</label>
${button(view, "StartTraining", "Start training")}
${button(view, "Pause", "Pause")}
${button(view, "Resume", "Resume")}
</section>`;
}

function evalPanel(view: SessionView): string {
  const r = view.evalReport;
  const body = r
    ? `<dl id="eval-report">
<dt>Held-out loss</dt><dd>${r.holdout_loss.toFixed(4)} (perplexity ${r.holdout_perplexity.toFixed(1)})</dd>
<dt>Memorization</dt><dd>${(r.memorization_rate * 100).toFixed(1)}% of samples replay the corpus</dd>
<dt>Character validity</dt><dd>${(r.charset_validity * 100).toFixed(1)}% of output stays in the corpus alphabet</dd>
<dt>Grade</dt><dd class="grade-${esc(r.grade)}">${esc(r.grade)}: ${esc(GRADE_CAPTIONS[r.grade] ?? "")}</dd>
</dl>`
    : `<p>No evaluation yet.</p>`;
  return `<section id="eval-panel"><h2>Evaluation</h2>
${body}
${button(view, "Evaluate", "Evaluate on holdout")}
</section>`;
}

function generatorPanel(view: SessionView): string {
  const busy = view.generating ? " data-generating=\"true\"" : "";
  return `<section id="generator-panel"><h2>Generate</h2>
<input id="prompt-input" type="text" placeholder="Type a prompt...">
<pre id="transcript"${busy}>${esc(view.transcript)}</pre>
${button(view, "Generate", "Generate")}
</section>`;
}

export function renderHTML(view: SessionView): string {
  const banner = view.connected
    ? view.lastError
      ? `<div id="banner" class="error">${esc(view.lastError.code)}: ${esc(view.lastError.message)}</div>`
      : ""
    : `<div id="banner" class="disconnected">Engine disconnected. <button data-command="__reconnect__">Reconnect</button></div>`;
  return `<main data-phase="${view.phase}">
${banner}
${dataPanel(view)}
${modelPanel(view)}
${trainingPanel(view)}
${evalPanel(view)}
${generatorPanel(view)}
</main>`;
}
