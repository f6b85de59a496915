import init, { composeAndRun, distance, noiseSweep } from "./pkg/qsched_wasm.js";

const $ = (id) => document.getElementById(id);

const SAMPLE = `OPENQASM 2.0;
include "qelib1.inc";
qreg q[2];
creg c[2];
h q[0];
cx q[0],q[1];
measure q -> c;
---
{"cols":[["H"],["•","X"],[1,"•","X"]]}
---
OPENQASM 2.0;
qreg q[4];
creg c[4];
x q[0];
x q[1];
ccx q[0],q[1],q[3];
measure q -> c;
---
OPENQASM 2.0;
qreg q[2];
creg c[2];
h q;
cz q[0],q[1];
h q;
measure q -> c;`;

function el(tag, attrs = {}, ...children) {
  const e = document.createElement(tag);
  Object.assign(e, attrs);
  for (const c of children) e.append(c);
  return e;
}

function showError(target, err) {
  target.replaceChildren(el("p", { className: "error", textContent: String(err.message ?? err) }));
}

// Horizontal bars, one per key; `series` is a list of {name, counts, alt}.
function histogram(series) {
  const keys = [...new Set(series.flatMap((s) => Object.keys(s.counts)))].sort();
  const totals = series.map((s) => Object.values(s.counts).reduce((a, b) => a + b, 0) || 1);
  const box = el("div", { className: "hist" });
  for (const k of keys) {
    for (const [i, s] of series.entries()) {
      const frac = (s.counts[k] ?? 0) / totals[i];
      const fill = el("div", { className: s.alt ? "fill alt" : "fill" });
      fill.style.width = `${Math.round(frac * 300)}px`;
      box.append(el("div", { className: "bar" },
        el("span", { textContent: i === 0 ? k : " ".repeat(k.length) }), fill,
        el("span", { textContent: `${(frac * 100).toFixed(1)}% ${s.name}` })));
    }
  }
  return box;
}

function parseSources(text) {
  return text.split(/^---\s*$/m).map((s) => s.trim()).filter(Boolean).map((source, i) => {
    const quirk = source.startsWith("{") || source.startsWith("http");
    return { name: `c${i + 1}`, format: quirk ? "quirk" : "qasm", source };
  });
}

function runPack() {
  const out = $("pack-out");
  try {
    const req = {
      circuits: parseSources($("pack-src").value),
      capacity: Number($("pack-cap").value),
      shots: Number($("pack-shots").value),
      seed: Number($("pack-seed").value),
    };
    const res = JSON.parse(composeAndRun(JSON.stringify(req)));
    const nodes = [];
    res.batches.forEach((b, i) => {
      nodes.push(el("h3", { textContent: `Batch ${i + 1}: ${b.width} qubits` +
        (b.skipped.length ? ` (left for later: ${b.skipped.join(", ")})` : "") }));
      const layout = el("div", { className: "layout" });
      for (const p of b.placements) {
        const cell = el("span", { textContent: `${p.name} q${p.qubit_offset}–${p.qubit_offset + p.qubit_count - 1}` });
        cell.style.flex = String(p.qubit_count);
        layout.append(cell);
      }
      nodes.push(layout, el("details", {}, el("summary", { textContent: "composed circuit" }),
        el("pre", { textContent: b.qasm })));
    });
    const table = el("table", {}, el("tr", {},
      ...["circuit", "width", "batch", "hellinger", "wasserstein"].map((h) => el("th", { textContent: h }))));
    for (const j of res.jobs) {
      table.append(el("tr", {}, ...[j.name, j.width, j.batch + 1, j.hellinger.toFixed(4), j.wasserstein.toFixed(4)]
        .map((v) => el("td", { textContent: String(v) }))));
    }
    nodes.push(el("h3", { textContent: "Packed versus alone" }), table);
    for (const j of res.jobs) {
      nodes.push(el("h4", { textContent: j.name }), histogram([
        { name: "alone", counts: j.individual },
        { name: "packed", counts: j.scheduled, alt: true },
      ]));
    }
    out.replaceChildren(...nodes);
  } catch (e) {
    showError(out, e);
  }
}

function runDistance() {
  const out = $("dist-out");
  try {
    const res = JSON.parse(distance($("dist-p").value, $("dist-q").value));
    out.replaceChildren(
      el("p", { textContent: `Hellinger ${res.hellinger.toFixed(6)}   Wasserstein (normalised) ${res.wasserstein.toFixed(6)}` }),
      histogram([
        { name: "P", counts: JSON.parse($("dist-p").value) },
        { name: "Q", counts: JSON.parse($("dist-q").value), alt: true },
      ]));
  } catch (e) {
    showError(out, e);
  }
}

function runNoise() {
  const out = $("noise-out");
  try {
    const source = $("noise-src").value.trim();
    const req = {
      format: source.startsWith("{") || source.startsWith("http") ? "quirk" : "qasm",
      source,
      depolarizing: $("noise-ps").value.split(",").map((s) => Number(s.trim())),
      readout: Number($("noise-ro").value),
      shots: Number($("noise-shots").value),
      seed: 1,
    };
    const res = JSON.parse(noiseSweep(JSON.stringify(req)));
    const table = el("table", {}, el("tr", {},
      ...["p", "hellinger", "wasserstein", "most frequent"].map((h) => el("th", { textContent: h }))));
    for (const r of res.rows) {
      table.append(el("tr", {}, ...[r.depolarizing, r.hellinger.toFixed(4), r.wasserstein.toFixed(4), r.most_frequent]
        .map((v) => el("td", { textContent: String(v) }))));
    }
    const last = res.rows[res.rows.length - 1];
    out.replaceChildren(table, el("h4", { textContent: `ideal versus p = ${last.depolarizing}` }),
      histogram([{ name: "ideal", counts: res.ideal }, { name: "noisy", counts: last.counts, alt: true }]));
  } catch (e) {
    showError(out, e);
  }
}

await init();
$("pack-src").value = SAMPLE;
$("pack-run").addEventListener("click", runPack);
$("dist-run").addEventListener("click", runDistance);
$("noise-run").addEventListener("click", runNoise);
runPack();
runDistance();
