import init, { presets, resolvent_scan, energy_decay, certificates } from "./pkg/dampwave_web.js";

const $ = (id) => document.getElementById(id);
const COLORS = ["#1f5fa8", "#c0392b", "#2e8b57"];

// series: [{x, y, label, dots}]
function plot(canvas, series, { logX = false, logY = false, xlabel = "", ylabel = "" } = {}) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, pad = 56;
  ctx.clearRect(0, 0, W, H);
  const tx = (v) => (logX ? Math.log10(v) : v);
  const ty = (v) => (logY ? Math.log10(v) : v);
  const pts = series.map((s) =>
    s.x.map((x, i) => [tx(x), ty(s.y[i])]).filter(([a, b]) => Number.isFinite(a) && Number.isFinite(b)));
  const all = pts.flat();
  if (!all.length) return;
  let [x0, x1] = [Math.min(...all.map((p) => p[0])), Math.max(...all.map((p) => p[0]))];
  let [y0, y1] = [Math.min(...all.map((p) => p[1])), Math.max(...all.map((p) => p[1]))];
  if (x0 === x1) { x0 -= 0.5; x1 += 0.5; }
  if (y0 === y1) { y0 -= 0.5; y1 += 0.5; }
  const px = (v) => pad + ((v - x0) / (x1 - x0)) * (W - 1.5 * pad);
  const py = (v) => H - pad + 10 - ((v - y0) / (y1 - y0)) * (H - 1.6 * pad);

  ctx.strokeStyle = "#000";
  ctx.beginPath();
  ctx.moveTo(pad, 10); ctx.lineTo(pad, H - pad + 10); ctx.lineTo(W - pad / 2, H - pad + 10);
  ctx.stroke();
  ctx.fillStyle = "#000";
  ctx.font = "11px sans-serif";
  const fmt = (v, log) => (log ? `1e${v.toFixed(1)}` : v.toPrecision(3));
  ctx.fillText(fmt(x0, logX), pad, H - pad + 24);
  ctx.fillText(fmt(x1, logX), W - pad, H - pad + 24);
  ctx.fillText(fmt(y1, logY), 4, 16);
  ctx.fillText(fmt(y0, logY), 4, H - pad + 10);
  ctx.font = "13px sans-serif";
  ctx.fillText(xlabel, W / 2, H - 8);
  ctx.save(); ctx.translate(14, H / 2); ctx.rotate(-Math.PI / 2); ctx.fillText(ylabel, 0, 0); ctx.restore();

  series.forEach((s, n) => {
    ctx.strokeStyle = ctx.fillStyle = COLORS[n % COLORS.length];
    if (s.dots) {
      for (const [a, b] of pts[n]) { ctx.beginPath(); ctx.arc(px(a), py(b), 2.5, 0, 2 * Math.PI); ctx.fill(); }
    } else {
      ctx.beginPath();
      pts[n].forEach(([a, b], i) => (i ? ctx.lineTo(px(a), py(b)) : ctx.moveTo(px(a), py(b))));
      ctx.stroke();
    }
    ctx.fillText(s.label, W - 220, 24 + 16 * n);
  });
}

function model() {
  const s = $("s").value.trim();
  return { preset: $("preset").value, k: Number($("k").value), s: s === "" ? NaN : Number(s) };
}

function guarded(out, f) {
  out.classList.remove("err");
  out.textContent = "running...";
  setTimeout(() => {
    try {
      f();
    } catch (e) {
      out.classList.add("err");
      out.textContent = String(e.message ?? e);
    }
  }, 10);
}

const num = (v, d = 4) => (v === null || v === undefined ? "n/a" : Number(v).toFixed(d));

function runScan() {
  const out = $("scan-out");
  guarded(out, () => {
    const m = model();
    const r = JSON.parse(resolvent_scan(m.preset, m.k, m.s, Number($("perdec").value)));
    plot($("scan-plot"), [
      { x: r.lambda, y: r.u, label: "U(λ)" },
      { x: r.peak_lambda, y: r.peak_u, label: "U at eigenfrequencies", dots: true },
      { x: r.lambda, y: r.predicted, label: "max(1/m(λ), 1)" },
    ], { logX: true, logY: true, xlabel: "λ", ylabel: "U" });
    out.textContent = `guard ${num(r.guard, 2)}   peak slope ${num(r.alpha)}   predicted ${r.predicted_exponent ?? "unbounded"}`;
  });
}

function runDecay() {
  const out = $("decay-out");
  guarded(out, () => {
    const m = model();
    const r = JSON.parse(energy_decay(m.preset, m.k, m.s, Number($("tend").value), Number($("dt").value),
      Number($("seed").value), $("smoothed").checked));
    plot($("decay-plot"), [{ x: r.t, y: r.norm, label: "‖z(t)‖" }], { logY: true, xlabel: "t", ylabel: "‖z‖" });
    const fit = r.smoothed ? `β ${num(r.beta)}` : `energy rate ${num(r.rate)}`;
    out.textContent = `${fit} on [${num(r.window[0], 2)}, ${num(r.window[1], 2)}]${r.fit_error ? "   " + r.fit_error : ""}`;
  });
}

function runCert() {
  const out = $("cert-out");
  guarded(out, () => {
    const m = model();
    const r = JSON.parse(certificates(m.preset, m.k, m.s, Number($("jmin").value), Number($("jmax").value)));
    const inv = (h) => h.map((x) => 1 / x);
    const keep = (c) => ({ x: inv(c.h).filter((_, i) => c.ratio[i] !== null), y: c.ratio.filter((v) => v !== null) });
    const series = [];
    const lines = [];
    if (r.ellipticity) {
      series.push({ ...keep(r.ellipticity), label: "ellipticity μ(h)/m(1/h)", dots: true });
      lines.push(`ellipticity ${r.ellipticity.pass ? "PASS" : "FAIL"}  c ${num(r.ellipticity.c)}  drift ${num(r.ellipticity.worst_drift, 3)}  m ${r.ellipticity.m}`);
    }
    series.push({ ...keep(r.boundedness), label: "boundedness ν(h)/m(1/h)", dots: true });
    lines.push(`boundedness ${r.boundedness.pass ? "PASS" : "FAIL"}  C ${num(r.boundedness.big_c)}  drift ${num(r.boundedness.worst_drift, 3)}  m ${r.boundedness.m}`);
    plot($("cert-plot"), series, { logX: true, logY: true, xlabel: "1/h", ylabel: "ratio" });
    out.textContent = lines.join("\n") + "\nrows whose window exceeds K are omitted";
  });
}

await init();
const table = JSON.parse(presets());
for (const p of table) {
  const o = document.createElement("option");
  o.value = o.textContent = p.name;
  $("preset").appendChild(o);
}
const describe = () => {
  const p = table.find((x) => x.name === $("preset").value);
  $("about").textContent = `${p.description}. ${p.parameters}. Resolvent ${p.predicted_resolvent}; decay ${p.predicted_rate}.`;
  $("k").value = p.name === "pdo-anisotropic" ? 8 : p.name.startsWith("water") ? 512 : 128;
};
$("preset").addEventListener("change", describe);
describe();
$("run-scan").addEventListener("click", runScan);
$("run-decay").addEventListener("click", runDecay);
$("run-cert").addEventListener("click", runCert);
