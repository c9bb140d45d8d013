import init, { lead_names, estimate_graph, augment_lead, robustness_curves } from "../pkg/leadaug_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function heatmap(canvas, values, names) {
  const ctx = canvas.getContext("2d");
  const n = names.length;
  const pad = 40;
  const cell = (canvas.width - pad) / n;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.font = "11px sans-serif";
  for (let i = 0; i < n; i++) {
    ctx.fillStyle = "#222";
    ctx.fillText(names[i], 2, pad + i * cell + cell * 0.6);
    ctx.fillText(names[i], pad + i * cell + 2, pad - 6);
    for (let j = 0; j < n; j++) {
      const v = values[i * n + j];
      const a = Math.min(1, Math.abs(v));
      ctx.fillStyle = v >= 0 ? `rgba(200,40,40,${a})` : `rgba(40,80,200,${a})`;
      ctx.fillRect(pad + j * cell, pad + i * cell, cell - 1, cell - 1);
    }
  }
}

function lines(canvas, series, colors, xs) {
  const ctx = canvas.getContext("2d");
  const pad = 30;
  const w = canvas.width - 2 * pad;
  const h = canvas.height - 2 * pad;
  const all = series.flat();
  let lo = Math.min(...all);
  let hi = Math.max(...all);
  if (hi === lo) { hi += 1; lo -= 1; }
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w, h);
  ctx.fillStyle = "#222";
  ctx.font = "11px sans-serif";
  ctx.fillText(hi.toFixed(2), 0, pad + 4);
  ctx.fillText(lo.toFixed(2), 0, pad + h);
  series.forEach((s, k) => {
    ctx.strokeStyle = colors[k];
    ctx.lineWidth = 2;
    ctx.beginPath();
    s.forEach((v, i) => {
      const x = pad + (xs ? (xs[i] - xs[0]) / (xs[xs.length - 1] - xs[0] || 1) : i / (s.length - 1)) * w;
      const y = pad + (1 - (v - lo) / (hi - lo)) * h;
      i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
    });
    ctx.stroke();
  });
  if (xs) {
    xs.forEach((x, i) => ctx.fillText(x.toString(), pad + (i / (xs.length - 1)) * w - 8, pad + h + 16));
  }
}

function runGraph(names) {
  const a = estimate_graph(num("g-records"), num("g-jitter"), num("g-seed"));
  heatmap($("g-canvas"), Array.from(a), names);
}

function runAugment() {
  const v = Array.from(augment_lead(num("a-lead"), num("a-p"), num("a-alpha"), num("a-gamma"),
    $("a-ops").value, num("a-nops"), num("a-seed")));
  const t = v.length / 2;
  lines($("a-canvas"), [v.slice(0, t), v.slice(t)], ["#aaa", "#1f5fbf"]);
}

function runRobustness() {
  $("r-status").textContent = "running...";
  setTimeout(() => {
    const v = Array.from(robustness_curves(num("r-records"), num("r-seed")));
    const k = v.length / 3;
    lines($("r-canvas"), [v.slice(k, 2 * k), v.slice(2 * k)], ["#aaa", "#1f5fbf"], v.slice(0, k));
    $("r-status").textContent = "";
  }, 10);
}

function guarded(f) {
  return () => {
    try { f(); } catch (e) { alert(e); }
  };
}

await init();
const names = lead_names().split(",");
names.forEach((n, i) => $("a-lead").add(new Option(n, i)));
$("g-run").onclick = guarded(() => runGraph(names));
$("a-run").onclick = guarded(runAugment);
$("r-run").onclick = guarded(runRobustness);
guarded(() => runGraph(names))();
guarded(runAugment)();
