import init, { select_demo, fdr_curve, region_score_field } from "./pkg/mccs_wasm.js";

const TARGETS = ["conjunctive", "disjunctive", "task1", "task2", "task3", "task4", "task5", "task6"];
const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function fillSelects() {
  for (const prefix of ["sel", "cur"]) {
    const s = $(`${prefix}-setting`);
    for (let i = 1; i <= 6; i++) s.add(new Option(`Setting ${i}`, i));
    const t = $(`${prefix}-target`);
    for (const name of TARGETS) t.add(new Option(name, name));
  }
  $("cur-target").value = "task5";
}

// Maps data coordinates to canvas pixels inside a margin.
function frame(canvas, xr, yr, pad = 40) {
  const w = canvas.width, h = canvas.height;
  return {
    x: (v) => pad + ((v - xr[0]) / (xr[1] - xr[0])) * (w - 2 * pad),
    y: (v) => h - pad - ((v - yr[0]) / (yr[1] - yr[0])) * (h - 2 * pad),
    pad, w, h, xr, yr,
  };
}

function axes(ctx, f, xlabel, ylabel, ticks = 5) {
  ctx.strokeStyle = "#888";
  ctx.fillStyle = "#444";
  ctx.font = "11px system-ui";
  ctx.beginPath();
  ctx.moveTo(f.pad, f.pad / 2);
  ctx.lineTo(f.pad, f.h - f.pad);
  ctx.lineTo(f.w - f.pad / 2, f.h - f.pad);
  ctx.stroke();
  for (let i = 0; i <= ticks; i++) {
    const xv = f.xr[0] + ((f.xr[1] - f.xr[0]) * i) / ticks;
    const yv = f.yr[0] + ((f.yr[1] - f.yr[0]) * i) / ticks;
    ctx.fillText(xv.toFixed(2), f.x(xv) - 12, f.h - f.pad + 14);
    ctx.fillText(yv.toFixed(2), 2, f.y(yv) + 4);
  }
  ctx.fillText(xlabel, f.w / 2, f.h - 6);
  ctx.save();
  ctx.translate(11, f.h / 2);
  ctx.rotate(-Math.PI / 2);
  ctx.fillText(ylabel, 0, 0);
  ctx.restore();
}

function showError(el, err) {
  el.innerHTML = `<span class="error">${String(err.message ?? err)}</span>`;
}

function runSelection() {
  const stats = $("sel-stats");
  let view;
  try {
    view = JSON.parse(select_demo(num("sel-setting"), $("sel-target").value, num("sel-q"), num("sel-n"), BigInt(num("sel-seed"))));
  } catch (e) {
    return showError(stats, e);
  }
  const canvas = $("sel-canvas");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const xs = view.points.map((p) => p.pred);
  const ys = view.points.map((p) => p.y);
  const span = (v) => {
    const lo = Math.min(...v), hi = Math.max(...v), m = 0.05 * (hi - lo || 1);
    return [lo - m, hi + m];
  };
  const f = frame(canvas, span(xs), span(ys));

  ctx.fillStyle = "rgba(27, 158, 119, 0.10)";
  for (const [lo, hi] of view.intervals) {
    const top = f.y(Math.min(hi ?? f.yr[1], f.yr[1]));
    const bottom = f.y(Math.max(lo ?? f.yr[0], f.yr[0]));
    if (bottom > top) ctx.fillRect(f.pad, top, f.w - 1.5 * f.pad, bottom - top);
  }
  axes(ctx, f, "prediction", "true response");
  for (const p of view.points) {
    ctx.fillStyle = !p.selected ? "#bbb" : p.inside ? "#1b9e77" : "#d95f02";
    ctx.beginPath();
    ctx.arc(f.x(p.pred), f.y(p.y), p.selected ? 4 : 3, 0, 2 * Math.PI);
    ctx.fill();
  }
  const inside = view.points.filter((p) => p.inside).length;
  stats.textContent =
    `test samples ${view.points.length}, in target ${inside}, selected ${view.num_selected}\n` +
    `false discovery proportion ${view.fdp.toFixed(3)}, power ${view.power.toFixed(3)}`;
}

function runCurve() {
  const stats = $("cur-stats");
  stats.textContent = "running...";
  // let the status paint before the synchronous wasm call
  setTimeout(() => {
    let rows;
    try {
      rows = JSON.parse(fdr_curve(num("cur-setting"), $("cur-target").value, num("cur-n"), num("cur-reps"), BigInt(num("cur-seed"))));
    } catch (e) {
      return showError(stats, e);
    }
    const canvas = $("cur-canvas");
    const ctx = canvas.getContext("2d");
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const f = frame(canvas, [0, 0.5], [0, 1]);
    axes(ctx, f, "q", "rate");

    ctx.strokeStyle = "#999";
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    ctx.moveTo(f.x(0), f.y(0));
    ctx.lineTo(f.x(0.5), f.y(0.5));
    ctx.stroke();
    ctx.setLineDash([]);

    const line = (key, color) => {
      ctx.strokeStyle = color;
      ctx.lineWidth = 2;
      ctx.beginPath();
      rows.forEach((r, i) => (i ? ctx.lineTo : ctx.moveTo).call(ctx, f.x(r.q), f.y(r[key])));
      ctx.stroke();
      ctx.lineWidth = 1;
    };
    ctx.strokeStyle = "#d95f02";
    for (const r of rows) {
      ctx.beginPath();
      ctx.moveTo(f.x(r.q), f.y(Math.max(0, r.fdr_estimate - 2 * r.se)));
      ctx.lineTo(f.x(r.q), f.y(r.fdr_estimate + 2 * r.se));
      ctx.stroke();
    }
    line("fdr_estimate", "#d95f02");
    line("power_estimate", "#7570b3");
    stats.textContent = rows
      .map((r) => `q=${r.q.toFixed(2)}  fdr ${r.fdr_estimate.toFixed(3)} ± ${r.se.toFixed(3)}  power ${r.power_estimate.toFixed(3)}`)
      .join("\n");
  }, 10);
}

// Diverging ramp: blue below zero, white at zero, red above.
function color(v, lo, hi) {
  const t = v < 0 ? -v / (-lo || 1) : v / (hi || 1);
  const c = Math.round(255 * (1 - Math.min(1, t)));
  return v < 0 ? [c, c, 255] : [255, c, c];
}

function runField() {
  const stats = $("fld-stats");
  let field;
  try {
    field = JSON.parse(region_score_field(num("fld-balls"), num("fld-radius"), 160, $("fld-rule").value, BigInt(num("fld-seed"))));
  } catch (e) {
    return showError(stats, e);
  }
  const canvas = $("fld-canvas");
  const ctx = canvas.getContext("2d");
  const n = field.resolution;
  const lo = Math.min(...field.scores), hi = Math.max(...field.scores);
  const img = ctx.createImageData(n, n);
  field.scores.forEach((s, i) => {
    const [r, g, b] = color(s, lo, hi);
    img.data.set([r, g, b, 255], 4 * i);
  });
  const off = new OffscreenCanvas(n, n);
  off.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);

  const [x0, x1, y0, y1] = field.bounds;
  const sx = canvas.width / (x1 - x0), sy = canvas.height / (y1 - y0);
  ctx.strokeStyle = "#222";
  field.centers.forEach((c, i) => {
    ctx.beginPath();
    ctx.ellipse((c[0] - x0) * sx, (y1 - c[1]) * sy, field.radii[i] * sx, field.radii[i] * sy, 0, 0, 2 * Math.PI);
    ctx.stroke();
  });
  stats.textContent =
    `Test score of a 2-D prediction, minimised over balls (range ${lo.toFixed(2)} to ${hi.toFixed(2)}). ` +
    `Blue is negative. Lower scores give smaller p-values.`;
}

await init();
fillSelects();
$("sel-q").addEventListener("input", (e) => ($("sel-q-out").value = Number(e.target.value).toFixed(2)));
$("sel-q").addEventListener("change", runSelection);
$("sel-run").addEventListener("click", runSelection);
$("cur-run").addEventListener("click", runCurve);
$("fld-run").addEventListener("click", runField);
runSelection();
runField();
