import init, { ring_scene, detection_run, score_fit_1d } from "./pkg/scorewatch_demo.js";

const COLORS = {
  pre: "#3b82f6",
  post: "#ef4444",
  field: "#94a3b8",
  exact: "#16a34a",
  gauss: "#f59e0b",
  learned: "#16a34a",
  perturbed: "#9333ea",
  truth: "#cbd5e1",
  density: "#fde68a",
};

function clearCanvas(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  return ctx;
}

// Maps data coordinates to pixels with a fixed margin.
function makeScale(canvas, x0, x1, y0, y1, margin = 40) {
  const w = canvas.width - 2 * margin;
  const h = canvas.height - 2 * margin;
  return {
    x: (v) => margin + ((v - x0) / (x1 - x0)) * w,
    y: (v) => canvas.height - margin - ((v - y0) / (y1 - y0)) * h,
  };
}

function drawAxes(ctx, canvas, scale, x0, x1, y0, y1, xticks, yticks) {
  ctx.strokeStyle = "#d7dde3";
  ctx.fillStyle = "#67788a";
  ctx.font = "11px system-ui";
  ctx.lineWidth = 1;
  ctx.beginPath();
  for (const t of xticks) {
    ctx.moveTo(scale.x(t), scale.y(y0));
    ctx.lineTo(scale.x(t), scale.y(y1));
    ctx.fillText(String(Math.round(t * 100) / 100), scale.x(t) + 2, scale.y(y0) + 14);
  }
  for (const t of yticks) {
    ctx.moveTo(scale.x(x0), scale.y(t));
    ctx.lineTo(scale.x(x1), scale.y(t));
    ctx.fillText(String(Math.round(t * 100) / 100), scale.x(x0) - 32, scale.y(t) + 4);
  }
  ctx.stroke();
}

function ticks(lo, hi, n = 6) {
  const out = [];
  for (let i = 0; i <= n; i++) out.push(lo + ((hi - lo) * i) / n);
  return out;
}

function polyline(ctx, scale, xs, ys, color, width = 2, dash = []) {
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.setLineDash(dash);
  ctx.beginPath();
  for (let i = 0; i < xs.length; i++) {
    const px = scale.x(xs[i]);
    const py = scale.y(ys[i]);
    if (i === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  }
  ctx.stroke();
  ctx.setLineDash([]);
}

// --- Panel 1: ring scene -----------------------------------------------

function drawScene(data, which) {
  const canvas = document.getElementById("scene-canvas");
  const ctx = clearCanvas(canvas);
  const f = data.field;
  const scale = makeScale(canvas, f.x0, f.x1, f.y0, f.y1, 34);
  drawAxes(ctx, canvas, scale, f.x0, f.x1, f.y0, f.y1, ticks(f.x0, f.x1), ticks(f.y0, f.y1));

  if (which !== "none") {
    const u = which === "pre" ? f.pre_u : f.post_u;
    const v = which === "pre" ? f.pre_v : f.post_v;
    ctx.strokeStyle = COLORS.field;
    ctx.fillStyle = COLORS.field;
    ctx.lineWidth = 1;
    const unit = (f.x1 - f.x0) / f.nx;
    for (let iy = 0; iy < f.ny; iy++) {
      for (let ix = 0; ix < f.nx; ix++) {
        const x = f.x0 + ((f.x1 - f.x0) * ix) / (f.nx - 1);
        const y = f.y0 + ((f.y1 - f.y0) * iy) / (f.ny - 1);
        const k = iy * f.nx + ix;
        const norm = Math.hypot(u[k], v[k]);
        if (norm < 1e-9) continue;
        // Arrow length saturates so dense regions stay readable.
        const len = unit * Math.min(1.0, norm / 4);
        const dx = (u[k] / norm) * len;
        const dy = (v[k] / norm) * len;
        const px = scale.x(x), py = scale.y(y);
        const qx = scale.x(x + dx), qy = scale.y(y + dy);
        ctx.beginPath();
        ctx.moveTo(px, py);
        ctx.lineTo(qx, qy);
        ctx.stroke();
        const angle = Math.atan2(qy - py, qx - px);
        ctx.beginPath();
        ctx.moveTo(qx, qy);
        ctx.lineTo(qx - 4 * Math.cos(angle - 0.4), qy - 4 * Math.sin(angle - 0.4));
        ctx.lineTo(qx - 4 * Math.cos(angle + 0.4), qy - 4 * Math.sin(angle + 0.4));
        ctx.fill();
      }
    }
  }

  const dot = (points, color) => {
    ctx.fillStyle = color;
    for (const [x, y] of points) {
      ctx.beginPath();
      ctx.arc(scale.x(x), scale.y(y), 2.2, 0, 2 * Math.PI);
      ctx.fill();
    }
  };
  dot(data.pre_points, COLORS.pre);
  dot(data.post_points, COLORS.post);
}

async function runScene() {
  const btn = document.getElementById("scene-run");
  btn.disabled = true;
  try {
    const seed = BigInt(document.getElementById("scene-seed").value || "0");
    const n = Number(document.getElementById("scene-n").value || "400");
    const which = document.getElementById("scene-field").value;
    const data = ring_scene(seed, n, 28);
    drawScene(data, which);
  } finally {
    btn.disabled = false;
  }
}

// --- Panel 2: detection run ---------------------------------------------

function drawDetection(data) {
  const canvas = document.getElementById("det-canvas");
  const ctx = clearCanvas(canvas);
  const n = data.methods[0].statistic.length;
  let hi = 1;
  for (const m of data.methods) {
    for (const s of m.statistic) hi = Math.max(hi, s);
    hi = Math.max(hi, m.tau);
  }
  let lo = 0;
  for (const m of data.methods) for (const s of m.statistic) lo = Math.min(lo, s);
  const scale = makeScale(canvas, 1, n, lo, hi * 1.05, 40);
  drawAxes(ctx, canvas, scale, 1, n, lo, hi * 1.05, ticks(1, n), ticks(lo, hi * 1.05, 5));

  // Change-point marker.
  ctx.strokeStyle = "#64748b";
  ctx.setLineDash([2, 3]);
  ctx.beginPath();
  ctx.moveTo(scale.x(data.change_point), scale.y(lo));
  ctx.lineTo(scale.x(data.change_point), scale.y(hi * 1.05));
  ctx.stroke();
  ctx.setLineDash([]);
  ctx.fillStyle = "#64748b";
  ctx.fillText("ν", scale.x(data.change_point) + 4, scale.y(hi * 1.05) + 12);

  const palette = [COLORS.exact, COLORS.gauss];
  const legend = [];
  data.methods.forEach((m, i) => {
    const xs = Array.from({ length: n }, (_, k) => k + 1);
    polyline(ctx, scale, xs, m.statistic, palette[i], 2);
    polyline(ctx, scale, [1, n], [m.tau, m.tau], palette[i], 1, [6, 4]);
    if (m.alarm_at !== null && m.alarm_at !== undefined) {
      ctx.fillStyle = palette[i];
      ctx.beginPath();
      ctx.arc(scale.x(m.alarm_at), scale.y(m.statistic[m.alarm_at - 1]), 5, 0, 2 * Math.PI);
      ctx.fill();
    }
    const alarmText =
      m.alarm_at !== null && m.alarm_at !== undefined
        ? `alarm at t = ${m.alarm_at} (delay ${Math.max(0, m.alarm_at - data.change_point + 1)})`
        : "no alarm";
    legend.push(
      `<span class="swatch" style="background:${palette[i]}"></span>${m.name}: τ = ${m.tau.toFixed(2)}, ${alarmText}`
    );
  });
  document.getElementById("det-legend").innerHTML = legend.join("&ensp;&ensp;");
}

async function runDetection() {
  const btn = document.getElementById("det-run");
  btn.disabled = true;
  try {
    await new Promise((r) => setTimeout(r, 10));
    const seed = BigInt(document.getElementById("det-seed").value || "0");
    const nu = Number(document.getElementById("det-nu").value || "150");
    const steps = Number(document.getElementById("det-steps").value || "300");
    const gamma = Number(document.getElementById("det-gamma").value || "2000");
    drawDetection(detection_run(seed, nu, steps, gamma));
  } finally {
    btn.disabled = false;
  }
}

// --- Panel 3: score fit ---------------------------------------------------

function drawFit(data) {
  const canvas = document.getElementById("fit-canvas");
  const ctx = clearCanvas(canvas);
  const x0 = data.xs[0];
  const x1 = data.xs[data.xs.length - 1];
  let lo = Infinity, hi = -Infinity;
  for (const arr of [data.learned, data.perturbed_true, data.true_score]) {
    for (const v of arr) {
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
  }
  lo = Math.max(lo, -8);
  hi = Math.min(hi, 8);
  const scale = makeScale(canvas, x0, x1, lo, hi, 40);
  // Density shading behind everything.
  const dmax = Math.max(...data.density);
  ctx.fillStyle = COLORS.density;
  for (let i = 0; i + 1 < data.xs.length; i++) {
    const h = (data.density[i] / dmax) * (canvas.height - 80);
    const px = scale.x(data.xs[i]);
    const pw = scale.x(data.xs[i + 1]) - px;
    ctx.globalAlpha = 0.55;
    ctx.fillRect(px, canvas.height - 40 - h, pw + 0.5, h);
    ctx.globalAlpha = 1;
  }
  drawAxes(ctx, canvas, scale, x0, x1, lo, hi, ticks(x0, x1), ticks(lo, hi, 5));
  polyline(ctx, scale, data.xs, data.true_score, COLORS.truth, 2);
  polyline(ctx, scale, data.xs, data.perturbed_true, COLORS.perturbed, 2, [6, 4]);
  polyline(ctx, scale, data.xs, data.learned, COLORS.learned, 2.5);
}

async function runFit() {
  const btn = document.getElementById("fit-run");
  btn.disabled = true;
  try {
    await new Promise((r) => setTimeout(r, 10));
    const sigma = Number(document.getElementById("fit-sigma").value);
    const epochs = Number(document.getElementById("fit-epochs").value || "600");
    const hidden = Number(document.getElementById("fit-hidden").value || "64");
    const nTrain = Number(document.getElementById("fit-n").value || "500");
    const seed = BigInt(document.getElementById("fit-seed").value || "0");
    drawFit(score_fit_1d(sigma, epochs, hidden, nTrain, seed));
  } finally {
    btn.disabled = false;
  }
}

async function main() {
  await init();
  document.getElementById("scene-run").addEventListener("click", runScene);
  document.getElementById("det-run").addEventListener("click", runDetection);
  document.getElementById("fit-run").addEventListener("click", runFit);
  const sigmaSlider = document.getElementById("fit-sigma");
  sigmaSlider.addEventListener("input", () => {
    document.getElementById("fit-sigma-label").textContent =
      Number(sigmaSlider.value).toFixed(2);
  });
  await runScene();
  await runDetection();
  await runFit();
}

main();
