import init, { ratio_spectrum, saturation_curve, airy, calibrated_defaults } from "./pkg/xenon_cavity_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

// Draws interleaved (x, y) pairs as a polyline with simple axes.
function plot(canvas, pairs, { logX = false, xLabel = "", yLabel = "" } = {}) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, m = 48;
  ctx.clearRect(0, 0, w, h);
  const xs = [], ys = [];
  for (let i = 0; i < pairs.length; i += 2) {
    xs.push(logX ? Math.log10(pairs[i]) : pairs[i]);
    ys.push(pairs[i + 1]);
  }
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(0, ...ys), Math.max(...ys) * 1.05 || 1];
  const px = (x) => m + (x - x0) / (x1 - x0 || 1) * (w - 2 * m);
  const py = (y) => h - m + (y0 - y) / (y1 - y0 || 1) * (h - 2 * m);

  ctx.strokeStyle = "#888";
  ctx.strokeRect(m, m, w - 2 * m, h - 2 * m);
  ctx.fillStyle = "#444";
  ctx.font = "12px system-ui";
  const fmt = (v) => Math.abs(v) >= 1e4 || (Math.abs(v) < 1e-2 && v !== 0) ? v.toExponential(2) : v.toPrecision(4);
  for (let k = 0; k <= 4; k++) {
    const xv = x0 + (x1 - x0) * k / 4, yv = y0 + (y1 - y0) * k / 4;
    ctx.fillText(fmt(logX ? 10 ** xv : xv), px(xv) - 20, h - m + 16);
    ctx.fillText(fmt(yv), 4, py(yv) + 4);
  }
  ctx.fillText(xLabel, w / 2 - 40, h - 8);
  ctx.fillText(yLabel, m, m - 8);

  ctx.strokeStyle = "#1565c0";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(px(x), py(ys[i])) : ctx.moveTo(px(x), py(ys[i]))));
  ctx.stroke();
}

// Runs `compute` after the status text has had a chance to paint.
function run(statusId, compute) {
  const status = $(statusId);
  status.className = "";
  status.textContent = "computing…";
  setTimeout(() => {
    const t0 = performance.now();
    try {
      compute();
      status.textContent = `${((performance.now() - t0) / 1000).toFixed(2)} s`;
    } catch (e) {
      status.className = "err";
      status.textContent = e.message ?? String(e);
    }
  }, 10);
}

function spectrum() {
  run("spectrum-status", () => {
    const v = ratio_spectrum(num("density"), num("natural"), num("power"), num("start"), num("stop"), num("step"));
    plot($("spectrum"), v, { xLabel: "cavity resonance (THz)", yLabel: "transmission ratio" });
  });
}

function saturation() {
  run("saturation-status", () => {
    const v = saturation_curve(num("density"), num("natural"), num("sat-freq"), num("pmin"), num("pmax"), 60);
    plot($("saturation"), v, { logX: true, xLabel: "probe power (nW)", yLabel: "transmission ratio" });
  });
}

function cavity() {
  run("airy-status", () => {
    const v = airy(num("mt"), num("ml"), num("od"), num("span"), 400);
    plot($("airy"), v, { xLabel: "detuning (MHz)", yLabel: "output / input" });
  });
}

await init();
const [density, natural] = calibrated_defaults();
$("density").value = density;
$("natural").value = natural;
$("run-spectrum").addEventListener("click", spectrum);
$("run-saturation").addEventListener("click", saturation);
for (const id of ["mt", "ml", "od", "span"]) $(id).addEventListener("input", cavity);
cavity();
spectrum();
