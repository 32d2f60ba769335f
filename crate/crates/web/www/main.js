import init, { pv_curve, wind_curve, dispatch, load_range } from "./pkg/pidispatch_web.js";

const UNITS = ["CHP", "NG", "DS", "Wind", "PV"];
const COLORS = ["#8c564b", "#1f77b4", "#7f7f7f", "#2ca02c", "#ff7f0e"];
const $ = (id) => document.getElementById(id);

function linePlot(canvas, xs, ys, xLabel, yLabel) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 36;
  const xMax = xs[xs.length - 1];
  const yMax = Math.max(...ys, 1e-9) * 1.1;
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, 8, w - pad - 8, h - pad - 8);
  ctx.fillStyle = "#444";
  ctx.font = "12px system-ui";
  ctx.fillText(xLabel, w / 2 - 30, h - 8);
  ctx.fillText(`${yMax.toFixed(0)} ${yLabel}`, 2, 18);
  ctx.fillText(`${xMax}`, w - 30, h - pad + 14);
  ctx.beginPath();
  ctx.strokeStyle = "#1f77b4";
  ctx.lineWidth = 2;
  xs.forEach((x, i) => {
    const px = pad + (x / xMax) * (w - pad - 8);
    const py = 8 + (1 - ys[i] / yMax) * (h - pad - 16);
    i === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
  });
  ctx.stroke();
}

function barPlot(canvas, values) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const yMax = Math.max(...values, 1) * 1.1;
  const bw = (w - 40) / values.length;
  ctx.clearRect(0, 0, w, h);
  ctx.font = "12px system-ui";
  values.forEach((v, i) => {
    const bh = (v / yMax) * (h - 40);
    ctx.fillStyle = COLORS[i];
    ctx.fillRect(20 + i * bw + 6, h - 24 - bh, bw - 12, bh);
    ctx.fillStyle = "#333";
    ctx.fillText(UNITS[i], 20 + i * bw + 10, h - 8);
  });
}

function drawPv() {
  const temp = Number($("temp").value);
  $("temp-out").value = temp;
  const n = 61;
  const xs = Array.from({ length: n }, (_, k) => (k * 1200) / (n - 1));
  linePlot($("pv-plot"), xs, Array.from(pv_curve(temp, 1200, n)), "irradiance (W/m²)", "kW");
}

function drawWind() {
  const n = 121;
  const xs = Array.from({ length: n }, (_, k) => (k * 30) / (n - 1));
  linePlot($("wind-plot"), xs, Array.from(wind_curve(30, n)), "wind speed (m/s)", "kW");
}

function redispatch() {
  const pv = Number($("pv").value);
  const wind = Number($("wind").value);
  const [lo, hi] = load_range(pv, wind);
  const slider = $("load");
  slider.min = Math.ceil(lo * 2) / 2;
  slider.max = Math.floor(hi * 2) / 2;
  const load = Number(slider.value);
  $("pv-out").value = pv;
  $("wind-out").value = wind;
  $("load-out").value = load;
  $("range-note").textContent = `Servable load at this availability: ${lo.toFixed(1)} to ${hi.toFixed(1)} kW.`;
  const summary = $("summary");
  try {
    const out = Array.from(dispatch(load, pv, wind));
    const setpoints = out.slice(0, 5);
    barPlot($("dispatch-plot"), setpoints);
    $("dispatch-table").innerHTML = setpoints
      .map((p, i) => `<tr><td>${UNITS[i]}</td><td>${p.toFixed(3)}</td></tr>`)
      .join("");
    summary.className = "";
    summary.textContent = `Cost ${out[5].toFixed(4)} per step, marginal price ${out[6].toFixed(4)} per kW.`;
  } catch (err) {
    summary.className = "error";
    summary.textContent = String(err.message ?? err);
  }
}

await init();
$("temp").addEventListener("input", drawPv);
for (const id of ["pv", "wind", "load"]) $(id).addEventListener("input", redispatch);
drawPv();
drawWind();
redispatch();
