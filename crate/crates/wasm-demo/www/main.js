import init, { geodesic_path, regression_demo, null_histogram } from "./pkg/bw_frechet_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

function ellipse(ctx, cx, cy, a11, a12, a22, scale) {
  // principal axes of the 2x2 matrix
  const tr = a11 + a22, det = a11 * a22 - a12 * a12;
  const disc = Math.sqrt(Math.max(tr * tr / 4 - det, 0));
  const l1 = tr / 2 + disc, l2 = tr / 2 - disc;
  const angle = Math.abs(a12) < 1e-12 ? (a11 >= a22 ? 0 : Math.PI / 2) : Math.atan2(l1 - a11, a12);
  ctx.beginPath();
  ctx.ellipse(cx, cy, Math.sqrt(l1) * scale, Math.sqrt(Math.max(l2, 0)) * scale, angle, 0, 2 * Math.PI);
  ctx.stroke();
}

function drawGeodesic() {
  const ctx = $("geo").getContext("2d");
  ctx.clearRect(0, 0, 860, 220);
  try {
    const a = [num("a11"), num("a12"), num("a22")];
    const b = [num("b11"), num("b12"), num("b22")];
    const steps = 8;
    const out = geodesic_path(new Float64Array(a), new Float64Array(b), steps);
    for (let k = 0; k <= steps; k++) {
      const t = k / steps;
      ctx.strokeStyle = `rgb(${Math.round(40 + 200 * t)}, 60, ${Math.round(240 - 200 * t)})`;
      ellipse(ctx, 50 + k * 95, 110, out[3 * k], out[3 * k + 1], out[3 * k + 2], 35);
    }
    $("dist").textContent = out[3 * (steps + 1)].toFixed(4);
  } catch (e) {
    $("dist").textContent = e.message;
  }
}

function drawRegression() {
  const ctx = $("reg").getContext("2d");
  const W = 860, H = 320;
  ctx.clearRect(0, 0, W, H);
  $("deltaOut").textContent = num("delta").toFixed(2);
  const n = Math.max(10, Math.round(num("n"))), grid = 41;
  let out;
  try {
    out = regression_demo(n, num("delta"), BigInt(Math.round(num("seed"))), grid);
  } catch (e) {
    ctx.fillText(e.message, 20, 20);
    return;
  }
  const fits = out.subarray(4 * n);
  let ymax = 0;
  for (let i = 0; i < n; i++) ymax = Math.max(ymax, out[4 * i + 1], out[4 * i + 3]);
  const px = (x) => 40 + (x + 1) / 2 * (W - 60);
  const py = (y) => H - 20 - y / (ymax * 1.05) * (H - 40);
  const colors = ["#c0392b", "#27ae60", "#2c3e50"];
  for (let i = 0; i < n; i++) {
    for (let c = 0; c < 3; c++) {
      ctx.fillStyle = colors[c] + "55";
      ctx.fillRect(px(out[4 * i]) - 1.5, py(out[4 * i + 1 + c]) - 1.5, 3, 3);
    }
  }
  for (const [offset, dash] of [[1, []], [4, [6, 4]]]) {
    for (let c = 0; c < 3; c++) {
      ctx.strokeStyle = colors[c];
      ctx.setLineDash(dash);
      ctx.beginPath();
      for (let k = 0; k < grid; k++) {
        const x = px(fits[7 * k]), y = py(fits[7 * k + offset + c]);
        k === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
      }
      ctx.stroke();
    }
  }
  ctx.setLineDash([]);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(40, py(0));
  ctx.lineTo(W - 20, py(0));
  ctx.stroke();
}

function drawHistogram() {
  const ctx = $("hist").getContext("2d");
  const W = 860, H = 260, bins = 60;
  ctx.clearRect(0, 0, W, H);
  const lambdas = $("lambdas").value.split(",").map((s) => parseFloat(s)).filter((v) => !Number.isNaN(v));
  let out;
  try {
    out = null_histogram(new Float64Array(lambdas), Math.max(1, Math.round(num("p"))), 50000, 7n, num("alpha"), bins);
  } catch (e) {
    $("crit").textContent = e.message;
    return;
  }
  const [crit, upper] = out;
  const counts = out.subarray(2);
  const cmax = Math.max(...counts);
  const bw = (W - 40) / bins;
  for (let i = 0; i < bins; i++) {
    const h = counts[i] / cmax * (H - 30);
    ctx.fillStyle = (i + 1) * upper / bins > crit ? "#e67e22" : "#3498db";
    ctx.fillRect(20 + i * bw, H - 10 - h, bw - 1, h);
  }
  ctx.strokeStyle = "#000";
  const cx = 20 + crit / upper * (W - 40);
  ctx.beginPath();
  ctx.moveTo(cx, 10);
  ctx.lineTo(cx, H - 10);
  ctx.stroke();
  $("crit").textContent = crit.toFixed(4);
}

await init();
for (const id of ["a11", "a12", "a22", "b11", "b12", "b22"]) $(id).addEventListener("input", drawGeodesic);
for (const id of ["n", "delta", "seed"]) $(id).addEventListener("input", drawRegression);
for (const id of ["lambdas", "p", "alpha"]) $(id).addEventListener("input", drawHistogram);
drawGeodesic();
drawRegression();
drawHistogram();
