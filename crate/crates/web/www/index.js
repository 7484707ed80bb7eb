import init, { Demo, presets } from "./pkg/vpfem_web.js";

const $ = (id) => document.getElementById(id);
let demo = null;
let playing = false;

function colour(t) {
  // Dark blue through white to dark red.
  const c = Math.max(0, Math.min(1, t));
  const r = c < 0.5 ? 2 * c : 1;
  const b = c < 0.5 ? 1 : 2 * (1 - c);
  const g = 1 - Math.abs(2 * c - 1);
  return [255 * (0.2 + 0.8 * r), 255 * (0.2 + 0.8 * g), 255 * (0.2 + 0.8 * b)];
}

function drawField() {
  const nx = demo.nx(), ny = demo.ny();
  const f = demo.field();
  let lo = Infinity, hi = -Infinity;
  for (const v of f) { lo = Math.min(lo, v); hi = Math.max(hi, v); }
  const span = hi - lo || 1;
  const img = new ImageData(nx, ny);
  for (let i = 0; i < nx; i++) {
    for (let j = 0; j < ny; j++) {
      const [r, g, b] = colour((f[i * ny + j] - lo) / span);
      const p = 4 * ((ny - 1 - j) * nx + i);
      img.data[p] = r; img.data[p + 1] = g; img.data[p + 2] = b; img.data[p + 3] = 255;
    }
  }
  const off = new OffscreenCanvas(nx, ny);
  off.getContext("2d").putImageData(img, 0, 0);
  const ctx = $("field").getContext("2d");
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, $("field").width, $("field").height);
  return [lo, hi];
}

function drawEnergy() {
  const h = demo.energy_history();
  const c = $("energy"), ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  if (h.length < 4) return;
  let tmax = 0, lo = Infinity, hi = -Infinity;
  for (let k = 0; k < h.length; k += 2) {
    tmax = Math.max(tmax, h[k]);
    if (h[k + 1] > -90) { lo = Math.min(lo, h[k + 1]); hi = Math.max(hi, h[k + 1]); }
  }
  if (!isFinite(lo)) return;
  const pad = 30, span = hi - lo || 1;
  ctx.strokeStyle = "#888"; ctx.strokeRect(pad, 5, c.width - pad - 5, c.height - pad);
  ctx.fillStyle = "#444"; ctx.font = "11px sans-serif";
  ctx.fillText("ln ‖E‖", 2, 14); ctx.fillText("t = " + tmax.toFixed(1), c.width - 70, c.height - 8);
  ctx.beginPath(); ctx.strokeStyle = "#c0392b";
  for (let k = 0; k < h.length; k += 2) {
    const x = pad + (c.width - pad - 5) * (tmax ? h[k] / tmax : 0);
    const y = 5 + (c.height - pad) * (1 - (h[k + 1] - lo) / span);
    k === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
  }
  ctx.stroke();
}

function redraw() {
  const [lo, hi] = drawField();
  drawEnergy();
  $("status").textContent =
    `t = ${demo.time().toFixed(3)}   steps = ${demo.steps()}\n` +
    `f in [${lo.toExponential(3)}, ${hi.toExponential(3)}]\n` +
    `max viscosity = ${demo.max_viscosity().toExponential(3)}`;
}

function restart() {
  try {
    demo = new Demo($("preset").value, Number($("elements").value), Number($("degree").value), $("mode").value);
    redraw();
  } catch (e) {
    $("status").textContent = "error: " + e;
  }
}

function advance(dt) {
  try {
    demo.advance(dt);
    redraw();
  } catch (e) {
    playing = false;
    $("play").textContent = "Play";
    $("status").textContent = "error: " + e;
  }
}

function loop() {
  if (!playing) return;
  advance(0.5);
  requestAnimationFrame(loop);
}

await init();
for (const p of presets()) {
  const o = document.createElement("option");
  o.value = o.textContent = p;
  $("preset").appendChild(o);
}
$("preset").value = "two_stream";
$("restart").onclick = restart;
$("step").onclick = () => advance(1.0);
$("play").onclick = () => {
  playing = !playing;
  $("play").textContent = playing ? "Pause" : "Play";
  loop();
};
$("field").onclick = (ev) => {
  const rect = ev.target.getBoundingClientRect();
  const [x0, x1, y0, y1] = demo.bounds();
  const x = x0 + (x1 - x0) * (ev.clientX - rect.left) / rect.width;
  const y = y1 - (y1 - y0) * (ev.clientY - rect.top) / rect.height;
  const w = 0.05 * Math.min(x1 - x0, y1 - y0);
  try {
    demo.perturb(x, y, Number($("amp").value), w);
    redraw();
  } catch (e) {
    $("status").textContent = "error: " + e;
  }
};
restart();
