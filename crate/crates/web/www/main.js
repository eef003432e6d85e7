import init, { BoundaryExplorer, PeelDemo } from "./pkg/peel_web.js";

const $ = (id) => document.getElementById(id);
const STATE_COLORS = ["#bbb", "#fff", "#e8870e", "#2f7fd0", "#eee"];
const DEMO_SIZE = 5;

let demo = null;
let playing = false;

// oblique view: x right, y into the screen, z up
function projector(canvas, skinXYZ) {
  let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
  for (let i = 0; i < skinXYZ.length; i += 3) {
    minX = Math.min(minX, skinXYZ[i]); maxX = Math.max(maxX, skinXYZ[i]);
    minY = Math.min(minY, skinXYZ[i + 1]); maxY = Math.max(maxY, skinXYZ[i + 1]);
  }
  const span = Math.max(maxX - minX, maxY - minY);
  const scale = (canvas.width * 0.62) / span;
  const ox = canvas.width * 0.12, oy = canvas.height * 0.8;
  return (x, y, z) => [
    ox + (x - minX) * scale + (y - minY) * scale * 0.45,
    oy - (y - minY) * scale * 0.35 - z * scale,
  ];
}

function drawScene() {
  const cv = $("scene"), g = cv.getContext("2d");
  g.clearRect(0, 0, cv.width, cv.height);
  const skin = demo.skin_positions();
  const n = demo.skin_rows();
  const P = projector(cv, skin);
  const at = (arr, k) => P(arr[3 * k], arr[3 * k + 1], arr[3 * k + 2]);

  g.strokeStyle = "#c9b8a8";
  g.lineWidth = 1;
  for (let r = 0; r < n; r++) {
    for (let c = 0; c < n; c++) {
      const k = r * n + c;
      const [x0, y0] = at(skin, k);
      for (const m of [c + 1 < n ? k + 1 : -1, r + 1 < n ? k + n : -1]) {
        if (m < 0) continue;
        const [x1, y1] = at(skin, m);
        g.beginPath(); g.moveTo(x0, y0); g.lineTo(x1, y1); g.stroke();
      }
    }
  }

  const lm = demo.landmark_positions();
  const moved = demo.landmark_displacements();
  const worst = Math.max(1e-9, ...demo.max_history());
  for (let k = 0; k < lm.length / 3; k++) {
    const [x, y] = at(lm, k);
    const t = Math.min(1, moved[k] / worst);
    g.fillStyle = `rgb(${Math.round(40 + 200 * t)},${Math.round(170 * (1 - t))},40)`;
    g.beginPath(); g.arc(x, y, 3, 0, 2 * Math.PI); g.fill();
  }

  const dr = demo.dressing_positions();
  const states = demo.dressing_states();
  const m = demo.dressing_rows();
  g.strokeStyle = "#555";
  for (let r = 0; r < m; r++) {
    for (let c = 0; c < m; c++) {
      const k = r * m + c;
      const [x0, y0] = at(dr, k);
      for (const j of [c + 1 < m ? k + 1 : -1, r + 1 < m ? k + m : -1]) {
        if (j < 0) continue;
        const [x1, y1] = at(dr, j);
        g.beginPath(); g.moveTo(x0, y0); g.lineTo(x1, y1); g.stroke();
      }
    }
  }
  for (let k = 0; k < states.length; k++) {
    const [x, y] = at(dr, k);
    g.fillStyle = STATE_COLORS[states[k]];
    g.strokeStyle = "#333";
    g.beginPath(); g.arc(x, y, 5, 0, 2 * Math.PI); g.fill(); g.stroke();
  }

  const path = demo.effector_path();
  g.strokeStyle = "#c22";
  g.lineWidth = 2;
  g.beginPath();
  for (let k = 0; k < path.length / 3; k++) {
    const [x, y] = at(path, k);
    k === 0 ? g.moveTo(x, y) : g.lineTo(x, y);
  }
  g.stroke();
  g.lineWidth = 1;
  g.fillStyle = "#666";
  g.fillText(`peak landmark displacement so far: ${worst.toFixed(2)} mm`, 10, 16);
}

function drawChart() {
  const cv = $("chart"), g = cv.getContext("2d");
  g.clearRect(0, 0, cv.width, cv.height);
  const mean = demo.mean_history(), max = demo.max_history();
  const pad = 40, w = cv.width - pad - 10, h = cv.height - 2 * pad;
  const top = Math.max(1, ...max) * 1.1;
  const steps = Math.max(10, mean.length - 1);
  g.strokeStyle = "#999";
  g.beginPath(); g.moveTo(pad, pad); g.lineTo(pad, pad + h); g.lineTo(pad + w, pad + h); g.stroke();
  g.fillStyle = "#444";
  g.fillText("landmark displacement (mm)", pad, pad - 12);
  g.fillText(top.toFixed(1), 4, pad + 4);
  g.fillText("0", 24, pad + h + 4);
  g.fillText(`step ${steps}`, pad + w - 40, pad + h + 16);
  const line = (ys, color) => {
    g.strokeStyle = color; g.lineWidth = 2;
    g.beginPath();
    ys.forEach((v, i) => {
      const x = pad + (w * i) / steps, y = pad + h - (h * v) / top;
      i === 0 ? g.moveTo(x, y) : g.lineTo(x, y);
    });
    g.stroke(); g.lineWidth = 1;
  };
  line(max, "#c22");
  line(mean, "#2a2");
  g.fillStyle = "#c22"; g.fillText("max", pad + 8, pad + 8);
  g.fillStyle = "#2a2"; g.fillText("mean", pad + 40, pad + 8);
}

function showStatus() {
  $("status").textContent =
    `${demo.status()} · step ${demo.steps()} · detached ${demo.detached_count()}/${demo.pair_count()}`;
}

function redraw() {
  drawScene();
  drawChart();
  showStatus();
}

function resetDemo() {
  playing = false;
  $("play").textContent = "Play";
  if (demo) demo.free();
  demo = new PeelDemo($("method").value, DEMO_SIZE, +$("seeds").value, +$("horizon").value, +$("rng").value);
  redraw();
}

function tick() {
  if (!playing) return;
  if (!demo.step()) {
    playing = false;
    $("play").textContent = "Play";
  }
  redraw();
  if (playing) requestAnimationFrame(tick);
}

// boundary explorer
let explorer = null;
function drawBoundary() {
  const cv = $("boundary"), g = cv.getContext("2d");
  g.clearRect(0, 0, cv.width, cv.height);
  const n = explorer.rows(), cell = cv.width / n;
  const states = explorer.states();
  const grasp = explorer.grasp_node();
  for (let r = 0; r < n; r++) {
    for (let c = 0; c < n; c++) {
      const k = r * n + c;
      const x = (c + 0.5) * cell, y = cv.height - (r + 0.5) * cell;
      g.fillStyle = STATE_COLORS[states[k]];
      g.strokeStyle = k === grasp ? "#c22" : "#333";
      g.lineWidth = k === grasp ? 3 : 1;
      g.beginPath(); g.arc(x, y, cell * 0.32, 0, 2 * Math.PI); g.fill(); g.stroke();
    }
  }
  g.lineWidth = 1;
}

function resetExplorer() {
  if (explorer) explorer.free();
  explorer = new BoundaryExplorer(+$("bsize").value);
  drawBoundary();
}

// loss landscape
function drawLandscape() {
  const cv = $("loss"), g = cv.getContext("2d");
  const na = 48, ne = 16;
  $("loss-status").textContent = "evaluating…";
  // let the status paint before the blocking evaluation
  setTimeout(() => {
    const t0 = performance.now();
    const L = demo.loss_map(na, ne);
    const finite = L.filter(Number.isFinite);
    const lo = Math.min(...finite), hi = Math.max(...finite);
    const cw = cv.width / na, ch = cv.height / ne;
    for (let e = 0; e < ne; e++) {
      for (let a = 0; a < na; a++) {
        const v = L[e * na + a];
        const t = Number.isFinite(v) && hi > lo ? (v - lo) / (hi - lo) : 1;
        const shade = Math.round(30 + 215 * t);
        g.fillStyle = `rgb(${shade},${shade},${Math.min(255, shade + 30)})`;
        g.fillRect(a * cw, cv.height - (e + 1) * ch, cw + 1, ch + 1);
      }
    }
    const [az, el] = demo.last_direction();
    const elLo = (-15 * Math.PI) / 180, elHi = Math.PI / 2;
    const x = (az / (2 * Math.PI)) * cv.width;
    const y = cv.height - ((el - elLo) / (elHi - elLo)) * cv.height;
    g.strokeStyle = "#e8870e"; g.lineWidth = 3;
    g.beginPath(); g.arc(x, y, 8, 0, 2 * Math.PI); g.stroke(); g.lineWidth = 1;
    $("loss-status").textContent =
      `loss ${lo.toExponential(3)} … ${hi.toExponential(3)} over ${na * ne} rollouts (${(performance.now() - t0).toFixed(0)} ms)`;
  }, 20);
}

async function main() {
  await init();
  resetDemo();
  resetExplorer();
  $("reset").onclick = resetDemo;
  $("method").onchange = resetDemo;
  $("step").onclick = () => { demo.step(); redraw(); };
  $("play").onclick = () => {
    playing = !playing;
    $("play").textContent = playing ? "Pause" : "Play";
    if (playing) requestAnimationFrame(tick);
  };
  $("breset").onclick = resetExplorer;
  $("bsize").onchange = resetExplorer;
  $("boundary").onclick = (ev) => {
    const cv = $("boundary"), rect = cv.getBoundingClientRect();
    const n = explorer.rows(), cell = rect.width / n;
    const c = Math.floor((ev.clientX - rect.left) / cell);
    const r = Math.floor((rect.bottom - ev.clientY) / cell);
    if (r < 0 || c < 0 || r >= n || c >= n) return;
    explorer.toggle(r * n + c);
    drawBoundary();
  };
  $("landscape").onclick = drawLandscape;
}

main().catch((e) => { $("status").textContent = `failed to start: ${e}`; });
