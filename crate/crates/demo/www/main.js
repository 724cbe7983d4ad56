import init, { Demo } from "./pkg/pdc_demo.js";

const PART_COLORS = [[66, 133, 244], [219, 68, 55], [244, 180, 0], [15, 157, 88], [171, 71, 188], [0, 172, 193]];
const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

let demo;
let yaw = 0.6;

function rotate([x, y, z]) {
  const c = Math.cos(yaw), s = Math.sin(yaw);
  const x1 = c * x + s * z, z1 = -s * x + c * z;
  const c2 = Math.cos(0.35), s2 = Math.sin(0.35);
  return [x1, c2 * y - s2 * z1, s2 * y + c2 * z1];
}

function drawSlice() {
  const cv = $("slice"), ctx = cv.getContext("2d");
  const v = demo.slice($("family").value, num("slice-index"), num("slice-z"), cv.width);
  const img = ctx.createImageData(v.size, v.size);
  const sdf = v.sdf, labels = v.labels;
  for (let i = 0; i < sdf.length; i++) {
    const d = sdf[i];
    const band = Math.abs(Math.sin(d * 40)) < 0.15 ? 0.7 : 1;
    const [r, g, b] = d < 0 ? PART_COLORS[labels[i] % PART_COLORS.length] : [235, 235, 235];
    const edge = Math.abs(d) < 0.01 ? 0 : 1;
    img.data.set([r * band * edge, g * band * edge, b * band * edge, 255], 4 * i);
  }
  ctx.putImageData(img, 0, 0);
  let min = Infinity;
  for (const d of sdf) min = Math.min(min, d);
  $("slice-stats").textContent = `min sdf ${min.toFixed(3)}`;
}

function drawMesh() {
  const cv = $("mesh"), ctx = cv.getContext("2d");
  const t0 = performance.now();
  const m = demo.mesh($("family").value, num("mesh-index"), num("mesh-res"), $("learned").checked);
  const ms = performance.now() - t0;
  const p = m.positions, idx = m.indices;
  const verts = [];
  for (let i = 0; i < p.length; i += 3) verts.push(rotate([p[i], p[i + 1], p[i + 2]]));
  const tris = [];
  for (let i = 0; i < idx.length; i += 3) {
    const [a, b, c] = [verts[idx[i]], verts[idx[i + 1]], verts[idx[i + 2]]];
    const u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]], w = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    const n = [u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]];
    const len = Math.hypot(...n) || 1;
    tris.push({ a, b, c, depth: a[2] + b[2] + c[2], shade: Math.abs(n[2] / len) });
  }
  tris.sort((s, t) => s.depth - t.depth);
  ctx.fillStyle = "#fff";
  ctx.fillRect(0, 0, cv.width, cv.height);
  const h = cv.width / 2, sc = cv.width * 0.42;
  for (const t of tris) {
    const g = Math.round(60 + 180 * t.shade);
    ctx.fillStyle = `rgb(${g},${g},${Math.min(255, g + 20)})`;
    ctx.beginPath();
    ctx.moveTo(h + sc * t.a[0], h - sc * t.a[1]);
    ctx.lineTo(h + sc * t.b[0], h - sc * t.b[1]);
    ctx.lineTo(h + sc * t.c[0], h - sc * t.c[1]);
    ctx.fill();
  }
  $("mesh-stats").textContent =
    `V ${m.vertex_count}  E ${m.edge_count}  F ${m.face_count}  χ ${m.euler}\n` +
    `cell ${demo.cell(num("mesh-res")).toFixed(4)}  ${ms.toFixed(0)} ms`;
}

function drawTransfer() {
  const cv = $("transfer"), ctx = cv.getContext("2d");
  const t = demo.transfer($("family").value, num("src"), num("tgt"), num("knn"), $("learned").checked);
  const p = t.points, lab = t.labels, truth = t.truth, u = t.uncertainty;
  const pts = [];
  for (let i = 0; i < lab.length; i++) pts.push({ q: rotate([p[3 * i], p[3 * i + 1], p[3 * i + 2]]), i });
  pts.sort((a, b) => a.q[2] - b.q[2]);
  ctx.fillStyle = "#fff";
  ctx.fillRect(0, 0, cv.width, cv.height);
  const h = cv.width / 2, sc = cv.width * 0.42;
  let uMax = 0;
  for (const v of u) uMax = Math.max(uMax, v);
  for (const { q, i } of pts) {
    const [r, g, b] = PART_COLORS[lab[i] % PART_COLORS.length];
    ctx.fillStyle = `rgba(${r},${g},${b},${0.35 + 0.65 * (1 - u[i] / (uMax || 1))})`;
    const size = lab[i] === truth[i] ? 2.5 : 5;
    ctx.fillRect(h + sc * q[0] - size / 2, h - sc * q[1] - size / 2, size, size);
  }
  let mean = 0;
  for (const v of u) mean += v / u.length;
  $("transfer-stats").textContent =
    `mIoU ${t.miou.toFixed(3)}  wrong ${(100 * t.error_rate).toFixed(1)}%\nmean uncertainty ${mean.toFixed(4)}`;
}

function redraw() {
  for (const f of [drawSlice, drawMesh, drawTransfer]) {
    try {
      f();
    } catch (e) {
      console.error(e);
    }
  }
}

async function main() {
  await init();
  demo = new Demo(num("seed"));
  for (const id of ["family", "learned", "slice-index", "mesh-index", "mesh-res", "src", "tgt", "knn"]) {
    $(id).addEventListener("change", redraw);
  }
  $("slice-z").addEventListener("input", drawSlice);
  $("seed").addEventListener("change", () => {
    demo = new Demo(num("seed"));
    $("model").textContent = "analytic shapes";
    redraw();
  });
  $("ckpt").addEventListener("change", async () => {
    const file = $("ckpt").files[0];
    if (!file) return;
    try {
      $("model").textContent = demo.load_checkpoint(new Uint8Array(await file.arrayBuffer()));
      $("learned").checked = true;
    } catch (e) {
      $("model").textContent = String(e);
    }
    redraw();
  });
  $("mesh").addEventListener("pointermove", (e) => {
    if (e.buttons) {
      yaw += e.movementX * 0.01;
      drawMesh();
    }
  });
  redraw();
}

main();
