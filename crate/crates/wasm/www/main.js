// Expects `wasm-bindgen --target web --out-dir www/pkg` output next to this file.
import init, { simulate, edgeProx, edgeThreshold } from "./pkg/fedgraph_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const vec = (id) => $(id).value.split(",").map(Number);

function plot(curve) {
  const c = $("curve");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  if (curve.length < 2) return;
  const logs = curve.map(([, e]) => Math.log10(Math.max(e, 1e-12)));
  const lo = Math.min(...logs), hi = Math.max(...logs);
  const tMax = curve[curve.length - 1][0];
  const x = (t) => 40 + (t / tMax) * (c.width - 50);
  const y = (v) => 10 + (hi - v) / Math.max(hi - lo, 1e-9) * (c.height - 30);
  ctx.strokeStyle = "#36c";
  ctx.beginPath();
  curve.forEach(([t], i) => (i ? ctx.lineTo : ctx.moveTo).call(ctx, x(t), y(logs[i])));
  ctx.stroke();
  ctx.fillStyle = "#000";
  ctx.fillText(`1e${hi.toFixed(1)}`, 2, 14);
  ctx.fillText(`1e${lo.toFixed(1)}`, 2, c.height - 16);
  ctx.fillText(`t = ${tMax}`, c.width - 60, c.height - 4);
}

function guard(out, f) {
  try {
    f();
  } catch (e) {
    $(out).textContent = `error: ${e.message ?? e}`;
  }
}

await init();

$("run").onclick = () => guard("sim-out", () => {
  const r = JSON.parse(simulate(
    num("devices"), num("clusters"), num("samples"),
    num("corruption"), num("lambda"), num("iterations"), BigInt(num("seed")),
  ));
  $("sim-out").textContent =
    `graph: ${r.edges} edges, fidelity ${r.fidelity.toFixed(3)}\n` +
    `local error     ${r.local_error.toExponential(3)}\n` +
    `fed-admm error  ${r.final_error.toExponential(3)}`;
  plot(r.curve);
});

$("prox").onclick = () => guard("prox-out", () => {
  const a = vec("pa");
  const out = edgeProx(new Float64Array(a), new Float64Array(vec("pb")), num("plam"), num("prho"), $("pnorm").value);
  const fmt = (v) => Array.from(v, (x) => x.toFixed(4)).join(", ");
  $("prox-out").textContent = `beta+ = (${fmt(out.slice(0, a.length))})\nbeta- = (${fmt(out.slice(a.length))})`;
});

$("thr").onclick = () => guard("thr-out", () => {
  $("thr-out").textContent = edgeThreshold(num("dim"), num("alpha")).toFixed(6);
});
