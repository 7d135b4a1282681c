import init, { rabi_curve, ramsey_comparison, readout_curve } from "./pkg/rotorqc_wasm.js";

const num = (id) => Number(document.getElementById(id).value);
const out = (id, text) => (document.getElementById(id).textContent = text);

// Draws line series {xs, ys, color, dashed, dots} on linear or log-x axes.
function plot(id, series, { logx = false, ymin = 0, ymax = 1, xlabel = "" } = {}) {
  const c = document.getElementById(id);
  const g = c.getContext("2d");
  const pad = 40;
  g.clearRect(0, 0, c.width, c.height);
  const tx = logx ? Math.log10 : (x) => x;
  const xs = series.flatMap((s) => s.xs.map(tx));
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const px = (x) => pad + ((tx(x) - x0) / (x1 - x0 || 1)) * (c.width - 2 * pad);
  const py = (y) => c.height - pad - ((y - ymin) / (ymax - ymin)) * (c.height - 2 * pad);
  g.strokeStyle = "#999";
  g.strokeRect(pad, pad, c.width - 2 * pad, c.height - 2 * pad);
  g.fillStyle = "#555";
  g.fillText(ymax.toPrecision(4), 2, pad + 4);
  g.fillText(ymin.toPrecision(4), 2, c.height - pad);
  g.fillText(xlabel, c.width / 2 - 30, c.height - 10);
  for (const s of series) {
    g.strokeStyle = g.fillStyle = s.color;
    g.setLineDash(s.dashed ? [5, 4] : []);
    g.beginPath();
    s.xs.forEach((x, i) => (i ? g.lineTo(px(x), py(s.ys[i])) : g.moveTo(px(x), py(s.ys[i]))));
    g.stroke();
    if (s.dots) s.xs.forEach((x, i) => g.fillRect(px(x) - 2, py(s.ys[i]) - 2, 4, 4));
  }
  g.setLineDash([]);
}

function guard(id, f) {
  try {
    f();
  } catch (e) {
    out(id, "error: " + e);
  }
}

function runRabi() {
  guard("rabi-out", () => {
    const r = rabi_curve(num("rabi-i"), num("rabi-d"), document.getElementById("rabi-rot").checked, 300);
    plot("rabi-plot", [
      { xs: r.times_us, ys: r.two_level, color: "#aaa", dashed: true },
      { xs: r.times_us, ys: r.p_upper, color: "#c33" },
    ], { xlabel: "time (µs)" });
    out("rabi-out", `Ω/2π = ${(r.rabi_hz / 1e6).toFixed(4)} MHz (red: simulation, grey: two-level formula)`);
  });
}

function runRamsey() {
  guard("ram-out", () => {
    const r = ramsey_comparison(num("ram-s"), num("ram-t"), num("ram-n"), 7n);
    const e = r.electron, q = r.rotational;
    plot("ram-plot", [
      { xs: e.times_s, ys: e.coherence, color: "#36c", dots: true },
      { xs: q.times_s, ys: q.coherence, color: "#c33", dots: true },
    ], { logx: true, ymin: -0.1, xlabel: "time (s, log)" });
    const t2 = (p) => (p.t2_s == null ? "n/a" : p.t2_s.toExponential(3) + " s");
    out("ram-out",
      `blue ${e.label}: T2 = ${t2(e)}\nred ${q.label}: T2 = ${t2(q)}\n` +
      `T2 ratio ${r.ratio == null ? "n/a" : r.ratio.toExponential(3)}, sensitivity ratio ${r.sensitivity_ratio.toExponential(3)}`);
  });
}

function runReadout() {
  guard("ro-out", () => {
    const pts = readout_curve(num("ro-p"), num("ro-b"), num("ro-r"), num("ro-n"), 11n);
    const reps = pts.map((p) => p.repetitions);
    const lo = Math.min(...pts.map((p) => Math.min(p.ci_low, p.detection_binomial)));
    plot("ro-plot", [
      { xs: reps, ys: pts.map((p) => p.detection_binomial), color: "#aaa", dashed: true },
      { xs: reps, ys: pts.map((p) => p.fidelity), color: "#393", dots: true },
    ], { ymin: Math.max(0, lo - 0.01), xlabel: "repetitions" });
    out("ro-out", pts.map((p) =>
      `R=${p.repetitions}  F=${p.fidelity.toFixed(5)}  [${p.ci_low.toFixed(5)}, ${p.ci_high.toFixed(5)}]  detection-only ${p.detection_binomial.toFixed(5)}`).join("\n"));
  });
}

await init();
document.getElementById("rabi-go").onclick = runRabi;
document.getElementById("ram-go").onclick = runRamsey;
document.getElementById("ro-go").onclick = runReadout;
runRabi();
