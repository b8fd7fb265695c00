// Expects `wasm-pack build --target web --out-dir www/pkg` to have been run in crates/wasm.
import init, { scoreIntervals, readSignal, oracleSeries } from "./pkg/quantband_wasm.js";

const $ = (id) => document.getElementById(id);
const numbers = (text) => text.split(",").map((s) => Number(s.trim())).filter((x) => !Number.isNaN(x));

function show(id, thunk) {
  try {
    $(id).textContent = JSON.stringify(JSON.parse(thunk()), null, 2);
  } catch (err) {
    $(id).textContent = `error: ${err.message ?? err}`;
  }
}

function draw(series) {
  const canvas = $("chart");
  const ctx = canvas.getContext("2d");
  const { prices, lower, upper } = series;
  const all = prices.concat(lower, upper);
  const lo = Math.min(...all);
  const hi = Math.max(...all);
  const x = (i) => (i / (prices.length - 1)) * canvas.width;
  const y = (v) => canvas.height - ((v - lo) / (hi - lo || 1)) * canvas.height;
  ctx.clearRect(0, 0, canvas.width, canvas.height);

  // Band for bar t + 1 is drawn at t + 1, next to the price it brackets.
  ctx.fillStyle = "rgba(70, 130, 180, 0.25)";
  ctx.beginPath();
  upper.forEach((v, t) => ctx.lineTo(x(t + 1), y(v)));
  for (let t = lower.length - 1; t >= 0; t--) ctx.lineTo(x(t + 1), y(lower[t]));
  ctx.fill();

  ctx.strokeStyle = "#222";
  ctx.beginPath();
  prices.forEach((v, t) => ctx.lineTo(x(t), y(v)));
  ctx.stroke();
}

await init();

$("generate").onclick = () =>
  show("series-out", () => {
    const json = oracleSeries($("kind").value, Number($("length").value), BigInt($("seed").value));
    const series = JSON.parse(json);
    draw(series);
    const hits = series.lower.filter((l, t) => l <= series.prices[t + 1] && series.prices[t + 1] <= series.upper[t]).length;
    return JSON.stringify({ bars: series.prices.length, empirical_coverage: hits / series.lower.length });
  });

$("score").onclick = () =>
  show("score-out", () =>
    scoreIntervals(
      Float64Array.from(numbers($("actuals").value)),
      Float64Array.from(numbers($("lower").value)),
      Float64Array.from(numbers($("upper").value)),
      Number($("beta").value),
      Number($("eta").value),
      $("squared").checked,
    ),
  );

$("signal").onclick = () =>
  show("signal-out", () =>
    readSignal(
      Float64Array.from(numbers($("row").value)),
      Number($("price").value),
      Number($("atr").value),
      Number($("rsi").value),
    ),
  );

$("generate").click();
