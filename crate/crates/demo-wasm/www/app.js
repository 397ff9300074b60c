import init, { sweep, deliver_round, answer_histogram } from "./pkg/pid_demo_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"];

function axes(ctx, w, h, pad) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#888";
  ctx.beginPath();
  ctx.moveTo(pad, pad / 2);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad / 2, h - pad);
  ctx.stroke();
}

function plotSweep() {
  const canvas = $("sw-plot");
  const ctx = canvas.getContext("2d");
  $("sw-msg").textContent = "";
  let rows;
  try {
    rows = JSON.parse(sweep(num("sw-k"), $("sw-m").value, num("sw-l"), num("sw-a"), num("sw-b")));
  } catch (e) {
    $("sw-msg").textContent = String(e);
    $("sw-msg").className = "err";
    return;
  }
  const { width: w, height: h } = canvas;
  const pad = 40;
  axes(ctx, w, h, pad);
  const n0 = rows[0].n, n1 = rows[rows.length - 1].n;
  const x = (n) => pad + ((n - n0) / Math.max(1, n1 - n0)) * (w - 1.5 * pad);
  const y = (r) => h - pad - r * (h - 1.5 * pad);
  ctx.fillStyle = "#444";
  ctx.fillText("1", pad - 14, y(1) + 4);
  ctx.fillText("0", pad - 14, y(0) + 4);
  ctx.fillText(`N = ${n0}`, pad, h - pad + 16);
  ctx.fillText(`${n1}`, w - pad, h - pad + 16);
  const series = [
    ["coded", colors[0], "coded storage"],
    ["uncoded_upper", colors[1], "uncoded, upper"],
    ["uncoded_lower", colors[2], "uncoded, lower"],
  ];
  series.forEach(([key, color, label], i) => {
    ctx.strokeStyle = color;
    ctx.fillStyle = color;
    ctx.beginPath();
    let started = false;
    for (const r of rows) {
      if (r[key] === null) { started = false; continue; }
      if (started) ctx.lineTo(x(r.n), y(r[key])); else ctx.moveTo(x(r.n), y(r[key]));
      started = true;
      ctx.fillRect(x(r.n) - 2, y(r[key]) - 2, 4, 4);
    }
    ctx.stroke();
    ctx.fillText(label, w - 150, 20 + 14 * i);
  });
}

function runDelivery() {
  try {
    const r = JSON.parse(deliver_round(num("dv-q"), num("dv-k"), num("dv-n"), num("dv-l"), num("dv-d"), num("dv-s")));
    const lines = [];
    r.association.forEach((s, k) => lines.push(`W_${k + 1} = [${r.messages[k]}]  stored on servers ${s}`));
    lines.push("");
    r.storage.forEach((z, n) => {
      const cells = z.map(([k, v]) => `C_${k}=${v}`).join(" ");
      lines.push(`server ${n + 1}: ${cells}  share=${r.shares[n] ?? "-"}  sends [${r.answers[n]}]`);
    });
    lines.push("");
    lines.push(`decoded [${r.decoded}]  rate ${r.rate}  association sums ${r.association_sums}`);
    $("dv-out").textContent = lines.join("\n");
    $("dv-out").className = "";
  } catch (e) {
    $("dv-out").textContent = String(e);
    $("dv-out").className = "err";
  }
}

function runHistogram() {
  const canvas = $("hg-plot");
  const ctx = canvas.getContext("2d");
  let r;
  try {
    r = JSON.parse(answer_histogram(num("hg-q"), num("hg-k"), num("hg-n"), num("hg-l"), $("hg-leak").checked));
  } catch (e) {
    $("hg-msg").textContent = String(e);
    $("hg-msg").className = "err";
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    return;
  }
  const keys = [...new Set(r.views.flatMap((v) => v.map(([k]) => k)))].sort();
  const maps = r.views.map((v) => new Map(v));
  const max = Math.max(...r.views.flatMap((v) => v.map(([, c]) => c)));
  $("hg-msg").className = "";
  $("hg-msg").textContent = `${keys.length} distinct answer vectors; ` +
    (r.pass ? `every one occurs ${r.expected_count} times for every D: private`
            : `distributions differ across D: the index leaks`);
  const { width: w, height: h } = canvas;
  const pad = 30;
  axes(ctx, w, h, pad);
  const band = (w - 1.5 * pad) / keys.length;
  const bar = band / maps.length;
  maps.forEach((m, d) => {
    ctx.fillStyle = colors[d % colors.length];
    keys.forEach((key, i) => {
      const c = m.get(key) ?? 0;
      const bh = (c / max) * (h - 1.5 * pad);
      ctx.fillRect(pad + i * band + d * bar, h - pad - bh, Math.max(1, bar), bh);
    });
    ctx.fillText(`D=${d + 1}`, w - 60, 14 + 14 * d);
  });
}

await init();
$("sw-go").onclick = plotSweep;
$("dv-go").onclick = runDelivery;
$("hg-go").onclick = runHistogram;
plotSweep();
runDelivery();
runHistogram();
