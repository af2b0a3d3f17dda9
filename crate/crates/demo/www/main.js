// Build with:
//   cargo build --release --target wasm32-unknown-unknown -p glyphtag-demo
//   wasm-bindgen --target web --out-dir crates/demo/www/pkg \
//     target/wasm32-unknown-unknown/release/glyphtag_demo.wasm
import init, { render_glyph, style_tags, ranking_metrics } from "./pkg/glyphtag_demo.js";

const SIZE = 48;
const SCALE = 2;
const $ = (id) => document.getElementById(id);

function style() {
  return [
    Number($("stroke").value),
    Number($("slant").value),
    Number($("width").value),
    $("serif").checked,
    $("rounded").checked,
    $("outline").checked,
    $("shadow").checked,
  ];
}

function drawGlyphs() {
  const s = style();
  const out = $("glyphs");
  out.replaceChildren();
  for (const ch of $("text").value) {
    if (!/[a-zA-Z]/.test(ch)) continue;
    const px = render_glyph(ch, SIZE, ...s);
    const canvas = document.createElement("canvas");
    canvas.width = SIZE;
    canvas.height = SIZE;
    canvas.style.width = `${SIZE * SCALE}px`;
    const ctx = canvas.getContext("2d");
    const img = ctx.createImageData(SIZE, SIZE);
    px.forEach((v, i) => {
      img.data.set([v, v, v, 255], i * 4);
    });
    ctx.putImageData(img, 0, 0);
    out.appendChild(canvas);
  }
  $("tags").textContent = style_tags(...s) || "(none)";
}

function showMetrics() {
  const el = $("metrics");
  try {
    const [ap, ndcg] = ranking_metrics($("relevance").value);
    el.className = "";
    el.textContent = `AP ${ap.toFixed(4)}   nDCG ${ndcg.toFixed(4)}`;
  } catch (e) {
    el.className = "error";
    el.textContent = String(e.message ?? e);
  }
}

await init();
for (const id of ["stroke", "slant", "width", "serif", "rounded", "outline", "shadow", "text"]) {
  $(id).addEventListener("input", drawGlyphs);
}
$("relevance").addEventListener("input", showMetrics);
drawGlyphs();
showMetrics();
