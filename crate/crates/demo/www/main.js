import init, { Demo } from "./pkg/seglep_demo.js";

const $ = (id) => document.getElementById(id);
let demo = null;

function paint(id, rgba, w, h) {
  const canvas = $(id);
  canvas.width = w;
  canvas.height = h;
  const ctx = canvas.getContext("2d");
  ctx.putImageData(new ImageData(new Uint8ClampedArray(rgba), w, h), 0, 0);
}

// The slider is quadratic in the level so low thresholds get more travel.
function lambda() {
  const t = $("lambda").value / 1000;
  return t * t * demo.max_level() * 1.01;
}

function showThreshold() {
  const l = lambda();
  const [w, h] = [demo.width(), demo.height()];
  paint("segment", demo.segment_rgba(l), w, h);
  paint("semantic", demo.semantic_rgba(l), w, h);
  $("lambda-value").textContent = `λ = ${l.toFixed(4)}`;
  const acc = (100 * demo.semantic_accuracy(l)).toFixed(1);
  $("status").textContent = `${demo.regions(l)} regions, ${acc}% of pixels labelled correctly`;
}

function showHierarchy() {
  const [w, h] = [demo.width(), demo.height()];
  paint("ucm", demo.ucm_rgba(), 2 * w + 1, 2 * h + 1);
  showThreshold();
}

function generate() {
  const size = Number($("size").value);
  if (demo) demo.free();
  demo = new Demo(BigInt($("seed").value), size, size, Number($("flip").value));
  reweight();
  const [w, h] = [demo.width(), demo.height()];
  paint("image", demo.image_rgba(), w, h);
  paint("input-semantic", demo.input_semantic_rgba(), w, h);
}

function reweight() {
  demo.reweight(Number($("ws").value), Number($("beta").value), Number($("eta").value));
  showHierarchy();
}

function guarded(f) {
  return () => {
    try {
      f();
    } catch (e) {
      $("status").textContent = `error: ${e}`;
    }
  };
}

await init();
$("generate").addEventListener("click", guarded(generate));
$("reweight").addEventListener("click", guarded(reweight));
$("lambda").addEventListener("input", guarded(showThreshold));
guarded(generate)();
