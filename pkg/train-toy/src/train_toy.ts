#!/usr/bin/env node
// Tiny deterministic training job speaking the subprocess objective protocol:
//
//   train_toy --lr <float> --momentum <float> --batch-size <int> --epochs <int> [--seed <int>]
//
// Trains a logistic classifier on a seed-fixed two-class Gaussian-blob
// dataset (1000 train / 200 held-out points) with minibatch gradient descent
// plus momentum, then prints exactly one line `{"accuracy": <float>}` and
// exits 0. A divergent run is a legitimately bad trial, not a protocol
// failure: numerical blow-ups are reported as accuracy 0.0 with exit 0.
// Bad arguments exit 2 without emitting a result line.

const TRAIN_POINTS = 1000;
const TEST_POINTS = 200;
const BLOB_SD = 1.0;

interface Args {
  lr: number;
  momentum: number;
  batchSize: number;
  epochs: number;
  seed: number;
}

function usage(message: string): never {
  process.stderr.write(`error: ${message}\n`);
  process.stderr.write(
    "usage: train_toy --lr <float> --momentum <float> --batch-size <int> --epochs <int> [--seed <int>]\n"
  );
  process.exit(2);
}

function parseArgs(argv: string[]): Args {
  const raw = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (!flag.startsWith("--") || value === undefined) {
      usage(`malformed argument list near '${flag}'`);
    }
    raw.set(flag, value);
  }
  const need = (flag: string): string => {
    const value = raw.get(flag);
    if (value === undefined) usage(`missing required flag ${flag}`);
    return value;
  };
  const positiveFloat = (flag: string, text: string): number => {
    const value = Number(text);
    if (!Number.isFinite(value) || value <= 0) usage(`${flag} must be a positive number, got '${text}'`);
    return value;
  };
  const positiveInt = (flag: string, text: string): number => {
    const value = Number(text);
    if (!Number.isInteger(value) || value <= 0) usage(`${flag} must be a positive integer, got '${text}'`);
    return value;
  };
  const seedText = raw.get("--seed") ?? "0";
  const seed = Number(seedText);
  if (!Number.isInteger(seed) || seed < 0) usage(`--seed must be a non-negative integer, got '${seedText}'`);
  return {
    lr: positiveFloat("--lr", need("--lr")),
    momentum: positiveFloat("--momentum", need("--momentum")),
    batchSize: positiveInt("--batch-size", need("--batch-size")),
    epochs: positiveInt("--epochs", need("--epochs")),
    seed,
  };
}

// mulberry32: small, fast, deterministic PRNG.
function makeRng(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function makeGaussian(rng: () => number): () => number {
  let spare: number | null = null;
  return () => {
    if (spare !== null) {
      const value = spare;
      spare = null;
      return value;
    }
    let u = 0;
    while (u === 0) u = rng();
    const v = rng();
    const radius = Math.sqrt(-2.0 * Math.log(u));
    spare = radius * Math.sin(2.0 * Math.PI * v);
    return radius * Math.cos(2.0 * Math.PI * v);
  };
}

interface Dataset {
  xs: Float64Array; // interleaved (x0, x1) pairs
  ys: Uint8Array;
}

// Two alternating-label blobs centered at (-1,-1) and (+1,+1).
function makeBlobs(count: number, gaussian: () => number): Dataset {
  const xs = new Float64Array(2 * count);
  const ys = new Uint8Array(count);
  for (let i = 0; i < count; i++) {
    const label = i % 2;
    const center = label === 0 ? -1.0 : 1.0;
    xs[2 * i] = center + BLOB_SD * gaussian();
    xs[2 * i + 1] = center + BLOB_SD * gaussian();
    ys[i] = label;
  }
  return { xs, ys };
}

function sigmoid(z: number): number {
  if (z >= 0) {
    return 1.0 / (1.0 + Math.exp(-z));
  }
  const e = Math.exp(z);
  return e / (1.0 + e);
}

function shuffle(indices: Int32Array, rng: () => number): void {
  for (let i = indices.length - 1; i > 0; i--) {
    const j = Math.floor(rng() * (i + 1));
    const tmp = indices[i];
    indices[i] = indices[j];
    indices[j] = tmp;
  }
}

function train(args: Args, data: Dataset, rng: () => number): [number, number, number] {
  let w0 = 0.0;
  let w1 = 0.0;
  let b = 0.0;
  let v0 = 0.0;
  let v1 = 0.0;
  let vb = 0.0;
  const n = data.ys.length;
  const indices = new Int32Array(n);
  for (let i = 0; i < n; i++) indices[i] = i;

  for (let epoch = 0; epoch < args.epochs; epoch++) {
    shuffle(indices, rng);
    for (let start = 0; start < n; start += args.batchSize) {
      const end = Math.min(start + args.batchSize, n);
      let g0 = 0.0;
      let g1 = 0.0;
      let gb = 0.0;
      for (let k = start; k < end; k++) {
        const idx = indices[k];
        const x0 = data.xs[2 * idx];
        const x1 = data.xs[2 * idx + 1];
        const err = sigmoid(w0 * x0 + w1 * x1 + b) - data.ys[idx];
        g0 += err * x0;
        g1 += err * x1;
        gb += err;
      }
      const size = end - start;
      v0 = args.momentum * v0 - (args.lr * g0) / size;
      v1 = args.momentum * v1 - (args.lr * g1) / size;
      vb = args.momentum * vb - (args.lr * gb) / size;
      w0 += v0;
      w1 += v1;
      b += vb;
    }
    if (!Number.isFinite(w0) || !Number.isFinite(w1) || !Number.isFinite(b)) {
      break; // divergence: report as a bad trial below
    }
  }
  return [w0, w1, b];
}

function heldOutAccuracy(weights: [number, number, number], data: Dataset): number {
  const [w0, w1, b] = weights;
  if (!Number.isFinite(w0) || !Number.isFinite(w1) || !Number.isFinite(b)) {
    return 0.0;
  }
  let correct = 0;
  for (let i = 0; i < data.ys.length; i++) {
    const z = w0 * data.xs[2 * i] + w1 * data.xs[2 * i + 1] + b;
    const predicted = z > 0 ? 1 : 0;
    if (predicted === data.ys[i]) correct++;
  }
  const accuracy = correct / data.ys.length;
  return Number.isFinite(accuracy) ? Math.min(Math.max(accuracy, 0.0), 1.0) : 0.0;
}

function main(): void {
  const args = parseArgs(process.argv.slice(2));
  const rng = makeRng(args.seed);
  const gaussian = makeGaussian(rng);
  const trainSet = makeBlobs(TRAIN_POINTS, gaussian);
  const testSet = makeBlobs(TEST_POINTS, gaussian);
  const weights = train(args, trainSet, rng);
  const accuracy = heldOutAccuracy(weights, testSet);
  process.stdout.write(JSON.stringify({ accuracy }) + "\n");
}

main();
