/**
 * Minimal layered-model abstraction for latent extraction.
 *
 * A model is a stack of named dense layers ending in class logits; the
 * "latent space" is the activation vector at a chosen layer (typically the
 * penultimate one). The special layer name "input" exposes the raw input as
 * the latent space, covering identity-feature-extractor models.
 */

export type Activation = 'relu' | 'linear';

export interface LayerSpec {
  name: string;
  /** Row-major weight matrix: output_dim rows of input_dim entries. */
  weights: number[][];
  bias: number[];
  activation: Activation;
}

export interface ForwardResult {
  /** Activation vector captured at every named layer, plus "input". */
  activations: Map<string, number[]>;
  /** Raw output of the final layer (class logits). */
  logits: number[];
}

export class LayeredModel {
  readonly layers: LayerSpec[];

  constructor(layers: LayerSpec[]) {
    if (layers.length === 0) {
      throw new Error('model needs at least one layer');
    }
    const seen = new Set<string>(['input']);
    for (const layer of layers) {
      if (seen.has(layer.name)) {
        throw new Error(`duplicate layer name: ${layer.name}`);
      }
      seen.add(layer.name);
      if (layer.weights.length !== layer.bias.length) {
        throw new Error(`layer ${layer.name}: weights and bias disagree on output dim`);
      }
    }
    this.layers = layers;
  }

  get numClasses(): number {
    return this.layers[this.layers.length - 1].bias.length;
  }

  get inputDim(): number {
    return this.layers[0].weights[0].length;
  }

  layerNames(): string[] {
    return ['input', ...this.layers.map((l) => l.name)];
  }

  forward(input: number[]): ForwardResult {
    if (input.length !== this.inputDim) {
      throw new Error(
        `input dimension ${input.length} does not match model input dim ${this.inputDim}`,
      );
    }
    const activations = new Map<string, number[]>();
    activations.set('input', [...input]);
    let current = input;
    for (const layer of this.layers) {
      const out = new Array<number>(layer.bias.length);
      for (let i = 0; i < layer.bias.length; i++) {
        const row = layer.weights[i];
        if (row.length !== current.length) {
          throw new Error(`layer ${layer.name}: expected input dim ${row.length}`);
        }
        let acc = layer.bias[i];
        for (let j = 0; j < row.length; j++) {
          acc += row[j] * current[j];
        }
        out[i] = layer.activation === 'relu' ? Math.max(acc, 0) : acc;
      }
      activations.set(layer.name, out);
      current = out;
    }
    return { activations, logits: current };
  }
}

/** Numerically stable softmax (max subtraction). */
export function softmax(logits: number[]): number[] {
  const max = Math.max(...logits);
  const exps = logits.map((z) => Math.exp(z - max));
  const total = exps.reduce((a, b) => a + b, 0);
  return exps.map((e) => e / total);
}

/** Index of the largest probability; ties resolve to the lowest index. */
export function argmax(values: number[]): number {
  let best = 0;
  for (let i = 1; i < values.length; i++) {
    if (values[i] > values[best]) {
      best = i;
    }
  }
  return best;
}

/** Shannon entropy normalized to [0, 1] by log(num classes). */
export function normalizedEntropy(probs: number[]): number {
  let h = 0;
  for (const p of probs) {
    if (p > 0) {
      h -= p * Math.log(p);
    }
  }
  const u = h / Math.log(probs.length);
  return Math.min(Math.max(u, 0), 1);
}
