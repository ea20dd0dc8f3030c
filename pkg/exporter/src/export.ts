/**
 * Export latent rows to the latent-CSV interchange format.
 *
 * Output contract (consumed by the Python toolkit's loader):
 *   - CSV header `id,y_true,y_pred,u,h0,...,h{d-1}`
 *   - `y_true` is a class index or -1 for out-of-distribution rows
 *   - `y_pred` is always a class index in [0, numClasses)
 *   - `u` lies in [0, 1]
 *   - a sidecar `<name>.meta.json` with `num_classes`, `dim` and `split`
 */

import { writeFileSync } from 'node:fs';
import * as path from 'node:path';

import { LayeredModel, argmax, normalizedEntropy, softmax } from './model.js';

export interface Sample {
  id?: string;
  input: number[];
  /** True class index, or -1 for out-of-distribution rows. */
  label: number;
  /** Optional externally supplied uncertainty in [0, 1]; default is entropy. */
  uncertainty?: number;
}

export type DataLoader = Iterable<Sample[]>;

export interface ExportOptions {
  split?: string;
  metaExtra?: Record<string, unknown>;
}

export interface ExportSummary {
  rows: number;
  latentDim: number;
  numClasses: number;
  csvPath: string;
  metaPath: string;
}

function csvCell(value: string): string {
  if (/[",\n\r]/.test(value)) {
    return `"${value.replace(/"/g, '""')}"`;
  }
  return value;
}

function formatFloat(x: number): string {
  if (!Number.isFinite(x)) {
    throw new Error(`non-finite value in export: ${x}`);
  }
  return String(x);
}

export function metaPathFor(csvPath: string): string {
  const dir = path.dirname(csvPath);
  const stem = path.basename(csvPath).replace(/\.[^.]*$/, '');
  return path.join(dir, `${stem}.meta.json`);
}

/**
 * Run every sample through the model, capture the activations at the named
 * layer (use "input" for identity feature extractors), and write the latent
 * CSV plus its metadata sidecar.
 */
export function exportLatents(
  model: LayeredModel,
  loader: DataLoader,
  layerName: string,
  outPath: string,
  options: ExportOptions = {},
): ExportSummary {
  if (!model.layerNames().includes(layerName)) {
    throw new Error(
      `unknown layer ${JSON.stringify(layerName)}; model layers: ${model.layerNames().join(', ')}`,
    );
  }
  const numClasses = model.numClasses;
  if (numClasses < 2) {
    throw new Error('model must output at least two classes');
  }
  const lines: string[] = [];
  let latentDim = -1;
  let rows = 0;
  for (const batch of loader) {
    for (const sample of batch) {
      const { activations, logits } = model.forward(sample.input);
      const latent = activations.get(layerName)!;
      if (latentDim === -1) {
        latentDim = latent.length;
        lines.push(
          ['id', 'y_true', 'y_pred', 'u', ...Array.from({ length: latentDim }, (_, j) => `h${j}`)].join(','),
        );
      } else if (latent.length !== latentDim) {
        throw new Error(
          `latent dimension drift: batch yields ${latent.length}, expected ${latentDim}`,
        );
      }
      if (!Number.isInteger(sample.label) || sample.label < -1 || sample.label >= numClasses) {
        throw new Error(`label out of range for ${numClasses} classes: ${sample.label}`);
      }
      const probs = softmax(logits);
      const yPred = argmax(probs);
      const u = sample.uncertainty ?? normalizedEntropy(probs);
      if (!(u >= 0 && u <= 1)) {
        throw new Error(`uncertainty outside [0, 1]: ${u}`);
      }
      const id = sample.id ?? `row-${String(rows).padStart(5, '0')}`;
      lines.push(
        [
          csvCell(id),
          String(sample.label),
          String(yPred),
          formatFloat(u),
          ...latent.map(formatFloat),
        ].join(','),
      );
      rows += 1;
    }
  }
  if (rows === 0) {
    throw new Error('loader yielded no samples');
  }
  writeFileSync(outPath, lines.join('\n') + '\n', 'utf-8');
  const meta = {
    num_classes: numClasses,
    dim: latentDim,
    split: options.split ?? 'test',
    u_source: 'entropy',
    ...options.metaExtra,
  };
  const metaPath = metaPathFor(outPath);
  writeFileSync(metaPath, JSON.stringify(meta, Object.keys(meta).sort(), 2) + '\n', 'utf-8');
  return { rows, latentDim, numClasses, csvPath: outPath, metaPath };
}
