/**
 * Mirror of the Python loader's validation rules, used by the exporter's own
 * tests to confirm every export satisfies the interchange contract before it
 * ever reaches the main toolkit.
 */

import { readFileSync } from 'node:fs';

import { metaPathFor } from './export.js';

export interface ValidatedLatents {
  ids: string[];
  yTrue: number[];
  yPred: number[];
  u: number[] | null;
  latents: number[][];
  numClasses: number;
  dim: number;
}

function parseCsvLine(line: string): string[] {
  const cells: string[] = [];
  let current = '';
  let quoted = false;
  for (let i = 0; i < line.length; i++) {
    const ch = line[i];
    if (quoted) {
      if (ch === '"' && line[i + 1] === '"') {
        current += '"';
        i += 1;
      } else if (ch === '"') {
        quoted = false;
      } else {
        current += ch;
      }
    } else if (ch === '"') {
      quoted = true;
    } else if (ch === ',') {
      cells.push(current);
      current = '';
    } else {
      current += ch;
    }
  }
  cells.push(current);
  return cells;
}

export function validateLatentCsv(csvPath: string): ValidatedLatents {
  const meta = JSON.parse(readFileSync(metaPathFor(csvPath), 'utf-8'));
  const numClasses = meta.num_classes;
  const dim = meta.dim;
  if (!Number.isInteger(numClasses) || numClasses < 2) {
    throw new Error(`metadata num_classes must be an integer >= 2, got ${numClasses}`);
  }
  if (!Number.isInteger(dim) || dim < 1) {
    throw new Error(`metadata dim must be an integer >= 1, got ${dim}`);
  }
  const text = readFileSync(csvPath, 'utf-8');
  const lines = text.split('\n');
  if (lines[lines.length - 1] === '') {
    lines.pop();
  }
  const header = parseCsvLine(lines[0]);
  const hasU = header[3] === 'u';
  const expected = ['id', 'y_true', 'y_pred', ...(hasU ? ['u'] : [])];
  for (let j = 0; j < dim; j++) {
    expected.push(`h${j}`);
  }
  if (header.join(',') !== expected.join(',')) {
    throw new Error(`malformed header, line 1: ${lines[0]}`);
  }
  const out: ValidatedLatents = {
    ids: [],
    yTrue: [],
    yPred: [],
    u: hasU ? [] : null,
    latents: [],
    numClasses,
    dim,
  };
  for (let i = 1; i < lines.length; i++) {
    const lineno = i + 1;
    const cells = parseCsvLine(lines[i]);
    if (cells.length !== header.length) {
      throw new Error(`ragged row, line ${lineno}`);
    }
    const yTrue = Number(cells[1]);
    const yPred = Number(cells[2]);
    if (!Number.isInteger(yPred) || yPred < 0 || yPred >= numClasses) {
      throw new Error(`class index out of range, line ${lineno}`);
    }
    if (!Number.isInteger(yTrue) || (yTrue !== -1 && (yTrue < 0 || yTrue >= numClasses))) {
      throw new Error(`class index out of range, line ${lineno}`);
    }
    let offset = 3;
    if (hasU) {
      const u = Number(cells[3]);
      if (!Number.isFinite(u) || u < 0 || u > 1) {
        throw new Error(`uncertainty outside [0, 1], line ${lineno}`);
      }
      out.u!.push(u);
      offset = 4;
    }
    const latent = cells.slice(offset).map((c) => {
      const v = Number(c);
      if (c.trim() === '' || !Number.isFinite(v)) {
        throw new Error(`non-numeric latent value, line ${lineno}`);
      }
      return v;
    });
    out.ids.push(cells[0]);
    out.yTrue.push(yTrue);
    out.yPred.push(yPred);
    out.latents.push(latent);
  }
  return out;
}
