import { mkdtempSync, readFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import * as path from 'node:path';
import { fileURLToPath } from 'node:url';

import { describe, expect, it } from 'vitest';

import { exportLatents, Sample } from '../src/export.js';
import { LayeredModel, argmax, normalizedEntropy, softmax } from '../src/model.js';
import { toyGrid, toyModel } from '../src/toy.js';
import { validateLatentCsv } from '../src/validate.js';

function tmpCsv(name: string): string {
  return path.join(mkdtempSync(path.join(tmpdir(), 'latent-exporter-')), name);
}

function identityModel(): LayeredModel {
  // logits layer only; the latent space of interest is "input"
  return new LayeredModel([
    {
      name: 'logits',
      weights: [
        [1, 0],
        [0, 1],
      ],
      bias: [0, 0],
      activation: 'linear',
    },
  ]);
}

describe('model math', () => {
  it('softmax is stable and sums to one', () => {
    const p = softmax([1000, 0, -5]);
    expect(p.every(Number.isFinite)).toBe(true);
    expect(p.reduce((a, b) => a + b, 0)).toBeCloseTo(1, 12);
  });

  it('argmax ties resolve to the lowest index', () => {
    expect(argmax([0.5, 0.5])).toBe(0);
  });

  it('entropy spans [0, 1]', () => {
    expect(normalizedEntropy([0.5, 0.5])).toBeCloseTo(1, 12);
    expect(normalizedEntropy([1, 0])).toBe(0);
  });
});

describe('exportLatents', () => {
  it('identity model exports inputs as latents', () => {
    const out = tmpCsv('id.csv');
    const samples: Sample[] = [
      { id: 'a', input: [0.25, -1.5], label: 0 },
      { id: 'b', input: [2.0, 0.125], label: 1 },
    ];
    exportLatents(identityModel(), [samples], 'input', out);
    const parsed = validateLatentCsv(out);
    expect(parsed.latents).toEqual([
      [0.25, -1.5],
      [2.0, 0.125],
    ]);
    expect(parsed.ids).toEqual(['a', 'b']);
  });

  it('every export passes the interchange validation', () => {
    const out = tmpCsv('toy.csv');
    const summary = exportLatents(toyModel(), [toyGrid()], 'hidden', out, { split: 'test' });
    const parsed = validateLatentCsv(out);
    expect(parsed.ids.length).toBe(summary.rows);
    expect(parsed.dim).toBe(4);
    expect(parsed.numClasses).toBe(3);
    expect(parsed.u!.every((u) => u >= 0 && u <= 1)).toBe(true);
    expect(parsed.yPred.every((y) => y >= 0 && y < 3)).toBe(true);
    expect(parsed.yTrue.some((y) => y === -1)).toBe(true);
  });

  it('meta JSON echoes the class count', () => {
    const out = tmpCsv('meta.csv');
    const summary = exportLatents(toyModel(), [toyGrid()], 'hidden', out);
    const meta = JSON.parse(readFileSync(summary.metaPath, 'utf-8'));
    expect(meta.num_classes).toBe(3);
    expect(meta.dim).toBe(4);
    expect(meta.u_source).toBe('entropy');
  });

  it('predictions are the softmax argmax of the logits', () => {
    const out = tmpCsv('pred.csv');
    const model = toyModel();
    exportLatents(model, [toyGrid()], 'hidden', out);
    const parsed = validateLatentCsv(out);
    toyGrid().forEach((sample, i) => {
      const { logits } = model.forward(sample.input);
      expect(parsed.yPred[i]).toBe(argmax(softmax(logits)));
    });
  });

  it('external uncertainty wins over the entropy default', () => {
    const out = tmpCsv('ext_u.csv');
    const samples: Sample[] = [{ id: 'a', input: [0, 0], label: 0, uncertainty: 0.75 }];
    exportLatents(identityModel(), [samples], 'input', out);
    expect(validateLatentCsv(out).u![0]).toBe(0.75);
  });

  it('rejects unknown layer names', () => {
    expect(() => exportLatents(identityModel(), [toyGrid()], 'missing', tmpCsv('x.csv'))).toThrow(
      /unknown layer/,
    );
  });

  it('rejects dimension drift between batches', () => {
    const twoD: Sample[] = [{ input: [1, 2], label: 0 }];
    const threeD: Sample[] = [{ input: [1, 2, 3], label: 0 }];
    expect(() =>
      exportLatents(identityModel(), [twoD, threeD], 'input', tmpCsv('drift.csv')),
    ).toThrow(/dimension/);
  });

  it('rejects labels outside {-1} and [0, C)', () => {
    const bad: Sample[] = [{ input: [0, 0], label: 7 }];
    expect(() => exportLatents(identityModel(), [bad], 'input', tmpCsv('bad.csv'))).toThrow(
      /label out of range/,
    );
  });

  it('quotes ids containing commas', () => {
    const out = tmpCsv('quote.csv');
    exportLatents(identityModel(), [[{ id: 'a,b', input: [1, 2], label: 0 }]], 'input', out);
    expect(validateLatentCsv(out).ids).toEqual(['a,b']);
  });

  it('is deterministic: same inputs, same bytes', () => {
    const a = tmpCsv('a.csv');
    const b = tmpCsv('b.csv');
    exportLatents(toyModel(), [toyGrid()], 'hidden', a);
    exportLatents(toyModel(), [toyGrid()], 'hidden', b);
    expect(readFileSync(a, 'utf-8')).toBe(readFileSync(b, 'utf-8'));
  });
});

describe('fixture', () => {
  it('checked-in fixture matches a fresh export byte for byte', () => {
    const fresh = tmpCsv('fixture.csv');
    exportLatents(toyModel(), [toyGrid()], 'hidden', fresh, {
      split: 'test',
      metaExtra: { exporter: 'latent-exporter', layer: 'hidden' },
    });
    const here = path.dirname(fileURLToPath(import.meta.url));
    const fixture = path.join(here, '..', 'fixtures', 'toy_latents.csv');
    expect(readFileSync(fresh, 'utf-8')).toBe(readFileSync(fixture, 'utf-8'));
  });
});
