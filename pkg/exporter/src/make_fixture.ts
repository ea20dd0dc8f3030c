/**
 * Regenerate the checked-in contract fixture: a three-class toy model's
 * penultimate-layer export over a deterministic input grid. The main
 * toolkit's test suite loads this file through its own CSV loader, which
 * pins the wire format between the two packages.
 */

import { mkdirSync } from 'node:fs';
import * as path from 'node:path';
import { fileURLToPath } from 'node:url';

import { exportLatents, Sample } from './export.js';
import { toyModel, toyGrid } from './toy.js';

const here = path.dirname(fileURLToPath(import.meta.url));
const fixtureDir = path.join(here, '..', 'fixtures');
mkdirSync(fixtureDir, { recursive: true });

const model = toyModel();
const batches: Sample[][] = [];
const grid = toyGrid();
for (let i = 0; i < grid.length; i += 4) {
  batches.push(grid.slice(i, i + 4));
}
const summary = exportLatents(model, batches, 'hidden', path.join(fixtureDir, 'toy_latents.csv'), {
  split: 'test',
  metaExtra: { exporter: 'latent-exporter', layer: 'hidden' },
});
console.log(`wrote ${summary.rows} rows (dim ${summary.latentDim}) to ${summary.csvPath}`);
