/** Deterministic toy model and input grid shared by tests and the fixture. */

import { LayeredModel } from './model.js';
import type { Sample } from './export.js';

/** Three-class model with a four-unit ReLU hidden layer ("hidden"). */
export function toyModel(): LayeredModel {
  return new LayeredModel([
    {
      name: 'hidden',
      weights: [
        [0.9, -0.3],
        [-0.5, 0.8],
        [0.2, 0.6],
        [-0.7, -0.4],
      ],
      bias: [0.1, -0.2, 0.05, 0.3],
      activation: 'relu',
    },
    {
      name: 'logits',
      weights: [
        [1.2, -0.4, 0.3, -0.6],
        [-0.8, 1.1, 0.5, 0.2],
        [0.1, 0.2, -0.9, 1.0],
      ],
      bias: [0.0, -0.1, 0.1],
      activation: 'linear',
    },
  ]);
}

/** 5x5 grid over [-2, 2]^2 with a deterministic label pattern, one OOD row. */
export function toyGrid(): Sample[] {
  const samples: Sample[] = [];
  let k = 0;
  for (let i = 0; i < 5; i++) {
    for (let j = 0; j < 5; j++) {
      const x = -2 + i;
      const y = -2 + j;
      const label = k === 24 ? -1 : k % 3;
      samples.push({ id: `g${String(k).padStart(3, '0')}`, input: [x, y], label });
      k += 1;
    }
  }
  return samples;
}
