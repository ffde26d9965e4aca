import { describe, expect, it } from 'vitest';

import { colorForMetric, diverging, isDivergingMetric, lerpHex, NEUTRAL, roundHalfEven, sequential } from '../src/color.js';

describe('roundHalfEven', () => {
  it('matches banker rounding on halves', () => {
    expect(roundHalfEven(127.5)).toBe(128);
    expect(roundHalfEven(154.5)).toBe(154);
    expect(roundHalfEven(2.5)).toBe(2);
    expect(roundHalfEven(3.5)).toBe(4);
  });

  it('rounds non-halves normally', () => {
    expect(roundHalfEven(1.49)).toBe(1);
    expect(roundHalfEven(1.51)).toBe(2);
    expect(roundHalfEven(7)).toBe(7);
  });
});

describe('sequential ramp', () => {
  // values recomputed with an independent reference implementation
  it('reproduces the reference ramp exactly', () => {
    expect(sequential(0.0)).toBe('#e2e8f0');
    expect(sequential(0.25)).toBe('#b1c2ea');
    expect(sequential(0.5)).toBe('#809be4');
    expect(sequential(0.75)).toBe('#4e74de');
    expect(sequential(1.0)).toBe('#1d4ed8');
  });

  it('clamps outside [0, 1]', () => {
    expect(sequential(-0.5)).toBe('#e2e8f0');
    expect(sequential(2.0)).toBe('#1d4ed8');
  });
});

describe('diverging ramp', () => {
  it('reproduces the reference ramp exactly', () => {
    expect(diverging(-1.0)).toBe('#c2410c');
    expect(diverging(-0.5)).toBe('#dd9e84');
    expect(diverging(-0.25)).toBe('#eaccc0');
    expect(diverging(0.0)).toBe('#f8fafc');
    expect(diverging(0.25)).toBe('#c1cff3');
    expect(diverging(0.5)).toBe('#8aa4ea');
    expect(diverging(1.0)).toBe('#1d4ed8');
  });
});

describe('lerpHex', () => {
  it('hits both endpoints', () => {
    expect(lerpHex('#000000', '#ffffff', 0)).toBe('#000000');
    expect(lerpHex('#000000', '#ffffff', 1)).toBe('#ffffff');
  });
});

describe('colorForMetric', () => {
  it('routes odds_score and correlation to the diverging ramp', () => {
    expect(isDivergingMetric('odds_score')).toBe(true);
    expect(isDivergingMetric('correlation')).toBe(true);
    expect(isDivergingMetric('reward')).toBe(false);
    expect(isDivergingMetric('loss')).toBe(false);
  });

  it('centers diverging metrics at zero, scaled by max magnitude', () => {
    // domain [-0.5, 1.0] -> scale 1.0, so -0.5 maps to diverging(-0.5)
    expect(colorForMetric('odds_score', -0.5, [-0.5, 1.0])).toBe(diverging(-0.5));
    expect(colorForMetric('odds_score', 0, [-0.5, 1.0])).toBe('#f8fafc');
    expect(colorForMetric('correlation', 1.0, [-0.5, 1.0])).toBe('#1d4ed8');
  });

  it('maps sequential metrics over [min, max]', () => {
    expect(colorForMetric('reward', 0, [0, 4])).toBe('#e2e8f0');
    expect(colorForMetric('reward', 4, [0, 4])).toBe('#1d4ed8');
    expect(colorForMetric('loss', 2, [0, 4])).toBe(sequential(0.5));
  });

  it('maps absent values to the neutral fill', () => {
    expect(colorForMetric('correlation', null, [-1, 1])).toBe(NEUTRAL);
    expect(colorForMetric('reward', undefined, [0, 1])).toBe(NEUTRAL);
    expect(colorForMetric('loss', Number.NaN, [0, 1])).toBe(NEUTRAL);
  });

  it('degrades gracefully on degenerate domains', () => {
    expect(colorForMetric('reward', 3, [3, 3])).toBe(sequential(0.5));
    expect(colorForMetric('odds_score', 0, [0, 0])).toBe('#f8fafc');
  });
});
