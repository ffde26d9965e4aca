/**
 * Dual-handle iteration range slider.
 *
 * Two overlaid native range inputs; handle crossings swap lo/hi. Changes are
 * debounced before reaching the callback so a drag costs one refetch.
 */

import { debounce } from './state.js';
import type { Range } from './state.js';

export const SLIDER_DEBOUNCE_MS = 250;

/** Order a pair and clamp it into bounds. */
export function clampPair(a: number, b: number, bounds: Range): Range {
  const lo = Math.min(Math.max(Math.min(a, b), bounds[0]), bounds[1]);
  const hi = Math.min(Math.max(Math.max(a, b), bounds[0]), bounds[1]);
  return [lo, hi];
}

export interface RangeSlider {
  el: HTMLElement;
  /** Move the handles without firing the callback. */
  set(range: Range): void;
  destroy(): void;
}

export function createRangeSlider(
  container: HTMLElement,
  bounds: Range,
  onChange: (range: Range) => void,
  debounceMs = SLIDER_DEBOUNCE_MS,
): RangeSlider {
  const el = document.createElement('div');
  el.className = 'range-slider';

  const readout = document.createElement('span');
  readout.className = 'range-readout';

  const track = document.createElement('div');
  track.className = 'range-track';
  const loInput = document.createElement('input');
  const hiInput = document.createElement('input');
  for (const input of [loInput, hiInput]) {
    input.type = 'range';
    input.min = String(bounds[0]);
    input.max = String(bounds[1]);
    input.step = '1';
    track.appendChild(input);
  }
  loInput.value = String(bounds[0]);
  hiInput.value = String(bounds[1]);
  loInput.className = 'range-lo';
  hiInput.className = 'range-hi';

  const show = ([lo, hi]: Range) => {
    readout.textContent = `iterations ${lo}–${hi}`;
  };
  show(bounds);

  const fire = debounce((range: Range) => onChange(range), debounceMs);
  const onInput = () => {
    const range = clampPair(Number(loInput.value), Number(hiInput.value), bounds);
    show(range);
    fire(range);
  };
  loInput.addEventListener('input', onInput);
  hiInput.addEventListener('input', onInput);

  el.append(track, readout);
  container.appendChild(el);
  return {
    el,
    set(range: Range): void {
      fire.cancel();
      loInput.value = String(range[0]);
      hiInput.value = String(range[1]);
      show(range);
    },
    destroy(): void {
      fire.cancel();
      el.remove();
    },
  };
}
