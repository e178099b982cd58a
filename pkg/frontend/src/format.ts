import type { FdpUpper } from './api.js';

/** "3/7 ≈ 0.429", or just "0" / "1" when the fraction is degenerate. */
export function formatFraction(f: FdpUpper): string {
  if (f.num === 0) return '0';
  if (f.num === f.den) return '1';
  return `${f.num}/${f.den} ≈ ${f.float.toFixed(3)}`;
}

export function formatPercent(x: number): string {
  return `${(100 * x).toFixed(1)}%`;
}

/**
 * Guaranteed-true-discovery count shown in the banner:
 * floor((1 - bound) * |R|).
 */
export function bannerCount(boundFloat: number, setSize: number): number {
  return Math.floor((1 - boundFloat) * setSize);
}

export function bannerText(boundFloat: number, setSize: number): string {
  const n = bannerCount(boundFloat, setSize);
  return `≥ ${n} true ${n === 1 ? 'discovery' : 'discoveries'}`;
}

export function formatIds(ids: Array<string | number>, limit = 12): string {
  if (ids.length <= limit) return ids.join(', ');
  return `${ids.slice(0, limit).join(', ')}, … (${ids.length} total)`;
}
