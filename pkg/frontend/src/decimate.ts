/**
 * Loss-chart decimation: keep the series at or under a point cap while
 * preserving order, the first point, and the latest point.
 */

export interface LossPoint {
  step: number;
  loss: number;
}

export const CHART_POINT_CAP = 5000;

/**
 * Append-only series with bounded size. When an append would exceed the cap
 * the series is thinned to every other interior point (endpoints kept), so
 * the result is always an order-preserving subsequence of everything pushed.
 */
export class DecimatedSeries {
  readonly cap: number;
  private points_: LossPoint[] = [];

  constructor(cap: number = CHART_POINT_CAP) {
    if (cap < 3) throw new Error("cap must be at least 3");
    this.cap = cap;
  }

  push(p: LossPoint): void {
    this.points_.push(p);
    if (this.points_.length > this.cap) {
      const kept: LossPoint[] = [this.points_[0]];
      for (let i = 1; i < this.points_.length - 1; i += 2) {
        kept.push(this.points_[i]);
      }
      kept.push(this.points_[this.points_.length - 1]);
      this.points_ = kept;
    }
  }

  get points(): readonly LossPoint[] {
    return this.points_;
  }

  get first(): LossPoint | undefined {
    return this.points_[0];
  }

  get last(): LossPoint | undefined {
    return this.points_[this.points_.length - 1];
  }
}

/** True when `sub` appears inside `full` in order (subsequence check). */
export function isOrderPreservingSubsequence(
  sub: readonly LossPoint[],
  full: readonly LossPoint[],
): boolean {
  let j = 0;
  for (const p of full) {
    if (j < sub.length && sub[j].step === p.step && sub[j].loss === p.loss) j++;
  }
  return j === sub.length;
}
