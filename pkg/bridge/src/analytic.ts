/**
 * Analytic conformance backend.
 *
 * For clean data x0 ~ N(mean, variance * I) mixed with noise under a
 * linear-beta retention schedule, the Bayes-optimal noise prediction has
 * a closed form, written out here independently so the bridge can serve
 * as a cross-language oracle for in-process implementations:
 *
 *     D        = abar * variance + (1 - abar)
 *     E[x0|z]  = (sqrt(abar) * variance * z + (1 - abar) * mean) / D
 *     eps      = (z - sqrt(abar) * E[x0|z]) / sqrt(1 - abar)
 */

export interface GaussianModel {
  mean: number;
  variance: number;
}

/**
 * Cumulative retention products alpha_bar_t for t = 0..steps.
 *
 * beta_t is linearly spaced over [betaStart, betaEnd] across the steps
 * (a single step uses betaStart alone); alpha_bar_t = prod (1 - beta_s),
 * with alpha_bar_0 = 1 exactly.
 */
export function alphaBarTable(steps: number, betaStart: number, betaEnd: number): Float64Array {
  if (!Number.isInteger(steps) || steps < 1) {
    throw new RangeError(`steps must be a positive integer, got ${steps}`);
  }
  if (!(betaStart > 0.0 && betaStart < 1.0) || !(betaEnd > 0.0 && betaEnd < 1.0)) {
    throw new RangeError(`betas must lie in (0, 1), got ${betaStart}..${betaEnd}`);
  }
  if (betaStart > betaEnd) {
    throw new RangeError("betaStart must not exceed betaEnd");
  }
  const table = new Float64Array(steps + 1);
  table[0] = 1.0;
  const step = steps === 1 ? 0.0 : (betaEnd - betaStart) / (steps - 1);
  let prod = 1.0;
  for (let i = 0; i < steps; i++) {
    // the endpoint is pinned exactly so tables agree across implementations
    const beta = steps > 1 && i === steps - 1 ? betaEnd : betaStart + step * i;
    prod *= 1.0 - beta;
    table[i + 1] = prod;
  }
  return table;
}

/** Predicted noise for one tensor; elementwise, shape-agnostic. */
export function iidEps(z: Float64Array, alphaBar: number, model: GaussianModel): Float64Array {
  if (!(alphaBar > 0.0 && alphaBar < 1.0)) {
    throw new RangeError(`alpha_bar must lie in (0, 1), got ${alphaBar}`);
  }
  if (!(model.variance > 0.0)) {
    throw new RangeError(`variance must be strictly positive, got ${model.variance}`);
  }
  const root = Math.sqrt(alphaBar);
  const denom = alphaBar * model.variance + (1.0 - alphaBar);
  const noiseRoot = Math.sqrt(1.0 - alphaBar);
  const out = new Float64Array(z.length);
  for (let i = 0; i < z.length; i++) {
    const post = (root * model.variance * z[i] + (1.0 - alphaBar) * model.mean) / denom;
    out[i] = (z[i] - root * post) / noiseRoot;
  }
  return out;
}
