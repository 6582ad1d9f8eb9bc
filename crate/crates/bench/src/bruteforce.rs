//! Tensorized adaptive quadrature for small dimensions, used as ground truth.

use nalgebra::{DMatrix, DVector};

use ilaplace::quad::{find_support_bounds, integrate_with_breaks};
use ilaplace::{Error, ModeInfo, Objective, Result};

/// Largest dimension the nested rule accepts.
pub const MAX_BRUTE_FORCE_DIM: usize = 3;

/// Per-level Gaussian regression of coordinate `k` on the leading ones,
/// used only to place breakpoints near the conditional peak.
struct Level {
    weights: DVector<f64>,
    sd: f64,
}

fn not_pd(mode: &ModeInfo) -> Error {
    Error::HessianNotPd {
        x: mode.x_hat.as_slice().to_vec(),
    }
}

fn regression_levels(mode: &ModeInfo, cov: &DMatrix<f64>) -> Result<Vec<Level>> {
    let d = mode.dim();
    let mut levels = Vec::with_capacity(d);
    for k in 0..d {
        if k == 0 {
            levels.push(Level {
                weights: DVector::zeros(0),
                sd: cov[(0, 0)].sqrt(),
            });
            continue;
        }
        let lead = cov.view((0, 0), (k, k)).into_owned();
        let cross = cov.view((0, k), (k, 1)).column(0).into_owned();
        let weights = lead
            .cholesky()
            .ok_or_else(|| not_pd(mode))?
            .solve(&cross);
        let var = cov[(k, k)] - weights.dot(&cross);
        levels.push(Level {
            weights,
            sd: var.max(f64::MIN_POSITIVE).sqrt(),
        });
    }
    Ok(levels)
}

fn breaks_in_box(lo: f64, hi: f64, center: f64, scale: f64) -> Vec<f64> {
    let center = center.clamp(lo, hi);
    let mut pts = vec![lo, hi];
    if lo < center && center < hi {
        pts.push(center);
    }
    let mut off = scale;
    while off < hi - lo {
        for p in [center - off, center + off] {
            if lo < p && p < hi {
                pts.push(p);
            }
        }
        off *= 2.0;
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Where a one-dimensional slice lives: its peak, a width at which the log
/// drops by about one half, and an interval outside of which it has dropped
/// by at least [`SLICE_TAIL_DROP`].
#[derive(Debug, Clone, Copy)]
struct SliceGeometry {
    peak: f64,
    width: f64,
    lo: f64,
    hi: f64,
}

const SLICE_TAIL_DROP: f64 = 50.0;
const MAX_STEPS: usize = 80;
const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Walks outwards from `center` in doubling steps until the slice has dropped
/// [`SLICE_TAIL_DROP`] below the highest value seen on both sides, then
/// refines the peak and measures its width. `None` when every probe is
/// `-inf`.
fn slice_geometry<F>(f: &mut F, center: f64, scale: f64) -> Result<Option<SliceGeometry>>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut probes = vec![(center, f(center)?)];
    let mut best = probes[0].1;
    let mut edges = [center; 2];
    for (side, sign) in [(0usize, -1.0f64), (1, 1.0)] {
        let mut offset = scale;
        let mut closed = false;
        for _ in 0..MAX_STEPS {
            let t = center + sign * offset;
            if !t.is_finite() {
                break;
            }
            let v = f(t)?;
            probes.push((t, v));
            best = best.max(v);
            edges[side] = t;
            if best.is_finite() && v < best - SLICE_TAIL_DROP {
                closed = true;
                break;
            }
            offset *= 2.0;
        }
        if !closed && best.is_finite() {
            return Err(Error::UnboundedProfile {
                side: if side == 0 { "lower" } else { "upper" },
                center,
                last_probe: edges[side],
            });
        }
    }
    if !best.is_finite() {
        return Ok(None);
    }

    probes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let i = probes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let (mut a, mut b) = (probes[i.saturating_sub(1)].0, probes[(i + 1).min(probes.len() - 1)].0);
    let (mut peak, mut peak_value) = probes[i];
    let tol = 0.05 * scale;
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    for _ in 0..MAX_STEPS {
        if b - a <= tol {
            break;
        }
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = f(x2)?;
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v > peak_value {
            peak = x;
            peak_value = v;
        }
    }

    let mut drop_at = |w: f64| -> Result<f64> { Ok(peak_value - f(peak - w)?.max(f(peak + w)?)) };
    let mut width = scale;
    if drop_at(width)? < 0.5 {
        for _ in 0..MAX_STEPS {
            width *= 2.0;
            if drop_at(width)? >= 0.5 {
                break;
            }
        }
    } else {
        for _ in 0..MAX_STEPS {
            if drop_at(0.5 * width)? < 0.5 {
                break;
            }
            width *= 0.5;
        }
    }

    let (lo, hi) = find_support_bounds(&mut *f, peak, width, SLICE_TAIL_DROP)?;
    Ok(Some(SliceGeometry {
        peak,
        width,
        lo: lo.min(edges[0]),
        hi: hi.max(edges[1]),
    }))
}

/// `log ∫ exp(-h(x)) dx` by nested adaptive Gauss-Kronrod quadrature, for
/// `obj.dim() <= 3`.
///
/// Every one-dimensional slice, including the log of each inner integral
/// seen as a function of the outer coordinates, gets its own peak search and
/// truncation interval. The Gaussian fitted at `mode` is used only for the
/// first guess of where each slice peaks. Inner integrals are computed to a
/// tighter tolerance than the outermost one.
pub fn brute_force_integral(obj: &Objective, mode: &ModeInfo, rel_tol: f64) -> Result<f64> {
    let d = obj.dim();
    if d > MAX_BRUTE_FORCE_DIM {
        return Err(Error::DimensionTooLarge {
            dim: d,
            max: MAX_BRUTE_FORCE_DIM,
        });
    }
    if mode.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: mode.dim(),
        });
    }
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "relative tolerance must be positive, got {rel_tol}"
        )));
    }
    let cov = mode
        .v_hat
        .clone()
        .cholesky()
        .ok_or_else(|| not_pd(mode))?
        .inverse();
    let oracle = Nested {
        obj,
        levels: regression_levels(mode, &cov)?,
        x_hat: mode.x_hat.as_slice(),
        h_hat: mode.h_hat,
        outer_tol: rel_tol,
        inner_tol: rel_tol.min((rel_tol * 1e-3).max(1e-13)),
    };
    let mut point = vec![0.0; d];
    let v = oracle.level(0, &mut point)?;
    if !v.is_finite() {
        return Err(Error::NonFiniteObjective {
            x: mode.x_hat.as_slice().to_vec(),
        });
    }
    Ok(v - mode.h_hat)
}

struct Nested<'a> {
    obj: &'a Objective,
    levels: Vec<Level>,
    x_hat: &'a [f64],
    h_hat: f64,
    outer_tol: f64,
    inner_tol: f64,
}

impl Nested<'_> {
    fn log_integrand(&self, x: &[f64]) -> Result<f64> {
        match self.obj.evaluate(x) {
            Ok(h) => Ok(self.h_hat - h),
            Err(Error::NonFiniteObjective { .. }) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    }

    /// Log of the integral over coordinates `k..` with `point[..k]` fixed.
    fn level(&self, k: usize, point: &mut [f64]) -> Result<f64> {
        let d = self.levels.len();
        let level = &self.levels[k];
        let guess = self.x_hat[k]
            + (0..k)
                .map(|j| level.weights[j] * (point[j] - self.x_hat[j]))
                .sum::<f64>();
        let mut slice = |t: f64| -> Result<f64> {
            point[k] = t;
            if k + 1 == d {
                self.log_integrand(point)
            } else {
                self.level(k + 1, point)
            }
        };
        let Some(geo) = slice_geometry(&mut slice, guess, level.sd)? else {
            return Ok(f64::NEG_INFINITY);
        };
        let tol = if k == 0 { self.outer_tol } else { self.inner_tol };
        let breaks = breaks_in_box(geo.lo, geo.hi, geo.peak, geo.width);
        match integrate_with_breaks(slice, &breaks, tol, 1e-300) {
            Ok(r) => Ok(r.log_value),
            Err(Error::NonFiniteObjective { .. }) if k > 0 => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    }
}
