//! One-dimensional adaptive quadrature of `exp(g(t))` over the real line.
//!
//! The real line is truncated by an outward doubling search until the log
//! profile has dropped a fixed amount below its central value, and the
//! resulting interval is integrated with a Gauss-Kronrod (7/15) rule under
//! worst-panel-first bisection. All arithmetic is done on the peak-shifted
//! integrand `exp(g(t) - peak)`, so profiles whose log values are far from
//! zero neither overflow nor underflow.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

pub const DEFAULT_REL_TOL: f64 = 1e-8;
pub const DEFAULT_ABS_TOL: f64 = 1e-12;
pub const DEFAULT_TAIL_DROP: f64 = 30.0;
pub const MAX_PANELS: usize = 2000;
const MAX_DOUBLINGS: usize = 60;

// Kronrod 15-point abscissae on [0, 1] (symmetric), with the 7-point Gauss
// rule embedded at the odd positions.
const XK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Outcome of one scalar re-normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureResult {
    /// `log ∫ exp(g(t)) dt`.
    pub log_value: f64,
    /// Error estimate for the peak-shifted integral `∫ exp(g(t) - peak) dt`.
    pub abs_err_est: f64,
    pub n_evals: usize,
    pub panels: usize,
    /// Shift applied before exponentiation.
    pub peak: f64,
    pub lo: f64,
    pub hi: f64,
}

impl QuadratureResult {
    /// The peak-shifted integral whose error `abs_err_est` describes.
    pub fn shifted_value(&self) -> f64 {
        (self.log_value - self.peak).exp()
    }
}

fn check_log_value(t: f64, v: f64) -> Result<f64> {
    if v.is_nan() || v == f64::INFINITY {
        Err(Error::NonFiniteObjective { x: vec![t] })
    } else {
        Ok(v)
    }
}

/// Finds `lo < center < hi` with `log_f` at both ends at least `tail_drop`
/// below `log_f(center)`. Probes start at `center ± 3·scale` and double
/// their distance from `center`.
pub fn find_support_bounds<F>(
    mut log_f: F,
    center: f64,
    scale: f64,
    tail_drop: f64,
) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(scale > 0.0) || !scale.is_finite() || !(tail_drop > 0.0) || !center.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "support search needs finite center and positive scale/tail_drop \
             (center {center}, scale {scale}, tail_drop {tail_drop})"
        )));
    }
    let peak = check_log_value(center, log_f(center)?)?;
    let threshold = peak - tail_drop;
    let mut search = |sign: f64, side: &'static str| -> Result<f64> {
        let mut offset = 3.0 * scale;
        let mut probe = center;
        for _ in 0..MAX_DOUBLINGS {
            probe = center + sign * offset;
            if !probe.is_finite() {
                break;
            }
            let v = check_log_value(probe, log_f(probe)?)?;
            if v <= threshold {
                return Ok(probe);
            }
            offset *= 2.0;
        }
        Err(Error::UnboundedProfile {
            side,
            center,
            last_probe: probe,
        })
    };
    let lo = search(-1.0, "lower")?;
    let hi = search(1.0, "upper")?;
    Ok((lo, hi))
}

#[derive(Debug, Clone)]
struct Panel {
    a: f64,
    b: f64,
    kronrod: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        // worst error first; ties broken by position for determinism
        self.err
            .total_cmp(&other.err)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Log values of the 15 Kronrod nodes on `[a, b]`, ordered left to right.
fn panel_log_values<F>(log_f: &mut F, a: f64, b: f64) -> Result<[f64; 15]>
where
    F: FnMut(f64) -> Result<f64>,
{
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let mut out = [0.0; 15];
    for i in 0..7 {
        let t = c - hw * XK[i];
        out[i] = check_log_value(t, log_f(t)?)?;
    }
    out[7] = check_log_value(c, log_f(c)?)?;
    for i in 0..7 {
        let t = c + hw * XK[6 - i];
        out[8 + i] = check_log_value(t, log_f(t)?)?;
    }
    Ok(out)
}

fn panel_from_values(a: f64, b: f64, lv: &[f64; 15], peak: f64) -> Panel {
    let hw = 0.5 * (b - a);
    let f = |i: usize| (lv[i] - peak).exp();
    let mut kronrod = WK[7] * f(7);
    let mut gauss = WG[3] * f(7);
    for i in 0..7 {
        let pair = f(i) + f(14 - i);
        kronrod += WK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    Panel {
        a,
        b,
        kronrod: kronrod * hw,
        err: ((kronrod - gauss) * hw).abs(),
    }
}

fn max_finite(lv: &[f64]) -> f64 {
    lv.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Adaptive Gauss-Kronrod integration of `exp(log_f)` over `[lo, hi]`.
pub fn integrate_adaptive<F>(
    log_f: F,
    lo: f64,
    hi: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<QuadratureResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    integrate_with_breaks(log_f, &[lo, hi], rel_tol, abs_tol)
}

/// Like [`integrate_adaptive`], starting from the initial partition given by
/// the sorted breakpoints `breaks` (first and last entries are the limits).
pub fn integrate_with_breaks<F>(
    mut log_f: F,
    breaks: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<QuadratureResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if breaks.len() < 2
        || breaks.iter().any(|b| !b.is_finite())
        || breaks.windows(2).any(|w| !(w[0] < w[1]))
    {
        return Err(Error::InvalidParameter(format!(
            "integration breakpoints must be finite and strictly increasing: {breaks:?}"
        )));
    }
    if !(rel_tol > 0.0) || !(abs_tol > 0.0) {
        return Err(Error::InvalidParameter(
            "quadrature tolerances must be positive".into(),
        ));
    }

    // First pass: evaluate the initial partition and fix the peak shift.
    let mut first = Vec::with_capacity(breaks.len() - 1);
    for w in breaks.windows(2) {
        first.push((w[0], w[1], panel_log_values(&mut log_f, w[0], w[1])?));
    }
    let mut n_evals = 15 * first.len();
    let mut peak = first
        .iter()
        .map(|(_, _, lv)| max_finite(lv))
        .fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return Err(Error::NonFiniteObjective {
            x: vec![breaks[0], breaks[breaks.len() - 1]],
        });
    }

    let mut heap: BinaryHeap<Panel> = first
        .iter()
        .map(|(a, b, lv)| panel_from_values(*a, *b, lv, peak))
        .collect();

    let totals = |heap: &BinaryHeap<Panel>| -> (f64, f64) {
        heap.iter()
            .fold((0.0, 0.0), |(v, e), p| (v + p.kronrod, e + p.err))
    };

    loop {
        let (value, err) = totals(&heap);
        if err <= abs_tol.max(rel_tol * value.abs()) {
            break;
        }
        if heap.len() >= MAX_PANELS {
            return Err(Error::ToleranceNotMet {
                panels: heap.len(),
                abs_err_est: err,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            return Err(Error::ToleranceNotMet {
                panels: heap.len() + 1,
                abs_err_est: err,
            });
        }
        let left = panel_log_values(&mut log_f, worst.a, mid)?;
        let right = panel_log_values(&mut log_f, mid, worst.b)?;
        n_evals += 30;

        let local_max = max_finite(&left).max(max_finite(&right));
        if local_max > peak {
            // Re-shift everything already integrated so values stay <= 1.
            let factor = (peak - local_max).exp();
            peak = local_max;
            heap = heap
                .into_iter()
                .map(|mut p| {
                    p.kronrod *= factor;
                    p.err *= factor;
                    p
                })
                .collect();
        }
        heap.push(panel_from_values(worst.a, mid, &left, peak));
        heap.push(panel_from_values(mid, worst.b, &right, peak));
    }

    let mut panels = heap.into_vec();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value: f64 = panels.iter().map(|p| p.kronrod).sum();
    let abs_err_est: f64 = panels.iter().map(|p| p.err).sum();
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::NonFiniteObjective {
            x: vec![breaks[0], breaks[breaks.len() - 1]],
        });
    }
    Ok(QuadratureResult {
        log_value: peak + value.ln(),
        abs_err_est,
        n_evals,
        panels: panels.len(),
        peak,
        lo: breaks[0],
        hi: breaks[breaks.len() - 1],
    })
}

/// Breakpoints at `center ± scale·2^j`, clipped to `[lo, hi]`.
fn geometric_breaks(lo: f64, hi: f64, center: f64, scale: f64) -> Vec<f64> {
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut offset = scale;
    while center - offset > lo {
        left.push(center - offset);
        offset *= 2.0;
    }
    offset = scale;
    while center + offset < hi {
        right.push(center + offset);
        offset *= 2.0;
    }
    let mut breaks = Vec::with_capacity(left.len() + right.len() + 3);
    breaks.push(lo);
    breaks.extend(left.into_iter().rev());
    if lo < center && center < hi {
        breaks.push(center);
    }
    breaks.extend(right);
    breaks.push(hi);
    breaks
}

/// `log ∫ exp(log_f(t)) dt` over the real line, for a unimodal log profile
/// centred near `center` with spread of order `scale`.
pub fn normalize_profile<F>(
    log_f: F,
    center: f64,
    scale: f64,
    rel_tol: f64,
) -> Result<QuadratureResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    normalize_profile_with(log_f, center, scale, rel_tol, DEFAULT_ABS_TOL, DEFAULT_TAIL_DROP)
}

/// [`normalize_profile`] with explicit absolute tolerance and tail drop.
pub fn normalize_profile_with<F>(
    mut log_f: F,
    center: f64,
    scale: f64,
    rel_tol: f64,
    abs_tol: f64,
    tail_drop: f64,
) -> Result<QuadratureResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (lo, hi) = find_support_bounds(&mut log_f, center, scale, tail_drop)?;
    let breaks = geometric_breaks(lo, hi, center, scale);
    integrate_with_breaks(log_f, &breaks, rel_tol, abs_tol)
}
