//! Dimension evaluation: the closed-form lower-limit formula for homogeneous
//! perfect sets, exact minimal covering counts by greedy sweep, box-counting
//! regression on interval lists, images of level sets under catalog maps, and
//! the bounded-branching convergence diagnostics.

use astro_float::BigFloat;
use num::{One, Signed};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construction::{LevelSet, ParamSpec};
use crate::error::{Error, Result};
use crate::precision::FloatCtx;
use crate::qsmap::QsMap;
use crate::rational::{format_rat, rat_to_f64, rat_u64, Rat};

/// One term of the dimension formula.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimensionPartial {
    pub k: usize,
    /// `N_k` as a decimal string.
    pub numerator: String,
    /// The exact argument of the denominator log: interior gaps of level
    /// `k+1` plus `n_{k+1} * delta_{k+1}`.
    pub denominator_argument: String,
    /// `log N_k / -log(denominator_argument)`.
    pub value: f64,
    /// Variant with all of level `k+1`'s gaps included; the argument then
    /// telescopes to `delta_k`, giving `log N_k / -log delta_k`.
    pub value_with_end_gaps: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimensionReport {
    pub partials: Vec<DimensionPartial>,
    /// Minimum of the trailing window, clamped to [0,1].
    pub estimate: f64,
    pub estimate_raw: f64,
    pub window: usize,
}

/// The exact denominator argument of the level-`k` formula term.
fn denominator_argument(params: &ParamSpec, k: usize) -> Result<Rat> {
    let gaps = params.gap_lengths(k + 1)?;
    let n_next = params.branching(k + 1)?;
    let interior: Rat = gaps[1..gaps.len() - 1].iter().sum();
    Ok(interior + rat_u64(n_next) * params.delta(k + 1)?)
}

/// One term `log N_k / -log(sum of interior gaps + n_{k+1} delta_{k+1})`
/// of the dimension formula, `k >= 1`.
pub fn hausdorff_formula_partial(params: &ParamSpec, k: usize, ctx: &mut FloatCtx) -> Result<f64> {
    Ok(partial_pair(params, k, ctx)?.0)
}

fn partial_pair(params: &ParamSpec, k: usize, ctx: &mut FloatCtx) -> Result<(f64, f64, Rat)> {
    if k == 0 {
        return Err(Error::Range("formula terms start at k = 1".into()));
    }
    let arg = denominator_argument(params, k)?;
    if !arg.is_positive() || arg >= Rat::one() {
        return Err(Error::Degenerate(format!(
            "denominator argument {} outside (0,1) at k = {k}",
            format_rat(&arg)
        )));
    }
    let num = {
        let n = ctx.from_bigint(&params.count(k)?);
        ctx.ln(&n)
    };
    let den = ctx.ln_rat(&arg)?;
    let value = -ctx.to_f64(&ctx.div(&num, &den));
    let den_all = ctx.ln_rat(&params.delta(k)?)?;
    let value_all = -ctx.to_f64(&ctx.div(&num, &den_all));
    Ok((value, value_all, arg))
}

/// Evaluates partials for `k = 1..=k_max` and takes the minimum over the
/// trailing `window` terms as a finite stand-in for the lower limit.
pub fn hausdorff_formula_estimate(
    params: &ParamSpec,
    k_max: usize,
    window: usize,
    ctx: &mut FloatCtx,
) -> Result<DimensionReport> {
    if window == 0 || k_max < window {
        return Err(Error::Range(format!(
            "need k_max >= window >= 1, got k_max = {k_max}, window = {window}"
        )));
    }
    let mut partials = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let (value, value_with_end_gaps, arg) = partial_pair(params, k, ctx)?;
        partials.push(DimensionPartial {
            k,
            numerator: params.count(k)?.to_string(),
            denominator_argument: format_rat(&arg),
            value,
            value_with_end_gaps,
        });
    }
    let estimate_raw = partials[k_max - window..]
        .iter()
        .map(|p| p.value)
        .fold(f64::INFINITY, f64::min);
    Ok(DimensionReport {
        partials,
        estimate: estimate_raw.clamp(0.0, 1.0),
        estimate_raw,
        window,
    })
}

/// Minimal scalar interface shared by exact and floating covering counts.
pub trait CoverScalar: Clone + PartialOrd {
    fn add(&self, other: &Self) -> Self;
}

impl CoverScalar for f64 {
    fn add(&self, other: &Self) -> Self {
        self + other
    }
}

impl CoverScalar for Rat {
    fn add(&self, other: &Self) -> Self {
        self + other
    }
}

/// Exact minimal number of closed length-`eps` intervals covering the union,
/// by greedy left-to-right placement. Intervals must be sorted by left
/// endpoint; zero-length intervals (points) are allowed.
pub fn covering_count<T: CoverScalar>(intervals: &[(T, T)], eps: &T) -> Result<u64> {
    let mut count = 0u64;
    let mut covered_end: Option<T> = None;
    let mut prev_left: Option<&T> = None;
    for (l, r) in intervals {
        if l > r {
            return Err(Error::Geometry("interval with negative length".into()));
        }
        if let Some(p) = prev_left {
            if l < p {
                return Err(Error::Range("intervals must be sorted by left endpoint".into()));
            }
        }
        prev_left = Some(l);
        if matches!(&covered_end, Some(c) if c >= r) {
            continue;
        }
        let mut start = match &covered_end {
            Some(c) if c > l => c.clone(),
            _ => l.clone(),
        };
        loop {
            count += 1;
            let end = start.add(eps);
            if end < start {
                // Guards a non-positive eps sneaking through the generic path.
                return Err(Error::Range("cover length must be positive".into()));
            }
            if &end >= r {
                covered_end = Some(end);
                break;
            }
            start = end;
        }
    }
    Ok(count)
}

pub fn covering_count_rat(intervals: &[(Rat, Rat)], eps: &Rat) -> Result<u64> {
    if !eps.is_positive() {
        return Err(Error::Range("cover length must be positive".into()));
    }
    covering_count(intervals, eps)
}

pub fn covering_count_f64(intervals: &[(f64, f64)], eps: f64) -> Result<u64> {
    if !(eps > 0.0) {
        return Err(Error::Range("cover length must be positive".into()));
    }
    covering_count(intervals, &eps)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxCountReport {
    pub scales: Vec<f64>,
    pub counts: Vec<u64>,
    /// Least-squares slope of `log count` against `log(1/scale)`.
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square regression residual.
    pub residual: f64,
}

impl BoxCountReport {
    /// `(log(1/eps), log count)` pairs for external plotting.
    pub fn loglog_points(&self) -> Vec<(f64, f64)> {
        self.scales
            .iter()
            .zip(&self.counts)
            .map(|(s, c)| ((1.0 / s).ln(), (*c as f64).ln()))
            .collect()
    }
}

fn regress(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-12 {
        return Err(Error::Degenerate("scales span no range".into()));
    }
    let slope = (n * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / n;
    let residual = (points
        .iter()
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok((slope, intercept, residual))
}

fn box_report(scales: Vec<f64>, counts: Vec<u64>) -> Result<BoxCountReport> {
    let points: Vec<(f64, f64)> = scales
        .iter()
        .zip(&counts)
        .map(|(s, c)| ((1.0 / s).ln(), (*c as f64).ln()))
        .collect();
    let (slope, intercept, residual) = regress(&points)?;
    Ok(BoxCountReport {
        scales,
        counts,
        slope,
        intercept,
        residual,
    })
}

/// Box-counting slope over the given scales, counts by exact greedy sweep.
pub fn box_dim_estimate(intervals: &[(f64, f64)], scales: &[f64]) -> Result<BoxCountReport> {
    if scales.len() < 3 {
        return Err(Error::Range("need at least 3 scales".into()));
    }
    if scales.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Range("scales must be positive".into()));
    }
    let counts: Vec<u64> = scales
        .par_iter()
        .map(|eps| covering_count_f64(intervals, *eps))
        .collect::<Result<_>>()?;
    box_report(scales.to_vec(), counts)
}

/// Same regression with exact rational interval endpoints and scales.
pub fn box_dim_estimate_rat(intervals: &[(Rat, Rat)], scales: &[Rat]) -> Result<BoxCountReport> {
    if scales.len() < 3 {
        return Err(Error::Range("need at least 3 scales".into()));
    }
    if scales.iter().any(|s| !s.is_positive()) {
        return Err(Error::Range("scales must be positive".into()));
    }
    let counts: Vec<u64> = scales
        .par_iter()
        .map(|eps| covering_count_rat(intervals, eps))
        .collect::<Result<_>>()?;
    box_report(scales.iter().map(rat_to_f64).collect(), counts)
}

/// Images of all fundamental intervals of a level set, order preserved.
pub fn image_levelset(
    map: &QsMap,
    level: &LevelSet,
    digits: u32,
) -> Result<Vec<(BigFloat, BigFloat)>> {
    let images: Vec<(BigFloat, BigFloat)> = level
        .intervals
        .par_iter()
        .map_init(
            || FloatCtx::new(digits),
            |ctx, iv| map.image_interval(&iv.left, &iv.right, ctx),
        )
        .collect::<Result<_>>()?;
    let ctx = FloatCtx::new(digits);
    for (i, (a, b)) in images.iter().enumerate() {
        if !crate::precision::is_strictly_positive(&ctx.sub(b, a)) && !level.intervals[i].is_empty() {
            return Err(Error::Precision(format!(
                "image of interval {i} collapsed at working precision"
            )));
        }
        if i > 0 && ctx.sub(a, &images[i - 1].1).is_negative() {
            return Err(Error::Precision(format!(
                "images of intervals {} and {i} overlap at working precision",
                i - 1
            )));
        }
    }
    Ok(images)
}

/// f64 projection of [`image_levelset`] for covering-count pipelines.
pub fn image_levelset_f64(map: &QsMap, level: &LevelSet, digits: u32) -> Result<Vec<(f64, f64)>> {
    let ctx = FloatCtx::new(digits);
    Ok(image_levelset(map, level, digits)?
        .iter()
        .map(|(a, b)| (ctx.to_f64(a), ctx.to_f64(b)))
        .collect())
}

/// The three bounded-branching diagnostics, one value per `k = 1..=k_max`:
/// `(N_k delta_k)^(1/k)`, the running mean of `e_i^p`, and the running
/// density of levels with `e_i >= eps`, where `e_i` is the largest relative
/// gap of level `i`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlemaReport {
    pub total_length_root: Vec<f64>,
    pub gap_power_mean: Vec<f64>,
    pub large_gap_density: Vec<f64>,
}

pub fn mlema_checks(params: &ParamSpec, k_max: usize, p: f64, eps: f64) -> Result<MlemaReport> {
    if k_max == 0 {
        return Err(Error::Range("need k_max >= 1".into()));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Range(format!("exponent p = {p} outside (0,1]")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Range(format!("threshold eps = {eps} outside (0,1)")));
    }
    let mut total_length_root = Vec::with_capacity(k_max);
    let mut gap_power_mean = Vec::with_capacity(k_max);
    let mut large_gap_density = Vec::with_capacity(k_max);
    let mut length = Rat::one();
    let mut power_sum = 0.0;
    let mut large = 0usize;
    for k in 1..=k_max {
        let lp = params.level(k)?;
        length *= rat_u64(lp.branching) * &lp.ratio;
        let e_k = lp
            .rel_gaps
            .iter()
            .max()
            .map(rat_to_f64)
            .unwrap_or(0.0);
        power_sum += e_k.powf(p);
        if e_k >= eps {
            large += 1;
        }
        total_length_root.push(rat_to_f64(&length).powf(1.0 / k as f64));
        gap_power_mean.push(power_sum / k as f64);
        large_gap_density.push(large as f64 / k as f64);
    }
    Ok(MlemaReport {
        total_length_root,
        gap_power_mean,
        large_gap_density,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::{build_level, BranchingSeq, RatioSeq};
    use crate::rational::rat_ratio;

    fn rat(n: i64, d: i64) -> Rat {
        rat_ratio(n, d)
    }

    const LOG2_OVER_LOG3: f64 = 0.6309297535714574;
    const LOG3_OVER_LOG5: f64 = 0.6826061944859853;

    #[test]
    fn middle_thirds_partials_are_constant() {
        let p = ParamSpec::middle_thirds();
        let mut ctx = FloatCtx::new(50);
        for k in 1..=8 {
            let v = hausdorff_formula_partial(&p, k, &mut ctx).unwrap();
            assert!((v - LOG2_OVER_LOG3).abs() < 1e-12, "k = {k}: {v}");
        }
        let rep = hausdorff_formula_estimate(&p, 10, 5, &mut ctx).unwrap();
        assert!((rep.estimate - LOG2_OVER_LOG3).abs() < 1e-12);
        // With zero end gaps both denominator variants agree.
        for row in &rep.partials {
            assert!((row.value - row.value_with_end_gaps).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_cantor_three_fifths() {
        let p = ParamSpec::uniform_cantor(
            BranchingSeq::Constant(3),
            RatioSeq::Constant(rat(1, 5)),
        );
        let mut ctx = FloatCtx::new(50);
        // Interior gaps: 2 * (1/5) * delta_k; denominator argument telescopes
        // to delta_k = 5^-k, so every partial equals log3/log5.
        for k in 1..=6 {
            let v = hausdorff_formula_partial(&p, k, &mut ctx).unwrap();
            assert!((v - LOG3_OVER_LOG5).abs() < 1e-12, "k = {k}: {v}");
        }
    }

    #[test]
    fn full_interval_has_dimension_one() {
        let p = ParamSpec::full_interval();
        let mut ctx = FloatCtx::new(50);
        let rep = hausdorff_formula_estimate(&p, 10, 4, &mut ctx).unwrap();
        assert!((rep.estimate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dim1_family_estimate_approaches_one() {
        let p = ParamSpec::dim1_family();
        let mut ctx = FloatCtx::new(50);
        let v20 = hausdorff_formula_partial(&p, 20, &mut ctx).unwrap();
        assert!((v20 - 1.0).abs() < 0.05, "partial at 20: {v20}");
        let rep = hausdorff_formula_estimate(&p, 30, 10, &mut ctx).unwrap();
        assert!(rep.estimate >= 0.95, "estimate {}", rep.estimate);
        assert!(rep.estimate <= 1.0);
    }

    #[test]
    fn estimate_window_validation() {
        let p = ParamSpec::middle_thirds();
        let mut ctx = FloatCtx::new(30);
        assert!(hausdorff_formula_estimate(&p, 5, 0, &mut ctx).is_err());
        assert!(hausdorff_formula_estimate(&p, 3, 5, &mut ctx).is_err());
    }

    #[test]
    fn covering_count_examples() {
        let thirds = vec![(rat(0, 1), rat(1, 3)), (rat(2, 3), rat(1, 1))];
        assert_eq!(covering_count_rat(&thirds, &rat(1, 3)).unwrap(), 2);
        assert_eq!(covering_count_rat(&thirds, &rat(1, 1)).unwrap(), 1);
        let unit = vec![(rat(0, 1), rat(1, 1))];
        assert_eq!(covering_count_rat(&unit, &rat(1, 2)).unwrap(), 2);
        let points = vec![(0.0, 0.0), (1.0, 1.0)];
        assert_eq!(covering_count_f64(&points, 0.5).unwrap(), 2);
        assert!(covering_count_f64(&points, 0.0).is_err());
        assert!(covering_count_f64(&[(0.5, 0.25)], 0.1).is_err());
        assert!(covering_count_f64(&[(0.5, 0.6), (0.1, 0.2)], 0.1).is_err());
    }

    #[test]
    fn covering_count_merges_across_gaps() {
        // One cover interval spans both pieces when eps is large enough.
        let set = vec![(rat(0, 1), rat(1, 10)), (rat(2, 10), rat(3, 10))];
        assert_eq!(covering_count_rat(&set, &rat(3, 10)).unwrap(), 1);
        assert_eq!(covering_count_rat(&set, &rat(1, 10)).unwrap(), 2);
        // Touching intervals need no extra cover.
        let set = vec![(rat(0, 1), rat(1, 2)), (rat(1, 2), rat(1, 1))];
        assert_eq!(covering_count_rat(&set, &rat(1, 2)).unwrap(), 2);
    }

    #[test]
    fn box_dim_middle_thirds_matches_formula() {
        let set = build_level(&ParamSpec::middle_thirds(), 10).unwrap();
        let intervals: Vec<(Rat, Rat)> = set
            .intervals
            .iter()
            .map(|iv| (iv.left.clone(), iv.right.clone()))
            .collect();
        let scales: Vec<Rat> = (1..=8).map(|j| rat(1, 3i64.pow(j))).collect();
        let rep = box_dim_estimate_rat(&intervals, &scales).unwrap();
        // Counts are exactly 2^j at scale 3^-j.
        assert_eq!(rep.counts, (1..=8).map(|j| 1 << j).collect::<Vec<u64>>());
        assert!((rep.slope - LOG2_OVER_LOG3).abs() < 0.01);
        assert!(rep.residual < 1e-9);
    }

    #[test]
    fn box_dim_interval_and_points() {
        let unit = vec![(0.0f64, 1.0)];
        let scales: Vec<f64> = (1..=10).map(|j| 0.5f64.powi(j)).collect();
        let rep = box_dim_estimate(&unit, &scales).unwrap();
        assert!((rep.slope - 1.0).abs() < 0.01);

        let points = vec![(0.0, 0.0), (1.0, 1.0)];
        let rep = box_dim_estimate(&points, &scales).unwrap();
        assert!(rep.slope.abs() < 1e-12);

        assert!(box_dim_estimate(&unit, &[0.5, 0.25]).is_err());
        assert!(box_dim_estimate(&unit, &[0.5, 0.5, 0.5]).is_err());
    }

    #[test]
    fn image_levelset_examples() {
        let ctx = FloatCtx::new(50);
        let e1 = build_level(&ParamSpec::middle_thirds(), 1).unwrap();
        let id = image_levelset(&QsMap::Identity, &e1, 50).unwrap();
        assert_eq!(ctx.to_f64(&id[0].1), 1.0 / 3.0);
        assert_eq!(ctx.to_f64(&id[1].0), 2.0 / 3.0);

        let sq = image_levelset_f64(&QsMap::power(rat(2, 1)), &e1, 50).unwrap();
        assert!((sq[0].1 - 1.0 / 9.0).abs() < 1e-15);
        assert!((sq[1].0 - 4.0 / 9.0).abs() < 1e-15);
        assert!((sq[1].1 - 1.0).abs() < 1e-15);

        // Count and order preserved.
        let e6 = build_level(&ParamSpec::dim1_family(), 6).unwrap();
        let img = image_levelset_f64(&QsMap::power(rat(4, 5)), &e6, 50).unwrap();
        assert_eq!(img.len(), e6.len());
        for w in img.windows(2) {
            assert!(w[0].1 <= w[1].0);
        }
    }

    #[test]
    fn mlema_sequences() {
        // Middle thirds: N_k delta_k = (2/3)^k, so the root is constant 2/3.
        let rep = mlema_checks(&ParamSpec::middle_thirds(), 10, 0.5, 0.1).unwrap();
        for v in &rep.total_length_root {
            assert!((v - 2.0 / 3.0).abs() < 1e-12);
        }
        // Full interval: no gaps at all.
        let rep = mlema_checks(&ParamSpec::full_interval(), 8, 0.5, 0.1).unwrap();
        assert!(rep.total_length_root.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(rep.gap_power_mean.iter().all(|v| *v == 0.0));
        assert!(rep.large_gap_density.iter().all(|v| *v == 0.0));

        assert!(mlema_checks(&ParamSpec::middle_thirds(), 0, 0.5, 0.1).is_err());
        assert!(mlema_checks(&ParamSpec::middle_thirds(), 5, 1.5, 0.1).is_err());
        assert!(mlema_checks(&ParamSpec::middle_thirds(), 5, 0.5, 1.0).is_err());
    }

    #[test]
    fn mlema_dim1_family_trends() {
        let rep = mlema_checks(&ParamSpec::dim1_family(), 30, 0.5, 0.1).unwrap();
        assert!(rep.total_length_root[29] >= 0.90);
        assert!(rep.gap_power_mean[29] <= 0.15);
        assert!(rep.large_gap_density[29] <= 0.2);
        // Expected monotone directions over the last ten terms.
        for k in 20..29 {
            assert!(rep.total_length_root[k + 1] >= rep.total_length_root[k]);
            assert!(rep.gap_power_mean[k + 1] <= rep.gap_power_mean[k]);
            assert!(rep.large_gap_density[k + 1] <= rep.large_gap_density[k]);
        }
    }
}
