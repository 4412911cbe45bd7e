//! Mass distributions on images of level sets and the machinery that turns
//! them into dimension lower-bound certificates: per-node masses split in
//! proportion to image lengths raised to an exponent `d`, ratio products
//! along root-to-leaf chains, the small-gap index set with its threshold
//! constants, Frostman-type `mu(J) <= C |J|^d` sweeps, and window checks
//! bounding how many component intervals a short interval can meet.

use astro_float::BigFloat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construction::{extend_level, root_level, ParamSpec};
use crate::dimension::image_levelset;
use crate::error::{Error, Result};
use crate::precision::FloatCtx;
use crate::qsmap::{pq_exponents, QsMap};
use crate::rational::rat_to_f64;

/// Picks the mass exponent inside its legal interval: `(0,1)` when `q = 1`,
/// `(1/q, 1)` when `q > 1`.
pub fn choose_d(q: f64, fraction: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::Range(format!("exponent q = {q} must be >= 1")));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Range(format!("fraction {fraction} outside (0,1)")));
    }
    let lower = if q == 1.0 { 0.0 } else { 1.0 / q };
    Ok(lower + fraction * (1.0 - lower))
}

/// Constants attached to a lower-bound certificate run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CertificateConstants {
    /// One more than the largest branching count on the inspected prefix.
    pub n_sup: u64,
    /// Small-gap threshold `1 - ((4N+4)/(4N+5))^(1/(4N+4))`.
    pub a: f64,
    pub m: f64,
    pub p: f64,
    pub q: f64,
    pub d: f64,
    /// `A = (1+M)^-2 / (2N)^q`, a lower bound for image child/parent ratios.
    pub a_lower: f64,
    /// `alpha2 = (1+A)^(1-d) > 1` for `d < 1`.
    pub alpha2: f64,
}

impl CertificateConstants {
    pub fn new(params: &ParamSpec, prefix: usize, m: f64, d: f64) -> Result<Self> {
        if !(d > 0.0 && d < 1.0) {
            return Err(Error::Range(format!("mass exponent d = {d} outside (0,1)")));
        }
        let mut sup = 0u64;
        for k in 1..=prefix {
            sup = sup.max(params.branching(k)?);
        }
        let n_sup = 1 + sup;
        let e = pq_exponents(m)?;
        let nf = n_sup as f64;
        let root = 4.0 * nf + 4.0;
        let a = 1.0 - ((root) / (root + 1.0)).powf(1.0 / root);
        let a_lower = (1.0 + m).powi(-2) / (2.0 * nf).powf(e.q);
        let alpha2 = (1.0 + a_lower).powf(1.0 - d);
        Ok(CertificateConstants {
            n_sup,
            a,
            m,
            p: e.p,
            q: e.q,
            d,
            a_lower,
            alpha2,
        })
    }
}

/// Both sides of `1 - m x >= (1-x)^(m+1)`.
pub fn gap_inequality_sides(m: u32, x: f64) -> (f64, f64) {
    (1.0 - m as f64 * x, (1.0 - x).powi(m as i32 + 1))
}

/// Upper end of the `x` range on which the inequality is guaranteed:
/// `1 - (m/(m+1))^(1/m)`.
pub fn gap_inequality_range(m: u32) -> f64 {
    let mf = m as f64;
    1.0 - (mf / (mf + 1.0)).powf(1.0 / mf)
}

/// Membership report for the small-gap index set: level `i` belongs when
/// `e_i^p <= min(a, delta_i^p)`, where `e_i` is the largest relative gap of
/// the level and `delta_i` the fundamental interval length.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmallGapReport {
    pub membership: Vec<bool>,
    pub density: f64,
    pub a_threshold: f64,
}

fn max_rel_gap(params: &ParamSpec, i: usize) -> Result<f64> {
    Ok(params
        .level(i)?
        .rel_gaps
        .iter()
        .max()
        .map(rat_to_f64)
        .unwrap_or(0.0))
}

fn skp_with_threshold(params: &ParamSpec, p: f64, k: usize, a: f64) -> Result<Vec<bool>> {
    let deltas = params.delta_prefix(k)?;
    let mut member = Vec::with_capacity(k);
    for i in 1..=k {
        let e_i = max_rel_gap(params, i)?;
        let delta_i = rat_to_f64(&deltas[i]);
        member.push(e_i.powf(p) <= a.min(delta_i.powf(p)));
    }
    Ok(member)
}

pub fn skp_set(params: &ParamSpec, p: f64, k: usize) -> Result<SmallGapReport> {
    if k == 0 {
        return Err(Error::Range("need k >= 1".into()));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Range(format!("exponent p = {p} outside (0,1]")));
    }
    let mut sup = 0u64;
    for i in 1..=k {
        sup = sup.max(params.branching(i)?);
    }
    let nf = (1 + sup) as f64;
    let root = 4.0 * nf + 4.0;
    let a = 1.0 - (root / (root + 1.0)).powf(1.0 / root);
    let membership = skp_with_threshold(params, p, k, a)?;
    let density = membership.iter().filter(|m| **m).count() as f64 / k as f64;
    Ok(SmallGapReport {
        membership,
        density,
        a_threshold: a,
    })
}

/// The two aggregate factors bounding a ratio product from below.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LowerBoundFactors {
    pub xi: f64,
    pub zeta: f64,
    pub skp_density: f64,
}

/// Computes `xi_k` and `zeta_k` from the certificate constants and the
/// small-gap membership on levels `1..=k`.
pub fn lower_bound_factors(
    params: &ParamSpec,
    constants: &CertificateConstants,
    k: usize,
) -> Result<LowerBoundFactors> {
    let membership = skp_with_threshold(params, constants.p, k, constants.a)?;
    let s = membership.iter().filter(|m| **m).count();
    let outside = (k - s) as f64;
    let nd = rat_to_f64(&params.total_length(k)?);
    let d = constants.d;
    let q = constants.q;
    let xi = if d * q > 1.0 {
        constants.alpha2.powi(s as i32)
            * (1.0 + constants.m).powf(-2.0 * d * outside)
            * nd.powf(d * q)
            * (constants.n_sup as f64).powf((1.0 - d * q) * outside)
    } else {
        // For d*q <= 1 the non-member product is bounded by the total
        // length directly; the branching correction would point the wrong
        // way there.
        constants.alpha2.powi(s as i32) * (1.0 + constants.m).powf(-2.0 * d * outside) * nd
    };
    let mut zeta = 1.0;
    for (i, member) in membership.iter().enumerate() {
        if *member {
            let level = i + 1;
            let e_i = max_rel_gap(params, level)?;
            let n_i = params.branching(level)? as f64;
            zeta *= (1.0 - e_i.powf(constants.p)).powf((4.0 * n_i + 4.0) * d);
        }
    }
    Ok(LowerBoundFactors {
        xi,
        zeta,
        skp_density: s as f64 / k as f64,
    })
}

struct MeasureLevel {
    intervals: Vec<(BigFloat, BigFloat)>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    masses: Vec<BigFloat>,
    /// `|image interval|^d` per node, computed once and reused everywhere.
    weights: Vec<BigFloat>,
    /// Sum of the children's weights; empty on the last level.
    child_norm: Vec<BigFloat>,
}

/// Computes `len^d`, reusing the previous result when the length repeats
/// (on uniform families all lengths of a level coincide, which turns the
/// expensive general power into one call per level).
fn weight_of(
    ctx: &mut FloatCtx,
    memo: &mut Option<(BigFloat, BigFloat)>,
    len: &BigFloat,
    d: &BigFloat,
) -> BigFloat {
    if let Some((l, w)) = memo {
        if crate::precision::fcmp(l, len) == std::cmp::Ordering::Equal {
            return w.clone();
        }
    }
    let w = ctx.pow_any(len, d);
    *memo = Some((len.clone(), w.clone()));
    w
}

/// A probability distribution on the image of a level set, splitting each
/// node's mass among its children in proportion to `|child image|^d`.
pub struct MassDistribution {
    d: f64,
    map: QsMap,
    digits: u32,
    branchings: Vec<u64>,
    levels: Vec<MeasureLevel>,
    /// Prefix sums of the deepest-level masses, length `leaves + 1`.
    leaf_prefix: Vec<BigFloat>,
}

impl MassDistribution {
    /// Builds the distribution for `map` applied to the level sets of
    /// `params`, down to `depth`.
    pub fn build(
        params: &ParamSpec,
        map: &QsMap,
        depth: usize,
        d: f64,
        digits: u32,
    ) -> Result<Self> {
        let d_prec = FloatCtx::new(digits).from_f64(d);
        Self::build_with_exponent(params, map, depth, &d_prec, digits)
    }

    /// Like [`MassDistribution::build`] with the exponent given at full
    /// working precision.
    pub fn build_with_exponent(
        params: &ParamSpec,
        map: &QsMap,
        depth: usize,
        d: &BigFloat,
        digits: u32,
    ) -> Result<Self> {
        map.validate()?;
        let mut image_levels = Vec::with_capacity(depth + 1);
        let mut branchings = Vec::with_capacity(depth);
        let mut level = root_level();
        loop {
            image_levels.push(image_levelset(map, &level, digits)?);
            if level.level() == depth {
                break;
            }
            level = extend_level(params, &level)?;
            branchings.push(params.branching(level.level())?);
        }
        Self::from_image_levels_with_exponent(image_levels, branchings, map.clone(), d, digits)
    }

    /// Builds the distribution from already-imaged levels; level `k` must
    /// hold exactly `branchings[k-1]` children per level-`k-1` node.
    pub fn from_image_levels(
        image_levels: Vec<Vec<(BigFloat, BigFloat)>>,
        branchings: Vec<u64>,
        map: QsMap,
        d: f64,
        digits: u32,
    ) -> Result<Self> {
        let d_prec = FloatCtx::new(digits).from_f64(d);
        Self::from_image_levels_with_exponent(image_levels, branchings, map, &d_prec, digits)
    }

    pub fn from_image_levels_with_exponent(
        image_levels: Vec<Vec<(BigFloat, BigFloat)>>,
        branchings: Vec<u64>,
        map: QsMap,
        d: &BigFloat,
        digits: u32,
    ) -> Result<Self> {
        let ctx = FloatCtx::new(digits);
        let d_f64 = ctx.to_f64(d);
        if !(d_f64 > 0.0 && d_f64 < 1.0) {
            return Err(Error::Range(format!(
                "mass exponent d = {d_f64} outside (0,1)"
            )));
        }
        if image_levels.is_empty() || image_levels[0].len() != 1 {
            return Err(Error::Range("level 0 must hold exactly the root".into()));
        }
        if image_levels.len() != branchings.len() + 1 {
            return Err(Error::Range("one branching count per level is required".into()));
        }
        let depth = branchings.len();
        for (k, level) in image_levels.iter().enumerate() {
            if k > 0 && level.len() != image_levels[k - 1].len() * branchings[k - 1] as usize {
                return Err(Error::Range(format!(
                    "level {k} holds {} intervals, expected {}",
                    level.len(),
                    image_levels[k - 1].len() * branchings[k - 1] as usize
                )));
            }
            for (a, b) in level {
                if !crate::precision::is_strictly_positive(&ctx.sub(b, a)) {
                    return Err(Error::Degenerate(format!(
                        "zero-length image interval at level {k}"
                    )));
                }
            }
        }

        let mut levels: Vec<MeasureLevel> = Vec::with_capacity(depth + 1);
        for (k, intervals) in image_levels.into_iter().enumerate() {
            let lo: Vec<f64> = intervals.iter().map(|iv| ctx.to_f64(&iv.0)).collect();
            let hi: Vec<f64> = intervals.iter().map(|iv| ctx.to_f64(&iv.1)).collect();
            let (masses, weights) = if k == 0 {
                let mut c = FloatCtx::new(digits);
                let len = c.sub(&intervals[0].1, &intervals[0].0);
                let w = c.pow_any(&len, d);
                (vec![c.one()], vec![w])
            } else {
                let n = branchings[k - 1] as usize;
                let parent = &levels[k - 1];
                // Per parent: child masses, child weights, then the norm.
                let split: Vec<(Vec<BigFloat>, Vec<BigFloat>, BigFloat)> = parent
                    .masses
                    .par_iter()
                    .enumerate()
                    .map_init(
                        || (FloatCtx::new(digits), None),
                        |(tctx, memo), (pi, pmass)| {
                            let kids = &intervals[pi * n..(pi + 1) * n];
                            let weights: Vec<BigFloat> = kids
                                .iter()
                                .map(|(a, b)| {
                                    let len = tctx.sub(b, a);
                                    weight_of(tctx, memo, &len, d)
                                })
                                .collect();
                            let mut norm = tctx.zero();
                            for w in &weights {
                                norm = tctx.add(&norm, w);
                            }
                            let masses = weights
                                .iter()
                                .map(|w| {
                                    let share = tctx.div(w, &norm);
                                    tctx.mul(pmass, &share)
                                })
                                .collect();
                            (masses, weights, norm)
                        },
                    )
                    .collect();
                let mut masses = Vec::with_capacity(intervals.len());
                let mut weights = Vec::with_capacity(intervals.len());
                let mut norms = Vec::with_capacity(parent.masses.len());
                for (m, w, norm) in split {
                    masses.extend(m);
                    weights.extend(w);
                    norms.push(norm);
                }
                levels[k - 1].child_norm = norms;
                (masses, weights)
            };
            levels.push(MeasureLevel {
                intervals,
                lo,
                hi,
                masses,
                weights,
                child_norm: Vec::new(),
            });
        }

        let leaf = &levels[depth];
        let mut leaf_prefix = Vec::with_capacity(leaf.masses.len() + 1);
        leaf_prefix.push(ctx.zero());
        for m in &leaf.masses {
            let next = ctx.add(leaf_prefix.last().unwrap(), m);
            leaf_prefix.push(next);
        }

        Ok(MassDistribution {
            d: d_f64,
            map,
            digits,
            branchings,
            levels,
            leaf_prefix,
        })
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn map(&self) -> &QsMap {
        &self.map
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    pub fn depth(&self) -> usize {
        self.branchings.len()
    }

    pub fn branchings(&self) -> &[u64] {
        &self.branchings
    }

    pub fn level_len(&self, k: usize) -> usize {
        self.levels[k].intervals.len()
    }

    pub fn mass(&self, k: usize, idx: usize) -> &BigFloat {
        &self.levels[k].masses[idx]
    }

    pub fn interval_f64(&self, k: usize, idx: usize) -> (f64, f64) {
        (self.levels[k].lo[idx], self.levels[k].hi[idx])
    }

    /// Sum of the masses on one level; 1 up to rounding, by construction.
    pub fn level_mass_sum_f64(&self, k: usize) -> f64 {
        let ctx = FloatCtx::new(self.digits);
        let mut s = ctx.zero();
        for m in &self.levels[k].masses {
            s = ctx.add(&s, m);
        }
        ctx.to_f64(&s)
    }

    /// Indices of level-`k` components whose closed interval meets `[a, b]`.
    pub fn meeting_range(&self, k: usize, a: f64, b: f64) -> std::ops::Range<usize> {
        let level = &self.levels[k];
        let start = level.hi.partition_point(|h| *h < a);
        let end = level.lo.partition_point(|l| *l <= b);
        start..end.max(start)
    }

    /// Conservative window mass: every leaf meeting `[a, b]` is counted in
    /// full, so the value can only overestimate `mu([a, b])`.
    pub fn mu_window(&self, a: f64, b: f64) -> f64 {
        let range = self.meeting_range(self.depth(), a, b);
        let ctx = FloatCtx::new(self.digits);
        ctx.to_f64(&ctx.sub(&self.leaf_prefix[range.end], &self.leaf_prefix[range.start]))
    }
}

/// Ratio product along one root-to-leaf chain, with the telescoping identity
/// and the lower-bound comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RChainReport {
    /// `r_i = |children of J_i|_d-norm / |J_i|^d` for `i = 0..k-1`.
    pub r: Vec<f64>,
    pub product: f64,
    /// `product^(1/k)`.
    pub growth: f64,
    /// `|mu(J)/|J|^d * product - 1|`, evaluated at working precision.
    pub identity_deviation: f64,
    pub xi: f64,
    pub zeta: f64,
    /// `product / (xi * zeta)`; at least 1 when the bound holds.
    pub bound_margin: f64,
    pub skp_density: f64,
}

/// Walks `chain` (0-based child indices, one per level) through the measure.
pub fn r_products(
    measure: &MassDistribution,
    chain: &[usize],
    params: &ParamSpec,
    constants: &CertificateConstants,
) -> Result<RChainReport> {
    let k = chain.len();
    if k == 0 || k > measure.depth() {
        return Err(Error::Chain(format!(
            "chain length {k} outside 1..={}",
            measure.depth()
        )));
    }
    let ctx = FloatCtx::new(measure.digits());
    let mut idx = 0usize;
    let mut r = Vec::with_capacity(k);
    let mut product = ctx.one();
    for (i, digit) in chain.iter().enumerate() {
        let n = measure.branchings[i] as usize;
        if *digit >= n {
            return Err(Error::Chain(format!(
                "digit {digit} at level {} outside 0..{n}",
                i + 1
            )));
        }
        let level = &measure.levels[i];
        let r_i = ctx.div(&level.child_norm[idx], &level.weights[idx]);
        product = ctx.mul(&product, &r_i);
        r.push(ctx.to_f64(&r_i));
        idx = idx * n + digit;
    }

    // mu(J) / |J|^d at the chain's endpoint times the product telescopes to 1.
    let leaf_level = &measure.levels[k];
    let ratio = ctx.div(&leaf_level.masses[idx], &leaf_level.weights[idx]);
    let identity = ctx.mul(&ratio, &product);
    let identity_deviation = ctx.to_f64(&ctx.sub(&identity, &ctx.one())).abs();

    let factors = lower_bound_factors(params, constants, k)?;
    let product_f = ctx.to_f64(&product);
    Ok(RChainReport {
        r,
        product: product_f,
        growth: product_f.powf(1.0 / k as f64),
        identity_deviation,
        xi: factors.xi,
        zeta: factors.zeta,
        bound_margin: product_f / (factors.xi * factors.zeta),
        skp_density: factors.skp_density,
    })
}

/// Frostman sweep result: the empirical constant `sup mu(J)/|J|^d`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrostmanReport {
    pub d: f64,
    /// Supremum over all stored image fundamental intervals (exact masses).
    pub c_nodes: f64,
    /// Supremum over the supplied windows (conservative leaf sums).
    pub c_windows: f64,
    pub c_empirical: f64,
    pub windows_tested: usize,
    pub c_cap: f64,
    pub pass: bool,
}

/// Evaluates `mu(J)/|J|^d` over every stored node and the given windows and
/// compares the supremum against `c_cap`.
pub fn frostman_check(
    measure: &MassDistribution,
    windows: &[(f64, f64)],
    c_cap: f64,
) -> Result<FrostmanReport> {
    let digits = measure.digits();
    let d = measure.d();
    let c_nodes = (0..=measure.depth())
        .into_par_iter()
        .map_init(
            || FloatCtx::new(digits),
            |ctx, k| {
                let level = &measure.levels[k];
                let mut worst = 0.0f64;
                for (weight, mass) in level.weights.iter().zip(&level.masses) {
                    worst = worst.max(ctx.to_f64(&ctx.div(mass, weight)));
                }
                worst
            },
        )
        .reduce(|| 0.0, f64::max);

    let mut c_windows = 0.0f64;
    for (a, b) in windows {
        if !(b > a) {
            return Err(Error::Degenerate(format!(
                "window [{a}, {b}] has no length"
            )));
        }
        let mu = measure.mu_window(*a, *b);
        c_windows = c_windows.max(mu / (b - a).powf(d));
    }

    let c_empirical = c_nodes.max(c_windows);
    Ok(FrostmanReport {
        d,
        c_nodes,
        c_windows,
        c_empirical,
        windows_tested: windows.len(),
        c_cap,
        pass: c_empirical <= c_cap,
    })
}

/// Window sweep verifying that a short interval meets few components of the
/// matching level, plus the empirical constants the sweep exposes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Step2Report {
    pub samples: usize,
    pub seed: u64,
    /// `2 * (1 + sup branching)`.
    pub count_bound: u64,
    pub max_count: u64,
    pub within_bound: bool,
    /// Largest `|component| / |J|` seen; finite by quasisymmetry.
    pub max_image_len_ratio: f64,
    /// Largest conservative `mu(J)/|J|^d` over the sampled windows.
    pub max_mass_ratio: f64,
}

pub fn step2_window_check(
    measure: &MassDistribution,
    params: &ParamSpec,
    samples: usize,
    seed: u64,
) -> Result<Step2Report> {
    if measure.depth() < 2 {
        return Err(Error::Range("window check needs measure depth >= 2".into()));
    }
    let depth = measure.depth();
    let deltas: Vec<f64> = params
        .delta_prefix(depth)?
        .iter()
        .map(rat_to_f64)
        .collect();
    let inverse = measure.map().inverse();
    let mut ctx = FloatCtx::new(measure.digits());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_sup = 1 + measure.branchings().iter().copied().max().unwrap_or(2);
    let count_bound = 2 * n_sup;

    let ln_min = deltas[depth].ln();
    let ln_max = deltas[1].ln();
    let mut max_count = 0u64;
    let mut max_image_len_ratio = 0.0f64;
    let mut max_mass_ratio = 0.0f64;

    for _ in 0..samples {
        let len = (rng.gen_range(ln_min..ln_max)).exp();
        let a = rng.gen_range(0.0..(1.0 - len));
        let b = a + len;
        // Pull the window back; the inverse is again a catalog map.
        let xa = crate::rational::Rat::from_float(a).expect("finite window endpoint");
        let xb = crate::rational::Rat::from_float(b).expect("finite window endpoint");
        let fa = inverse.eval(&xa, &mut ctx)?;
        let fb = inverse.eval(&xb, &mut ctx)?;
        let (pa, pb) = (ctx.to_f64(&fa), ctx.to_f64(&fb));
        let plen = pb - pa;
        if !(plen > 0.0) {
            return Err(Error::Precision(
                "window preimage collapsed at working precision".into(),
            ));
        }
        // Smallest k with delta_k <= |preimage|; clamp to the built depth.
        let k = (1..=depth)
            .find(|k| deltas[*k] <= plen)
            .unwrap_or(depth);

        let range = measure.meeting_range(k, a, b);
        let count = range.len() as u64;
        max_count = max_count.max(count);
        for i in range {
            let (lo, hi) = measure.interval_f64(k, i);
            max_image_len_ratio = max_image_len_ratio.max((hi - lo) / len);
        }
        max_mass_ratio = max_mass_ratio.max(measure.mu_window(a, b) / len.powf(measure.d()));
    }

    Ok(Step2Report {
        samples,
        seed,
        count_bound,
        max_count,
        within_bound: max_count <= count_bound,
        max_image_len_ratio,
        max_mass_ratio,
    })
}

/// Deterministic chain sample: the two extreme chains plus seeded random ones.
pub fn sample_chains(
    branchings: &[u64],
    k: usize,
    random: usize,
    seed: u64,
) -> Vec<Vec<usize>> {
    let mut chains = Vec::with_capacity(random + 2);
    chains.push(vec![0; k]);
    chains.push(
        branchings[..k]
            .iter()
            .map(|n| *n as usize - 1)
            .collect::<Vec<_>>(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        chains.push(
            branchings[..k]
                .iter()
                .map(|n| rng.gen_range(0..*n as usize))
                .collect(),
        );
    }
    chains
}
