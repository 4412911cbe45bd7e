//! End-to-end minimality experiment: dimension formula on the parameters,
//! image box-counting under a catalog map, and the mass-distribution
//! certificate (Frostman sweep, ratio products, window checks) bundled into
//! one reproducible summary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::construction::{extend_level, root_level, ParamSpec};
use crate::dimension::{
    box_dim_estimate, hausdorff_formula_estimate, image_levelset, BoxCountReport,
    DimensionReport,
};
use crate::error::{Error, Result};
use crate::measure::{
    choose_d, frostman_check, r_products, sample_chains, step2_window_check,
    CertificateConstants, FrostmanReport, MassDistribution, Step2Report,
};
use crate::precision::FloatCtx;
use crate::qsmap::{estimate_m, pq_exponents, QsMap};
use crate::rational::rat_to_f64;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSettings {
    /// Level-set depth for image box counting.
    pub depth: usize,
    /// Working precision in decimal digits.
    pub digits: u32,
    /// Position of the default mass exponent inside its legal interval.
    pub d_fraction: f64,
    pub seed: u64,
    /// Number of dimension-formula terms and the trailing-window width.
    pub k_max: usize,
    pub window: usize,
    /// Depth of the mass distribution (bounded by `depth`).
    pub measure_depth: usize,
    /// Dyadic sweep depth for the quasisymmetry-constant estimate.
    pub m_sweep_depth: u32,
    /// Multiplicative safety margin applied to the estimated constant when
    /// it feeds distortion-style bounds.
    pub m_margin: f64,
    pub window_samples: usize,
    pub chain_samples: usize,
    /// Frostman certificate cap on the empirical constant.
    pub c_cap: f64,
    /// Box-count scales; `None` means the construction scales `delta_k`.
    pub scales: Option<Vec<f64>>,
    /// Dimension estimate at or above this counts as "full dimension".
    pub hypothesis_threshold: f64,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings {
            depth: 14,
            digits: 50,
            d_fraction: 0.5,
            seed: 17,
            k_max: 30,
            window: 10,
            measure_depth: 12,
            m_sweep_depth: 12,
            m_margin: 1.05,
            window_samples: 500,
            chain_samples: 32,
            c_cap: 16.0,
            scales: None,
            hypothesis_threshold: 0.9,
        }
    }
}

/// Frostman result for one exponent of the certificate grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertifiedExponent {
    pub d: f64,
    pub c_empirical: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimalitySummary {
    pub dim_estimate: f64,
    pub hypothesis_met: bool,
    pub m_hat: f64,
    pub m_margin: f64,
    pub p: f64,
    pub q: f64,
    /// Default mass exponent (snapped to a dyadic grid for fast powering).
    pub d: f64,
    pub alpha2: f64,
    pub image_box: BoxCountReport,
    pub frostman: FrostmanReport,
    /// The exponent grid approaching 1 and the best certified entry.
    pub d_grid: Vec<CertifiedExponent>,
    pub certified_d: Option<f64>,
    pub step2: Step2Report,
    pub r_growth_min: f64,
    pub r_growth_mean: f64,
    pub max_identity_deviation: f64,
    pub min_bound_margin: f64,
    pub chains_tested: usize,
    pub seed: u64,
    pub depth: usize,
    pub measure_depth: usize,
    pub dimension: DimensionReport,
}

/// Nearest grid point `k/64` to `d` strictly inside `(lower, 1)`; falls back
/// to `d` itself when the interval is too narrow for the grid.
fn snap_exponent(d: f64, lower: f64) -> f64 {
    let mut k = (d * 64.0).round() as i64;
    while (k as f64 / 64.0) <= lower {
        k += 1;
    }
    while k as f64 / 64.0 >= 1.0 {
        k -= 1;
    }
    let snapped = k as f64 / 64.0;
    if snapped > lower && snapped < 1.0 {
        snapped
    } else {
        d
    }
}

/// Grid of exponents approaching 1 from the default value.
fn exponent_grid(lower: f64) -> Vec<f64> {
    (1..=4)
        .map(|j| snap_exponent(1.0 - (1.0 - lower) / f64::powi(2.0, j), lower))
        .collect()
}

/// Seeded random windows with log-uniform lengths in `[min_len, 1/4]`.
fn random_windows(count: usize, min_len: f64, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ln_lo = min_len.ln();
    let ln_hi = 0.25f64.ln();
    (0..count)
        .map(|_| {
            let len = rng.gen_range(ln_lo..ln_hi).exp();
            let a = rng.gen_range(0.0..(1.0 - len));
            (a, a + len)
        })
        .collect()
}

pub fn minimality_experiment(
    params: &ParamSpec,
    map: &QsMap,
    settings: &ExperimentSettings,
) -> Result<MinimalitySummary> {
    if settings.measure_depth < 2 || settings.measure_depth > settings.depth {
        return Err(Error::Config(format!(
            "measure depth {} must lie in 2..=depth ({})",
            settings.measure_depth, settings.depth
        )));
    }
    map.validate()?;
    let digits = settings.digits;
    let mut ctx = FloatCtx::new(digits);

    let dimension = hausdorff_formula_estimate(params, settings.k_max, settings.window, &mut ctx)?;
    let hypothesis_met = dimension.estimate >= settings.hypothesis_threshold;

    let m_hat = estimate_m(map, settings.m_sweep_depth, digits)?;
    let exponents = pq_exponents(m_hat)?;
    let lower = if exponents.q == 1.0 {
        0.0
    } else {
        1.0 / exponents.q
    };
    let d = snap_exponent(choose_d(exponents.q, settings.d_fraction)?, lower);

    // One pass over the levels: images at measure depth, leaf image and
    // construction scales at full depth. Scales from levels with very few
    // intervals sit outside the scaling regime and would only bend the
    // regression, so they are dropped while at least three scales remain.
    let mut image_levels = Vec::with_capacity(settings.measure_depth + 1);
    let mut branchings = Vec::with_capacity(settings.measure_depth);
    let mut scales = Vec::with_capacity(settings.depth);
    let mut count = 1u64;
    let mut level = root_level();
    let leaf_image_f64: Vec<(f64, f64)>;
    loop {
        if level.level() <= settings.measure_depth {
            image_levels.push(image_levelset(map, &level, digits)?);
            if level.level() >= 1 {
                branchings.push(params.branching(level.level())?);
            }
        }
        if level.level() >= 1 {
            count = count.saturating_mul(params.branching(level.level())?);
            if count >= 32 {
                scales.push(rat_to_f64(level.delta()));
            }
        }
        if level.level() == settings.depth {
            let fctx = FloatCtx::new(digits);
            let image = if settings.depth == settings.measure_depth {
                image_levels.last().unwrap().clone()
            } else {
                image_levelset(map, &level, digits)?
            };
            leaf_image_f64 = image
                .iter()
                .map(|(a, b)| (fctx.to_f64(a), fctx.to_f64(b)))
                .collect();
            break;
        }
        level = extend_level(params, &level)?;
    }
    if scales.len() < 3 {
        scales = params.delta_prefix(settings.depth)?[1..]
            .iter()
            .map(rat_to_f64)
            .collect();
    }

    let box_scales = settings.scales.clone().unwrap_or(scales);
    let image_box = box_dim_estimate(&leaf_image_f64, &box_scales)?;

    let measure = MassDistribution::from_image_levels(
        image_levels.clone(),
        branchings.clone(),
        map.clone(),
        d,
        digits,
    )?;
    let m_for_bounds = m_hat * settings.m_margin;
    let constants =
        CertificateConstants::new(params, settings.measure_depth, m_for_bounds, d)?;

    let min_len = rat_to_f64(&params.delta(settings.measure_depth)?);
    let windows = random_windows(settings.window_samples, min_len, settings.seed);
    let frostman = frostman_check(&measure, &windows, settings.c_cap)?;

    // Sweep exponents toward 1, reusing the imaged levels.
    let mut d_grid = Vec::new();
    let mut certified_d = None;
    for d_j in exponent_grid(lower) {
        let m_j = MassDistribution::from_image_levels(
            image_levels.clone(),
            branchings.clone(),
            map.clone(),
            d_j,
            digits,
        )?;
        let rep = frostman_check(&m_j, &windows, settings.c_cap)?;
        if rep.pass {
            certified_d = Some(certified_d.map_or(d_j, |c: f64| c.max(d_j)));
        }
        d_grid.push(CertifiedExponent {
            d: d_j,
            c_empirical: rep.c_empirical,
            pass: rep.pass,
        });
    }
    if frostman.pass {
        certified_d = Some(certified_d.map_or(d, |c: f64| c.max(d)));
    }

    let step2 = step2_window_check(&measure, params, settings.window_samples, settings.seed)?;

    let chains = sample_chains(
        measure.branchings(),
        settings.measure_depth,
        settings.chain_samples,
        settings.seed,
    );
    let mut r_growth_min = f64::INFINITY;
    let mut r_growth_sum = 0.0;
    let mut max_identity_deviation = 0.0f64;
    let mut min_bound_margin = f64::INFINITY;
    for chain in &chains {
        let rep = r_products(&measure, chain, params, &constants)?;
        r_growth_min = r_growth_min.min(rep.growth);
        r_growth_sum += rep.growth;
        max_identity_deviation = max_identity_deviation.max(rep.identity_deviation);
        min_bound_margin = min_bound_margin.min(rep.bound_margin);
    }

    Ok(MinimalitySummary {
        dim_estimate: dimension.estimate,
        hypothesis_met,
        m_hat,
        m_margin: settings.m_margin,
        p: exponents.p,
        q: exponents.q,
        d,
        alpha2: constants.alpha2,
        image_box,
        frostman,
        d_grid,
        certified_d,
        step2,
        r_growth_min,
        r_growth_mean: r_growth_sum / chains.len() as f64,
        max_identity_deviation,
        min_bound_margin,
        chains_tested: chains.len(),
        seed: settings.seed,
        depth: settings.depth,
        measure_depth: settings.measure_depth,
        dimension,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat_ratio;

    #[test]
    fn snap_stays_inside_the_interval() {
        assert_eq!(snap_exponent(0.5, 0.0), 0.5);
        let s = snap_exponent(0.983, 0.9655);
        assert!(s > 0.9655 && s < 1.0);
        assert_eq!(s * 64.0, (s * 64.0).round());
        for d in exponent_grid(0.7856) {
            assert!(d > 0.7856 && d < 1.0);
        }
    }

    #[test]
    fn negative_control_flags_the_hypothesis() {
        let params = ParamSpec::middle_thirds();
        let settings = ExperimentSettings {
            depth: 10,
            measure_depth: 8,
            k_max: 12,
            window: 4,
            window_samples: 100,
            chain_samples: 8,
            ..Default::default()
        };
        let summary = minimality_experiment(&params, &QsMap::Identity, &settings).unwrap();
        assert!(!summary.hypothesis_met);
        assert!((summary.dim_estimate - 0.6309297535714574).abs() < 1e-9);
        assert!((summary.image_box.slope - 0.6309).abs() < 0.03);
        assert!(summary.max_identity_deviation < 1e-20);
        assert!(summary.min_bound_margin >= 1.0);
        assert!(summary.step2.within_bound);
    }

    #[test]
    fn full_dimension_family_passes_under_a_power_map() {
        let params = ParamSpec::dim1_family();
        let settings = ExperimentSettings {
            depth: 12,
            measure_depth: 10,
            window_samples: 100,
            chain_samples: 8,
            ..Default::default()
        };
        let map = QsMap::power(rat_ratio(4, 5));
        let summary = minimality_experiment(&params, &map, &settings).unwrap();
        assert!(summary.hypothesis_met);
        assert!(summary.image_box.slope > 0.8, "slope {}", summary.image_box.slope);
        assert!(summary.certified_d.is_some());
        assert!(summary.max_identity_deviation < 1e-20);
        assert!(summary.min_bound_margin >= 1.0);
        // Deterministic given the seed.
        let again = minimality_experiment(&params, &map, &settings).unwrap();
        assert_eq!(
            serde_json::to_string(&summary).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
    }
}
