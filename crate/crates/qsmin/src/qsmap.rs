//! A catalog of increasing homeomorphisms of [0,1] fixing the endpoints:
//! power maps, piecewise-linear maps, and compositions. Provides evaluation
//! at working precision, empirical estimation of the quasisymmetry constant
//! by a dyadic sweep, the distortion exponents `p = log2(1 + 1/M)` and
//! `q = log2(1 + M)`, and verification of the two-sided distortion bound
//! `(1+M)^-2 (|J|/|I|)^q <= |f(J)|/|f(I)| <= 4 (|J|/|I|)^p` on nested pairs.

use astro_float::BigFloat;
use num::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precision::{fcmp, FloatCtx};
use crate::rational::{format_rat, parse_rat, Rat};

#[derive(Debug, Clone, PartialEq)]
pub enum QsMap {
    Identity,
    /// `x^alpha` for a positive rational exponent.
    Power { alpha: Rat },
    /// Increasing piecewise-linear map; `slopes.len() == breakpoints.len() + 1`
    /// and the segments must integrate to total rise 1.
    PiecewiseLinear {
        breakpoints: Vec<Rat>,
        slopes: Vec<Rat>,
    },
    /// Maps applied left-to-right: `[f, g]` evaluates `g(f(x))`.
    Composition { maps: Vec<QsMap> },
}

impl QsMap {
    pub fn power(alpha: Rat) -> Self {
        QsMap::Power { alpha }
    }

    pub fn piecewise_linear(breakpoints: Vec<Rat>, slopes: Vec<Rat>) -> Self {
        QsMap::PiecewiseLinear {
            breakpoints,
            slopes,
        }
    }

    pub fn composition(maps: Vec<QsMap>) -> Self {
        QsMap::Composition { maps }
    }

    /// Checks that the map is an increasing homeomorphism of [0,1] with
    /// `f(0) = 0` and `f(1) = 1`.
    pub fn validate(&self) -> Result<()> {
        match self {
            QsMap::Identity => Ok(()),
            QsMap::Power { alpha } => {
                if alpha.is_positive() {
                    Ok(())
                } else {
                    Err(Error::Range(format!(
                        "power exponent must be positive, got {}",
                        format_rat(alpha)
                    )))
                }
            }
            QsMap::PiecewiseLinear {
                breakpoints,
                slopes,
            } => {
                if slopes.len() != breakpoints.len() + 1 {
                    return Err(Error::Range(format!(
                        "{} breakpoints need {} slopes, got {}",
                        breakpoints.len(),
                        breakpoints.len() + 1,
                        slopes.len()
                    )));
                }
                let mut prev = Rat::zero();
                for b in breakpoints {
                    if *b <= prev || *b >= Rat::one() {
                        return Err(Error::Range(format!(
                            "breakpoints must increase strictly inside (0,1), got {}",
                            format_rat(b)
                        )));
                    }
                    prev = b.clone();
                }
                if let Some(s) = slopes.iter().find(|s| !s.is_positive()) {
                    return Err(Error::Range(format!(
                        "slopes must be positive, got {}",
                        format_rat(s)
                    )));
                }
                let rise = self.node_values().pop().unwrap();
                if rise != Rat::one() {
                    return Err(Error::Range(format!(
                        "piecewise-linear segments integrate to {}, expected 1",
                        format_rat(&rise)
                    )));
                }
                Ok(())
            }
            QsMap::Composition { maps } => {
                if maps.is_empty() {
                    return Err(Error::Range("empty composition".into()));
                }
                maps.iter().try_for_each(QsMap::validate)
            }
        }
    }

    /// For piecewise-linear maps: exact values at the segment nodes
    /// `0, b_1, ..., b_m, 1`, excluding the leading zero.
    fn node_values(&self) -> Vec<Rat> {
        match self {
            QsMap::PiecewiseLinear {
                breakpoints,
                slopes,
            } => {
                let mut nodes = Vec::with_capacity(breakpoints.len() + 1);
                let mut x = Rat::zero();
                let mut y = Rat::zero();
                for (i, s) in slopes.iter().enumerate() {
                    let next_x = breakpoints.get(i).cloned().unwrap_or_else(Rat::one);
                    y += s * (&next_x - &x);
                    nodes.push(y.clone());
                    x = next_x;
                }
                nodes
            }
            _ => Vec::new(),
        }
    }

    /// The inverse homeomorphism, itself a catalog member.
    pub fn inverse(&self) -> QsMap {
        match self {
            QsMap::Identity => QsMap::Identity,
            QsMap::Power { alpha } => QsMap::Power {
                alpha: alpha.recip(),
            },
            QsMap::PiecewiseLinear {
                breakpoints,
                slopes,
            } => {
                let mut nodes = self.node_values();
                nodes.pop();
                let _ = breakpoints;
                QsMap::PiecewiseLinear {
                    breakpoints: nodes,
                    slopes: slopes.iter().map(|s| s.recip()).collect(),
                }
            }
            QsMap::Composition { maps } => QsMap::Composition {
                maps: maps.iter().rev().map(QsMap::inverse).collect(),
            },
        }
    }

    fn eval_inner(&self, x: &BigFloat, ctx: &mut FloatCtx) -> Result<BigFloat> {
        match self {
            QsMap::Identity => Ok(x.clone()),
            QsMap::Power { alpha } => {
                if x.is_zero() {
                    return Ok(ctx.zero());
                }
                // Small rational exponents take the root-then-power route,
                // which is an order of magnitude cheaper than general pow.
                let num = num::ToPrimitive::to_u64(alpha.numer());
                let den = num::ToPrimitive::to_u64(alpha.denom());
                match (num, den) {
                    (Some(n), Some(1)) if n <= 1 << 20 => Ok(ctx.powi(x, n as usize)),
                    (Some(n), Some(d)) if n <= 4096 && d <= 64 => {
                        Ok(ctx.pow_small_rational(x, n, d))
                    }
                    _ => {
                        let a = ctx.from_rat(alpha);
                        Ok(ctx.pow(x, &a))
                    }
                }
            }
            QsMap::PiecewiseLinear {
                breakpoints,
                slopes,
            } => {
                let mut seg = 0usize;
                for b in breakpoints {
                    let bf = ctx.from_rat(b);
                    if fcmp(x, &bf) == std::cmp::Ordering::Greater {
                        seg += 1;
                    } else {
                        break;
                    }
                }
                let seg_start = if seg == 0 {
                    Rat::zero()
                } else {
                    breakpoints[seg - 1].clone()
                };
                let base = if seg == 0 {
                    Rat::zero()
                } else {
                    self.node_values()[seg - 1].clone()
                };
                let base_f = ctx.from_rat(&base);
                let start_f = ctx.from_rat(&seg_start);
                let slope_f = ctx.from_rat(&slopes[seg]);
                let dx = ctx.sub(x, &start_f);
                let rise = ctx.mul(&slope_f, &dx);
                Ok(ctx.add(&base_f, &rise))
            }
            QsMap::Composition { maps } => {
                let mut y = x.clone();
                for m in maps {
                    y = m.eval_inner(&y, ctx)?;
                }
                Ok(y)
            }
        }
    }

    /// Evaluates `f(x)` at the context precision. `x` must lie in [0,1].
    pub fn eval(&self, x: &Rat, ctx: &mut FloatCtx) -> Result<BigFloat> {
        if x.is_negative() || *x > Rat::one() {
            return Err(Error::Domain(format!("{} outside [0,1]", format_rat(x))));
        }
        let xf = ctx.from_rat(x);
        self.eval_inner(&xf, ctx)
    }

    /// Image `[f(a), f(b)]` of a subinterval of [0,1].
    pub fn image_interval(
        &self,
        a: &Rat,
        b: &Rat,
        ctx: &mut FloatCtx,
    ) -> Result<(BigFloat, BigFloat)> {
        if a > b {
            return Err(Error::Geometry(format!(
                "interval [{}, {}] is reversed",
                format_rat(a),
                format_rat(b)
            )));
        }
        Ok((self.eval(a, ctx)?, self.eval(b, ctx)?))
    }
}

/// The distortion exponent pair attached to a quasisymmetry constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PqExponents {
    pub m: f64,
    pub p: f64,
    pub q: f64,
}

/// `p = log2(1 + 1/M)`, `q = log2(1 + M)`; `p <= 1 <= q` with equality at M = 1.
pub fn pq_exponents(m: f64) -> Result<PqExponents> {
    if !(m >= 1.0) {
        return Err(Error::Range(format!("quasisymmetry constant {m} < 1")));
    }
    Ok(PqExponents {
        m,
        p: (1.0 + 1.0 / m).log2(),
        q: (1.0 + m).log2(),
    })
}

/// Empirical quasisymmetry constant: the worst ratio `|f(I)|/|f(J)|` over all
/// adjacent equal-length dyadic interval pairs at scales `2^-1 ..= 2^-depth`.
/// Nondecreasing in `depth`; exactly 1 for the identity.
pub fn estimate_m(map: &QsMap, depth: u32, digits: u32) -> Result<f64> {
    if depth == 0 {
        return Err(Error::Range("sweep depth must be at least 1".into()));
    }
    map.validate()?;
    let n = 1usize << depth;
    let values: Vec<BigFloat> = (0..=n)
        .into_par_iter()
        .map_init(
            || FloatCtx::new(digits),
            |ctx, i| {
                let x = Rat::new(i.into(), (n as u64).into());
                map.eval(&x, ctx)
            },
        )
        .collect::<Result<_>>()?;

    let ctx = FloatCtx::new(digits);
    let mut worst = 1.0f64;
    for j in 1..=depth {
        let stride = n >> j;
        let mut prev_diff: Option<BigFloat> = None;
        for i in (stride..=n).step_by(stride) {
            let diff = ctx.sub(&values[i], &values[i - stride]);
            if !crate::precision::is_strictly_positive(&diff) {
                return Err(Error::Precision(format!(
                    "image endpoints indistinguishable near {}/{n} at scale 2^-{j}",
                    i - stride
                )));
            }
            if let Some(prev) = &prev_diff {
                let ratio = ctx.to_f64(&ctx.div(&diff, prev));
                worst = worst.max(ratio).max(1.0 / ratio);
            }
            prev_diff = Some(diff);
        }
    }
    Ok(worst)
}

/// A nested interval pair `inner` inside `outer`, both within [0,1].
#[derive(Debug, Clone)]
pub struct NestedPair {
    pub outer: (Rat, Rat),
    pub inner: (Rat, Rat),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistortionRow {
    /// `|J| / |I|`.
    pub size_ratio: f64,
    /// `|f(J)| / |f(I)|`.
    pub image_ratio: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistortionReport {
    pub exponents: PqExponents,
    pub rows: Vec<DistortionRow>,
    pub all_pass: bool,
}

/// Checks the two-sided distortion bound on each nested pair, using the
/// exponents derived from `m`. Passing requires `m` to dominate the map's
/// true quasisymmetry constant.
pub fn distortion_check(
    map: &QsMap,
    m: f64,
    pairs: &[NestedPair],
    digits: u32,
) -> Result<DistortionReport> {
    let exponents = pq_exponents(m)?;
    let lower_coeff = (1.0 + m).powi(-2);
    let rows: Vec<DistortionRow> = pairs
        .par_iter()
        .map_init(
            || FloatCtx::new(digits),
            |ctx, pair| {
                let (ia, ib) = &pair.outer;
                let (ja, jb) = &pair.inner;
                if ja < ia || jb > ib {
                    return Err(Error::Geometry(
                        "inner interval not contained in outer".into(),
                    ));
                }
                if ia >= ib {
                    return Err(Error::Geometry("outer interval has no length".into()));
                }
                let (fia, fib) = map.image_interval(ia, ib, ctx)?;
                let (fja, fjb) = map.image_interval(ja, jb, ctx)?;
                let di = ctx.sub(&fib, &fia);
                let dj = ctx.sub(&fjb, &fja);
                if !crate::precision::is_strictly_positive(&di) || dj.is_negative() {
                    return Err(Error::Precision(
                        "image interval collapsed at working precision".into(),
                    ));
                }
                let size_ratio =
                    crate::rational::rat_to_f64(&((jb - ja) / (ib - ia)));
                let image_ratio = ctx.to_f64(&ctx.div(&dj, &di));
                let lower = lower_coeff * size_ratio.powf(exponents.q);
                let upper = 4.0 * size_ratio.powf(exponents.p);
                // Tiny relative slack for the f64 boundary arithmetic; the
                // bounds themselves carry multiplicative margins.
                let pass = image_ratio >= lower * (1.0 - 1e-9)
                    && image_ratio <= upper * (1.0 + 1e-9);
                Ok(DistortionRow {
                    size_ratio,
                    image_ratio,
                    lower,
                    upper,
                    pass,
                })
            },
        )
        .collect::<Result<_>>()?;
    let all_pass = rows.iter().all(|r| r.pass);
    Ok(DistortionReport {
        exponents,
        rows,
        all_pass,
    })
}

/// Seeded battery of nested pairs on a fine dyadic grid.
pub fn random_nested_pairs<R: rand::Rng>(count: usize, rng: &mut R) -> Vec<NestedPair> {
    const GRID: u64 = 1 << 30;
    let mut pairs = Vec::with_capacity(count);
    while pairs.len() < count {
        let mut picks = [0u64; 4];
        for p in picks.iter_mut() {
            *p = rng.gen_range(0..=GRID);
        }
        picks.sort_unstable();
        let [ia, ja, jb, ib] = picks;
        if ia == ib || ja == jb {
            continue;
        }
        let r = |v: u64| Rat::new(v.into(), GRID.into());
        pairs.push(NestedPair {
            outer: (r(ia), r(ib)),
            inner: (r(ja), r(jb)),
        });
    }
    pairs
}

// ---------------------------------------------------------------------------
// Serialization: tagged union with rationals as strings.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawQsMap {
    Identity,
    Power {
        alpha: String,
    },
    PiecewiseLinear {
        breakpoints: Vec<String>,
        slopes: Vec<String>,
    },
    Composition {
        maps: Vec<RawQsMap>,
    },
}

impl QsMap {
    fn to_raw(&self) -> RawQsMap {
        match self {
            QsMap::Identity => RawQsMap::Identity,
            QsMap::Power { alpha } => RawQsMap::Power {
                alpha: format_rat(alpha),
            },
            QsMap::PiecewiseLinear {
                breakpoints,
                slopes,
            } => RawQsMap::PiecewiseLinear {
                breakpoints: breakpoints.iter().map(format_rat).collect(),
                slopes: slopes.iter().map(format_rat).collect(),
            },
            QsMap::Composition { maps } => RawQsMap::Composition {
                maps: maps.iter().map(QsMap::to_raw).collect(),
            },
        }
    }

    fn from_raw(raw: &RawQsMap) -> Result<QsMap> {
        Ok(match raw {
            RawQsMap::Identity => QsMap::Identity,
            RawQsMap::Power { alpha } => QsMap::Power {
                alpha: parse_rat(alpha)?,
            },
            RawQsMap::PiecewiseLinear {
                breakpoints,
                slopes,
            } => QsMap::PiecewiseLinear {
                breakpoints: breakpoints.iter().map(|s| parse_rat(s)).collect::<Result<_>>()?,
                slopes: slopes.iter().map(|s| parse_rat(s)).collect::<Result<_>>()?,
            },
            RawQsMap::Composition { maps } => QsMap::Composition {
                maps: maps.iter().map(QsMap::from_raw).collect::<Result<_>>()?,
            },
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_raw()).expect("map serialization")
    }

    pub fn from_json(s: &str) -> Result<QsMap> {
        let raw: RawQsMap = serde_json::from_str(s)?;
        let map = QsMap::from_raw(&raw)?;
        map.validate()?;
        Ok(map)
    }

    pub fn from_json_value(v: &serde_json::Value) -> Result<QsMap> {
        let raw: RawQsMap = serde_json::from_value(v.clone())?;
        let map = QsMap::from_raw(&raw)?;
        map.validate()?;
        Ok(map)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self.to_raw()).expect("map serialization")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat_ratio;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rat(n: i64, d: i64) -> Rat {
        rat_ratio(n, d)
    }

    fn sample_pwl() -> QsMap {
        QsMap::piecewise_linear(vec![rat(1, 2)], vec![rat(1, 2), rat(3, 2)])
    }

    fn eval_f64(map: &QsMap, x: Rat) -> f64 {
        let mut ctx = FloatCtx::new(50);
        let v = map.eval(&x, &mut ctx).unwrap();
        ctx.to_f64(&v)
    }

    #[test]
    fn eval_examples() {
        assert!((eval_f64(&QsMap::Identity, rat(3, 10)) - 0.3).abs() < 1e-15);
        assert!((eval_f64(&QsMap::power(rat(2, 1)), rat(1, 2)) - 0.25).abs() < 1e-15);
        assert!((eval_f64(&sample_pwl(), rat(1, 2)) - 0.25).abs() < 1e-15);
        assert!((eval_f64(&sample_pwl(), rat(3, 4)) - 0.625).abs() < 1e-15);
        let comp = QsMap::composition(vec![QsMap::power(rat(2, 1)), sample_pwl()]);
        // pwl(x^2) at x = 1/2: pwl(1/4) = 1/8.
        assert!((eval_f64(&comp, rat(1, 2)) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn eval_rejects_out_of_domain() {
        let mut ctx = FloatCtx::new(30);
        assert!(matches!(
            QsMap::Identity.eval(&rat(3, 2), &mut ctx),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            QsMap::Identity.eval(&rat(-1, 2), &mut ctx),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn image_interval_examples() {
        let mut ctx = FloatCtx::new(50);
        let (a, b) = QsMap::power(rat(2, 1))
            .image_interval(&rat(0, 1), &rat(1, 2), &mut ctx)
            .unwrap();
        assert_eq!(ctx.to_f64(&a), 0.0);
        assert!((ctx.to_f64(&b) - 0.25).abs() < 1e-15);
        let (a, b) = QsMap::power(rat(1, 2))
            .image_interval(&rat(1, 4), &rat(1, 1), &mut ctx)
            .unwrap();
        assert!((ctx.to_f64(&a) - 0.5).abs() < 1e-15);
        assert!((ctx.to_f64(&b) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn validation_catches_bad_maps() {
        assert!(QsMap::power(rat(-1, 2)).validate().is_err());
        // Slopes that do not integrate to 1.
        assert!(QsMap::piecewise_linear(vec![rat(1, 2)], vec![rat(1, 2), rat(1, 2)])
            .validate()
            .is_err());
        // Breakpoint outside (0,1).
        assert!(QsMap::piecewise_linear(vec![rat(3, 2)], vec![rat(1, 2), rat(3, 2)])
            .validate()
            .is_err());
        assert!(QsMap::composition(vec![]).validate().is_err());
        assert!(sample_pwl().validate().is_ok());
    }

    #[test]
    fn estimate_m_identity_is_one() {
        assert_eq!(estimate_m(&QsMap::Identity, 10, 40).unwrap(), 1.0);
        assert_eq!(
            estimate_m(&QsMap::power(rat(1, 1)), 10, 40).unwrap(),
            1.0
        );
    }

    #[test]
    fn estimate_m_power_two_is_three() {
        // The leftmost pair attains ((2h)^2 - h^2) / h^2 = 3 at every scale.
        let m = estimate_m(&QsMap::power(rat(2, 1)), 12, 40).unwrap();
        assert!((m - 3.0).abs() < 1e-12, "m = {m}");
    }

    #[test]
    fn estimate_m_is_monotone_in_depth() {
        let map = QsMap::composition(vec![sample_pwl(), QsMap::power(rat(4, 5))]);
        let mut prev = 1.0;
        for depth in [2, 4, 6, 8, 10] {
            let m = estimate_m(&map, depth, 40).unwrap();
            assert!(m >= prev - 1e-12);
            prev = m;
        }
    }

    #[test]
    fn inverse_round_trips_to_identity() {
        let maps = [
            QsMap::power(rat(4, 5)),
            sample_pwl(),
            QsMap::composition(vec![QsMap::power(rat(2, 1)), sample_pwl()]),
        ];
        let mut ctx = FloatCtx::new(50);
        for map in maps {
            let inv = map.inverse();
            inv.validate().unwrap();
            let round = QsMap::composition(vec![map.clone(), inv]);
            for num in 0..=8 {
                let x = rat(num, 8);
                let y = round.eval(&x, &mut ctx).unwrap();
                let diff = (ctx.to_f64(&y) - crate::rational::rat_to_f64(&x)).abs();
                assert!(diff < 1e-40, "{map:?} at {num}/8: {diff}");
            }
        }
    }

    #[test]
    fn pq_exponent_examples() {
        let e = pq_exponents(1.0).unwrap();
        assert_eq!((e.p, e.q), (1.0, 1.0));
        let e = pq_exponents(3.0).unwrap();
        assert_eq!(e.q, 2.0);
        assert!((e.p - (4f64 / 3.0).log2()).abs() < 1e-15);
        let e = pq_exponents(2.0).unwrap();
        assert!((e.q - 3f64.log2()).abs() < 1e-15);
        assert!((e.p - 1.5f64.log2()).abs() < 1e-15);
        assert!(pq_exponents(0.5).is_err());
    }

    #[test]
    fn distortion_check_examples() {
        // Identity, M = 1, J = [0,1/4] in I = [0,1].
        let pair = NestedPair {
            outer: (rat(0, 1), rat(1, 1)),
            inner: (rat(0, 1), rat(1, 4)),
        };
        let rep = distortion_check(&QsMap::Identity, 1.0, &[pair], 40).unwrap();
        assert!(rep.all_pass);
        let row = &rep.rows[0];
        assert!((row.lower - 0.0625).abs() < 1e-12);
        assert!((row.upper - 1.0).abs() < 1e-12);

        // power(2), M = 3, J = [0,1/2]: ratio 1/4 between 1/64 and ~3.0.
        let pair = NestedPair {
            outer: (rat(0, 1), rat(1, 1)),
            inner: (rat(0, 1), rat(1, 2)),
        };
        let rep = distortion_check(&QsMap::power(rat(2, 1)), 3.0, &[pair], 40).unwrap();
        assert!(rep.all_pass);
        let row = &rep.rows[0];
        assert!((row.image_ratio - 0.25).abs() < 1e-12);
        assert!((row.lower - 1.0 / 64.0).abs() < 1e-12);
        assert!((row.upper - 4.0 * 0.5f64.powf(rep.exponents.p)).abs() < 1e-12);

        // J = I: ratio one, bounds (1+M)^-2 <= 1 <= 4.
        let pair = NestedPair {
            outer: (rat(1, 4), rat(3, 4)),
            inner: (rat(1, 4), rat(3, 4)),
        };
        let rep = distortion_check(&sample_pwl(), 3.0, &[pair], 40).unwrap();
        assert!(rep.all_pass);
        assert!((rep.rows[0].image_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distortion_check_rejects_bad_geometry() {
        let pair = NestedPair {
            outer: (rat(1, 4), rat(1, 2)),
            inner: (rat(0, 1), rat(1, 2)),
        };
        assert!(matches!(
            distortion_check(&QsMap::Identity, 1.0, &[pair], 40),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn composed_inverse_pair_has_unit_constant() {
        let map = QsMap::composition(vec![QsMap::power(rat(2, 1)), QsMap::power(rat(1, 2))]);
        let m = estimate_m(&map, 10, 50).unwrap();
        assert!((m - 1.0).abs() < 1e-30, "m = {m}");
    }

    #[test]
    fn catalog_maps_pass_their_own_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pairs = random_nested_pairs(200, &mut rng);
        for map in [
            QsMap::Identity,
            QsMap::power(rat(2, 1)),
            QsMap::power(rat(4, 5)),
            sample_pwl(),
            QsMap::composition(vec![sample_pwl(), QsMap::power(rat(2, 1))]),
        ] {
            let m = estimate_m(&map, 12, 40).unwrap() * 1.05;
            let rep = distortion_check(&map, m, &pairs, 40).unwrap();
            assert!(rep.all_pass, "{map:?} failed with m = {m}");
        }
    }

    #[test]
    fn json_round_trip() {
        let maps = [
            QsMap::Identity,
            QsMap::power(rat(4, 5)),
            sample_pwl(),
            QsMap::composition(vec![QsMap::power(rat(2, 1)), sample_pwl()]),
        ];
        for map in maps {
            let s = map.to_json();
            assert_eq!(QsMap::from_json(&s).unwrap(), map);
        }
        let m = QsMap::from_json(r#"{"kind":"power","alpha":"4/5"}"#).unwrap();
        assert_eq!(m, QsMap::power(rat(4, 5)));
        assert!(QsMap::from_json(r#"{"kind":"power","alpha":"0.8"}"#).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        /// 2^p + 2^q = 2 + M + 1/M.
        #[test]
        fn exponent_identity(m in 1.0f64..10.0) {
            let e = pq_exponents(m).unwrap();
            let lhs = 2f64.powf(e.p) + 2f64.powf(e.q);
            prop_assert!((lhs - (2.0 + m + 1.0 / m)).abs() < 1e-12);
            prop_assert!(e.p <= 1.0 + 1e-15 && e.q >= 1.0 - 1e-15);
        }

        /// Evaluation is strictly monotone on sorted sample grids, and images
        /// of nested intervals stay nested.
        #[test]
        fn monotone_and_nesting(nums in proptest::collection::btree_set(0u32..=64, 3..=8)) {
            let grid: Vec<Rat> = nums.iter().map(|n| rat(*n as i64, 64)).collect();
            let map = QsMap::composition(vec![sample_pwl(), QsMap::power(rat(4, 5))]);
            let mut ctx = FloatCtx::new(40);
            let vals: Vec<f64> = grid
                .iter()
                .map(|x| {
                    let v = map.eval(x, &mut ctx).unwrap();
                    ctx.to_f64(&v)
                })
                .collect();
            for w in vals.windows(2) {
                prop_assert!(w[0] < w[1]);
            }
            // Nesting: [grid[0], grid[last]] contains [grid[1], grid[last-1]].
            if grid.len() >= 4 {
                let outer = (vals[0], vals[vals.len() - 1]);
                let inner = (vals[1], vals[vals.len() - 2]);
                prop_assert!(outer.0 <= inner.0 && inner.1 <= outer.1);
            }
        }
    }
}
