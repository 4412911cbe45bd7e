//! Exact construction of homogeneous perfect (Cantor-type) subsets of [0,1].
//!
//! A parameter spec holds, per level `k >= 1`, a branching count `n_k >= 2`,
//! a contraction ratio `c_k` in (0,1), and `n_k + 1` relative gap widths
//! `e_{k,0..=n_k}` (leading gap, gaps between consecutive children, trailing
//! gap), all exact rationals tied together by the identity
//! `sum(e_{k,l}) + n_k * c_k = 1`. Level sets are produced by recursing the
//! pattern inside every interval of the previous level; all endpoints stay
//! rational, so lengths and gaps reconstruct the unit interval exactly.

use num::bigint::BigInt;
use num::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{format_rat, parse_rat, rat_u64, Rat};

/// Default cap on the number of intervals a single level may hold.
pub const DEFAULT_INTERVAL_CAP: u64 = 1 << 24;

/// Branching counts `n_k`, indexed from level 1.
#[derive(Debug, Clone, PartialEq)]
pub enum BranchingSeq {
    Constant(u64),
    Explicit(Vec<u64>),
    Periodic(Vec<u64>),
}

/// Contraction ratios `c_k`, indexed from level 1.
#[derive(Debug, Clone, PartialEq)]
pub enum RatioSeq {
    Constant(Rat),
    Explicit(Vec<Rat>),
    Periodic(Vec<Rat>),
    /// `c_k = (1 - 1/(k+1)^2) / n_k`: gaps shrink fast enough that the
    /// resulting set has full Hausdorff dimension.
    DimOne,
}

/// Relative gap vectors `(e_{k,0}, ..., e_{k,n_k})`, indexed from level 1.
#[derive(Debug, Clone, PartialEq)]
pub enum GapSeq {
    Constant(Vec<Rat>),
    Explicit(Vec<Vec<Rat>>),
    Periodic(Vec<Vec<Rat>>),
    /// Zero end gaps and equal interior gaps `(1 - n_k c_k) / (n_k - 1)`.
    Uniform,
}

/// Resolved parameters of one construction level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelParams {
    pub branching: u64,
    pub ratio: Rat,
    pub rel_gaps: Vec<Rat>,
}

/// The three level sequences plus the interval cap.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    branching: BranchingSeq,
    ratio: RatioSeq,
    gaps: GapSeq,
    cap: u64,
}

impl ParamSpec {
    pub fn new(branching: BranchingSeq, ratio: RatioSeq, gaps: GapSeq) -> Self {
        ParamSpec {
            branching,
            ratio,
            gaps,
            cap: DEFAULT_INTERVAL_CAP,
        }
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    /// Zero end gaps, equal interior gaps derived from `n_k c_k <= 1`.
    pub fn uniform_cantor(branching: BranchingSeq, ratio: RatioSeq) -> Self {
        ParamSpec::new(branching, ratio, GapSeq::Uniform)
    }

    /// The classical middle-thirds set: `n_k = 2`, `c_k = 1/3`.
    pub fn middle_thirds() -> Self {
        ParamSpec::uniform_cantor(
            BranchingSeq::Constant(2),
            RatioSeq::Constant(Rat::new(BigInt::one(), BigInt::from(3))),
        )
    }

    /// Binary splitting with no gaps at all; every level set is [0,1].
    pub fn full_interval() -> Self {
        ParamSpec::uniform_cantor(
            BranchingSeq::Constant(2),
            RatioSeq::Constant(Rat::new(BigInt::one(), BigInt::from(2))),
        )
    }

    /// The full-dimension family `n_k = 2`, `c_k = (1 - 1/(k+1)^2)/2`.
    pub fn dim1_family() -> Self {
        ParamSpec::uniform_cantor(BranchingSeq::Constant(2), RatioSeq::DimOne)
    }

    /// Largest level the spec is defined for, `None` when unbounded.
    pub fn max_depth(&self) -> Option<usize> {
        let mut depth: Option<usize> = None;
        let mut upd = |n: usize| depth = Some(depth.map_or(n, |d| d.min(n)));
        if let BranchingSeq::Explicit(v) = &self.branching {
            upd(v.len());
        }
        if let RatioSeq::Explicit(v) = &self.ratio {
            upd(v.len());
        }
        if let GapSeq::Explicit(v) = &self.gaps {
            upd(v.len());
        }
        depth
    }

    fn check_depth(&self, k: usize) -> Result<()> {
        match self.max_depth() {
            Some(d) if k > d => Err(Error::Depth {
                requested: k,
                available: d,
            }),
            _ => Ok(()),
        }
    }

    /// Branching count `n_k`, `k >= 1`.
    pub fn branching(&self, k: usize) -> Result<u64> {
        if k == 0 {
            return Err(Error::Range("levels are indexed from 1".into()));
        }
        self.check_depth(k)?;
        let n = match &self.branching {
            BranchingSeq::Constant(n) => *n,
            BranchingSeq::Explicit(v) => v[k - 1],
            BranchingSeq::Periodic(v) => v[(k - 1) % v.len()],
        };
        if n < 2 {
            return Err(Error::Range(format!("branching {n} < 2 at level {k}")));
        }
        Ok(n)
    }

    /// Contraction ratio `c_k`, `k >= 1`.
    pub fn ratio(&self, k: usize) -> Result<Rat> {
        if k == 0 {
            return Err(Error::Range("levels are indexed from 1".into()));
        }
        self.check_depth(k)?;
        let c = match &self.ratio {
            RatioSeq::Constant(c) => c.clone(),
            RatioSeq::Explicit(v) => v[k - 1].clone(),
            RatioSeq::Periodic(v) => v[(k - 1) % v.len()].clone(),
            RatioSeq::DimOne => {
                let n = self.branching(k)?;
                let kk = rat_u64((k as u64 + 1) * (k as u64 + 1));
                let one = Rat::one();
                (&one - &one / kk) / rat_u64(n)
            }
        };
        if !c.is_positive() || c >= Rat::one() {
            return Err(Error::Range(format!(
                "ratio {} outside (0,1) at level {k}",
                format_rat(&c)
            )));
        }
        Ok(c)
    }

    /// Validated parameters of level `k`: the consistency identity
    /// `sum(e) + n*c = 1` is enforced exactly here.
    pub fn level(&self, k: usize) -> Result<LevelParams> {
        let n = self.branching(k)?;
        let c = self.ratio(k)?;
        let gaps = match &self.gaps {
            GapSeq::Constant(v) => v.clone(),
            GapSeq::Explicit(v) => v[k - 1].clone(),
            GapSeq::Periodic(v) => v[(k - 1) % v.len()].clone(),
            GapSeq::Uniform => {
                let nc = rat_u64(n) * &c;
                if nc > Rat::one() {
                    return Err(Error::Range(format!(
                        "n*c = {} exceeds 1 at level {k}",
                        format_rat(&nc)
                    )));
                }
                let interior = (Rat::one() - nc) / rat_u64(n - 1);
                let mut v = vec![interior; n as usize + 1];
                v[0] = Rat::zero();
                v[n as usize] = Rat::zero();
                v
            }
        };
        if gaps.len() != n as usize + 1 {
            return Err(Error::Range(format!(
                "level {k} needs {} gap entries, got {}",
                n + 1,
                gaps.len()
            )));
        }
        if let Some(g) = gaps.iter().find(|g| g.is_negative()) {
            return Err(Error::Range(format!(
                "negative gap {} at level {k}",
                format_rat(g)
            )));
        }
        let total = gaps.iter().sum::<Rat>() + rat_u64(n) * &c;
        if total != Rat::one() {
            return Err(Error::Consistency {
                level: k,
                residual: format_rat(&(total - Rat::one())),
            });
        }
        Ok(LevelParams {
            branching: n,
            ratio: c,
            rel_gaps: gaps,
        })
    }

    /// Validates levels `1..=depth`.
    pub fn validate_prefix(&self, depth: usize) -> Result<()> {
        for k in 1..=depth {
            self.level(k)?;
        }
        Ok(())
    }

    /// Common interval length at level `k`: the product `c_1 * ... * c_k`.
    pub fn delta(&self, k: usize) -> Result<Rat> {
        let mut d = Rat::one();
        for i in 1..=k {
            d *= self.ratio(i)?;
        }
        Ok(d)
    }

    /// All interval lengths `delta_0..=delta_k` in one pass.
    pub fn delta_prefix(&self, k: usize) -> Result<Vec<Rat>> {
        let mut out = Vec::with_capacity(k + 1);
        out.push(Rat::one());
        for i in 1..=k {
            let next = out[i - 1].clone() * self.ratio(i)?;
            out.push(next);
        }
        Ok(out)
    }

    /// Interval count at level `k`: the product `n_1 * ... * n_k`.
    pub fn count(&self, k: usize) -> Result<BigInt> {
        let mut n = BigInt::one();
        for i in 1..=k {
            n *= BigInt::from(self.branching(i)?);
        }
        Ok(n)
    }

    /// Absolute gap lengths `(eta_{k,0}, ..., eta_{k,n_k})` with
    /// `eta_{k,l} = e_{k,l} * delta_{k-1}`, `k >= 1`.
    pub fn gap_lengths(&self, k: usize) -> Result<Vec<Rat>> {
        if k == 0 {
            return Err(Error::Range("gap lengths start at level 1".into()));
        }
        let lp = self.level(k)?;
        let scale = self.delta(k - 1)?;
        Ok(lp.rel_gaps.iter().map(|e| e * &scale).collect())
    }

    /// Total length of the level-`k` set, `N_k * delta_k`.
    pub fn total_length(&self, k: usize) -> Result<Rat> {
        let mut t = Rat::one();
        for i in 1..=k {
            t *= rat_u64(self.branching(i)?) * self.ratio(i)?;
        }
        Ok(t)
    }
}

/// A closed interval with exact rational endpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interval {
    pub left: Rat,
    pub right: Rat,
}

impl Interval {
    pub fn len(&self) -> Rat {
        &self.right - &self.left
    }

    pub fn is_empty(&self) -> bool {
        self.left >= self.right
    }
}

/// One fundamental interval together with its level and 1-based address.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FundamentalInterval {
    pub level: usize,
    pub address: Vec<u32>,
    pub left: Rat,
    pub right: Rat,
}

/// All fundamental intervals of one level, left to right.
#[derive(Debug, Clone)]
pub struct LevelSet {
    level: usize,
    radices: Vec<u64>,
    delta: Rat,
    pub intervals: Vec<Interval>,
}

impl LevelSet {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn delta(&self) -> &Rat {
        &self.delta
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn total_length(&self) -> Rat {
        self.intervals.iter().map(|iv| iv.len()).sum()
    }

    /// 1-based address digits of the `idx`-th interval (left to right order
    /// coincides with lexicographic order on addresses).
    pub fn address(&self, idx: usize) -> Vec<u32> {
        let mut digits = vec![0u32; self.radices.len()];
        let mut rem = idx;
        for (slot, n) in digits.iter_mut().zip(&self.radices).rev() {
            *slot = (rem % *n as usize) as u32 + 1;
            rem /= *n as usize;
        }
        digits
    }

    /// Inverse of [`LevelSet::address`].
    pub fn index_of(&self, address: &[u32]) -> Result<usize> {
        if address.len() != self.radices.len() {
            return Err(Error::Chain(format!(
                "address length {} does not match level {}",
                address.len(),
                self.level
            )));
        }
        let mut idx = 0usize;
        for (digit, n) in address.iter().zip(&self.radices) {
            if *digit == 0 || *digit as u64 > *n {
                return Err(Error::Chain(format!(
                    "address digit {digit} outside 1..={n}"
                )));
            }
            idx = idx * *n as usize + (*digit as usize - 1);
        }
        Ok(idx)
    }

    pub fn fundamental(&self, idx: usize) -> FundamentalInterval {
        let iv = &self.intervals[idx];
        FundamentalInterval {
            level: self.level,
            address: self.address(idx),
            left: iv.left.clone(),
            right: iv.right.clone(),
        }
    }
}

/// The level-0 set: the unit interval alone.
pub fn root_level() -> LevelSet {
    LevelSet {
        level: 0,
        radices: Vec::new(),
        delta: Rat::one(),
        intervals: vec![Interval {
            left: Rat::zero(),
            right: Rat::one(),
        }],
    }
}

/// Expands every interval of `level` into its children, producing the next
/// level set.
pub fn extend_level(params: &ParamSpec, level: &LevelSet) -> Result<LevelSet> {
    let j = level.level + 1;
    let lp = params.level(j)?;
    let count = (level.intervals.len() as u64)
        .checked_mul(lp.branching)
        .filter(|c| *c <= params.cap())
        .ok_or(Error::Capacity {
            count: (BigInt::from(level.intervals.len() as u64) * BigInt::from(lp.branching))
                .to_string(),
            cap: params.cap(),
        })?;
    let delta = &level.delta * &lp.ratio;
    let abs_gaps: Vec<Rat> = lp.rel_gaps.iter().map(|e| e * &level.delta).collect();
    let expand = |parent: &Interval| -> Vec<Interval> {
        let mut children = Vec::with_capacity(lp.branching as usize);
        let mut x = &parent.left + &abs_gaps[0];
        for gap in abs_gaps.iter().skip(1) {
            let right = &x + &delta;
            children.push(Interval {
                left: x,
                right: right.clone(),
            });
            x = right + gap;
        }
        debug_assert_eq!(x, parent.right);
        children
    };
    let intervals: Vec<Interval> = if count >= 4096 {
        level
            .intervals
            .par_iter()
            .flat_map_iter(|p| expand(p))
            .collect()
    } else {
        level.intervals.iter().flat_map(|p| expand(p)).collect()
    };
    let mut radices = level.radices.clone();
    radices.push(lp.branching);
    Ok(LevelSet {
        level: j,
        radices,
        delta,
        intervals,
    })
}

/// Builds the level-`k` set by recursing the gap pattern inside every parent.
pub fn build_level(params: &ParamSpec, k: usize) -> Result<LevelSet> {
    let mut level = root_level();
    for _ in 0..k {
        level = extend_level(params, &level)?;
    }
    Ok(level)
}

// ---------------------------------------------------------------------------
// Serialization: arrays of exact values or `{"rule": ..., "params": ...}`.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleSpec {
    pub rule: String,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub params: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec<T> {
    List(Vec<T>),
    Rule(RuleSpec),
}

/// How explicit gap arrays are to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapForm {
    #[default]
    Relative,
    Absolute,
}

/// The JSON face of [`ParamSpec`]; rationals are `"p/q"` strings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawParamSpec {
    pub branching: FieldSpec<u64>,
    pub ratio: FieldSpec<String>,
    pub gaps: FieldSpec<Vec<String>>,
    #[serde(default)]
    pub gap_form: GapForm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
}

fn rule_field<'a>(r: &'a RuleSpec, key: &str) -> Result<&'a serde_json::Value> {
    r.params
        .get(key)
        .ok_or_else(|| Error::Config(format!("rule {:?} needs parameter {key:?}", r.rule)))
}

fn parse_rat_value(v: &serde_json::Value) -> Result<Rat> {
    match v {
        serde_json::Value::String(s) => parse_rat(s),
        serde_json::Value::Number(n) if n.is_i64() || n.is_u64() => {
            parse_rat(&n.to_string())
        }
        other => Err(Error::Parse(format!(
            "expected a rational string \"p/q\", got {other}"
        ))),
    }
}

fn branching_from_raw(f: &FieldSpec<u64>) -> Result<BranchingSeq> {
    match f {
        FieldSpec::List(v) => Ok(BranchingSeq::Explicit(v.clone())),
        FieldSpec::Rule(r) => match r.rule.as_str() {
            "constant" => Ok(BranchingSeq::Constant(
                rule_field(r, "value")?
                    .as_u64()
                    .ok_or_else(|| Error::Config("branching value must be an integer".into()))?,
            )),
            "periodic" => {
                let vals: Vec<u64> = serde_json::from_value(rule_field(r, "values")?.clone())?;
                if vals.is_empty() {
                    return Err(Error::Config("periodic branching needs values".into()));
                }
                Ok(BranchingSeq::Periodic(vals))
            }
            other => Err(Error::Config(format!("unknown branching rule {other:?}"))),
        },
    }
}

fn ratio_from_raw(f: &FieldSpec<String>) -> Result<RatioSeq> {
    match f {
        FieldSpec::List(v) => Ok(RatioSeq::Explicit(
            v.iter().map(|s| parse_rat(s)).collect::<Result<_>>()?,
        )),
        FieldSpec::Rule(r) => match r.rule.as_str() {
            "constant" => Ok(RatioSeq::Constant(parse_rat_value(rule_field(r, "value")?)?)),
            "periodic" => {
                let vals: Vec<String> = serde_json::from_value(rule_field(r, "values")?.clone())?;
                if vals.is_empty() {
                    return Err(Error::Config("periodic ratio needs values".into()));
                }
                Ok(RatioSeq::Periodic(
                    vals.iter().map(|s| parse_rat(s)).collect::<Result<_>>()?,
                ))
            }
            "dim1" => Ok(RatioSeq::DimOne),
            other => Err(Error::Config(format!("unknown ratio rule {other:?}"))),
        },
    }
}

fn gaps_from_raw(f: &FieldSpec<Vec<String>>) -> Result<GapSeq> {
    let parse_vec = |v: &Vec<String>| -> Result<Vec<Rat>> {
        v.iter().map(|s| parse_rat(s)).collect()
    };
    match f {
        FieldSpec::List(v) => Ok(GapSeq::Explicit(
            v.iter().map(parse_vec).collect::<Result<_>>()?,
        )),
        FieldSpec::Rule(r) => match r.rule.as_str() {
            "constant" => {
                let vals: Vec<String> = serde_json::from_value(rule_field(r, "values")?.clone())?;
                Ok(GapSeq::Constant(parse_vec(&vals)?))
            }
            "periodic" => {
                let vals: Vec<Vec<String>> =
                    serde_json::from_value(rule_field(r, "values")?.clone())?;
                if vals.is_empty() {
                    return Err(Error::Config("periodic gaps need values".into()));
                }
                Ok(GapSeq::Periodic(
                    vals.iter().map(parse_vec).collect::<Result<_>>()?,
                ))
            }
            "uniform" => Ok(GapSeq::Uniform),
            other => Err(Error::Config(format!("unknown gap rule {other:?}"))),
        },
    }
}

/// Builds a validated [`ParamSpec`] in relative-gap form from raw input.
///
/// Absolute gap arrays `eta_{k,l}` are divided by `delta_{k-1}` exactly;
/// levels `1..=depth` are checked against all invariants.
pub fn normalize_params(raw: &RawParamSpec, depth: usize) -> Result<ParamSpec> {
    let branching = branching_from_raw(&raw.branching)?;
    let ratio = ratio_from_raw(&raw.ratio)?;
    let mut gaps = gaps_from_raw(&raw.gaps)?;

    if raw.gap_form == GapForm::Absolute {
        let explicit = match &gaps {
            GapSeq::Explicit(v) => v.clone(),
            _ => {
                return Err(Error::Config(
                    "absolute gap form requires an explicit gap array".into(),
                ))
            }
        };
        // delta_{k-1} depends only on the ratio sequence, so convert first.
        let probe = ParamSpec::new(branching.clone(), ratio.clone(), GapSeq::Uniform);
        let deltas = probe.delta_prefix(explicit.len())?;
        let rel = explicit
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().map(|eta| eta / &deltas[i]).collect())
            .collect();
        gaps = GapSeq::Explicit(rel);
    }

    let mut spec = ParamSpec::new(branching, ratio, gaps);
    if let Some(cap) = raw.cap {
        spec = spec.with_cap(cap);
    }
    spec.validate_prefix(depth)?;
    Ok(spec)
}

impl ParamSpec {
    /// The JSON form of this spec (relative gaps).
    pub fn to_raw(&self) -> RawParamSpec {
        let branching = match &self.branching {
            BranchingSeq::Constant(n) => FieldSpec::Rule(RuleSpec {
                rule: "constant".into(),
                params: serde_json::json!({ "value": n }),
            }),
            BranchingSeq::Explicit(v) => FieldSpec::List(v.clone()),
            BranchingSeq::Periodic(v) => FieldSpec::Rule(RuleSpec {
                rule: "periodic".into(),
                params: serde_json::json!({ "values": v }),
            }),
        };
        let ratio = match &self.ratio {
            RatioSeq::Constant(c) => FieldSpec::Rule(RuleSpec {
                rule: "constant".into(),
                params: serde_json::json!({ "value": format_rat(c) }),
            }),
            RatioSeq::Explicit(v) => {
                FieldSpec::List(v.iter().map(format_rat).collect())
            }
            RatioSeq::Periodic(v) => FieldSpec::Rule(RuleSpec {
                rule: "periodic".into(),
                params: serde_json::json!({
                    "values": v.iter().map(format_rat).collect::<Vec<_>>()
                }),
            }),
            RatioSeq::DimOne => FieldSpec::Rule(RuleSpec {
                rule: "dim1".into(),
                params: serde_json::Value::Null,
            }),
        };
        let gap_row = |row: &Vec<Rat>| row.iter().map(format_rat).collect::<Vec<_>>();
        let gaps = match &self.gaps {
            GapSeq::Constant(v) => FieldSpec::Rule(RuleSpec {
                rule: "constant".into(),
                params: serde_json::json!({ "values": gap_row(v) }),
            }),
            GapSeq::Explicit(v) => FieldSpec::List(v.iter().map(gap_row).collect()),
            GapSeq::Periodic(v) => FieldSpec::Rule(RuleSpec {
                rule: "periodic".into(),
                params: serde_json::json!({
                    "values": v.iter().map(gap_row).collect::<Vec<_>>()
                }),
            }),
            GapSeq::Uniform => FieldSpec::Rule(RuleSpec {
                rule: "uniform".into(),
                params: serde_json::Value::Null,
            }),
        };
        RawParamSpec {
            branching,
            ratio,
            gaps,
            gap_form: GapForm::Relative,
            cap: (self.cap != DEFAULT_INTERVAL_CAP).then_some(self.cap),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat_ratio;
    use proptest::prelude::*;

    fn rat(n: i64, d: i64) -> Rat {
        rat_ratio(n, d)
    }

    fn explicit_spec(levels: Vec<(u64, Rat, Vec<Rat>)>) -> ParamSpec {
        let (ns, (cs, gs)): (Vec<u64>, (Vec<Rat>, Vec<Vec<Rat>>)) = levels
            .into_iter()
            .map(|(n, c, g)| (n, (c, g)))
            .unzip();
        ParamSpec::new(
            BranchingSeq::Explicit(ns),
            RatioSeq::Explicit(cs),
            GapSeq::Explicit(gs),
        )
    }

    #[test]
    fn middle_thirds_levels() {
        let p = ParamSpec::middle_thirds();
        let l1 = build_level(&p, 1).unwrap();
        assert_eq!(
            l1.intervals,
            vec![
                Interval { left: rat(0, 1), right: rat(1, 3) },
                Interval { left: rat(2, 3), right: rat(1, 1) },
            ]
        );
        let l2 = build_level(&p, 2).unwrap();
        let expect = [
            (rat(0, 1), rat(1, 9)),
            (rat(2, 9), rat(1, 3)),
            (rat(2, 3), rat(7, 9)),
            (rat(8, 9), rat(1, 1)),
        ];
        assert_eq!(l2.len(), 4);
        for (iv, (l, r)) in l2.intervals.iter().zip(expect) {
            assert_eq!((iv.left.clone(), iv.right.clone()), (l, r));
        }
    }

    #[test]
    fn touching_children_are_allowed() {
        let p = explicit_spec(vec![(
            2,
            rat(1, 4),
            vec![rat(1, 4), rat(0, 1), rat(1, 4)],
        )]);
        let l1 = build_level(&p, 1).unwrap();
        assert_eq!(
            l1.intervals,
            vec![
                Interval { left: rat(1, 4), right: rat(1, 2) },
                Interval { left: rat(1, 2), right: rat(3, 4) },
            ]
        );
    }

    #[test]
    fn consistency_residual_is_reported() {
        let p = explicit_spec(vec![(
            2,
            rat(1, 3),
            vec![rat(0, 1), rat(1, 2), rat(0, 1)],
        )]);
        match p.level(1) {
            Err(Error::Consistency { level, residual }) => {
                assert_eq!(level, 1);
                assert_eq!(residual, "1/6");
            }
            other => panic!("expected consistency error, got {other:?}"),
        }
    }

    #[test]
    fn range_errors() {
        let p = explicit_spec(vec![(1, rat(1, 3), vec![rat(1, 3), rat(1, 3)])]);
        assert!(matches!(p.level(1), Err(Error::Range(_))));
        let p = explicit_spec(vec![(2, rat(3, 2), vec![rat(0, 1); 3])]);
        assert!(matches!(p.level(1), Err(Error::Range(_))));
        let p = explicit_spec(vec![(2, rat(1, 3), vec![rat(-1, 3), rat(2, 3), rat(0, 1)])]);
        assert!(matches!(p.level(1), Err(Error::Range(_))));
    }

    #[test]
    fn degenerate_full_interval_is_valid() {
        let p = ParamSpec::full_interval();
        p.validate_prefix(6).unwrap();
        let l3 = build_level(&p, 3).unwrap();
        assert_eq!(l3.total_length(), Rat::one());
    }

    #[test]
    fn uniform_cantor_families() {
        // (3, 1/5): interior gaps (1 - 3/5)/2 = 1/5.
        let p = ParamSpec::uniform_cantor(
            BranchingSeq::Constant(3),
            RatioSeq::Constant(rat(1, 5)),
        );
        let lp = p.level(1).unwrap();
        assert_eq!(lp.rel_gaps, vec![rat(0, 1), rat(1, 5), rat(1, 5), rat(0, 1)]);
        // (2, 1/2): no room for gaps.
        let lp = ParamSpec::full_interval().level(4).unwrap();
        assert_eq!(lp.rel_gaps, vec![rat(0, 1); 3]);
        // n*c > 1 is rejected.
        let p = ParamSpec::uniform_cantor(
            BranchingSeq::Constant(3),
            RatioSeq::Constant(rat(1, 2)),
        );
        assert!(matches!(p.level(1), Err(Error::Range(_))));
    }

    #[test]
    fn delta_and_count() {
        let p = ParamSpec::middle_thirds();
        assert_eq!(p.delta(0).unwrap(), Rat::one());
        assert_eq!(p.delta(3).unwrap(), rat(1, 27));
        assert_eq!(p.count(0).unwrap(), BigInt::from(1));
        assert_eq!(p.count(5).unwrap(), BigInt::from(32));

        let d1 = ParamSpec::dim1_family();
        // c_1 = 3/8, c_2 = 4/9, product 1/6.
        assert_eq!(d1.delta(2).unwrap(), rat(1, 6));

        let mixed = ParamSpec::uniform_cantor(
            BranchingSeq::Explicit(vec![2, 3, 2]),
            RatioSeq::Constant(rat(1, 5)),
        );
        assert_eq!(mixed.count(3).unwrap(), BigInt::from(12));
    }

    #[test]
    fn gap_lengths_scale_by_parent_delta() {
        let p = ParamSpec::middle_thirds();
        assert_eq!(
            p.gap_lengths(1).unwrap(),
            vec![rat(0, 1), rat(1, 3), rat(0, 1)]
        );
        assert_eq!(
            p.gap_lengths(2).unwrap(),
            vec![rat(0, 1), rat(1, 9), rat(0, 1)]
        );
        let d1 = ParamSpec::dim1_family();
        assert_eq!(
            d1.gap_lengths(1).unwrap(),
            vec![rat(0, 1), rat(1, 4), rat(0, 1)]
        );
    }

    #[test]
    fn length_bookkeeping_identity() {
        // delta_k = sum(eta_{k+1,l}) + n_{k+1} * delta_{k+1}, exactly.
        for p in [
            ParamSpec::middle_thirds(),
            ParamSpec::dim1_family(),
            ParamSpec::uniform_cantor(
                BranchingSeq::Explicit(vec![2, 3, 4, 2]),
                RatioSeq::Explicit(vec![rat(1, 3), rat(1, 4), rat(1, 5), rat(2, 5)]),
            ),
        ] {
            for k in 0..3 {
                let lhs = p.delta(k).unwrap();
                let gaps = p.gap_lengths(k + 1).unwrap();
                let rhs = gaps.iter().sum::<Rat>()
                    + rat_u64(p.branching(k + 1).unwrap()) * p.delta(k + 1).unwrap();
                assert_eq!(lhs, rhs, "level {k}");
            }
        }
    }

    #[test]
    fn exact_reconstruction_of_unit_interval() {
        // Total interval length plus every gap at every level is exactly 1.
        let p = ParamSpec::dim1_family();
        let depth = 6;
        let mut total = p.total_length(depth).unwrap();
        for j in 1..=depth {
            let copies = p.count(j - 1).unwrap();
            let gap_sum = p.gap_lengths(j).unwrap().iter().sum::<Rat>();
            total += Rat::new(copies, BigInt::one()) * gap_sum;
        }
        assert_eq!(total, Rat::one());
    }

    #[test]
    fn nesting_and_order() {
        let p = ParamSpec::uniform_cantor(
            BranchingSeq::Explicit(vec![3, 2, 3]),
            RatioSeq::Explicit(vec![rat(1, 5), rat(1, 3), rat(1, 4)]),
        );
        let mut prev = build_level(&p, 0).unwrap();
        for k in 1..=3 {
            let cur = build_level(&p, k).unwrap();
            assert_eq!(BigInt::from(cur.len() as u64), p.count(k).unwrap());
            let n = p.branching(k).unwrap() as usize;
            for (i, iv) in cur.intervals.iter().enumerate() {
                assert!(iv.left < iv.right);
                assert_eq!(iv.len(), *cur.delta());
                let parent = &prev.intervals[i / n];
                assert!(parent.left <= iv.left && iv.right <= parent.right);
                if i > 0 {
                    assert!(cur.intervals[i - 1].right <= iv.left);
                }
            }
            assert_eq!(cur.total_length(), p.total_length(k).unwrap());
            prev = cur;
        }
    }

    #[test]
    fn addresses_round_trip_in_lexicographic_order() {
        let p = ParamSpec::uniform_cantor(
            BranchingSeq::Explicit(vec![2, 3]),
            RatioSeq::Constant(rat(1, 6)),
        );
        let l = build_level(&p, 2).unwrap();
        let mut seen = Vec::new();
        for i in 0..l.len() {
            let addr = l.address(i);
            assert_eq!(l.index_of(&addr).unwrap(), i);
            seen.push(addr);
        }
        let mut sorted = seen.clone();
        sorted.sort();
        assert_eq!(seen, sorted);
        assert_eq!(seen[0], vec![1, 1]);
        assert_eq!(seen.last().unwrap(), &vec![2, 3]);
        assert!(l.index_of(&[2, 4]).is_err());
        assert!(l.index_of(&[1]).is_err());
    }

    #[test]
    fn self_affine_children_reproduce_shifted_level_one() {
        let levels = vec![
            (2u64, rat(1, 3), vec![rat(1, 12), rat(1, 4), rat(0, 1)]),
            (3u64, rat(1, 6), vec![rat(0, 1), rat(1, 4), rat(1, 4), rat(0, 1)]),
        ];
        let p = explicit_spec(levels.clone());
        let l1 = build_level(&p, 1).unwrap();
        let l2 = build_level(&p, 2).unwrap();
        let shifted = explicit_spec(vec![levels[1].clone()]);
        let pattern = build_level(&shifted, 1).unwrap();
        let d1 = p.delta(1).unwrap();
        for (pi, parent) in l1.intervals.iter().enumerate() {
            for (ci, tile) in pattern.intervals.iter().enumerate() {
                let child = &l2.intervals[pi * 3 + ci];
                assert_eq!(child.left, &parent.left + &d1 * &tile.left);
                assert_eq!(child.right, &parent.left + &d1 * &tile.right);
            }
        }
    }

    #[test]
    fn capacity_and_depth_errors() {
        let p = ParamSpec::middle_thirds().with_cap(8);
        assert!(build_level(&p, 3).is_ok());
        assert!(matches!(
            build_level(&p, 4),
            Err(Error::Capacity { .. })
        ));
        let p = explicit_spec(vec![(2, rat(1, 3), vec![rat(0, 1), rat(1, 3), rat(0, 1)])]);
        assert!(matches!(p.level(2), Err(Error::Depth { .. })));
    }

    #[test]
    fn json_round_trip() {
        let json = r#"{
            "branching": {"rule": "constant", "params": {"value": 2}},
            "ratio": {"rule": "constant", "params": {"value": "1/3"}},
            "gaps": {"rule": "uniform"}
        }"#;
        let raw: RawParamSpec = serde_json::from_str(json).unwrap();
        let spec = normalize_params(&raw, 8).unwrap();
        assert_eq!(spec, ParamSpec::middle_thirds());

        let back = serde_json::to_string(&spec.to_raw()).unwrap();
        let raw2: RawParamSpec = serde_json::from_str(&back).unwrap();
        assert_eq!(normalize_params(&raw2, 8).unwrap(), spec);
    }

    #[test]
    fn explicit_and_absolute_gap_input() {
        let json = r#"{
            "branching": [2, 2],
            "ratio": ["1/3", "1/3"],
            "gaps": [["0", "1/3", "0"], ["0", "1/9", "0"]],
            "gap_form": "absolute"
        }"#;
        let raw: RawParamSpec = serde_json::from_str(json).unwrap();
        let spec = normalize_params(&raw, 2).unwrap();
        // eta_{2,1} = 1/9 over delta_1 = 1/3 gives e = 1/3.
        assert_eq!(
            spec.level(2).unwrap().rel_gaps,
            vec![rat(0, 1), rat(1, 3), rat(0, 1)]
        );
        // Decimal strings must be rejected.
        let bad = r#"{
            "branching": [2],
            "ratio": ["0.333"],
            "gaps": [["0", "1/3", "0"]]
        }"#;
        let raw: RawParamSpec = serde_json::from_str(bad).unwrap();
        assert!(normalize_params(&raw, 1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Random valid explicit specs keep every structural invariant.
        #[test]
        fn random_specs_build_consistently(
            seed_levels in proptest::collection::vec(
                (2u64..=4, 2i64..=9, proptest::collection::vec(0i64..=3, 5)),
                1..=4,
            )
        ) {
            let levels: Vec<(u64, Rat, Vec<Rat>)> = seed_levels
                .into_iter()
                .map(|(n, dden, raw_gaps)| {
                    // Scale keeps the gap sum below 1 so c stays in (0, 1/n].
                    let scale = (n as i64 + 1) * 4 * dden;
                    let gaps: Vec<Rat> = raw_gaps
                        .iter()
                        .take(n as usize + 1)
                        .map(|a| rat(*a, scale))
                        .collect();
                    let gap_sum: Rat = gaps.iter().sum();
                    let c = (Rat::one() - gap_sum) / rat_u64(n);
                    (n, c, gaps)
                })
                .collect();
            let depth = levels.len();
            let p = explicit_spec(levels);
            p.validate_prefix(depth).unwrap();

            let set = build_level(&p, depth).unwrap();
            prop_assert_eq!(
                BigInt::from(set.len() as u64),
                p.count(depth).unwrap()
            );
            prop_assert_eq!(set.total_length(), p.total_length(depth).unwrap());
            for w in set.intervals.windows(2) {
                prop_assert!(w[0].right <= w[1].left);
            }
            let parent = build_level(&p, depth - 1).unwrap();
            let n = p.branching(depth).unwrap() as usize;
            for (i, iv) in set.intervals.iter().enumerate() {
                let par = &parent.intervals[i / n];
                prop_assert!(par.left <= iv.left && iv.right <= par.right);
            }
        }
    }
}
