//! Working-precision context around `astro_float::BigFloat`.
//!
//! Precision is configured in decimal digits and mapped to mantissa bits with
//! guard room. All exact rationals enter arbitrary-precision arithmetic
//! through [`FloatCtx::from_rat`]; f64 leaves through [`FloatCtx::to_f64`]
//! only at reporting boundaries.

use astro_float::{BigFloat, Consts, Exponent, RoundingMode, Sign, Word};
use num::bigint::BigInt;
use num::Signed;

use crate::error::{Error, Result};
use crate::rational::Rat;

pub const DEFAULT_DIGITS: u32 = 50;

/// Mantissa bits for the requested decimal digits, with guard bits for
/// accumulated rounding across level-by-level recursions.
pub fn digits_to_bits(digits: u32) -> usize {
    (digits as f64 * std::f64::consts::LOG2_10).ceil() as usize + 64
}

pub struct FloatCtx {
    bits: usize,
    rm: RoundingMode,
    cc: Consts,
}

impl FloatCtx {
    pub fn new(digits: u32) -> Self {
        FloatCtx {
            bits: digits_to_bits(digits),
            rm: RoundingMode::ToEven,
            cc: Consts::new().expect("constants cache"),
        }
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn zero(&self) -> BigFloat {
        BigFloat::from_word(0, self.bits)
    }

    pub fn one(&self) -> BigFloat {
        BigFloat::from_word(1, self.bits)
    }

    pub fn from_u64(&self, v: u64) -> BigFloat {
        BigFloat::from_u64(v, self.bits)
    }

    pub fn from_f64(&self, v: f64) -> BigFloat {
        BigFloat::from_f64(v, self.bits)
    }

    pub fn from_bigint(&self, v: &BigInt) -> BigFloat {
        let words: Vec<Word> = v.magnitude().iter_u64_digits().collect();
        if words.is_empty() {
            return self.zero();
        }
        let sign = if v.is_negative() { Sign::Neg } else { Sign::Pos };
        let mut f = BigFloat::from_words(&words, sign, (words.len() * 64) as Exponent);
        f.set_precision(self.bits.max(words.len() * 64), self.rm)
            .expect("precision");
        f
    }

    pub fn from_rat(&mut self, r: &Rat) -> BigFloat {
        let num = self.from_bigint(r.numer());
        let den = self.from_bigint(r.denom());
        num.div(&den, self.bits, self.rm)
    }

    pub fn add(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.add(b, self.bits, self.rm)
    }

    pub fn sub(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.sub(b, self.bits, self.rm)
    }

    pub fn mul(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.mul(b, self.bits, self.rm)
    }

    pub fn div(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.div(b, self.bits, self.rm)
    }

    pub fn recip(&self, a: &BigFloat) -> BigFloat {
        a.reciprocal(self.bits, self.rm)
    }

    pub fn powi(&self, a: &BigFloat, n: usize) -> BigFloat {
        a.powi(n, self.bits, self.rm)
    }

    pub fn pow(&mut self, a: &BigFloat, e: &BigFloat) -> BigFloat {
        a.pow(e, self.bits, self.rm, &mut self.cc)
    }

    pub fn ln(&mut self, a: &BigFloat) -> BigFloat {
        a.ln(self.bits, self.rm, &mut self.cc)
    }

    pub fn log2(&mut self, a: &BigFloat) -> BigFloat {
        a.log2(self.bits, self.rm, &mut self.cc)
    }

    pub fn exp(&mut self, a: &BigFloat) -> BigFloat {
        a.exp(self.bits, self.rm, &mut self.cc)
    }

    pub fn sqrt(&self, a: &BigFloat) -> BigFloat {
        a.sqrt(self.bits, self.rm)
    }

    /// `x^(1/n)` for positive `x` by Newton iteration from an f64 seed.
    /// Much cheaper than the general power for small `n`; accurate to a few
    /// ulps, which the guard bits absorb.
    pub fn nth_root(&mut self, x: &BigFloat, n: u64) -> BigFloat {
        debug_assert!(n >= 1);
        if n == 1 || x.is_zero() {
            return x.clone();
        }
        if n == 2 {
            return self.sqrt(x);
        }
        let seed = self.to_f64(x).powf(1.0 / n as f64);
        if !(seed.is_normal() && seed > 0.0) {
            let e = self.from_f64(1.0 / n as f64);
            return self.pow(x, &e);
        }
        let p = self.bits + 64;
        let rm = self.rm;
        let n_f = BigFloat::from_u64(n, p);
        let mut y = BigFloat::from_f64(seed, p);
        // Quadratic convergence: five steps lift a 53-bit seed beyond any
        // precision this crate configures.
        for _ in 0..5 {
            let y_pow = y.powi(n as usize - 1, p, rm);
            let quot = x.div(&y_pow, p, rm);
            let scaled = y.mul(&BigFloat::from_u64(n - 1, p), p, rm);
            y = scaled.add(&quot, p, rm).div(&n_f, p, rm);
        }
        let mut out = y;
        out.set_precision(self.bits, rm).expect("precision");
        out
    }

    /// `x^(num/den)` for positive `x` and a reduced small fraction, via the
    /// root-then-power route.
    pub fn pow_small_rational(&mut self, x: &BigFloat, num: u64, den: u64) -> BigFloat {
        let root = self.nth_root(x, den);
        self.powi(&root, num as usize)
    }

    /// General power that recognizes exponents of the form `m / 2^s`
    /// (`s <= 6`, `m <= 4096`) and routes them through the cheap
    /// root-then-power path; everything else falls back to the series.
    pub fn pow_any(&mut self, x: &BigFloat, e: &BigFloat) -> BigFloat {
        if x.is_positive() && !x.is_zero() {
            let ef = self.to_f64(e);
            if ef > 0.0 {
                for den in [1u64, 2, 4, 8, 16, 32, 64] {
                    let scaled = ef * den as f64;
                    if scaled.fract() == 0.0 && scaled >= 1.0 && scaled <= 4096.0 {
                        let back = self
                            .from_u64(scaled as u64)
                            .div(&self.from_u64(den), self.bits, self.rm);
                        if fcmp(e, &back) == std::cmp::Ordering::Equal {
                            return self.pow_small_rational(x, scaled as u64, den);
                        }
                        break;
                    }
                }
            }
        }
        self.pow(x, e)
    }

    /// Natural log of an exact rational.
    pub fn ln_rat(&mut self, r: &Rat) -> Result<BigFloat> {
        if !r.is_positive() {
            return Err(Error::Degenerate(format!(
                "log argument must be positive, got {r}"
            )));
        }
        let f = self.from_rat(r);
        Ok(self.ln(&f))
    }

    /// Rounds toward zero; sufficient for reporting and f64-domain checks.
    pub fn to_f64(&self, a: &BigFloat) -> f64 {
        if a.is_nan() {
            return f64::NAN;
        }
        if a.is_inf_pos() {
            return f64::INFINITY;
        }
        if a.is_inf_neg() {
            return f64::NEG_INFINITY;
        }
        if a.is_zero() {
            return 0.0;
        }
        let (words, _, sign, e, _) = a.as_raw_parts().expect("finite value");
        let mut v = 0.0f64;
        let n = words.len();
        // Mantissa is little-endian and left-normalized: value = 0.m * 2^e.
        for (idx, pos) in [(n.wrapping_sub(1), 1i32), (n.wrapping_sub(2), 2i32)] {
            if idx < n {
                v += words[idx] as f64 * 2f64.powi(e - 64 * pos);
            }
        }
        if sign == Sign::Neg {
            -v
        } else {
            v
        }
    }
}

/// True for values strictly greater than zero (astro-float gives bare zero a
/// positive sign, so `is_positive` alone does not suffice).
pub fn is_strictly_positive(x: &BigFloat) -> bool {
    x.is_positive() && !x.is_zero()
}

/// Total-order comparison for finite values.
pub fn fcmp(a: &BigFloat, b: &BigFloat) -> std::cmp::Ordering {
    match a.cmp(b) {
        Some(s) if s < 0 => std::cmp::Ordering::Less,
        Some(s) if s > 0 => std::cmp::Ordering::Greater,
        Some(_) => std::cmp::Ordering::Equal,
        None => panic!("NaN in comparison"),
    }
}
