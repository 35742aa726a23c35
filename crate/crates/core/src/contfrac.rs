//! Continued fractions of exact numbers, convergents, slope families with digit rules
//! and an empirical checker for the bounded first-hit property of `{j alpha}`.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::exactnum::QuadRat;
use crate::{Error, Result};

/// Digits `[a_0; a_1, a_2, ...]` of a positive exact number.
///
/// For quadratic irrationals the expansion is eventually periodic; once the
/// cycle is found any index is answered from it, so the stream is infinite.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContinuedFraction {
    pub source: QuadRat,
    pub digits: Vec<BigInt>,
    /// `(start, len)`: digits from `start` on repeat with period `len`.
    pub period: Option<(usize, usize)>,
    /// The expansion of a rational ended after `digits.len()` digits.
    pub terminated: bool,
}

impl ContinuedFraction {
    /// Digit `i`, served from the period when the expansion is periodic.
    pub fn digit(&self, i: usize) -> Option<BigInt> {
        if i < self.digits.len() {
            return Some(self.digits[i].clone());
        }
        let (start, len) = self.period?;
        Some(self.digits[start + (i - start) % len].clone())
    }

    /// The first `n` digits (fewer when a rational expansion stops early).
    pub fn take(&self, n: usize) -> Vec<BigInt> {
        (0..n).map_while(|i| self.digit(i)).collect()
    }

    pub fn is_infinite(&self) -> bool {
        self.period.is_some()
    }

    /// Builds a finite expansion from explicit digits.
    pub fn from_digits(digits: &[u64]) -> Result<ContinuedFraction> {
        if digits.is_empty() {
            return Err(Error::InvalidArgument("no digits".into()));
        }
        if digits[1..].contains(&0) {
            return Err(Error::InvalidArgument("digits after a_0 must be positive".into()));
        }
        let digits: Vec<BigInt> = digits.iter().map(|&a| BigInt::from(a)).collect();
        let source = evaluate(&digits);
        Ok(ContinuedFraction { source, digits, period: None, terminated: true })
    }
}

/// Value of the finite continued fraction `[d_0; d_1, ..., d_k]`.
pub fn evaluate(digits: &[BigInt]) -> QuadRat {
    let mut x = QuadRat::from_bigint(digits[digits.len() - 1].clone());
    for a in digits[..digits.len() - 1].iter().rev() {
        x = x.recip().expect("positive partial quotient") + QuadRat::from_bigint(a.clone());
    }
    x
}

/// Expands `x > 0` to at least `depth` digits.
///
/// Periodicity is detected by an exact repeat of the complete quotient.
pub fn cf_expand(x: &QuadRat, depth: usize) -> Result<ContinuedFraction> {
    if x.signum() <= 0 {
        return Err(Error::Precondition("continued fraction needs x > 0".into()));
    }
    let mut digits = Vec::new();
    let mut seen: HashMap<QuadRat, usize> = HashMap::new();
    let mut cur = x.clone();
    loop {
        if !x.is_rational() {
            if let Some(&start) = seen.get(&cur) {
                let len = digits.len() - start;
                return Ok(ContinuedFraction {
                    source: x.clone(),
                    digits,
                    period: Some((start, len)),
                    terminated: false,
                });
            }
            seen.insert(cur.clone(), digits.len());
        } else if digits.len() >= depth {
            break;
        }
        let a = cur.floor();
        let rest = &cur - QuadRat::from_bigint(a.clone());
        digits.push(a);
        if rest.is_zero() {
            return Ok(ContinuedFraction { source: x.clone(), digits, period: None, terminated: true });
        }
        cur = rest.recip()?;
    }
    Ok(ContinuedFraction { source: x.clone(), digits, period: None, terminated: false })
}

/// Convergents `p_k/q_k` of a continued fraction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Convergents {
    pub p: Vec<BigInt>,
    pub q: Vec<BigInt>,
}

impl Convergents {
    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn value(&self, k: usize) -> QuadRat {
        QuadRat::rational(num_rational::BigRational::new(self.p[k].clone(), self.q[k].clone()))
    }

    /// `p_k q_{k-1} - q_k p_{k-1} = (-1)^(k-1)` for every stored `k >= 1`.
    pub fn determinant_holds(&self) -> bool {
        (1..self.len()).all(|k| {
            let det = &self.p[k] * &self.q[k - 1] - &self.q[k] * &self.p[k - 1];
            let want = if k % 2 == 1 { BigInt::one() } else { -BigInt::one() };
            det == want
        })
    }

    /// `|alpha - p_k/q_k| < 1/(q_k q_{k+1})`, i.e. `|alpha q_k - p_k| q_{k+1} < 1`.
    pub fn approximation_holds(&self, alpha: &QuadRat) -> bool {
        (0..self.len().saturating_sub(1)).all(|k| {
            let err = (alpha.mul_rational(&int_rat(&self.q[k])) - QuadRat::from_bigint(self.p[k].clone())).abs();
            err.mul_rational(&int_rat(&self.q[k + 1])) < QuadRat::one()
        })
    }
}

fn int_rat(n: &BigInt) -> num_rational::BigRational {
    num_rational::BigRational::from_integer(n.clone())
}

/// Convergents with indices `0..=k`.
pub fn cf_convergents(cf: &ContinuedFraction, k: usize) -> Result<Convergents> {
    let digits = cf.take(k + 1);
    if digits.len() < k + 1 {
        return Err(Error::InvalidArgument(format!(
            "only {} digits available, asked for index {k}",
            digits.len()
        )));
    }
    let (mut p2, mut p1) = (BigInt::zero(), BigInt::one());
    let (mut q2, mut q1) = (BigInt::one(), BigInt::zero());
    let mut out = Convergents { p: Vec::with_capacity(k + 1), q: Vec::with_capacity(k + 1) };
    for a in digits {
        let p = &a * &p1 + &p2;
        let q = &a * &q1 + &q2;
        out.p.push(p.clone());
        out.q.push(q.clone());
        p2 = std::mem::replace(&mut p1, p);
        q2 = std::mem::replace(&mut q1, q);
    }
    Ok(out)
}

/// Divisibility rule the digits of a constructed slope must obey.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DigitRule {
    Even,
    LcmOf(u64),
}

impl DigitRule {
    pub fn admits(&self, digit: u64) -> bool {
        match *self {
            DigitRule::Even => digit.is_multiple_of(2),
            DigitRule::LcmOf(l) => l != 0 && digit.is_multiple_of(l),
        }
    }
}

/// A slope whose digits all satisfy `rule`.
///
/// Self-similar: `alpha(base) = [base; base, ...]`. Otherwise the period-two
/// slope `[base; 2 base, base, 2 base, ...] = (base + sqrt(base^2 + 2))/2`.
pub fn make_theorem_slope(base: u64, rule: DigitRule, self_similar: bool) -> Result<QuadRat> {
    if base < 2 {
        return Err(Error::InvalidArgument("base must be at least 2".into()));
    }
    if !rule.admits(base) {
        return Err(Error::Precondition(format!("digit {base} violates {rule:?}")));
    }
    if self_similar {
        return Ok(QuadRat::alpha(base));
    }
    let half = QuadRat::frac(1, 2);
    let d = base.checked_mul(base).and_then(|x| x.checked_add(2)).ok_or(Error::Overflow)?;
    Ok((QuadRat::int(base as i64) + QuadRat::sqrt(d)) * half)
}

/// Evidence that the inspected digits are bounded.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BadApproxCertificate {
    /// Strict upper bound on every inspected digit (`a_i < u`).
    pub u: BigInt,
    pub depth: usize,
    /// Period `(start, len)` when the bound covers the whole infinite stream.
    pub periodic: Option<(usize, usize)>,
}

/// Bounds the digits `a_1 .. a_depth` (all digits, when periodic).
pub fn certify_bad_approx(cf: &ContinuedFraction, depth: usize) -> BadApproxCertificate {
    let n = match cf.period {
        Some((s, l)) => (s + l).max(depth + 1),
        None => (depth + 1).min(cf.digits.len()),
    };
    let max = (1..n).filter_map(|i| cf.digit(i)).max().unwrap_or_else(BigInt::zero);
    BadApproxCertificate { u: max + 1, depth: n.saturating_sub(1), periodic: cf.period }
}

/// One row of the bounded-first-hit table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyARow {
    pub n: u64,
    /// Largest first-hit index over the grid intervals `[t/n, (t+1)/n)`.
    pub j_max: u64,
    /// Empirical constant `j_max / n`.
    pub c1: f64,
}

/// For each `n`, the largest first index `j` with `{j alpha}` in each grid cell.
///
/// Irrational `alpha` are scanned up to `1000 n`; a rational `alpha = p/q`
/// fails with an error when some cell is never hit by `j <= q`.
#[allow(non_snake_case)]
pub fn check_property_A(alpha: &QuadRat, n_values: &[u64]) -> Result<Vec<PropertyARow>> {
    let (a, b, c) = alpha.integer_form();
    let d = alpha.d();
    let limit_for = |n: u64| -> u64 {
        match alpha.as_rational() {
            Some(r) => r.denom().to_u64().unwrap_or(u64::MAX),
            None => n.saturating_mul(1000),
        }
    };
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        let limit = limit_for(n);
        let mut seen = vec![false; n as usize];
        let mut left = n;
        let mut j = 0u64;
        let nb = BigInt::from(n);
        while left > 0 {
            j += 1;
            if j > limit {
                return Err(Error::Unreachable(format!(
                    "some interval of width 1/{n} is never hit by {{j alpha}}, j <= {limit}"
                )));
            }
            // bucket = floor(n {j alpha}) = floor(n j alpha) - n floor(j alpha)
            let jb = BigInt::from(j);
            let fl = floor_form(&(&a * &jb), &(&b * &jb), d, &c);
            let fln = floor_form(&(&a * &jb * &nb), &(&b * &jb * &nb), d, &c);
            let bucket = (fln - fl * &nb).to_usize().expect("bucket in range");
            if !seen[bucket] {
                seen[bucket] = true;
                left -= 1;
            }
        }
        rows.push(PropertyARow { n, j_max: j, c1: j as f64 / n as f64 });
    }
    Ok(rows)
}

/// `floor((a + b sqrt(d)) / c)` for integers with `c > 0` and square-free `d`.
pub fn floor_form(a: &BigInt, b: &BigInt, d: u64, c: &BigInt) -> BigInt {
    use num_integer::Integer;
    let surd = if d == 0 || b.is_zero() {
        BigInt::zero()
    } else {
        let s = (b * b * BigInt::from(d)).sqrt();
        if b.is_negative() {
            -s - 1
        } else {
            s
        }
    };
    (a + surd).div_floor(c)
}

/// The golden ratio `(1 + sqrt 5)/2`.
pub fn golden() -> QuadRat {
    QuadRat::alpha(1)
}

/// The rational `[2; 4, 16, 256, 65536, 2^32]` with digits `2^(2^i)`.
pub fn doubling_digit_slope(terms: usize) -> Result<QuadRat> {
    if terms == 0 || terms > 6 {
        return Err(Error::InvalidArgument("1..=6 doubling digits fit in u64".into()));
    }
    let digits: Vec<u64> = (0..terms as u32).map(|i| 1u64 << (1u32 << i)).collect();
    Ok(ContinuedFraction::from_digits(&digits)?.source)
}
