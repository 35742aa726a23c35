//! Exact arithmetic in Q and in real quadratic fields Q(sqrt(D)).
//!
//! A [`QuadRat`] is `p + q*sqrt(D)` with rational `p`, `q` and square-free
//! `D`. `D = 0` encodes a plain rational. Values in different quadratic fields
//! never mix: the constructions in this crate always stay inside one field, so
//! a mismatch is reported as an error instead of being approximated.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::{Integer, Roots};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// An exact real number `p + q*sqrt(d)`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QuadRat {
    p: BigRational,
    q: BigRational,
    d: u64,
}

/// Splits `n` into `s^2 * f` with `f` square-free. Returns `(s, f)`.
fn square_free_part(mut n: u64) -> (u64, u64) {
    let mut s = 1u64;
    let mut f = 1u64;
    let mut k = 2u64;
    while k.saturating_mul(k) <= n {
        let mut e = 0;
        while n.is_multiple_of(k) {
            n /= k;
            e += 1;
        }
        for _ in 0..e / 2 {
            s *= k;
        }
        if e % 2 == 1 {
            f *= k;
        }
        k += 1;
    }
    (s, f * n)
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl QuadRat {
    /// Builds `p + q*sqrt(d)` and normalizes `d` to its square-free part.
    pub fn new(p: BigRational, q: BigRational, d: u64) -> QuadRat {
        if d == 0 || q.is_zero() {
            return QuadRat { p, q: BigRational::zero(), d: 0 };
        }
        let (s, f) = square_free_part(d);
        let q = q * BigRational::from_integer(BigInt::from(s));
        if f == 1 {
            QuadRat { p: p + q, q: BigRational::zero(), d: 0 }
        } else {
            QuadRat { p, q, d: f }
        }
    }

    pub fn zero() -> QuadRat {
        QuadRat::rational(BigRational::zero())
    }

    pub fn one() -> QuadRat {
        QuadRat::int(1)
    }

    pub fn int(n: i64) -> QuadRat {
        QuadRat::rational(rat(n))
    }

    pub fn from_bigint(n: BigInt) -> QuadRat {
        QuadRat::rational(BigRational::from_integer(n))
    }

    pub fn rational(p: BigRational) -> QuadRat {
        QuadRat { p, q: BigRational::zero(), d: 0 }
    }

    /// The rational `num/den`. Panics if `den == 0`.
    pub fn frac(num: i64, den: i64) -> QuadRat {
        QuadRat::rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// `sqrt(d)`, reduced.
    pub fn sqrt(d: u64) -> QuadRat {
        QuadRat::new(BigRational::zero(), BigRational::one(), d)
    }

    /// `a + b*sqrt(d)` from integer parts.
    pub fn from_ints(a: i64, b: i64, d: u64) -> QuadRat {
        QuadRat::new(rat(a), rat(b), d)
    }

    /// The self-similar slope `alpha(a) = (a + sqrt(a^2+4))/2 = [a; a, a, ...]`.
    pub fn alpha(a: u64) -> QuadRat {
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        let a2 = a as u128 * a as u128 + 4;
        let d = u64::try_from(a2).expect("digit too large");
        QuadRat::new(rat(a as i64) * &half, half, d)
    }

    pub fn p(&self) -> &BigRational {
        &self.p
    }

    pub fn q(&self) -> &BigRational {
        &self.q
    }

    /// The square-free radicand, 0 for rationals.
    pub fn d(&self) -> u64 {
        self.d
    }

    pub fn is_rational(&self) -> bool {
        self.d == 0
    }

    pub fn is_zero(&self) -> bool {
        self.p.is_zero() && self.q.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.d == 0 && self.p.is_integer()
    }

    /// The rational value, when there is no surd part.
    pub fn as_rational(&self) -> Option<&BigRational> {
        if self.d == 0 {
            Some(&self.p)
        } else {
            None
        }
    }

    /// Common field of two operands, promoting rationals.
    pub fn field_with(&self, other: &QuadRat) -> Result<u64> {
        match (self.d, other.d) {
            (0, d) | (d, 0) => Ok(d),
            (a, b) if a == b => Ok(a),
            (a, b) => Err(Error::FieldMismatch(a, b)),
        }
    }

    fn reduced(p: BigRational, q: BigRational, d: u64) -> QuadRat {
        if q.is_zero() || d == 0 {
            QuadRat { p, q: BigRational::zero(), d: 0 }
        } else {
            QuadRat { p, q, d }
        }
    }

    pub fn checked_add(&self, o: &QuadRat) -> Result<QuadRat> {
        let d = self.field_with(o)?;
        Ok(QuadRat::reduced(&self.p + &o.p, &self.q + &o.q, d))
    }

    pub fn checked_sub(&self, o: &QuadRat) -> Result<QuadRat> {
        let d = self.field_with(o)?;
        Ok(QuadRat::reduced(&self.p - &o.p, &self.q - &o.q, d))
    }

    pub fn checked_mul(&self, o: &QuadRat) -> Result<QuadRat> {
        let d = self.field_with(o)?;
        if self.d == 0 {
            return Ok(QuadRat::reduced(&self.p * &o.p, &self.p * &o.q, d));
        }
        if o.d == 0 {
            return Ok(QuadRat::reduced(&self.p * &o.p, &self.q * &o.p, d));
        }
        let dd = BigRational::from_integer(BigInt::from(d));
        let p = &self.p * &o.p + &self.q * &o.q * dd;
        let q = &self.p * &o.q + &self.q * &o.p;
        Ok(QuadRat::reduced(p, q, d))
    }

    pub fn checked_div(&self, o: &QuadRat) -> Result<QuadRat> {
        let inv = o.recip()?;
        self.checked_mul(&inv)
    }

    /// `1/x`, rationalizing the denominator with the conjugate.
    pub fn recip(&self) -> Result<QuadRat> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        if self.d == 0 {
            return Ok(QuadRat::rational(self.p.recip()));
        }
        let n = self.norm();
        Ok(QuadRat::reduced(&self.p / &n, -(&self.q / &n), self.d))
    }

    /// Galois conjugate `p - q*sqrt(d)`.
    pub fn conj(&self) -> QuadRat {
        QuadRat::reduced(self.p.clone(), -self.q.clone(), self.d)
    }

    /// Field norm `p^2 - q^2 d`.
    pub fn norm(&self) -> BigRational {
        &self.p * &self.p - &self.q * &self.q * BigRational::from_integer(BigInt::from(self.d))
    }

    pub fn abs(&self) -> QuadRat {
        if self.signum() < 0 {
            -self
        } else {
            self.clone()
        }
    }

    /// Sign of the real value, decided with integer arithmetic only.
    pub fn signum(&self) -> i32 {
        let sp = sign_of(&self.p);
        let sq = sign_of(&self.q);
        if sq == 0 || self.d == 0 {
            return sp;
        }
        if sp == 0 || sp == sq {
            return sq;
        }
        // Opposite signs: compare p^2 with q^2 d.
        let lhs = &self.p * &self.p;
        let rhs = &self.q * &self.q * BigRational::from_integer(BigInt::from(self.d));
        match lhs.cmp(&rhs) {
            Ordering::Greater => sp,
            Ordering::Less => sq,
            Ordering::Equal => 0,
        }
    }

    /// Floor, seeded by a double estimate and corrected by exact sign sweeps.
    pub fn floor(&self) -> BigInt {
        if self.d == 0 {
            return self.p.floor().to_integer();
        }
        let est = self.to_f64();
        let mut n = if est.is_finite() && est.abs() < 1e15 {
            BigInt::from(est.floor() as i64)
        } else {
            self.coarse_floor()
        };
        loop {
            if self.minus_int(&n).signum() < 0 {
                n -= 1;
            } else if self.minus_int(&(&n + 1)).signum() >= 0 {
                n += 1;
            } else {
                return n;
            }
        }
    }

    /// Floor of each part separately; within 2 of the true floor.
    fn coarse_floor(&self) -> BigInt {
        let fp = self.p.floor().to_integer();
        // q*sqrt(d) = sign * sqrt(num^2 d) / den
        let num = self.q.numer();
        let den = self.q.denom();
        let s: BigInt = Roots::sqrt(&(num * num * BigInt::from(self.d)));
        let qs: BigInt = if num.is_negative() { -(s + BigInt::from(1u8)) } else { s };
        fp + qs.div_floor(den)
    }

    fn minus_int(&self, n: &BigInt) -> QuadRat {
        QuadRat { p: &self.p - BigRational::from_integer(n.clone()), q: self.q.clone(), d: self.d }
    }

    /// Fractional part `x - floor(x)`, always in `[0, 1)`.
    pub fn fract(&self) -> QuadRat {
        let f = self.floor();
        self.minus_int(&f)
    }

    pub fn ceil(&self) -> BigInt {
        -((-self).floor())
    }

    pub fn to_f64(&self) -> f64 {
        let p = self.p.to_f64().unwrap_or(f64::NAN);
        if self.d == 0 {
            return p;
        }
        p + self.q.to_f64().unwrap_or(f64::NAN) * (self.d as f64).sqrt()
    }

    /// Decimal expansion with `digits` digits after the point, truncated toward
    /// minus infinity. Exact: computed from `floor(x * 10^digits)`.
    pub fn to_decimal(&self, digits: usize) -> String {
        let scale = BigInt::from(10u32).pow(digits as u32);
        let scaled = self.mul_rational(&BigRational::from_integer(scale.clone())).floor();
        let (neg, mag) = if scaled.is_negative() {
            (true, -scaled)
        } else {
            (false, scaled)
        };
        let (ip, fp) = mag.div_rem(&scale);
        let mut frac = fp.to_string();
        while frac.len() < digits {
            frac.insert(0, '0');
        }
        let sign = if neg { "-" } else { "" };
        if digits == 0 {
            format!("{sign}{ip}")
        } else {
            format!("{sign}{ip}.{frac}")
        }
    }

    pub fn mul_rational(&self, r: &BigRational) -> QuadRat {
        QuadRat::reduced(&self.p * r, &self.q * r, self.d)
    }

    pub fn mul_int(&self, n: i64) -> QuadRat {
        self.mul_rational(&rat(n))
    }

    pub fn add_int(&self, n: i64) -> QuadRat {
        QuadRat { p: &self.p + rat(n), q: self.q.clone(), d: self.d }
    }

    /// Writes the value as `(a + b*sqrt(d)) / c` with integers and `c > 0`.
    pub fn integer_form(&self) -> (BigInt, BigInt, BigInt) {
        let c = self.p.denom().lcm(self.q.denom());
        let a = self.p.numer() * (&c / self.p.denom());
        let b = self.q.numer() * (&c / self.q.denom());
        (a, b, c)
    }

    /// Exact comparison inside one field. Errors on mixed fields.
    pub fn try_cmp(&self, o: &QuadRat) -> Result<Ordering> {
        let diff = self.checked_sub(o)?;
        Ok(diff.signum().cmp(&0))
    }

    pub fn min_of(a: &QuadRat, b: &QuadRat) -> QuadRat {
        if a <= b {
            a.clone()
        } else {
            b.clone()
        }
    }
}

fn sign_of(r: &BigRational) -> i32 {
    if r.is_zero() {
        0
    } else if r.is_negative() {
        -1
    } else {
        1
    }
}

/// Field addition; errors on incompatible fields.
pub fn qr_add(x: &QuadRat, y: &QuadRat) -> Result<QuadRat> {
    x.checked_add(y)
}

pub fn qr_sub(x: &QuadRat, y: &QuadRat) -> Result<QuadRat> {
    x.checked_sub(y)
}

pub fn qr_mul(x: &QuadRat, y: &QuadRat) -> Result<QuadRat> {
    x.checked_mul(y)
}

pub fn qr_div(x: &QuadRat, y: &QuadRat) -> Result<QuadRat> {
    x.checked_div(y)
}

pub fn qr_sign(x: &QuadRat) -> i32 {
    x.signum()
}

pub fn qr_floor(x: &QuadRat) -> BigInt {
    x.floor()
}

pub fn qr_fract(x: &QuadRat) -> QuadRat {
    x.fract()
}

// Operator impls panic on mixed fields; library code only ever combines
// values of one field, and the checked_* methods exist for untrusted input.
macro_rules! binop {
    ($tr:ident, $m:ident, $checked:ident) => {
        impl $tr<&QuadRat> for &QuadRat {
            type Output = QuadRat;
            fn $m(self, o: &QuadRat) -> QuadRat {
                self.$checked(o).expect("quadratic field arithmetic")
            }
        }
        impl $tr<QuadRat> for QuadRat {
            type Output = QuadRat;
            fn $m(self, o: QuadRat) -> QuadRat {
                (&self).$m(&o)
            }
        }
        impl $tr<&QuadRat> for QuadRat {
            type Output = QuadRat;
            fn $m(self, o: &QuadRat) -> QuadRat {
                (&self).$m(o)
            }
        }
        impl $tr<QuadRat> for &QuadRat {
            type Output = QuadRat;
            fn $m(self, o: QuadRat) -> QuadRat {
                self.$m(&o)
            }
        }
    };
}

binop!(Add, add, checked_add);
binop!(Sub, sub, checked_sub);
binop!(Mul, mul, checked_mul);
binop!(Div, div, checked_div);

impl Neg for &QuadRat {
    type Output = QuadRat;
    fn neg(self) -> QuadRat {
        QuadRat { p: -self.p.clone(), q: -self.q.clone(), d: self.d }
    }
}

impl Neg for QuadRat {
    type Output = QuadRat;
    fn neg(self) -> QuadRat {
        QuadRat { p: -self.p, q: -self.q, d: self.d }
    }
}

impl PartialOrd for QuadRat {
    fn partial_cmp(&self, o: &QuadRat) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for QuadRat {
    /// Panics when the operands live in different quadratic fields.
    fn cmp(&self, o: &QuadRat) -> Ordering {
        if self.d == o.d && self.q == o.q {
            return self.p.cmp(&o.p);
        }
        self.try_cmp(o).expect("comparison across quadratic fields")
    }
}

impl From<i64> for QuadRat {
    fn from(n: i64) -> QuadRat {
        QuadRat::int(n)
    }
}

impl From<BigRational> for QuadRat {
    fn from(r: BigRational) -> QuadRat {
        QuadRat::rational(r)
    }
}

impl fmt::Display for QuadRat {
    /// Canonical text: `p` or `p + q*sqrt(D)` (`p - q*sqrt(D)` for negative q).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.d == 0 {
            return write!(f, "{}", self.p);
        }
        if self.q.is_negative() {
            write!(f, "{} - {}*sqrt({})", self.p, -self.q.clone(), self.d)
        } else {
            write!(f, "{} + {}*sqrt({})", self.p, self.q, self.d)
        }
    }
}

impl fmt::Debug for QuadRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "QuadRat({self})")
    }
}

impl Serialize for QuadRat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for QuadRat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<QuadRat, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
    src: &'a str,
}

impl<'a> Parser<'a> {
    fn err(&self, why: &str) -> Error {
        Error::Parse(self.src.to_string(), format!("{why} at offset {}", self.i))
    }

    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.ws();
        if self.i < self.s.len() && self.s[self.i] == c {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn integer(&mut self) -> Result<BigInt> {
        self.ws();
        let start = self.i;
        while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
            self.i += 1;
        }
        if start == self.i {
            return Err(self.err("expected digits"));
        }
        let txt = std::str::from_utf8(&self.s[start..self.i]).unwrap();
        Ok(txt.parse::<BigInt>().unwrap())
    }

    fn sqrt_tail(&mut self) -> Result<u64> {
        self.ws();
        if !self.s[self.i..].starts_with(b"sqrt") {
            return Err(self.err("expected sqrt"));
        }
        self.i += 4;
        if !self.eat(b'(') {
            return Err(self.err("expected '('"));
        }
        let d = self.integer()?;
        if !self.eat(b')') {
            return Err(self.err("expected ')'"));
        }
        d.to_u64().ok_or_else(|| self.err("radicand too large"))
    }

    /// term := rational ['*' sqrt(D)] | sqrt(D)
    fn term(&mut self) -> Result<QuadRat> {
        self.ws();
        if self.s[self.i..].starts_with(b"sqrt") {
            let d = self.sqrt_tail()?;
            return Ok(QuadRat::sqrt(d));
        }
        let n = self.integer()?;
        let mut r = BigRational::from_integer(n);
        if self.eat(b'/') {
            let den = self.integer()?;
            if den.is_zero() {
                return Err(self.err("zero denominator"));
            }
            r /= BigRational::from_integer(den);
        }
        if self.eat(b'*') {
            let d = self.sqrt_tail()?;
            return Ok(QuadRat::new(BigRational::zero(), r, d));
        }
        Ok(QuadRat::rational(r))
    }

    fn expr(&mut self) -> Result<QuadRat> {
        let mut neg = false;
        if self.eat(b'-') {
            neg = true;
        } else {
            self.eat(b'+');
        }
        let mut acc = self.term()?;
        if neg {
            acc = -acc;
        }
        loop {
            let sgn = if self.eat(b'+') {
                1
            } else if self.eat(b'-') {
                -1
            } else {
                break;
            };
            let t = self.term()?;
            let t = if sgn < 0 { -t } else { t };
            acc = acc.checked_add(&t)?;
        }
        self.ws();
        if self.i != self.s.len() {
            return Err(self.err("trailing input"));
        }
        Ok(acc)
    }
}

impl FromStr for QuadRat {
    type Err = Error;

    /// Parses `a`, `a/b`, `a/b + c/d*sqrt(D)`, `sqrt(D)`, with either sign.
    fn from_str(s: &str) -> Result<QuadRat> {
        if s.trim().is_empty() {
            return Err(Error::Parse(s.to_string(), "empty".into()));
        }
        Parser { s: s.as_bytes(), i: 0, src: s }.expr()
    }
}
