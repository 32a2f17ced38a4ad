//! Interval arithmetic on MPFR floats with outward rounding, and the special
//! functions used by the measure engine.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rug::float::{Constant, Round};
use rug::Float;
use std::cmp::Ordering;
use std::sync::OnceLock;

/// Closed interval [lo, hi] with lo <= hi.
#[derive(Clone, Debug)]
pub struct Iv {
    lo: Float,
    hi: Float,
}

fn down<T>(prec: u32, v: T) -> Float
where
    Float: rug::Assign<T> + rug::ops::AssignRound<T, Round = Round, Ordering = Ordering>,
{
    Float::with_val_round(prec, v, Round::Down).0
}

fn up<T>(prec: u32, v: T) -> Float
where
    Float: rug::Assign<T> + rug::ops::AssignRound<T, Round = Round, Ordering = Ordering>,
{
    Float::with_val_round(prec, v, Round::Up).0
}

fn fmin(a: Float, b: Float) -> Float {
    if a <= b {
        a
    } else {
        b
    }
}

fn fmax(a: Float, b: Float) -> Float {
    if a >= b {
        a
    } else {
        b
    }
}

pub fn big_to_rug(x: &BigInt) -> rug::Integer {
    x.to_string().parse().expect("integer conversion")
}

pub fn rat_to_rug(x: &BigRational) -> rug::Rational {
    rug::Rational::from((big_to_rug(x.numer()), big_to_rug(x.denom())))
}

impl Iv {
    pub fn new(lo: Float, hi: Float) -> Self {
        debug_assert!(lo <= hi || lo.is_nan() || hi.is_nan());
        Iv { lo, hi }
    }

    pub fn from_f64(prec: u32, v: f64) -> Self {
        let x = Float::with_val(prec.max(53), v);
        Iv { lo: x.clone(), hi: x }
    }

    pub fn from_i64(prec: u32, v: i64) -> Self {
        Iv { lo: down(prec, v), hi: up(prec, v) }
    }

    pub fn from_bigint(prec: u32, v: &BigInt) -> Self {
        let z = big_to_rug(v);
        Iv { lo: down(prec, &z), hi: up(prec, &z) }
    }

    pub fn from_ratio(prec: u32, v: &BigRational) -> Self {
        let q = rat_to_rug(v);
        Iv { lo: down(prec, &q), hi: up(prec, &q) }
    }

    /// [-e, e] for a nonnegative bound e.
    pub fn pm_f64(prec: u32, e: f64) -> Self {
        let e = e.abs();
        Iv { lo: down(prec, -e), hi: up(prec, e) }
    }

    pub fn hull_f64(prec: u32, a: f64, b: f64) -> Self {
        Iv { lo: down(prec, a.min(b)), hi: up(prec, a.max(b)) }
    }

    pub fn zero(prec: u32) -> Self {
        Iv::from_i64(prec, 0)
    }

    pub fn one(prec: u32) -> Self {
        Iv::from_i64(prec, 1)
    }

    pub fn pi(prec: u32) -> Self {
        Iv { lo: down(prec, Constant::Pi), hi: up(prec, Constant::Pi) }
    }

    pub fn prec(&self) -> u32 {
        self.lo.prec().max(self.hi.prec())
    }

    pub fn lo(&self) -> &Float {
        &self.lo
    }

    pub fn hi(&self) -> &Float {
        &self.hi
    }

    pub fn lo_f64(&self) -> f64 {
        self.lo.to_f64_round(Round::Down)
    }

    pub fn hi_f64(&self) -> f64 {
        self.hi.to_f64_round(Round::Up)
    }

    pub fn mid_f64(&self) -> f64 {
        let p = self.prec();
        let s = Float::with_val(p + 1, &self.lo + &self.hi);
        (s / 2u32).to_f64()
    }

    pub fn mid(&self) -> Float {
        let p = self.prec();
        Float::with_val(p + 1, &self.lo + &self.hi) / 2u32
    }

    pub fn width(&self) -> Float {
        up(self.prec(), &self.hi - &self.lo)
    }

    pub fn width_f64(&self) -> f64 {
        self.width().to_f64_round(Round::Up)
    }

    pub fn set_prec(&self, prec: u32) -> Iv {
        Iv { lo: down(prec, &self.lo), hi: up(prec, &self.hi) }
    }

    pub fn is_valid(&self) -> bool {
        !self.lo.is_nan() && !self.hi.is_nan() && self.lo <= self.hi
    }

    pub fn contains_f64(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains(&self, o: &Iv) -> bool {
        self.lo <= o.lo && o.hi <= self.hi
    }

    pub fn overlaps(&self, o: &Iv) -> bool {
        self.lo <= o.hi && o.lo <= self.hi
    }

    pub fn intersect(&self, o: &Iv) -> Option<Iv> {
        let lo = fmax(self.lo.clone(), o.lo.clone());
        let hi = fmin(self.hi.clone(), o.hi.clone());
        if lo <= hi {
            Some(Iv { lo, hi })
        } else {
            None
        }
    }

    pub fn hull(&self, o: &Iv) -> Iv {
        Iv { lo: fmin(self.lo.clone(), o.lo.clone()), hi: fmax(self.hi.clone(), o.hi.clone()) }
    }

    /// Certainly less than `o`.
    pub fn lt(&self, o: &Iv) -> bool {
        self.hi < o.lo
    }

    pub fn is_pos(&self) -> bool {
        self.lo > 0
    }

    pub fn is_nonneg(&self) -> bool {
        self.lo >= 0
    }

    pub fn add(&self, o: &Iv) -> Iv {
        let p = self.prec().max(o.prec());
        Iv { lo: down(p, &self.lo + &o.lo), hi: up(p, &self.hi + &o.hi) }
    }

    pub fn sub(&self, o: &Iv) -> Iv {
        let p = self.prec().max(o.prec());
        Iv { lo: down(p, &self.lo - &o.hi), hi: up(p, &self.hi - &o.lo) }
    }

    pub fn neg(&self) -> Iv {
        Iv { lo: Float::with_val(self.hi.prec(), -&self.hi), hi: Float::with_val(self.lo.prec(), -&self.lo) }
    }

    pub fn mul(&self, o: &Iv) -> Iv {
        let p = self.prec().max(o.prec());
        let (a, b) = (self, o);
        let (apos, aneg) = (a.lo >= 0, a.hi <= 0);
        let (bpos, bneg) = (b.lo >= 0, b.hi <= 0);
        let (l, h) = match (apos, aneg, bpos, bneg) {
            (true, _, true, _) => ((&a.lo, &b.lo), (&a.hi, &b.hi)),
            (true, _, _, true) => ((&a.hi, &b.lo), (&a.lo, &b.hi)),
            (true, _, _, _) => ((&a.hi, &b.lo), (&a.hi, &b.hi)),
            (_, true, true, _) => ((&a.lo, &b.hi), (&a.hi, &b.lo)),
            (_, true, _, true) => ((&a.hi, &b.hi), (&a.lo, &b.lo)),
            (_, true, _, _) => ((&a.lo, &b.hi), (&a.lo, &b.lo)),
            (_, _, true, _) => ((&a.lo, &b.hi), (&a.hi, &b.hi)),
            (_, _, _, true) => ((&a.hi, &b.lo), (&a.lo, &b.lo)),
            _ => {
                let lo = fmin(down(p, &a.lo * &b.hi), down(p, &a.hi * &b.lo));
                let hi = fmax(up(p, &a.lo * &b.lo), up(p, &a.hi * &b.hi));
                return Iv { lo, hi };
            }
        };
        Iv { lo: down(p, l.0 * l.1), hi: up(p, h.0 * h.1) }
    }

    /// Multiplication by an exact integer.
    pub fn mul_int(&self, k: i64) -> Iv {
        let p = self.prec();
        if k >= 0 {
            Iv { lo: down(p, &self.lo * k), hi: up(p, &self.hi * k) }
        } else {
            Iv { lo: down(p, &self.hi * k), hi: up(p, &self.lo * k) }
        }
    }

    pub fn div(&self, o: &Iv) -> Iv {
        let p = self.prec().max(o.prec());
        assert!(o.lo > 0 || o.hi < 0, "interval division by an interval containing zero");
        if self.lo >= 0 && o.lo > 0 {
            return Iv { lo: down(p, &self.lo / &o.hi), hi: up(p, &self.hi / &o.lo) };
        }
        let pairs = [(&self.lo, &o.lo), (&self.lo, &o.hi), (&self.hi, &o.lo), (&self.hi, &o.hi)];
        let mut lo: Option<Float> = None;
        let mut hi: Option<Float> = None;
        for (a, b) in pairs {
            let l = down(p, a / b);
            let h = up(p, a / b);
            lo = Some(match lo {
                None => l,
                Some(x) => fmin(x, l),
            });
            hi = Some(match hi {
                None => h,
                Some(x) => fmax(x, h),
            });
        }
        Iv { lo: lo.unwrap(), hi: hi.unwrap() }
    }

    pub fn mul_i(&self, k: i64) -> Iv {
        self.mul_int(k)
    }

    pub fn div_i(&self, k: i64) -> Iv {
        self.div(&Iv::from_i64(self.prec(), k))
    }

    pub fn add_i(&self, k: i64) -> Iv {
        self.add(&Iv::from_i64(self.prec(), k))
    }

    pub fn recip(&self) -> Iv {
        Iv::one(self.prec()).div(self)
    }

    pub fn exp(&self) -> Iv {
        let p = self.prec();
        Iv { lo: down(p, self.lo.exp_ref()), hi: up(p, self.hi.exp_ref()) }
    }

    pub fn ln(&self) -> Iv {
        assert!(self.lo > 0, "log of a nonpositive interval");
        let p = self.prec();
        Iv { lo: down(p, self.lo.ln_ref()), hi: up(p, self.hi.ln_ref()) }
    }

    /// x^y for x > 0.
    pub fn pow(&self, y: &Iv) -> Iv {
        if self.lo == 1 && self.hi == 1 {
            return Iv::one(self.prec());
        }
        self.ln().mul(y).exp()
    }

    /// Integer base raised to an interval exponent; 0^y = 0 for y > 0.
    pub fn int_pow(prec: u32, base: &BigInt, y: &Iv) -> Iv {
        let b = base.abs();
        if b.is_zero() {
            return Iv::zero(prec);
        }
        if b.is_one() {
            return Iv::one(prec);
        }
        Iv::from_bigint(prec, &b).pow(y)
    }

    pub fn sqr(&self) -> Iv {
        if self.lo >= 0 {
            self.mul(self)
        } else if self.hi <= 0 {
            self.neg().mul(&self.neg())
        } else {
            let m = fmax(Float::with_val(self.prec(), -&self.lo), self.hi.clone());
            let p = self.prec();
            Iv { lo: Float::with_val(p, 0), hi: up(p, &m * &m) }
        }
    }

    pub fn abs(&self) -> Iv {
        if self.lo >= 0 {
            self.clone()
        } else if self.hi <= 0 {
            self.neg()
        } else {
            let p = self.prec();
            Iv { lo: Float::with_val(p, 0), hi: fmax(Float::with_val(p, -&self.lo), self.hi.clone()) }
        }
    }

    /// Widen by [-e, e].
    pub fn pm(&self, e: &Float) -> Iv {
        let p = self.prec();
        Iv { lo: down(p, &self.lo - e), hi: up(p, &self.hi + e) }
    }

    /// Add [0, e].
    pub fn plus_upto(&self, e: &Float) -> Iv {
        let p = self.prec();
        Iv { lo: self.lo.clone(), hi: up(p, &self.hi + e) }
    }

    /// Gamma function on a positive interval.
    pub fn gamma(&self) -> Iv {
        assert!(self.lo > 0, "gamma on a nonpositive interval");
        let p = self.prec();
        // minimum of Gamma on (0, inf) sits near 1.4616321
        let xmin_lo = 1.461_632_144;
        let xmin_hi = 1.461_632_145;
        if self.hi <= xmin_lo {
            Iv { lo: down(p, self.hi.gamma_ref()), hi: up(p, self.lo.gamma_ref()) }
        } else if self.lo >= xmin_hi {
            Iv { lo: down(p, self.lo.gamma_ref()), hi: up(p, self.hi.gamma_ref()) }
        } else {
            let a = up(p, self.lo.gamma_ref());
            let b = up(p, self.hi.gamma_ref());
            Iv { lo: Float::with_val(p, 0.885_603), hi: fmax(a, b) }
        }
    }

    pub fn max(&self, o: &Iv) -> Iv {
        Iv { lo: fmax(self.lo.clone(), o.lo.clone()), hi: fmax(self.hi.clone(), o.hi.clone()) }
    }
}

impl std::fmt::Display for Iv {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{:.25e}, {:.25e}]", self.lo.to_f64_round(Round::Down), self.hi.to_f64_round(Round::Up))
    }
}

// ---------------------------------------------------------------- special functions

/// Exact Bernoulli numbers B_0..=B_n (B_1 = -1/2).
pub fn bernoulli(n: usize) -> &'static [BigRational] {
    static TABLE: OnceLock<Vec<BigRational>> = OnceLock::new();
    let t = TABLE.get_or_init(|| {
        let top = 160;
        let mut b: Vec<BigRational> = Vec::with_capacity(top + 1);
        b.push(BigRational::one());
        for m in 1..=top {
            // sum_{j=0}^{m} C(m+1, j) B_j = 0
            let mut s = BigRational::zero();
            let mut c = BigInt::one();
            for (j, bj) in b.iter().enumerate() {
                s += BigRational::from_integer(c.clone()) * bj;
                c = c * BigInt::from(m + 1 - j) / BigInt::from(j + 1);
            }
            b.push(-s / BigRational::from_integer(BigInt::from(m + 1)));
        }
        b
    });
    assert!(n < t.len());
    &t[..=n]
}

/// Upper bound for zeta(m), m >= 2.
pub fn zeta_upper(m: u32) -> f64 {
    let m = m as f64;
    (1.0 + 2f64.powf(-m) + 2f64.powf(1.0 - m) / (m - 1.0)) * (1.0 + 1e-12)
}

/// ln Gamma(x) for x > 0 in f64 (planning only).
pub fn ln_gamma_f64(x: f64) -> f64 {
    Float::with_val(64, x).ln_abs_gamma().0.to_f64()
}

/// Upper incomplete gamma Gamma(a, y) for 0 < a and y >= 0, via Gamma(a) - gamma(a, y)
/// with the lower series carried at raised precision.
pub fn upper_inc_gamma(a: &Iv, y: &Iv) -> Iv {
    let prec = a.prec().max(y.prec());
    let wp = prec + (2.0 * y.hi_f64().max(0.0)).ceil() as u32 + 32;
    upper_inc_gamma_with(a, &a.set_prec(wp).gamma(), y)
}

/// As `upper_inc_gamma` with Gamma(a) supplied; its precision caps the usable y.
pub fn upper_inc_gamma_with(a: &Iv, gamma_a: &Iv, y: &Iv) -> Iv {
    let prec = a.prec().max(y.prec());
    let yhi = y.hi_f64().max(0.0);
    let wp = prec + (2.0 * yhi).ceil() as u32 + 32;
    assert!(gamma_a.prec() >= wp, "Gamma(a) supplied at too low a precision");
    let a = a.set_prec(wp);
    let y = y.set_prec(wp);
    let ga = gamma_a.set_prec(wp);
    if y.hi <= 0 {
        return ga.set_prec(prec);
    }
    let y = Iv { lo: fmax(y.lo.clone(), Float::with_val(wp, 0)), hi: y.hi.clone() };
    let mut term = a.recip();
    let mut sum = term.clone();
    let eps = Float::with_val(wp, 1) >> (wp as i32 + 4);
    let mut n = 0i64;
    loop {
        n += 1;
        term = term.mul(&y).div(&a.add_i(n));
        sum = sum.add(&term);
        // once n > 2y the ratio is below 1/2 and the tail is at most one more term
        if n as f64 > 2.0 * yhi + 2.0 {
            let rel = Float::with_val(wp, &term.hi / &sum.lo);
            if rel < eps || term.hi == 0 {
                sum = sum.plus_upto(&term.hi);
                break;
            }
        }
        if n > 100_000 {
            sum = sum.plus_upto(&Float::with_val(wp, &term.hi * 2u32));
            break;
        }
    }
    let lower = y.pow(&a).mul(&y.neg().exp()).mul(&sum);
    let res = ga.sub(&lower);
    // Gamma(a, y) is positive
    let res = Iv { lo: fmax(res.lo, Float::with_val(wp, 0)), hi: res.hi };
    res.set_prec(prec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_encloses() {
        let a = Iv::from_f64(128, 0.1);
        let b = Iv::from_i64(128, 3);
        let c = a.div(&b).mul(&b);
        assert!(c.contains_f64(0.1));
        assert!(c.width_f64() < 1e-35);
        let d = Iv::hull_f64(128, -1.0, 2.0).mul(&Iv::hull_f64(128, -3.0, 1.0));
        assert!(d.contains_f64(-6.0) && d.contains_f64(3.0));
        assert_eq!(d.lo_f64(), -6.0);
    }

    #[test]
    fn transcendental() {
        let x = Iv::from_i64(128, 2).ln().exp();
        assert!(x.contains_f64(2.0));
        let g = Iv::from_f64(128, 0.5).gamma();
        assert!((g.mid_f64() - std::f64::consts::PI.sqrt()).abs() < 1e-15);
        let g = Iv::hull_f64(128, 1.2, 1.8).gamma();
        assert!(g.lo_f64() <= 0.8857 && g.hi_f64() >= 0.9313);
    }

    #[test]
    fn bernoulli_values() {
        let b = bernoulli(12);
        assert_eq!(b[2], BigRational::new(1.into(), 6.into()));
        assert_eq!(b[4], BigRational::new((-1).into(), 30.into()));
        assert_eq!(b[12], BigRational::new((-691).into(), 2730.into()));
        assert!(b[11].is_zero());
    }

    #[test]
    fn incomplete_gamma() {
        // Gamma(1/2, y) = sqrt(pi) erfc(sqrt y)
        let a = Iv::from_f64(128, 0.5);
        for (y, want) in [(0.25, 0.849_891_838_079_931), (4.0, 0.008_291_069_380_672_67), (40.0, 6.636_239_826_795_697e-19)] {
            let g = upper_inc_gamma(&a, &Iv::from_f64(128, y));
            let want: f64 = want;
            assert!(((g.mid_f64() - want) / want).abs() < 1e-13, "{y}: {g}");
            assert!(g.width_f64() < 1e-30 * want.max(1e-10));
        }
    }
}
