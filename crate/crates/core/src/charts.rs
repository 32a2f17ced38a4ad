//! Interval charts and the maps they induce between intervals with left neighbours.
//!
//! The chart of an interval I = (x-, x+) with left neighbour I' is
//! q(x) = -|I'|/(x - x-) + |I|/(x+ - x), an increasing bijection onto the reals.
//! The map I -> J is chart_J^{-1} o chart_I. In relative coordinates v = (x - x-)/|I|
//! and rho = |I'|/|I| the chart reads Q(v; rho) = -rho/v + 1/(1 - v).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::Float;
use std::fmt::{self, Debug};
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

pub trait Real:
    Clone + PartialOrd + Debug + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    /// Constant at the working precision of `self`.
    fn lit(&self, v: f64) -> Self;
    fn sqrt(&self) -> Self;
    fn ln(&self) -> Self;
    fn to_f64(&self) -> f64;
    /// Precision in bits.
    fn bits(&self) -> u32;
    fn abs(&self) -> Self {
        if *self < self.lit(0.0) {
            -self.clone()
        } else {
            self.clone()
        }
    }
}

impl Real for f64 {
    fn lit(&self, v: f64) -> f64 {
        v
    }
    fn sqrt(&self) -> f64 {
        f64::sqrt(*self)
    }
    fn ln(&self) -> f64 {
        f64::ln(*self)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn bits(&self) -> u32 {
        53
    }
}

/// Multiple-precision real.
#[derive(Clone, PartialEq, PartialOrd)]
pub struct Mp(pub Float);

impl Mp {
    pub fn new(prec: u32, v: f64) -> Mp {
        Mp(Float::with_val(prec, v))
    }
}

impl Debug for Mp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

macro_rules! mp_op {
    ($tr:ident, $m:ident, $tra:ident, $ma:ident, $op:tt) => {
        impl $tr for Mp {
            type Output = Mp;
            fn $m(mut self, o: Mp) -> Mp {
                if self.0.prec() >= o.0.prec() {
                    $tra::$ma(&mut self.0, &o.0);
                    self
                } else {
                    Mp(Float::with_val(o.0.prec(), &self.0 $op &o.0))
                }
            }
        }
    };
}
mp_op!(Add, add, AddAssign, add_assign, +);
mp_op!(Sub, sub, SubAssign, sub_assign, -);
mp_op!(Mul, mul, MulAssign, mul_assign, *);
mp_op!(Div, div, DivAssign, div_assign, /);

impl Neg for Mp {
    type Output = Mp;
    fn neg(self) -> Mp {
        Mp(-self.0)
    }
}

impl Real for Mp {
    fn lit(&self, v: f64) -> Mp {
        Mp(Float::with_val(self.0.prec(), v))
    }
    fn sqrt(&self) -> Mp {
        Mp(self.0.clone().sqrt())
    }
    fn ln(&self) -> Mp {
        Mp(self.0.clone().ln())
    }
    fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }
    fn bits(&self) -> u32 {
        self.0.prec()
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ChartError {
    #[error("point outside the open interval")]
    Outside,
    #[error("point outside the closed interval")]
    OutsideClosed,
    #[error("chart value is not finite")]
    NotFinite,
}

/// Interval I = (x_minus, x_plus) with left neighbour of length left_len.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalPair<R: Real> {
    pub x_minus: R,
    pub x_plus: R,
    pub left_len: R,
}

impl<R: Real> IntervalPair<R> {
    pub fn new(x_minus: R, x_plus: R, left_len: R) -> IntervalPair<R> {
        assert!(x_plus > x_minus && left_len > x_minus.lit(0.0));
        IntervalPair { x_minus, x_plus, left_len }
    }
    pub fn len(&self) -> R {
        self.x_plus.clone() - self.x_minus.clone()
    }
    pub fn rho(&self) -> R {
        self.left_len.clone() / self.len()
    }
}

/// Q(v; rho).
pub fn q_rel<R: Real>(v: &R, rho: &R) -> R {
    let one = v.lit(1.0);
    -(rho.clone() / v.clone()) + one.clone() / (one - v.clone())
}

/// Derivative of Q in v.
pub fn dq_rel<R: Real>(v: &R, rho: &R) -> R {
    let one = v.lit(1.0);
    let w = one.clone() - v.clone();
    rho.clone() / (v.clone() * v.clone()) + one / (w.clone() * w)
}

/// Solves Q(v; rho) = c for v in (0, 1).
pub fn q_rel_inv<R: Real>(c: &R, rho: &R) -> R {
    let zero = c.lit(0.0);
    let one = c.lit(1.0);
    let two = c.lit(2.0);
    // c v^2 + (1 + rho - c) v - rho = 0, root in (0,1), cancellation-free form
    let b = one.clone() + rho.clone() - c.clone();
    let disc = (b.clone() * b.clone() + c.lit(4.0) * c.clone() * rho.clone()).sqrt();
    let mut v = if b >= zero {
        two.clone() * rho.clone() / (b.clone() + disc)
    } else {
        (disc - b) / (two.clone() * c.clone())
    };
    // bracketed Newton polish
    let (mut lo, mut hi) = (zero.clone(), one.clone());
    if !(v > lo && v < hi) {
        v = rho.clone() / (one.clone() + rho.clone());
    }
    let tol = c.lit(2f64.powi(-(c.bits() as i32) + 4));
    for _ in 0..200 {
        let f = q_rel(&v, rho) - c.clone();
        if f > zero {
            hi = v.clone();
        } else {
            lo = v.clone();
        }
        let step = f / dq_rel(&v, rho);
        let mut nv = v.clone() - step.clone();
        if !(nv > lo && nv < hi) {
            nv = (lo.clone() + hi.clone()) / two.clone();
        }
        let done = (nv.clone() - v.clone()).abs() <= tol.clone() * nv.clone().min_one();
        v = nv;
        if done {
            break;
        }
    }
    v
}

trait MinOne {
    fn min_one(self) -> Self;
}

impl<R: Real> MinOne for R {
    fn min_one(self) -> R {
        let w = self.lit(1.0) - self.clone();
        if w < self {
            w
        } else {
            self
        }
    }
}

pub fn chart<R: Real>(q: &IntervalPair<R>, x: &R) -> Result<R, ChartError> {
    if !(*x > q.x_minus && *x < q.x_plus) {
        return Err(ChartError::Outside);
    }
    let v = (x.clone() - q.x_minus.clone()) / q.len();
    Ok(q_rel(&v, &q.rho()))
}

pub fn chart_inverse<R: Real>(q: &IntervalPair<R>, c: &R) -> Result<R, ChartError> {
    let f = c.to_f64();
    if !f.is_finite() {
        return Err(ChartError::NotFinite);
    }
    Ok(q.x_minus.clone() + q.len() * q_rel_inv(c, &q.rho()))
}

/// Relative map v -> v' between intervals with neighbour ratios rho_src, rho_dst.
pub fn phi_rel<R: Real>(v: &R, rho_src: &R, rho_dst: &R) -> R {
    q_rel_inv(&q_rel(v, rho_src), rho_dst)
}

/// Relative part of the derivative: dq(v; rho_src) / dq(v'; rho_dst).
pub fn dphi_rel<R: Real>(v: &R, v_img: &R, rho_src: &R, rho_dst: &R) -> R {
    dq_rel(v, rho_src) / dq_rel(v_img, rho_dst)
}

pub fn phi<R: Real>(src: &IntervalPair<R>, dst: &IntervalPair<R>, x: &R) -> Result<R, ChartError> {
    if *x < src.x_minus || *x > src.x_plus {
        return Err(ChartError::OutsideClosed);
    }
    if *x == src.x_minus {
        return Ok(dst.x_minus.clone());
    }
    if *x == src.x_plus {
        return Ok(dst.x_plus.clone());
    }
    let v = (x.clone() - src.x_minus.clone()) / src.len();
    Ok(dst.x_minus.clone() + dst.len() * phi_rel(&v, &src.rho(), &dst.rho()))
}

pub fn dphi<R: Real>(src: &IntervalPair<R>, dst: &IntervalPair<R>, x: &R) -> Result<R, ChartError> {
    if *x < src.x_minus || *x > src.x_plus {
        return Err(ChartError::OutsideClosed);
    }
    if *x == src.x_minus {
        return Ok(dst.left_len.clone() / src.left_len.clone());
    }
    if *x == src.x_plus {
        return Ok(dst.len() / src.len());
    }
    let v = (x.clone() - src.x_minus.clone()) / src.len();
    let (rs, rd) = (src.rho(), dst.rho());
    let w = phi_rel(&v, &rs, &rd);
    Ok(dst.len() / src.len() * dphi_rel(&v, &w, &rs, &rd))
}

// ---------------------------------------------------------------- property checks

#[derive(Clone, Debug)]
pub struct SampleSpec {
    pub quadruples: usize,
    pub points: usize,
    /// lengths drawn log-uniformly from [1/ratio_range, ratio_range]
    pub ratio_range: f64,
    /// left-neighbour ratios |I'|/|I| drawn log-uniformly from [1/neighbor_range, neighbor_range]
    pub neighbor_range: f64,
    pub seed: u64,
    /// working precision in bits
    pub prec: u32,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec { quadruples: 1000, points: 8, ratio_range: 1e3, neighbor_range: 1e3, seed: 7, prec: 64 }
    }
}

#[derive(Clone, Debug)]
pub struct Witness {
    pub pairs: Vec<IntervalPair<f64>>,
    pub x: f64,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct ChartReport {
    pub cocycle_max: f64,
    pub cocycle_witness: Option<Witness>,
    pub endpoint_max: f64,
    pub prop3_constant: f64,
    pub prop3_witness: Option<Witness>,
    /// largest |D log D phi| * |I| seen on ratio-one quadruples
    pub ratio_one_max: f64,
    /// largest lhs / rhs of the three-term bound
    pub prop4_ratio: f64,
    pub prop4_violations: usize,
    pub prop4_witness: Option<Witness>,
    pub monotone: bool,
}

impl fmt::Display for ChartReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cocycle_max_error = {:.3e}", self.cocycle_max)?;
        if let Some(w) = &self.cocycle_witness {
            writeln!(f, "  worst at x = {} with {:?}", w.x, w.pairs)?;
        }
        writeln!(f, "endpoint_derivative_max_rel_error = {:.3e}", self.endpoint_max)?;
        writeln!(f, "property3_constant = {:.6}", self.prop3_constant)?;
        if let Some(w) = &self.prop3_witness {
            writeln!(f, "  worst at x = {} with {:?}", w.x, w.pairs)?;
        }
        writeln!(f, "ratio_one_max = {:.3e}", self.ratio_one_max)?;
        writeln!(f, "property4_max_ratio = {:.6} violations = {}", self.prop4_ratio, self.prop4_violations)?;
        if let Some(w) = &self.prop4_witness {
            writeln!(f, "  worst at x = {} value {} with {:?}", w.x, w.value, w.pairs)?;
        }
        write!(f, "monotone = {}", self.monotone)
    }
}

fn random_pair(rng: &mut ChaCha8Rng, range: f64, nrange: f64) -> IntervalPair<f64> {
    let (lr, nr) = (range.ln(), nrange.ln());
    let len = (rng.gen_range(-lr..=lr)).exp();
    let left = len * (rng.gen_range(-nr..=nr)).exp();
    // offsets on the scale of the interval itself
    let xm = len * rng.gen_range(-2.0..2.0);
    IntervalPair::new(xm, xm + len, left)
}

fn lift<R: Real>(q: &IntervalPair<f64>, one: &R) -> IntervalPair<R> {
    IntervalPair::new(one.lit(q.x_minus), one.lit(q.x_plus), one.lit(q.left_len))
}

fn at<R: Real>(q: &IntervalPair<R>, v: f64) -> R {
    q.x_minus.clone() + q.len() * q.x_minus.lit(v)
}

fn log_dphi<R: Real>(src: &IntervalPair<R>, dst: &IntervalPair<R>, x: &R) -> R {
    dphi(src, dst, x).unwrap().ln()
}

/// D log D phi by central differences with step |I| 2^{-prec/4}.
pub fn dlog_dphi_fd<R: Real>(src: &IntervalPair<R>, dst: &IntervalPair<R>, x: &R) -> Option<R> {
    let h = src.len() * x.lit(2f64.powf(-(x.bits() as f64) / 4.0));
    let (a, b) = (x.clone() - h.clone(), x.clone() + h.clone());
    if a <= src.x_minus || b >= src.x_plus {
        return None;
    }
    Some((log_dphi(src, dst, &b) - log_dphi(src, dst, &a)) / (h.lit(2.0) * h))
}

/// Samples random quadruples and reports the worst cases of each property,
/// at `spec.prec` bits (53 selects native doubles).
pub fn verify_chart_properties(spec: &SampleSpec) -> ChartReport {
    if spec.prec == 53 {
        run_checks(spec, &1.0f64)
    } else {
        run_checks(spec, &Mp::new(spec.prec, 1.0))
    }
}

fn run_checks<R: Real>(spec: &SampleSpec, one: &R) -> ChartReport {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rep = ChartReport {
        cocycle_max: 0.0,
        cocycle_witness: None,
        endpoint_max: 0.0,
        prop3_constant: 0.0,
        prop3_witness: None,
        ratio_one_max: 0.0,
        prop4_ratio: 0.0,
        prop4_violations: 0,
        prop4_witness: None,
        monotone: true,
    };
    let zero = one.lit(0.0);
    for _ in 0..spec.quadruples {
        let raw: Vec<IntervalPair<f64>> = (0..4).map(|_| random_pair(&mut rng, spec.ratio_range, spec.neighbor_range)).collect();
        let (i, j, k, l) = (lift(&raw[0], one), lift(&raw[1], one), lift(&raw[2], one), lift(&raw[3], one));
        // endpoint identities
        let want1 = j.left_len.clone() / i.left_len.clone();
        let want2 = j.len() / i.len();
        let e1 = ((dphi(&i, &j, &i.x_minus).unwrap() - want1.clone()) / want1).abs().to_f64();
        let e2 = ((dphi(&i, &j, &i.x_plus).unwrap() - want2.clone()) / want2).abs().to_f64();
        rep.endpoint_max = rep.endpoint_max.max(e1).max(e2);
        let ratio = (i.len() * j.left_len.clone() / (j.len() * i.left_len.clone())).to_f64();
        // ratio-one companion of j: same rho as i
        let j1 = IntervalPair::new(j.x_minus.clone(), j.x_plus.clone(), j.len() * i.rho());
        let mut vs: Vec<f64> = (0..spec.points).map(|_| rng.gen_range(0.001..0.999)).collect();
        vs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut prev: Option<R> = None;
        for &v in &vs {
            let x = at(&i, v);
            let y = phi(&i, &j, &x).unwrap();
            let z = phi(&j, &k, &y).unwrap();
            let direct = phi(&i, &k, &x).unwrap();
            let err = ((z - direct) / k.len()).abs().to_f64();
            if err > rep.cocycle_max {
                rep.cocycle_max = err;
                rep.cocycle_witness = Some(Witness { pairs: raw[..3].to_vec(), x: x.to_f64(), value: err });
            }
            if dphi(&i, &j, &x).unwrap() <= zero {
                rep.monotone = false;
            }
            if let Some(py) = &prev {
                if y <= *py {
                    rep.monotone = false;
                }
            }
            prev = Some(y);
            if let Some(d) = dlog_dphi_fd(&i, &j, &x) {
                let c = d.abs().to_f64() * i.len().to_f64() / (ratio - 1.0).abs();
                if c > rep.prop3_constant && (ratio - 1.0).abs() > 1e-9 {
                    rep.prop3_constant = c;
                    rep.prop3_witness = Some(Witness { pairs: raw[..2].to_vec(), x: x.to_f64(), value: c });
                }
            }
            if let Some(d) = dlog_dphi_fd(&i, &j1, &x) {
                rep.ratio_one_max = rep.ratio_one_max.max(d.abs().to_f64() * i.len().to_f64());
            }
            // property 4: I -> K at x against J -> L at a point of J
            let yj = at(&j, rng.gen_range(0.001..0.999));
            let lhs = (log_dphi(&i, &k, &x) - log_dphi(&j, &l, &yj)).abs().to_f64();
            let (ri, rj, rk, rl) = (&raw[0], &raw[1], &raw[2], &raw[3]);
            let rhs = (rk.len() * rj.len() / (ri.len() * rl.len())).ln().abs()
                + (rk.left_len * ri.len() / (ri.left_len * rk.len())).ln().abs()
                + (rl.left_len * rj.len() / (rj.left_len * rl.len())).ln().abs();
            let q = if rhs > 0.0 { lhs / rhs } else if lhs > 1e-12 { f64::INFINITY } else { 0.0 };
            if q > 1.0 + 1e-9 {
                rep.prop4_violations += 1;
            }
            if q > rep.prop4_ratio {
                rep.prop4_ratio = q;
                rep.prop4_witness = Some(Witness { pairs: raw.clone(), x: x.to_f64(), value: q });
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_midpoint_is_zero() {
        let q = IntervalPair::new(0.0, 1.0, 1.0);
        assert!(chart(&q, &0.5).unwrap().abs() < 1e-15);
    }

    #[test]
    fn roundtrip_f64_and_mp() {
        let q = IntervalPair::new(0.0, 1.0, 0.5);
        let mut worst: f64 = 0.0;
        for n in 1..1000 {
            let x = n as f64 / 1000.0;
            let back = chart_inverse(&q, &chart(&q, &x).unwrap()).unwrap();
            worst = worst.max((back - x).abs() / x);
        }
        assert!(worst <= 2f64.powi(-53 + 8), "{worst}");
        let prec = 128;
        let q = IntervalPair::new(Mp::new(prec, 0.0), Mp::new(prec, 1.0), Mp::new(prec, 0.5));
        let tol = 2f64.powi(-(prec as i32) + 8);
        for n in 1..1000 {
            let x = Mp::new(prec, n as f64 / 1000.0);
            let back = chart_inverse(&q, &chart(&q, &x).unwrap()).unwrap();
            let rel = ((back - x.clone()) / x).abs().to_f64();
            assert!(rel <= tol, "{rel}");
        }
    }

    #[test]
    fn chart_diverges_at_left_end() {
        let q = IntervalPair::new(0.0, 1.0, 0.5);
        let mut last = f64::INFINITY;
        for e in 1..12 {
            let v = chart(&q, &10f64.powi(-e)).unwrap();
            assert!(v < last);
            last = v;
        }
        assert!(last < -1e10);
        assert_eq!(chart(&q, &0.0), Err(ChartError::Outside));
    }

    #[test]
    fn endpoint_derivatives() {
        let i = IntervalPair::new(0.0, 2.0, 1.0);
        let j = IntervalPair::new(10.0, 14.0, 3.0);
        assert_eq!(dphi(&i, &j, &0.0).unwrap(), 3.0);
        assert_eq!(dphi(&i, &j, &2.0).unwrap(), 2.0);
        // interior limits approach the endpoint values
        assert!((dphi(&i, &j, &1e-7).unwrap() - 3.0).abs() < 1e-5);
        assert!((dphi(&i, &j, &(2.0 - 1e-7)).unwrap() - 2.0).abs() < 1e-5);
    }

    #[test]
    fn identity_and_affine() {
        let i = IntervalPair::new(0.3, 0.9, 0.2);
        for n in 1..50 {
            let x = 0.3 + 0.6 * n as f64 / 50.0;
            assert!((phi(&i, &i, &x).unwrap() - x).abs() < 1e-15);
            assert!((dphi(&i, &i, &x).unwrap() - 1.0).abs() < 1e-12);
        }
        let lam = 3.5;
        let j = IntervalPair::new(7.0, 7.0 + lam * 0.6, lam * 0.2);
        for n in 1..50 {
            let x = 0.3 + 0.6 * n as f64 / 50.0;
            let want = 7.0 + lam * (x - 0.3);
            assert!((phi(&i, &j, &x).unwrap() - want).abs() <= 2f64.powi(-45) * 10.0);
            assert!((dphi(&i, &j, &x).unwrap() - lam).abs() < 1e-12);
        }
    }

    #[test]
    fn small_sample_report() {
        let rep = verify_chart_properties(&SampleSpec { quadruples: 100, points: 4, ..Default::default() });
        assert!(rep.cocycle_max < 1e-12, "{rep}");
        assert!(rep.monotone);
        assert!(rep.prop3_constant.is_finite());
    }
}
