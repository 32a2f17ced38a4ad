//! Parameters of the interval family I_w, raw lengths, and the auxiliary
//! functions theta, psi and Psi = log psi.

use crate::coset::BoxIndex;
use crate::numeric::Iv;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("alpha must lie in (0, 1)")]
    AlphaRange,
    #[error("alpha >= 1/k: need alpha < 1/{k}")]
    AlphaGeInvK { k: usize },
    #[error("cannot parse `{0}` as an exact decimal or fraction")]
    Parse(String),
    #[error("condition {} fails: {}", .0.name, .0.statement)]
    Condition(ConditionCheck),
    #[error("no feasible (p, r) on the search grid for alpha = {0}")]
    Infeasible(String),
    #[error("invalid setting: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub name: String,
    pub statement: String,
    pub holds: bool,
}

#[derive(Clone, Debug)]
pub struct SystemParams {
    pub alpha: BigRational,
    pub k: usize,
    pub d: usize,
    pub p: Vec<BigRational>,
    pub r: BigRational,
    /// 0-based pivot
    pub pivot: usize,
    pub eps_pos: f64,
    pub trunc: u64,
    pub prec: u32,
}

pub const DEFAULT_PREC: u32 = 128;
pub const DEFAULT_EPS_POS: f64 = 1e-20;
pub const DEFAULT_TRUNC: u64 = 512;

#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub p: Option<Vec<BigRational>>,
    pub r: Option<BigRational>,
    pub pivot: Option<usize>,
    pub eps_pos: Option<f64>,
    pub trunc: Option<u64>,
    pub prec: Option<u32>,
}

/// Exact rational from a decimal (`0.45`, `1e-3`) or fraction (`9/8`) literal.
pub fn parse_rational(s: &str) -> Result<BigRational, ParamError> {
    let s = s.trim();
    let err = || ParamError::Parse(s.to_string());
    if let Some((a, b)) = s.split_once('/') {
        let n: BigInt = a.trim().parse().map_err(|_| err())?;
        let d: BigInt = b.trim().parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(BigRational::new(n, d));
    }
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().map_err(|_| err())?),
        None => (s, 0),
    };
    let neg = mant.starts_with('-');
    let mant = mant.trim_start_matches(['-', '+']);
    let (ip, fp) = mant.split_once('.').unwrap_or((mant, ""));
    if ip.is_empty() && fp.is_empty() {
        return Err(err());
    }
    if !ip.chars().chain(fp.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let digits: BigInt = format!("{ip}{fp}0").parse::<BigInt>().map_err(|_| err())? / 10;
    let mut q = BigRational::new(digits, BigInt::from(10).pow(fp.len() as u32));
    let ten = BigRational::from_integer(BigInt::from(10));
    for _ in 0..exp.unsigned_abs() {
        q = if exp > 0 { q * &ten } else { q / &ten };
    }
    Ok(if neg { -q } else { q })
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn ri(n: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn rat_f64(q: &BigRational) -> f64 {
    q.numer().to_f64().unwrap_or(f64::NAN) / q.denom().to_f64().unwrap_or(f64::NAN)
}

/// Conditions I-VI, checked exactly over the rationals.
pub fn check_conditions(alpha: &BigRational, d: usize, p: &[BigRational], r: &BigRational) -> Vec<ConditionCheck> {
    let one = BigRational::one();
    let two = ri(2);
    let dd = ri(d);
    let mk = |name: &str, statement: String, holds: bool| ConditionCheck { name: name.into(), statement, holds };
    let mut out = Vec::new();
    out.push(mk("I", format!("alpha + r = {} <= 2", alpha + r), alpha + r <= two));
    out.push(mk(
        "II",
        format!("d(r-1) = {} <= 1-alpha = {}", &dd * (r - &one), &one - alpha),
        &dd * (r - &one) <= &one - alpha,
    ));
    let iii = p.iter().all(|pn| &two * &dd * r <= *pn);
    out.push(mk("III", format!("2dr = {} <= p_n for all n", &two * &dd * r), iii));
    let iv = p.iter().all(|pn| &two * &dd <= pn * (&one - alpha));
    out.push(mk("IV", format!("2d = {} <= p_n(1-alpha) for all n", &two * &dd), iv));
    let sum: BigRational = p.iter().map(|pn| pn.recip()).sum::<BigRational>() + r.recip();
    out.push(mk("V", format!("sum 1/p_n + 1/r = {sum} < 1"), sum < one));
    let vi = r > &one
        && p.iter().all(|pn| *alpha <= pn.recip() + r.recip() && *alpha <= r / (pn * (r - &one)));
    out.push(mk("VI", "alpha <= 1/p_n + 1/r and alpha <= r/(p_n(r-1)) for all n".into(), vi));
    out
}

fn first_failure(checks: &[ConditionCheck]) -> Option<ConditionCheck> {
    checks.iter().find(|c| !c.holds).cloned()
}

impl SystemParams {
    pub fn conditions(&self) -> Vec<ConditionCheck> {
        check_conditions(&self.alpha, self.d, &self.p, &self.r)
    }

    pub fn alpha_f64(&self) -> f64 {
        rat_f64(&self.alpha)
    }

    pub fn p_f64(&self) -> Vec<f64> {
        self.p.iter().map(rat_f64).collect()
    }

    pub fn r_f64(&self) -> f64 {
        rat_f64(&self.r)
    }

    /// Exponent of coordinate c (c < k: p_c, c == k: r).
    pub fn exponent(&self, c: usize) -> &BigRational {
        if c < self.k {
            &self.p[c]
        } else {
            &self.r
        }
    }

    /// Fingerprint used to key caches.
    pub fn tag(&self) -> String {
        let p: Vec<String> = self.p.iter().map(|x| x.to_string()).collect();
        format!(
            "k={};d={};p={};r={};prec={};trunc={};eps={:e}",
            self.k,
            self.d,
            p.join(","),
            self.r,
            self.prec,
            self.trunc,
            self.eps_pos
        )
    }
}

/// Default parameters for the given alpha (exact decimal), rank k and dimension d.
pub fn make_params(alpha: &str, k: usize, d: usize, ov: &Overrides) -> Result<SystemParams, ParamError> {
    let alpha = parse_rational(alpha)?;
    make_params_exact(alpha, k, d, ov)
}

pub fn make_params_exact(alpha: BigRational, k: usize, d: usize, ov: &Overrides) -> Result<SystemParams, ParamError> {
    if d == 0 {
        return Err(ParamError::Invalid("d must be positive".into()));
    }
    if alpha <= BigRational::zero() || alpha >= BigRational::one() {
        return Err(ParamError::AlphaRange);
    }
    if k >= 2 && alpha >= ri(k).recip() {
        return Err(ParamError::AlphaGeInvK { k });
    }
    let three_d = ri(3 * d);
    let (mut p, mut r) = if k == 1 && ov.p.is_none() && ov.r.is_none() {
        search_k1(&alpha, d)?
    } else {
        (vec![&three_d / &alpha; k], &three_d / (&three_d - BigRational::one()))
    };
    if let Some(pv) = &ov.p {
        p = match pv.len() {
            1 => vec![pv[0].clone(); k],
            n if n == k => pv.clone(),
            _ => return Err(ParamError::Invalid(format!("expected 1 or {k} values of p"))),
        };
    }
    if let Some(rv) = &ov.r {
        r = rv.clone();
    }
    if p.iter().any(|x| *x <= BigRational::zero()) || r <= BigRational::one() {
        return Err(ParamError::Invalid("need p_n > 0 and r > 1".into()));
    }
    let checks = check_conditions(&alpha, d, &p, &r);
    if let Some(f) = first_failure(&checks) {
        return Err(ParamError::Condition(f));
    }
    let pivot = ov.pivot.unwrap_or(0);
    if pivot >= d {
        return Err(ParamError::Invalid(format!("pivot {} out of 1..={d}", pivot + 1)));
    }
    let eps_pos = ov.eps_pos.unwrap_or(DEFAULT_EPS_POS);
    if !(eps_pos > 0.0 && eps_pos < 1.0) {
        return Err(ParamError::Invalid("eps_pos must lie in (0, 1)".into()));
    }
    let prec = ov.prec.unwrap_or(DEFAULT_PREC);
    if prec < 64 {
        return Err(ParamError::Invalid("prec must be at least 64 bits".into()));
    }
    let trunc = ov.trunc.unwrap_or(DEFAULT_TRUNC);
    if trunc < 8 {
        return Err(ParamError::Invalid("trunc must be at least 8".into()));
    }
    Ok(SystemParams { alpha, k, d, p, r, pivot, eps_pos, trunc, prec })
}

/// For k = 1: r descending over 1 + n/40, then the smallest p on a 1/4 grid meeting I-VI.
fn search_k1(alpha: &BigRational, d: usize) -> Result<(Vec<BigRational>, BigRational), ParamError> {
    let one = BigRational::one();
    let dd = ri(d);
    for n in (1..40).rev() {
        let r = &one + rat(n, 40);
        // lower bounds on p from III, IV and V; the upper bounds are left to the full check
        let lower = [&ri(2) * &dd * &r, &ri(2) * &dd / (&one - alpha), (&one - r.recip()).recip()]
            .into_iter()
            .max()
            .unwrap();
        let q0 = (&lower * ri(4)).ceil().to_integer();
        for q in 0..2 {
            let p = BigRational::new(&q0 + BigInt::from(q), BigInt::from(4));
            if check_conditions(alpha, d, std::slice::from_ref(&p), &r).iter().all(|c| c.holds) {
                return Ok((vec![p], r));
            }
        }
    }
    Err(ParamError::Infeasible(alpha.to_string()))
}

// ---------------------------------------------------------------- lengths

/// L_w = 1 + sum |i_n|^{p_n} + |j|^r as an enclosure.
pub fn raw_denominator(params: &SystemParams, w: &BoxIndex) -> Iv {
    let prec = params.prec;
    let mut s = Iv::one(prec);
    for (n, i) in w.i.iter().enumerate() {
        s = s.add(&Iv::int_pow(prec, i, &Iv::from_ratio(prec, &params.p[n])));
    }
    s.add(&Iv::int_pow(prec, &w.j, &Iv::from_ratio(prec, &params.r)))
}

pub fn raw_length(params: &SystemParams, w: &BoxIndex) -> Iv {
    raw_denominator(params, w).recip()
}

/// S = 1 + sum |i_n|^{p_n} in double precision.
pub fn block_base_f64(p: &[f64], ivec: &[i64]) -> f64 {
    1.0 + ivec.iter().zip(p).map(|(&i, &pn)| (i.unsigned_abs() as f64).powf(pn)).sum::<f64>()
}

pub fn raw_length_f64(p: &[f64], r: f64, ivec: &[i64], j: i64) -> f64 {
    1.0 / (block_base_f64(p, ivec) + (j.unsigned_abs() as f64).powf(r))
}

// ---------------------------------------------------------------- theta, psi

/// C-infinity step: 0 on (-inf, 1/4], 1 on [3/4, inf).
pub fn cutoff(x: f64) -> f64 {
    let s = (x - 0.25) / 0.5;
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / s).exp();
    let b = (-1.0 / (1.0 - s)).exp();
    a / (a + b)
}

/// theta(xi) = |xi|^r off (-1, 1), blended with xi^2 inside.
pub fn theta(r: f64, xi: f64) -> f64 {
    let a = xi.abs();
    if a >= 1.0 {
        return a.powf(r);
    }
    let w = cutoff(a);
    w * a.powf(r) + (1.0 - w) * xi * xi
}

pub fn psi(params: &SystemParams, ivec: &[i64], xi: f64) -> f64 {
    block_base_f64(&params.p_f64(), ivec) + theta(params.r_f64(), xi)
}

#[allow(non_snake_case)]
pub fn Psi(params: &SystemParams, ivec: &[i64], xi: f64) -> f64 {
    psi(params, ivec, xi).ln()
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparabilityReport {
    pub max_ratio: f64,
    pub witness_xi: f64,
    pub samples: usize,
    pub radius: f64,
}

/// Largest of psi(j)/psi(xi) and psi(xi)/psi(j) over `samples` evenly spaced xi with
/// |xi - j| <= C (S^{1/r} + ||i||_1^d).
pub fn psi_comparability(
    params: &SystemParams,
    ivec: &[i64],
    j: i64,
    c: f64,
    samples: usize,
) -> Result<ComparabilityReport, ParamError> {
    if c <= 0.0 || samples < 2 {
        return Err(ParamError::Invalid("need C > 0 and at least two samples".into()));
    }
    let s = block_base_f64(&params.p_f64(), ivec);
    let l1: f64 = ivec.iter().map(|x| x.unsigned_abs() as f64).sum();
    let radius = c * (s.powf(1.0 / params.r_f64()) + l1.powi(params.d as i32));
    let pj = psi(params, ivec, j as f64);
    let mut best = (1.0, j as f64);
    for n in 0..samples {
        let xi = j as f64 - radius + 2.0 * radius * n as f64 / (samples - 1) as f64;
        let px = psi(params, ivec, xi);
        let ratio = (pj / px).max(px / pj);
        if ratio > best.0 {
            best = (ratio, xi);
        }
    }
    Ok(ComparabilityReport { max_ratio: best.0, witness_xi: best.1, samples, radius })
}

/// Ratio pair for a single xi; errors when xi violates the distance precondition.
pub fn psi_ratio(params: &SystemParams, ivec: &[i64], j: i64, xi: f64, c: f64) -> Result<(f64, f64), ParamError> {
    let s = block_base_f64(&params.p_f64(), ivec);
    let l1: f64 = ivec.iter().map(|x| x.unsigned_abs() as f64).sum();
    let radius = c * (s.powf(1.0 / params.r_f64()) + l1.powi(params.d as i32));
    if (xi - j as f64).abs() > radius {
        return Err(ParamError::Invalid(format!("|xi - j| exceeds {radius}")));
    }
    let pj = psi(params, ivec, j as f64);
    let px = psi(params, ivec, xi);
    Ok((pj / px, px / pj))
}

pub fn abs_big(x: &BigInt) -> BigInt {
    x.abs()
}
