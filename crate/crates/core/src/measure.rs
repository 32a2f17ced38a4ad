//! Rigorous enclosures for sums of raw lengths over lexicographic sets of boxes.
//!
//! Every set handled here is a union of products of one-dimensional sets
//! (a single value, everything, or everything below a bound). For such a set W,
//!
//!   sum_{w in W} 1/L_w = int_0^inf e^{-t} prod_c phi_c(t) dt,
//!
//! where phi_c(t) = sum over the c-th factor set of e^{-t |x|^{e_c}}. The integral is
//! taken with the trapezoid rule in u = ln t. The discretisation error is bounded
//! through analyticity in the strip |Im u| < 1.45, the nodes far to the left are
//! summed in closed form from small-t expansions, and the nodes far to the right
//! are bounded by a geometric series.

use crate::coset::BoxIndex;
use crate::interval::SystemParams;
use crate::numeric::{bernoulli, ln_gamma_f64, upper_inc_gamma_with, zeta_upper, Iv};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rug::Float;
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, OnceLock, RwLock};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("truncation radius too small: need at least {needed}")]
    TruncTooSmall { needed: u64 },
    #[error("enclosure width {width:e} exceeds target {target:e}")]
    TooWide { width: f64, target: f64 },
    #[error("point {x} lies within eps_pos of an interval boundary")]
    Ambiguous { x: f64 },
    #[error("point {x} is outside [0, 1]")]
    OutOfRange { x: f64 },
    #[error("point {x} is not resolvable at the working precision")]
    Unresolvable { x: f64 },
}

/// One-dimensional factor set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Coord {
    Full,
    Point(BigInt),
    /// all x < a
    Below(BigInt),
}

pub type Term = Vec<Coord>;

/// Number of leading values whose terms e^{-t x^e} are cached per node.
const PREFIX: usize = 32;
const POW_TABLE: usize = 4096;
const STRIP: f64 = 1.45;

struct Factor {
    e: BigRational,
    e_f64: f64,
    e_iv: Iv,
    inv_e: Iv,
    gamma_1p: Iv,
    /// Gamma(1/e) at the highest precision the tail integral asks for
    gamma_inv: Iv,
    /// Poisson order m and bound E_m
    pm: u32,
    pe: f64,
    /// x^e for x = 0..=POW_TABLE
    powers: Vec<Iv>,
    /// sum_{x=1}^{n} x^e and sum_{x=1}^{n} x^{2e} for n = 0..=POW_TABLE
    psum1: Vec<Iv>,
    psum2: Vec<Iv>,
    /// (K, M) pairs: smallest start M reaching the remainder target with K correction terms
    em_table: Vec<(usize, u64)>,
    em_best: (usize, u64),
    /// n * binom(e, n) for n = 0..120
    nbinom: Vec<Iv>,
}

struct FactorNode {
    full: Iv,
    /// prefix[x] = sum_{x'=1}^{x} e^{-t x'^e}
    prefix: Vec<Iv>,
    t1: Iv,
}

struct Node {
    t: Iv,
    emt: Iv,
    f: Vec<FactorNode>,
}

pub struct Measure {
    params: SystemParams,
    wp: u32,
    h: f64,
    h_iv: Iv,
    eps_strip: Iv,
    t_right: f64,
    factors: Vec<Factor>,
    /// coordinate -> factor index
    coord_factor: Vec<usize>,
    nodes: RwLock<HashMap<i64, Arc<Node>>>,
    total: OnceLock<Result<Iv, MeasureError>>,
    cum_cache: RwLock<HashMap<(usize, Vec<BigInt>, BigInt), Iv>>,
}

fn ln_rem_bound(k: usize, m: f64, delta: f64) -> f64 {
    let kk = 2.0 * k as f64;
    (2.0 * zeta_upper(2 * k as u32)).ln() + ln_gamma_f64(kk + 1.0) + m.ln()
        - kk * (2.0 * std::f64::consts::PI * delta * m).ln()
        - (kk - 1.0).ln()
}

impl Factor {
    fn new(e: &BigRational, wp: u32) -> Factor {
        let e_f64 = crate::interval::rat_f64(e);
        let e_iv = Iv::from_ratio(wp, e);
        let inv_e = Iv::from_ratio(wp, &e.recip());
        let gamma_1p = inv_e.add_i(1).gamma();
        let hp = wp + 2 * (wp as f64 * std::f64::consts::LN_2 + 12.0).ceil() as u32 + 40;
        let gamma_inv = Iv::from_ratio(hp, &e.recip()).gamma();
        // Poisson remainder of order m needs m < e + 1
        let mut pm_max = (e_f64 + 1.0).ceil() as u32 - 1;
        if (pm_max as f64) >= e_f64 + 1.0 {
            pm_max -= 1;
        }
        let pm_max = pm_max.clamp(2, 24);
        let pe_for = |pm: u32| -> f64 {
            let mut c = vec![0.0f64; pm as usize + 1];
            c[0] = 1.0;
            for n in 0..pm as usize {
                let mut next = vec![0.0f64; pm as usize + 1];
                for l in 0..=n {
                    if c[l] == 0.0 {
                        continue;
                    }
                    next[l] += c[l] * (l as f64 * e_f64 - n as f64);
                    next[l + 1] -= e_f64 * c[l];
                }
                c = next;
            }
            let mut v = 0.0;
            for (l, cl) in c.iter().enumerate() {
                if *cl != 0.0 {
                    let a = (l as f64 * e_f64 - pm as f64 + 1.0) / e_f64;
                    v += cl.abs() * ln_gamma_f64(a).exp() / e_f64;
                }
            }
            2.0 * zeta_upper(pm) * 2.0 * v / (2.0 * std::f64::consts::PI).powi(pm as i32) * 1.01
        };
        // pick the order whose remainder reaches 2^{-wp/2} at the largest t
        let ln_tau = -(wp as f64) / 2.0 * std::f64::consts::LN_2;
        let (pm, pe) = (2..=pm_max)
            .map(|m| (m, pe_for(m)))
            .max_by(|a, b| {
                let ta = (ln_tau - a.1.ln()) * e_f64 / (a.0 - 1) as f64;
                let tb = (ln_tau - b.1.ln()) * e_f64 / (b.0 - 1) as f64;
                ta.total_cmp(&tb)
            })
            .unwrap();
        let powers: Vec<Iv> = (0..=POW_TABLE).map(|x| Iv::int_pow(wp, &BigInt::from(x), &e_iv)).collect();
        let (mut psum1, mut psum2) = (vec![Iv::zero(wp)], vec![Iv::zero(wp)]);
        for x in 1..=POW_TABLE {
            psum1.push(psum1[x - 1].add(&powers[x]));
            psum2.push(psum2[x - 1].add(&powers[x].sqr()));
        }
        // Euler-Maclaurin plan
        let delta = (std::f64::consts::PI / (2.0 * e_f64.max(1.0))).sin();
        let target = -(wp as f64) * std::f64::consts::LN_2 - 4.0;
        let mut em_table = Vec::new();
        for k in 2..=60usize {
            let kk = 2.0 * k as f64;
            let a = (2.0 * zeta_upper(2 * k as u32)).ln() + ln_gamma_f64(kk + 1.0) - (kk - 1.0).ln() - target;
            let mut m = ((a - kk * (2.0 * std::f64::consts::PI * delta).ln()) / (kk - 1.0)).exp().ceil().max(2.0);
            while ln_rem_bound(k, m, delta) > target {
                m += 1.0;
            }
            em_table.push((k, m as u64));
        }
        let em_best = *em_table
            .iter()
            .min_by_key(|(k, m)| 12 * *m as usize + k * k)
            .unwrap();
        let mut nbinom = vec![Iv::zero(wp)];
        let mut b = Iv::one(wp);
        for n in 1..120i64 {
            b = b.mul(&e_iv.sub(&Iv::from_i64(wp, n - 1))).div_i(n);
            nbinom.push(b.mul_i(n));
        }
        Factor { e: e.clone(), e_f64, e_iv, inv_e, gamma_1p, gamma_inv, pm, pe, powers, psum1, psum2, em_table, em_best, nbinom }
    }

    fn delta(&self) -> f64 {
        (std::f64::consts::PI / (2.0 * self.e_f64.max(1.0))).sin()
    }

    /// Smallest K whose start radius does not exceed m.
    fn em_k_for(&self, m: u64) -> usize {
        self.em_table.iter().find(|(_, mm)| *mm <= m).map(|(k, _)| *k).unwrap_or(60)
    }

    fn em_k_exact(&self, m: f64) -> Option<usize> {
        self.em_table.iter().find(|(_, mm)| *mm as f64 <= m).map(|(k, _)| *k)
    }

    fn xpow(&self, x: &BigInt, wp: u32) -> Iv {
        match x.to_usize() {
            Some(u) if u <= POW_TABLE => self.powers[u].clone(),
            _ => Iv::int_pow(wp, x, &self.e_iv),
        }
    }

    /// Tail bound sum_{x >= a} e^{-t x^e} <= e^{-y}(1 + a/(e y)), y = t a^e.
    fn tail_bound(&self, t: &Iv, a: &BigInt, wp: u32) -> Iv {
        let y = t.mul(&self.xpow(a, wp));
        let ylo = Iv::new(y.lo().clone(), y.lo().clone());
        let b = ylo.neg().exp().mul(&Iv::one(wp).add(&Iv::from_bigint(wp, a).div(&self.e_iv.mul(&ylo))));
        Iv::new(Float::with_val(wp, 0), b.hi().clone())
    }

    /// T(t; n) = sum_{x >= n} e^{-t x^e}, n >= 1.
    fn tail(&self, t: &Iv, n: &BigInt, wp: u32, trunc: u64) -> Result<Iv, MeasureError> {
        let c = wp as f64 * std::f64::consts::LN_2 + 10.0;
        let tm = t.mid_f64();
        let nf = n.to_f64().unwrap_or(f64::INFINITY);
        let ln_y = tm.ln() + self.e_f64 * nf.ln();
        if ln_y >= c.ln() {
            return Ok(self.tail_bound(t, n, wp));
        }
        let x_end = (c / tm).powf(1.0 / self.e_f64);
        let count = x_end - nf + 1.0;
        let direct_to = |end: &BigInt| -> Iv {
            let mut s = Iv::zero(wp);
            let mut x = n.clone();
            while &x < end {
                s = s.add(&t.mul(&self.xpow(&x, wp)).neg().exp());
                x += 1;
            }
            s
        };
        if count <= 16.0 {
            let end = BigInt::from(x_end.ceil() as u64 + 1).max(n.clone());
            return Ok(direct_to(&end).add(&self.tail_bound(t, &end, wp)));
        }
        // Euler-Maclaurin straight from n when some order reaches it
        if let Some(k) = self.em_k_exact(nf) {
            if count > (k * k / 16 + 24) as f64 {
                return Ok(self.em_tail(t, n, k, wp));
            }
        }
        let m_need = self.em_best.1;
        let mixed = (m_need as f64 - nf).max(0.0) + (self.em_best.0 * self.em_best.0 / 16 + 24) as f64;
        if count <= trunc as f64 && count <= mixed {
            let end = BigInt::from(x_end.ceil() as u64 + 1).max(n.clone());
            return Ok(direct_to(&end).add(&self.tail_bound(t, &end, wp)));
        }
        let m = n.clone().max(BigInt::from(m_need));
        if &m - n > BigInt::from(trunc) {
            return Err(MeasureError::TruncTooSmall { needed: m_need });
        }
        let k = self.em_k_for(m.to_u64().unwrap_or(u64::MAX));
        Ok(direct_to(&m).add(&self.em_tail(t, &m, k, wp)))
    }

    /// Euler-Maclaurin for sum_{x >= m} e^{-t x^e}.
    fn em_tail(&self, t: &Iv, m: &BigInt, k: usize, wp: u32) -> Iv {
        let mf = m.to_f64().unwrap_or(f64::INFINITY);
        let me = self.xpow(m, wp);
        let y = t.mul(&me);
        let emy = y.neg().exp();
        // integral: t^{-1/e} Gamma(1/e, y) / e
        let integral = t.pow(&self.inv_e.neg()).mul(&upper_inc_gamma_with(&self.inv_e, &self.gamma_inv, &y)).div(&self.e_iv);
        // power series of exp(-y((1+z)^e - 1)) up to z^{2K-1}:
        // n e_n = -y sum_j j binom(e, j) e_{n-j}
        let nmax = 2 * k - 1;
        let negy = y.neg();
        let mut ecoef = vec![Iv::one(wp)];
        for n in 1..=nmax {
            let mut s = self.nbinom[1].mul(&ecoef[n - 1]);
            for j in 2..=n {
                s = s.add(&self.nbinom[j].mul(&ecoef[n - j]));
            }
            ecoef.push(s.mul(&negy).div_i(n as i64));
        }
        let bern = bernoulli(2 * k);
        let miv = Iv::from_bigint(wp, m);
        let mut corr = Iv::zero(wp);
        let mut mpow = miv.clone();
        let m2 = miv.mul(&miv);
        for j in 1..=k {
            let b = Iv::from_ratio(wp, &(&bern[2 * j] / BigRational::from_integer(BigInt::from(2 * j))));
            corr = corr.add(&b.mul(&ecoef[2 * j - 1]).div(&mpow));
            mpow = mpow.mul(&m2);
        }
        let rem = ln_rem_bound(k, mf, self.delta()).exp() * 2.0;
        integral.add(&emy.div_i(2)).sub(&emy.mul(&corr)).pm(&Float::with_val(wp, rem))
    }

    /// Small-t expansion of Full: [(exponent, coefficient)].
    fn full_expansion(&self, wp: u32) -> Vec<(BigRational, Iv)> {
        vec![
            (-self.e.recip(), self.gamma_1p.mul_i(2)),
            (BigRational::from_integer(BigInt::from(self.pm as i64 - 1)) / &self.e, Iv::pm_f64(wp, self.pe)),
        ]
    }
}

fn q(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

type Expansion = BTreeMap<BigRational, Iv>;

fn expansion_mul(a: &Expansion, b: &[(BigRational, Iv)]) -> Expansion {
    let mut out: Expansion = BTreeMap::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let e = ea + eb;
            let c = ca.mul(cb);
            match out.get_mut(&e) {
                Some(v) => *v = v.add(&c),
                None => {
                    out.insert(e, c);
                }
            }
        }
    }
    out
}

impl Measure {
    pub fn new(params: &SystemParams) -> Measure {
        let wp = params.prec;
        let ncoord = params.k + 1;
        let mut exps: Vec<BigRational> = Vec::new();
        let mut coord_factor = Vec::new();
        for c in 0..ncoord {
            let e = params.exponent(c).clone();
            let idx = match exps.iter().position(|x| *x == e) {
                Some(i) => i,
                None => {
                    exps.push(e);
                    exps.len() - 1
                }
            };
            coord_factor.push(idx);
        }
        let factors = exps.iter().map(|e| Factor::new(e, wp)).collect();
        // trapezoid step: relative strip error below eps / (8 * 1e4)
        let rel = params.eps_pos / 8e4;
        let cosd = STRIP.cos();
        let h_raw = 2.0 * std::f64::consts::PI * STRIP / (2.0 / (cosd * rel) + 1.0).ln();
        let h = (h_raw * 4096.0).floor() / 4096.0;
        let h_iv = Iv::from_f64(wp, h);
        let cos_lo = Float::with_val_round(wp, Float::with_val(wp, STRIP).cos_ref(), rug::float::Round::Down).0;
        let cos_iv = Iv::new(cos_lo.clone(), cos_lo);
        let ex = Iv::pi(wp).mul_i(2).mul(&Iv::from_f64(wp, STRIP)).div(&h_iv).exp().sub(&Iv::one(wp));
        let eps_strip = Iv::from_i64(wp, 2).div(&cos_iv.mul(&ex));
        let eps_strip = Iv::new(Float::with_val(wp, 0), eps_strip.hi().clone());
        // right cutoff: t e^{-t} h 4^{k+1} <= eps / 8
        let mut t = 40.0f64;
        for _ in 0..8 {
            t = (8.0 * 4f64.powi(ncoord as i32) * h * t / params.eps_pos).ln().max(2.0);
        }
        Measure {
            params: params.clone(),
            wp,
            h,
            h_iv,
            eps_strip,
            t_right: t,
            factors,
            coord_factor,
            nodes: RwLock::new(HashMap::new()),
            total: OnceLock::new(),
            cum_cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    fn node(&self, n: i64) -> Result<Arc<Node>, MeasureError> {
        if let Some(v) = self.nodes.read().unwrap().get(&n) {
            return Ok(v.clone());
        }
        let wp = self.wp;
        let u = Iv::from_f64(wp, self.h).mul(&Iv::from_i64(wp, n));
        let t = u.exp();
        let emt = t.neg().exp();
        let mut f = Vec::with_capacity(self.factors.len());
        for fac in &self.factors {
            let mut prefix = vec![Iv::zero(wp)];
            for x in 1..=PREFIX {
                let v = t.mul(&fac.powers[x]).neg().exp();
                prefix.push(prefix[x - 1].add(&v));
            }
            let rest = fac.tail(&t, &BigInt::from(PREFIX + 1), wp, self.params.trunc)?;
            let t1 = prefix[PREFIX].add(&rest);
            let full = Iv::one(wp).add(&t1.mul_i(2));
            f.push(FactorNode { full, prefix, t1 });
        }
        let node = Arc::new(Node { t, emt, f });
        self.nodes.write().unwrap().insert(n, node.clone());
        Ok(node)
    }

    fn tail_at(&self, fi: usize, node: &Node, n: &BigInt) -> Result<Iv, MeasureError> {
        let fnode = &node.f[fi];
        match n.to_usize() {
            Some(u) if u >= 1 && u <= PREFIX + 1 => Ok(fnode.t1.sub(&fnode.prefix[u - 1])),
            _ => self.factors[fi].tail(&node.t, n, self.wp, self.params.trunc),
        }
    }

    fn coord_value(&self, c: usize, coord: &Coord, pow: Option<&Iv>, node: &Node) -> Result<Iv, MeasureError> {
        let fi = self.coord_factor[c];
        Ok(match coord {
            Coord::Full => node.f[fi].full.clone(),
            Coord::Point(i) => {
                if i.is_zero() {
                    Iv::one(self.wp)
                } else {
                    node.t.mul(pow.unwrap()).neg().exp()
                }
            }
            Coord::Below(a) => {
                if !a.is_positive() {
                    self.tail_at(fi, node, &(BigInt::one() - a))?
                } else {
                    node.f[fi].full.sub(&self.tail_at(fi, node, a)?)
                }
            }
        })
    }

    fn expansion(&self, c: usize, coord: &Coord, pow: Option<&Iv>) -> Vec<(BigRational, Iv)> {
        let wp = self.wp;
        let fac = &self.factors[self.coord_factor[c]];
        let half = |v: Vec<(BigRational, Iv)>| -> Vec<(BigRational, Iv)> {
            v.into_iter().map(|(e, c)| (e, c.div_i(2))).collect()
        };
        match coord {
            Coord::Full => fac.full_expansion(wp),
            Coord::Point(i) => {
                if i.is_zero() {
                    vec![(q(0), Iv::one(wp))]
                } else {
                    // 1 - tc <= e^{-tc} <= 1 - tc + (tc)^2 / 2
                    let c = pow.unwrap();
                    let c2 = c.sqr().div_i(2);
                    vec![(q(0), Iv::one(wp)), (q(1), c.neg()), (q(2), Iv::new(Float::with_val(wp, 0), c2.hi().clone()))]
                }
            }
            Coord::Below(a) => {
                let mut v = half(fac.full_expansion(wp));
                let big_a = if a.is_positive() { a - 1 } else { -a };
                let sign = if a.is_positive() { 1 } else { -1 };
                let cnt = Iv::from_bigint(wp, &big_a);
                v.push((q(0), Iv::one(wp).div_i(2).add(&cnt).mul_int(sign)));
                if big_a.is_zero() {
                    return v;
                }
                // sum_{x=1}^{A} e^{-t x^e} = A - t s1 + [0, t^2 s2 / 2]
                match big_a.to_usize() {
                    Some(n) if n <= POW_TABLE => {
                        let s2 = fac.psum2[n].div_i(2);
                        let rem = Iv::new(Float::with_val(wp, 0), s2.hi().clone());
                        v.push((q(1), fac.psum1[n].mul_int(-sign)));
                        v.push((q(2), rem.mul_int(sign)));
                    }
                    _ => {
                        let ap = fac.xpow(&big_a, wp).mul(&Iv::from_bigint(wp, &big_a));
                        let sum_bound = Iv::new(Float::with_val(wp, 0), ap.hi().clone());
                        v.push((q(1), sum_bound.mul_int(-sign)));
                    }
                }
                v
            }
        }
    }

    fn powers_for(&self, term: &Term) -> Vec<Option<Iv>> {
        term.iter()
            .enumerate()
            .map(|(c, coord)| match coord {
                Coord::Point(i) if !i.is_zero() => Some(self.factors[self.coord_factor[c]].xpow(i, self.wp)),
                _ => None,
            })
            .collect()
    }

    /// Enclosure of sum over the union of product sets of 1/L_w.
    pub fn mass(&self, terms: &[Term]) -> Result<Iv, MeasureError> {
        Ok(self.masses(&[terms.to_vec()])?.remove(0))
    }

    /// Several masses in one sweep over the nodes; coordinate values are shared per node.
    pub fn masses(&self, sets: &[Vec<Term>]) -> Result<Vec<Iv>, MeasureError> {
        // each term gets its own left cut
        let flat: Vec<Vec<Term>> = sets.iter().flatten().map(|t| vec![t.clone()]).collect();
        let parts = self.masses_raw(&flat)?;
        let mut out = Vec::with_capacity(sets.len());
        let mut it = parts.into_iter();
        for set in sets {
            let mut v = Iv::zero(self.wp);
            for _ in 0..set.len() {
                v = v.add(&it.next().unwrap());
            }
            let width = v.width_f64();
            if width > self.params.eps_pos {
                return Err(MeasureError::TooWide { width, target: self.params.eps_pos });
            }
            out.push(v);
        }
        Ok(out)
    }

    fn masses_raw(&self, sets: &[Vec<Term>]) -> Result<Vec<Iv>, MeasureError> {
        let wp = self.wp;
        let ncoord = self.params.k + 1;
        let target = self.params.eps_pos / 8.0;
        let h = self.h;
        struct Prep {
            pows: Vec<Vec<Option<Iv>>>,
            total_exp: Expansion,
            n_l: i64,
        }
        let mut preps = Vec::with_capacity(sets.len());
        for terms in sets {
            assert!(terms.iter().all(|t| t.len() == ncoord));
            let pows: Vec<Vec<Option<Iv>>> = terms.iter().map(|t| self.powers_for(t)).collect();
            // left expansion: e^{-t} * sum_terms prod_c expansion
            // 1 - t <= e^{-t} <= 1 - t + t^2 / 2
            let emt_exp = vec![
                (q(0), Iv::one(wp)),
                (q(1), Iv::from_i64(wp, -1)),
                (q(2), Iv::new(Float::with_val(wp, 0), Float::with_val(wp, 0.5))),
            ];
            let mut total_exp: Expansion = BTreeMap::new();
            for (term, pw) in terms.iter().zip(&pows) {
                let mut e: Expansion = BTreeMap::new();
                e.insert(q(0), Iv::one(wp));
                e = expansion_mul(&e, &emt_exp);
                for (c, coord) in term.iter().enumerate() {
                    e = expansion_mul(&e, &self.expansion(c, coord, pw[c].as_ref()));
                }
                for (k, v) in e {
                    match total_exp.get_mut(&k) {
                        Some(x) => *x = x.add(&v),
                        None => {
                            total_exp.insert(k, v);
                        }
                    }
                }
            }
            let nq = total_exp.len().max(1) as f64;
            let mut u_l = -20.0f64;
            for (e, c) in &total_exp {
                let beta = 1.0 + crate::interval::rat_f64(e);
                assert!(beta > 0.0, "small-t exponent must exceed -1");
                let w = c.width_f64();
                if w > 0.0 {
                    let u = ((target / (nq * h * w)) * (1.0 - (-h * beta).exp())).ln() / beta;
                    u_l = u_l.min(u);
                }
            }
            preps.push(Prep { pows, total_exp, n_l: (u_l / h).floor() as i64 });
        }
        let n_r = (self.t_right.ln() / h).ceil() as i64;
        let n_min = preps.iter().map(|p| p.n_l).min().unwrap_or(n_r);
        let mut mid = vec![Iv::zero(wp); sets.len()];
        let mut last = vec![Iv::zero(wp); sets.len()];
        for n in (n_min + 1)..=n_r {
            let node = self.node(n)?;
            let mut memo: HashMap<(usize, Coord), Iv> = HashMap::new();
            for (k, (terms, prep)) in sets.iter().zip(&preps).enumerate() {
                if n <= prep.n_l {
                    continue;
                }
                let mut g = Iv::zero(wp);
                for (term, pw) in terms.iter().zip(&prep.pows) {
                    let mut prod = node.emt.clone();
                    for (c, coord) in term.iter().enumerate() {
                        prod = prod.mul(&self.memo_value(c, coord, pw[c].as_ref(), &node, &mut memo)?);
                    }
                    g = g.add(&prod);
                }
                let g = g.mul(&node.t).mul(&self.h_iv);
                mid[k] = mid[k].add(&g);
                if n == n_r {
                    last[k] = g;
                }
            }
        }
        // right tail: ratio of consecutive terms at most q = e^{-h(t - 1)}
        let node = self.node(n_r)?;
        let qv = self.h_iv.mul(&node.t.sub(&Iv::one(wp))).neg().exp();
        let mut out = Vec::with_capacity(sets.len());
        for (k, prep) in preps.iter().enumerate() {
            // analytic left part
            let mut left = Iv::zero(wp);
            let nl_iv = Iv::from_f64(wp, h).mul(&Iv::from_i64(wp, prep.n_l));
            for (e, c) in &prep.total_exp {
                let beta = Iv::from_ratio(wp, &(e + q(1)));
                let num = nl_iv.mul(&beta).exp().mul(&self.h_iv);
                let den = Iv::one(wp).sub(&self.h_iv.mul(&beta).neg().exp());
                left = left.add(&c.mul(&num.div(&den)));
            }
            let right = last[k].mul(&qv).div(&Iv::one(wp).sub(&qv));
            let s = left.add(&mid[k]).add(&Iv::new(Float::with_val(wp, 0), right.hi().clone()));
            let lo = Iv::new(s.lo().clone(), s.lo().clone()).div(&Iv::one(wp).add(&self.eps_strip));
            let hi = Iv::new(s.hi().clone(), s.hi().clone()).div(&Iv::one(wp).sub(&self.eps_strip));
            let lo_f = if s.lo() > &0 { lo.lo().clone() } else { Float::with_val(wp, 0) };
            out.push(Iv::new(lo_f, hi.hi().clone()));
        }
        Ok(out)
    }

    /// coord_value with reuse of Below(a -+ 1) computed earlier at the same node.
    fn memo_value(
        &self,
        c: usize,
        coord: &Coord,
        pow: Option<&Iv>,
        node: &Node,
        memo: &mut HashMap<(usize, Coord), Iv>,
    ) -> Result<Iv, MeasureError> {
        let fi = self.coord_factor[c];
        if let Some(v) = memo.get(&(fi, coord.clone())) {
            return Ok(v.clone());
        }
        let point = |a: &BigInt| {
            if a.is_zero() {
                Iv::one(self.wp)
            } else {
                node.t.mul(&self.factors[fi].xpow(&a.abs(), self.wp)).neg().exp()
            }
        };
        let v = match coord {
            Coord::Below(a) => {
                let below: BigInt = a - 1;
                let above: BigInt = a + 1;
                if let Some(prev) = memo.get(&(fi, Coord::Below(below.clone()))) {
                    prev.add(&point(&below))
                } else if let Some(next) = memo.get(&(fi, Coord::Below(above))) {
                    next.sub(&point(a))
                } else {
                    self.coord_value(c, coord, pow, node)?
                }
            }
            _ => self.coord_value(c, coord, pow, node)?,
        };
        memo.insert((fi, coord.clone()), v.clone());
        Ok(v)
    }

    pub fn total_mass(&self) -> Result<Iv, MeasureError> {
        self.total
            .get_or_init(|| self.mass(&[vec![Coord::Full; self.params.k + 1]]))
            .clone()
    }

    /// Terms covering {w' : w'_c = prefix_c for c < len, w'_len < a, rest free}.
    pub fn below_terms(&self, prefix: &[BigInt], a: &BigInt) -> Term {
        let ncoord = self.params.k + 1;
        let mut t: Term = prefix.iter().map(|x| Coord::Point(x.clone())).collect();
        t.push(Coord::Below(a.clone()));
        while t.len() < ncoord {
            t.push(Coord::Full);
        }
        t
    }

    /// Unnormalised mass of all boxes lexicographically below w.
    pub fn position_raw(&self, w: &BoxIndex) -> Result<Iv, MeasureError> {
        let coords: Vec<BigInt> = w.i.iter().cloned().chain(std::iter::once(w.j.clone())).collect();
        let mut acc = Iv::zero(self.wp);
        for c in 0..coords.len() {
            acc = acc.add(&self.cum(&coords[..c], &coords[c])?);
        }
        Ok(acc)
    }

    /// Same quantity as `position_raw` from a single fused integral, bypassing the level cache.
    pub fn position_raw_direct(&self, w: &BoxIndex) -> Result<Iv, MeasureError> {
        Ok(self.positions_raw_direct(std::slice::from_ref(w))?.remove(0))
    }

    pub fn positions_raw_direct(&self, ws: &[BoxIndex]) -> Result<Vec<Iv>, MeasureError> {
        let sets: Vec<Vec<Term>> = ws
            .iter()
            .map(|w| {
                let coords: Vec<BigInt> = w.i.iter().cloned().chain(std::iter::once(w.j.clone())).collect();
                (0..coords.len()).map(|c| self.below_terms(&coords[..c], &coords[c])).collect()
            })
            .collect();
        self.masses(&sets)
    }

    /// Position of the left endpoint of I_w in [0, 1].
    pub fn position(&self, w: &BoxIndex) -> Result<Iv, MeasureError> {
        Ok(self.position_raw(w)?.div(&self.total_mass()?))
    }

    pub fn normalized_length(&self, w: &BoxIndex) -> Result<Iv, MeasureError> {
        Ok(crate::interval::raw_length(&self.params, w).div(&self.total_mass()?))
    }

    /// Cumulative mass inside the block fixed by `prefix` of coordinate `prefix.len()` below a.
    fn cum(&self, prefix: &[BigInt], a: &BigInt) -> Result<Iv, MeasureError> {
        let key = (prefix.len(), prefix.to_vec(), a.clone());
        if let Some(v) = self.cum_cache.read().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let v = self.mass(&[self.below_terms(prefix, a)])?;
        self.cum_cache.write().unwrap().insert(key, v.clone());
        Ok(v)
    }

    fn cum_insert(&self, prefix: &[BigInt], a: &BigInt, v: Iv) {
        self.cum_cache.write().unwrap().entry((prefix.len(), prefix.to_vec(), a.clone())).or_insert(v);
    }

    /// Inverse of the position map.
    pub fn locate(&self, x: f64) -> Result<BoxIndex, MeasureError> {
        Ok(self.locate_with_position(x)?.0)
    }

    /// Box containing x together with the enclosure of its left endpoint.
    pub fn locate_with_position(&self, x: f64) -> Result<(BoxIndex, Iv), MeasureError> {
        if !(0.0..=1.0).contains(&x) || x.is_nan() {
            return Err(MeasureError::OutOfRange { x });
        }
        let wp = self.wp;
        let total = self.total_mass()?;
        let margin = Float::with_val(wp, self.params.eps_pos) * total.hi();
        let mut rem = Iv::from_f64(wp, x).mul(&total);
        let mut pos = Iv::zero(wp);
        let ncoord = self.params.k + 1;
        let mut prefix: Vec<BigInt> = Vec::new();
        for c in 0..ncoord {
            let last = c + 1 == ncoord;
            let guess = if last { self.guess_j(&prefix, rem.mid_f64()) } else { BigInt::zero() };
            let a = self.search(&prefix, &rem, &margin, guess, x, last)?;
            let base = self.cum(&prefix, &a)?;
            rem = rem.sub(&base);
            pos = pos.add(&base);
            prefix.push(a);
        }
        let j = prefix.pop().unwrap();
        Ok((BoxIndex { i: prefix, j }, pos.div(&total)))
    }

    /// Largest a with cum(a) <= rem < cum(a + 1), each comparison separated by `margin`.
    fn search(
        &self,
        prefix: &[BigInt],
        rem: &Iv,
        margin: &Float,
        guess: BigInt,
        x: f64,
        last: bool,
    ) -> Result<BigInt, MeasureError> {
        let limit = BigInt::one() << 96;
        // true: v certainly <= rem; false: certainly > rem
        let side = |v: &Iv| -> Result<bool, MeasureError> {
            let below = Float::with_val(self.wp, v.hi() + margin) <= *rem.lo();
            let above = Float::with_val(self.wp, v.lo() - margin) > *rem.hi();
            if below {
                Ok(true)
            } else if above {
                Ok(false)
            } else {
                Err(MeasureError::Ambiguous { x })
            }
        };
        let cmp = |a: &BigInt| -> Result<bool, MeasureError> {
            if a.abs() > limit {
                return Err(MeasureError::Unresolvable { x });
            }
            side(&self.cum(prefix, a)?)
        };
        let mut guess = guess;
        if last {
            // inside a block cum(a + 1) = cum(a) + length(a), so short walks need no integrals
            let len = |a: &BigInt| {
                crate::interval::raw_length(&self.params, &BoxIndex { i: prefix.to_vec(), j: a.clone() })
            };
            let mut v = self.cum(prefix, &guess)?;
            if side(&v)? {
                for _ in 0..64 {
                    let next = v.add(&len(&guess));
                    if !side(&next)? {
                        return Ok(guess);
                    }
                    guess += 1;
                    self.cum_insert(prefix, &guess, next.clone());
                    v = next;
                }
            } else {
                for _ in 0..64 {
                    let prev_a = &guess - 1;
                    let prev = v.sub(&len(&prev_a));
                    guess = prev_a;
                    self.cum_insert(prefix, &guess, prev.clone());
                    if side(&prev)? {
                        return Ok(guess);
                    }
                    v = prev;
                }
            }
        }
        let (mut lo, mut hi);
        if cmp(&guess)? {
            lo = guess.clone();
            let mut step = BigInt::one();
            loop {
                let cand = &lo + &step;
                if !cmp(&cand)? {
                    hi = cand;
                    break;
                }
                lo = cand;
                step *= 2;
            }
        } else {
            hi = guess.clone();
            let mut step = BigInt::one();
            loop {
                let cand = &hi - &step;
                if cmp(&cand)? {
                    lo = cand;
                    break;
                }
                hi = cand;
                step *= 2;
            }
        }
        while &hi - &lo > BigInt::one() {
            let midv: BigInt = (&lo + &hi) >> 1;
            if cmp(&midv)? {
                lo = midv;
            } else {
                hi = midv;
            }
        }
        Ok(lo)
    }

    /// Double-precision estimate of j inside the block fixed by ivec.
    fn guess_j(&self, ivec: &[BigInt], rem: f64) -> BigInt {
        let p = self.params.p_f64();
        let iv: Vec<f64> = ivec.iter().map(|x| x.to_f64().unwrap_or(f64::INFINITY)).collect();
        let s = 1.0 + iv.iter().zip(&p).map(|(i, pn)| i.abs().powf(*pn)).sum::<f64>();
        if !s.is_finite() {
            return BigInt::zero();
        }
        let r = self.params.r_f64();
        let f = |j: f64| inblock_cum_f64(s, r, j);
        // monotone in j: bracket then bisect on integers
        let (mut lo, mut hi) = (0f64, 1f64);
        if f(0.0) <= rem {
            while f(hi) <= rem && hi < 1e30 {
                lo = hi;
                hi *= 2.0;
            }
        } else {
            hi = 0.0;
            lo = -1.0;
            while f(lo) > rem && lo > -1e30 {
                hi = lo;
                lo *= 2.0;
            }
        }
        while hi - lo > 1.0 {
            let m = ((lo + hi) / 2.0).floor();
            if m <= lo || m >= hi {
                break;
            }
            if f(m) <= rem {
                lo = m;
            } else {
                hi = m;
            }
        }
        BigInt::from(lo as i128)
    }

    /// Export rows (index, length, position lo, position hi) as CSV.
    pub fn export_csv<W: std::io::Write>(&self, indices: &[BoxIndex], out: W) -> Result<(), Box<dyn std::error::Error>> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["index", "length", "position_lo", "position_hi"])?;
        for w in indices {
            let len = self.normalized_length(w)?;
            let pos = self.position(w)?;
            wr.write_record([
                w.to_string(),
                format!("{:.20e}", len.mid_f64()),
                format!("{:.20e}", pos.lo_f64()),
                format!("{:.20e}", pos.hi_f64()),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Write cached block masses as a versioned text file.
    pub fn save_cache<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "metab-block-cache v1")?;
        writeln!(out, "{}", self.params.tag())?;
        let cache = self.cum_cache.read().unwrap();
        let mut keys: Vec<_> = cache.keys().cloned().collect();
        keys.sort();
        for key in keys {
            let v = &cache[&key];
            let pre: Vec<String> = key.1.iter().map(|x| x.to_string()).collect();
            writeln!(
                out,
                "{}|{}|{}|{}|{}",
                key.0,
                pre.join(","),
                key.2,
                v.lo().to_string_radix(16, None),
                v.hi().to_string_radix(16, None)
            )?;
        }
        Ok(())
    }

    /// Load a cache written by `save_cache`; returns the number of records, 0 when the tag differs.
    pub fn load_cache<R: std::io::BufRead>(&self, input: R) -> std::io::Result<usize> {
        let mut lines = input.lines();
        let bad = || std::io::Error::new(std::io::ErrorKind::InvalidData, "malformed cache");
        if lines.next().transpose()?.as_deref() != Some("metab-block-cache v1") {
            return Ok(0);
        }
        if lines.next().transpose()?.as_deref() != Some(self.params.tag().as_str()) {
            return Ok(0);
        }
        let mut n = 0;
        let mut cache = self.cum_cache.write().unwrap();
        for line in lines {
            let line = line?;
            let parts: Vec<&str> = line.split('|').collect();
            if parts.len() != 5 {
                return Err(bad());
            }
            let level: usize = parts[0].parse().map_err(|_| bad())?;
            let prefix: Vec<BigInt> = if parts[1].is_empty() {
                vec![]
            } else {
                parts[1].split(',').map(|s| s.parse().map_err(|_| bad())).collect::<Result<_, _>>()?
            };
            let a: BigInt = parts[2].parse().map_err(|_| bad())?;
            let lo = Float::parse_radix(parts[3], 16).map_err(|_| bad())?;
            let hi = Float::parse_radix(parts[4], 16).map_err(|_| bad())?;
            let iv = Iv::new(Float::with_val(self.wp, lo), Float::with_val(self.wp, hi));
            cache.insert((level, prefix, a), iv);
            n += 1;
        }
        Ok(n)
    }
}

// ---------------------------------------------------------------- double-precision in-block sums

fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static GL: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    GL.get_or_init(|| {
        let n = 16usize;
        let mut xs = Vec::new();
        let mut ws = Vec::new();
        for i in 1..=n {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            xs.push(x);
            ws.push(2.0 / ((1.0 - x * x) * dp * dp));
        }
        (xs, ws)
    })
}

/// int_{x0}^{inf} dx / (s + x^r) in double precision.
pub fn tail_integral_f64(s: f64, r: f64, x0: f64) -> f64 {
    let (xs, ws) = gauss_legendre();
    // beyond X the expansion in s x^{-r} converges fast
    let big = (1e4 * s).powf(1.0 / r).max(x0);
    let mut acc = 0.0;
    let (a, b) = (x0.ln(), big.ln());
    let pieces = ((b - a) * 2.0).ceil().max(1.0) as usize;
    let step = (b - a) / pieces as f64;
    for k in 0..pieces {
        let lo = a + k as f64 * step;
        for (x, w) in xs.iter().zip(ws) {
            let u = lo + step * (x + 1.0) / 2.0;
            let e = u.exp();
            acc += w * step / 2.0 * e / (s + e.powf(r));
        }
    }
    let mut term = 0.0;
    for n in 0..12 {
        let e = (n + 1) as f64 * r - 1.0;
        let v = (-s).powi(n) * big.powf(-e) / e;
        term += v;
    }
    acc + term
}

/// sum_{x >= n} 1/(s + x^r) for n >= 1.
pub fn inblock_tail_f64(s: f64, r: f64, n: f64) -> f64 {
    let n0 = n.max(64.0);
    let f = |x: f64| 1.0 / (s + x.powf(r));
    let direct: f64 = (0..(n0 - n).max(0.0) as u64).map(|t| f(n + t as f64)).sum();
    let fp = -r * n0.powf(r - 1.0) * f(n0) * f(n0);
    direct + tail_integral_f64(s, r, n0) + f(n0) / 2.0 - fp / 12.0
}

/// sum_{j' < j} 1/(s + |j'|^r).
pub fn inblock_cum_f64(s: f64, r: f64, j: f64) -> f64 {
    if j <= 0.0 {
        inblock_tail_f64(s, r, 1.0 - j)
    } else {
        let h = inblock_tail_f64(s, r, 1.0);
        2.0 * h + 1.0 / s - inblock_tail_f64(s, r, j)
    }
}

/// sum_{m=a}^{b-1} 1/(s + |m|^r) for integers a <= b, without differencing cumulative sums.
pub fn inblock_range_f64(s: f64, r: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if a < 0.0 && b > 0.0 {
        return inblock_range_f64(s, r, 1.0, 1.0 - a) + inblock_range_f64(s, r, 0.0, b);
    }
    if b <= 0.0 {
        return inblock_range_f64(s, r, 1.0 - b, 1.0 - a);
    }
    let f = |x: f64| 1.0 / (s + x.powf(r));
    // m += 1.0 stalls past 2^53, so count in integers
    let direct = |from: f64, n: u64| (0..n).map(|t| f(from + t as f64)).sum::<f64>();
    if b - a <= 128.0 {
        return direct(a, (b - a) as u64);
    }
    // far out the summand is flat on unit scale and the correction terms cover it
    let head = if a < 1e12 { 64.0 } else { 0.0 };
    let acc = direct(a, head as u64);
    // Euler-Maclaurin on [lo, b) with Gauss-Legendre panels in ln x
    let lo = a + head;
    let fp = |x: f64| -r * x.powf(r - 1.0) * f(x) * f(x);
    let (xs, ws) = gauss_legendre();
    let (ua, ub) = (lo.ln(), b.ln());
    let pieces = ((ub - ua) * 4.0).ceil().max(1.0) as usize;
    let step = (ub - ua) / pieces as f64;
    let mut integral = 0.0;
    for k in 0..pieces {
        let p0 = ua + k as f64 * step;
        for (x, w) in xs.iter().zip(ws) {
            let e = (p0 + step * (x + 1.0) / 2.0).exp();
            integral += w * step / 2.0 * e * f(e);
        }
    }
    acc + integral + (f(lo) - f(b)) / 2.0 + (fp(b) - fp(lo)) / 12.0
}
