//! Generators realized as homeomorphisms of [0, 1].
//!
//! A point inside the system is kept as (box, v) with v in [0, 1] the affine
//! coordinate inside I_box. Letters act on boxes through the coset action and
//! on v through the relative chart map, so composition never relocates.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, RwLock};

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::charts::{dq_rel, phi_rel};
use crate::coset::{BoxIndex, CosetAction};
use crate::group::{structure, Element, GroupError, Letter, Presentation, Word};
use crate::interval::{raw_length, SystemParams};
use crate::measure::{Measure, MeasureError};
use crate::numeric::Iv;

#[derive(Debug, Error)]
pub enum RealizeError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("point {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, RealizeError>;

#[derive(Clone, Debug, PartialEq)]
pub struct LocalPoint {
    pub w: BoxIndex,
    pub v: f64,
}

/// ln(e^a + e^b)
fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// ln of dq(v; rho) without overflow for small v.
fn ln_dq(v: f64, rho: f64) -> f64 {
    if v > 1e-8 && v < 1.0 - 1e-8 {
        return dq_rel(&v, &rho).ln();
    }
    log_add(rho.ln() - 2.0 * v.ln(), -2.0 * (-v).ln_1p())
}

fn big_f64(x: &BigInt) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

pub struct RealizedAction<'a> {
    action: CosetAction<'a>,
    params: SystemParams,
    measure: Arc<Measure>,
    p_f64: Vec<f64>,
    r_f64: f64,
    letters: RwLock<HashMap<(usize, BigInt), Element>>,
}

impl<'a> RealizedAction<'a> {
    /// `pivot` is 0-based and overrides `params.pivot`.
    pub fn build(p: &'a Presentation, pivot: usize, params: &SystemParams) -> Result<Self> {
        let mut params = params.clone();
        params.pivot = pivot;
        let measure = Arc::new(Measure::new(&params));
        Self::with_measure(p, params, measure)
    }

    /// Reuse an existing measure; the lengths do not depend on the pivot.
    pub fn with_measure(p: &'a Presentation, params: SystemParams, measure: Arc<Measure>) -> Result<Self> {
        if params.k != p.k() || params.d != p.d() {
            return Err(RealizeError::Params(format!(
                "parameters built for k={}, d={} but group has k={}, d={}",
                params.k,
                params.d,
                p.k(),
                p.d()
            )));
        }
        if measure.params().tag() != params.tag() {
            return Err(RealizeError::Params("measure built for different parameters".into()));
        }
        let action = CosetAction::new(p, params.pivot)?;
        let p_f64 = params.p_f64();
        let r_f64 = params.r_f64();
        Ok(RealizedAction { action, params, measure, p_f64, r_f64, letters: RwLock::new(HashMap::new()) })
    }

    pub fn presentation(&self) -> &Presentation {
        self.action.presentation()
    }

    pub fn pivot(&self) -> usize {
        self.params.pivot
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn measure(&self) -> &Arc<Measure> {
        &self.measure
    }

    pub fn coset_action(&self) -> &CosetAction<'a> {
        &self.action
    }

    fn letter_element(&self, l: &Letter) -> Element {
        let key = (l.gen, l.exp.clone());
        if let Some(e) = self.letters.read().unwrap().get(&key) {
            return e.clone();
        }
        let e = self.presentation().normal_form(std::slice::from_ref(l));
        self.letters.write().unwrap().insert(key, e.clone());
        e
    }

    /// ln(1 + sum |i_n|^{p_n} + |j|^r).
    pub fn ln_denominator(&self, w: &BoxIndex) -> f64 {
        let mut acc = 0.0;
        for (i, p) in w.i.iter().zip(&self.p_f64) {
            if !i.is_zero() {
                acc = log_add(acc, p * big_f64(&i.abs()).ln());
            }
        }
        if !w.j.is_zero() {
            acc = log_add(acc, self.r_f64 * big_f64(&w.j.abs()).ln());
        }
        acc
    }

    /// |I_pred(w)| / |I_w|.
    pub fn rho(&self, w: &BoxIndex) -> f64 {
        (self.ln_denominator(w) - self.ln_denominator(&w.pred())).exp()
    }

    /// Normalized length of I_w in double precision.
    pub fn length_f64(&self, w: &BoxIndex) -> Result<f64> {
        let t = self.measure.total_mass()?.mid_f64();
        Ok((-self.ln_denominator(w)).exp() / t)
    }

    /// Apply a group element; returns the image and ln of the derivative there.
    pub fn apply_element(&self, g: &Element, x: &LocalPoint) -> (LocalPoint, f64) {
        let w2 = self.action.act(g, &x.w);
        if w2 == x.w {
            return (x.clone(), 0.0);
        }
        let v = x.v;
        if v <= 0.0 {
            let dl = self.ln_denominator(&x.w.pred()) - self.ln_denominator(&w2.pred());
            return (LocalPoint { w: w2, v: 0.0 }, dl);
        }
        let base = self.ln_denominator(&x.w) - self.ln_denominator(&w2);
        if v >= 1.0 {
            return (LocalPoint { w: w2, v: 1.0 }, base);
        }
        let (rs, rd) = (self.rho(&x.w), self.rho(&w2));
        let v2 = phi_rel(&v, &rs, &rd).clamp(0.0, 1.0);
        let dl = base + ln_dq(v, rs) - ln_dq(v2, rd);
        (LocalPoint { w: w2, v: v2 }, dl)
    }

    /// Letter by letter, rightmost first.
    pub fn apply_word(&self, word: &[Letter], x: &LocalPoint) -> (LocalPoint, f64) {
        let mut cur = x.clone();
        let mut lnd = 0.0;
        for l in word.iter().rev() {
            let (nx, dl) = self.apply_element(&self.letter_element(l), &cur);
            cur = nx;
            lnd += dl;
        }
        (cur, lnd)
    }

    pub fn to_local(&self, x: f64) -> Result<LocalPoint> {
        if !(0.0..=1.0).contains(&x) {
            return Err(RealizeError::OutOfRange(x));
        }
        let (w, pos) = self.measure.locate_with_position(x)?;
        let wp = self.params.prec;
        let len = raw_length(&self.params, &w).div(&self.measure.total_mass()?);
        let v = Iv::from_f64(wp, x).sub(&pos).div(&len).mid_f64();
        Ok(LocalPoint { w, v: v.clamp(0.0, 1.0) })
    }

    pub fn to_global(&self, x: &LocalPoint) -> Result<Iv> {
        let total = self.measure.total_mass()?;
        let pos = self.measure.position_raw(&x.w)?;
        let len = raw_length(&self.params, &x.w);
        let v = Iv::from_f64(self.params.prec, x.v);
        Ok(pos.add(&len.mul(&v)).div(&total))
    }

    /// Image and derivative of x under the word.
    pub fn eval(&self, word: &[Letter], x: f64) -> Result<(f64, f64)> {
        if !(0.0..=1.0).contains(&x) {
            return Err(RealizeError::OutOfRange(x));
        }
        // 0 and 1 are fixed with derivative 1
        if word.is_empty() || x == 0.0 || x == 1.0 {
            return Ok((x, 1.0));
        }
        let lp = self.to_local(x)?;
        let (img, lnd) = self.apply_word(word, &lp);
        Ok((self.to_global(&img)?.mid_f64(), lnd.exp()))
    }

    pub fn evaluate(&self, word: &[Letter], x: f64) -> Result<f64> {
        Ok(self.eval(word, x)?.0)
    }

    pub fn derivative(&self, word: &[Letter], x: f64) -> Result<f64> {
        Ok(self.eval(word, x)?.1)
    }

    /// |a - b| in [0, 1] coordinates.
    pub fn distance(&self, a: &LocalPoint, b: &LocalPoint) -> Result<f64> {
        if a.w == b.w {
            return Ok((a.v - b.v).abs() * self.length_f64(&a.w)?);
        }
        if a.v >= 1.0 && a.w.succ() == b.w && b.v <= 0.0 || b.v >= 1.0 && b.w.succ() == a.w && a.v <= 0.0 {
            return Ok(0.0);
        }
        let (ga, gb) = (self.to_global(a)?, self.to_global(b)?);
        Ok((ga.mid_f64() - gb.mid_f64()).abs())
    }

    /// Endpoints of I_w pushed by g versus independently computed endpoints of I_{g w}.
    pub fn image_check(&self, g: &Element, w: &BoxIndex) -> Result<ImageCheck> {
        let target = self.action.act(g, w);
        let total = self.measure.total_mass()?;
        let expected = self.measure.positions_raw_direct(&[target.clone(), target.succ()])?;
        let mut errs = [0.0; 2];
        for (n, v) in [0.0, 1.0].into_iter().enumerate() {
            let (img, _) = self.apply_element(g, &LocalPoint { w: w.clone(), v });
            let realized = self.to_global(&img)?;
            errs[n] = spread(&realized, &expected[n].div(&total));
        }
        Ok(ImageCheck { w: w.clone(), image: target, left_error: errs[0], right_error: errs[1] })
    }

    /// Rows (x, g(x), Dg(x)) at n midpoints; unresolved points are skipped and counted.
    pub fn export_csv<W: Write>(&self, word: &[Letter], n: usize, out: W) -> Result<usize> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["x", "gx", "dgx"])?;
        let mut skipped = 0;
        for s in 0..n {
            let x = (s as f64 + 0.5) / n as f64;
            match self.eval(word, x) {
                Ok((y, dy)) => wr.write_record([format!("{x:.17e}"), format!("{y:.17e}"), format!("{dy:.17e}")])?,
                Err(RealizeError::Measure(_)) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
        wr.flush().map_err(csv::Error::from)?;
        Ok(skipped)
    }
}

/// Largest distance between a point of `a` and a point of `b`.
fn spread(a: &Iv, b: &Iv) -> f64 {
    let x = a.hi().clone() - b.lo();
    let y = b.hi().clone() - a.lo();
    x.max(&y).to_f64().max(0.0)
}

#[derive(Clone, Debug)]
pub struct ImageCheck {
    pub w: BoxIndex,
    pub image: BoxIndex,
    pub left_error: f64,
    pub right_error: f64,
}

impl ImageCheck {
    pub fn max_error(&self) -> f64 {
        self.left_error.max(self.right_error)
    }
}

/// Anything that evaluates words on [0, 1].
pub trait IntervalAction {
    fn presentation(&self) -> &Presentation;
    fn to_point(&self, x: f64) -> Result<Point>;
    fn apply(&self, word: &[Letter], x: &Point) -> Point;
    fn distance(&self, a: &Point, b: &Point) -> Result<f64>;
}

/// A point of [0, 1]: either fixed by everything, or inside carrier `carrier`.
#[derive(Clone, Debug, PartialEq)]
pub enum Point {
    Fixed(f64),
    Inside { carrier: usize, local: LocalPoint },
}

impl IntervalAction for RealizedAction<'_> {
    fn presentation(&self) -> &Presentation {
        self.action.presentation()
    }
    fn to_point(&self, x: f64) -> Result<Point> {
        if x == 0.0 || x == 1.0 {
            return Ok(Point::Fixed(x));
        }
        Ok(Point::Inside { carrier: 0, local: self.to_local(x)? })
    }
    fn apply(&self, word: &[Letter], x: &Point) -> Point {
        match x {
            Point::Fixed(_) => x.clone(),
            Point::Inside { carrier, local } => Point::Inside { carrier: *carrier, local: self.apply_word(word, local).0 },
        }
    }
    fn distance(&self, a: &Point, b: &Point) -> Result<f64> {
        match (a, b) {
            (Point::Inside { local: la, .. }, Point::Inside { local: lb, .. }) => RealizedAction::distance(self, la, lb),
            (Point::Fixed(x), Point::Fixed(y)) => Ok((x - y).abs()),
            (Point::Fixed(x), Point::Inside { local, .. }) | (Point::Inside { local, .. }, Point::Fixed(x)) => {
                Ok((self.to_global(local)?.mid_f64() - x).abs())
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct RelationReport {
    pub max_error: f64,
    pub worst_relation: Option<usize>,
    pub worst_x: Option<f64>,
    pub checked: usize,
    pub skipped: usize,
}

impl std::fmt::Display for RelationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "max error {:.3e} over {} points ({} skipped)", self.max_error, self.checked, self.skipped)?;
        if let (Some(r), Some(x)) = (self.worst_relation, self.worst_x) {
            write!(f, ", worst: relation {r} at x = {x:.17}")?;
        }
        Ok(())
    }
}

/// Draw uniform points until `n_samples` resolve (or 4 n attempts) and compare both sides of every relation.
pub fn verify_relations<A: IntervalAction + ?Sized>(
    a: &A,
    relations: &[(Word, Word)],
    n_samples: usize,
    seed: u64,
) -> Result<RelationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = RelationReport { max_error: 0.0, worst_relation: None, worst_x: None, checked: 0, skipped: 0 };
    let mut attempts = 0;
    while rep.checked < n_samples && attempts < 4 * n_samples.max(1) {
        attempts += 1;
        let x: f64 = rng.gen();
        let pt = match a.to_point(x) {
            Ok(pt) => pt,
            Err(RealizeError::Measure(_)) => {
                rep.skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        for (n, (u, v)) in relations.iter().enumerate() {
            let err = a.distance(&a.apply(u, &pt), &a.apply(v, &pt))?;
            if err > rep.max_error || rep.worst_x.is_none() {
                rep.max_error = err;
                rep.worst_relation = Some(n);
                rep.worst_x = Some(x);
            }
        }
        rep.checked += 1;
    }
    Ok(rep)
}

// ---------------------------------------------------------------- gluing

#[derive(Clone, Debug)]
pub struct CenterWitness {
    pub element: Element,
    /// 0-based carrier index, None when no coordinate is nonzero
    pub carrier: Option<usize>,
    pub shift: BigInt,
}

#[derive(Clone, Debug)]
pub struct FaithfulnessCertificate {
    pub witnesses: Vec<CenterWitness>,
}

impl FaithfulnessCertificate {
    pub fn passed(&self) -> bool {
        !self.witnesses.is_empty() && self.witnesses.iter().all(|w| w.carrier.is_some() && !w.shift.is_zero())
    }
}

/// d copies on the carriers [s/d, (s+1)/d], copy s with pivot s.
pub struct GluedAction<'a> {
    copies: Vec<RealizedAction<'a>>,
    certificate: FaithfulnessCertificate,
}

/// One parameter set per pivot, in pivot order. Copies with equal lengths share a measure.
pub fn glue<'a>(p: &'a Presentation, params_per_pivot: &[SystemParams]) -> Result<GluedAction<'a>> {
    let d = p.d();
    if params_per_pivot.len() != d {
        return Err(RealizeError::Params(format!("need {d} parameter sets, got {}", params_per_pivot.len())));
    }
    let mut measures: HashMap<String, Arc<Measure>> = HashMap::new();
    let mut copies = Vec::with_capacity(d);
    for (s, params) in params_per_pivot.iter().enumerate() {
        let mut params = params.clone();
        params.pivot = s;
        let m = measures.entry(params.tag()).or_insert_with(|| Arc::new(Measure::new(&params))).clone();
        copies.push(RealizedAction::with_measure(p, params, m)?);
    }
    let certificate = certify(&copies)?;
    Ok(GluedAction { copies, certificate })
}

fn certify(copies: &[RealizedAction<'_>]) -> Result<FaithfulnessCertificate> {
    let p = copies[0].presentation();
    let rep = structure(p)?;
    let mut witnesses = Vec::new();
    for z in rep.center {
        let carrier = if z.n.iter().all(|x| x.is_zero()) { z.m.iter().position(|x| !x.is_zero()) } else { None };
        let shift = match carrier {
            Some(s) => {
                let o = BoxIndex::origin(p.k());
                let img = copies[s].coset_action().act(&z, &o);
                if img.i == o.i {
                    img.j - o.j
                } else {
                    BigInt::zero()
                }
            }
            None => BigInt::zero(),
        };
        witnesses.push(CenterWitness { element: z, carrier, shift });
    }
    Ok(FaithfulnessCertificate { witnesses })
}

impl<'a> GluedAction<'a> {
    pub fn copies(&self) -> &[RealizedAction<'a>] {
        &self.copies
    }

    pub fn certificate(&self) -> &FaithfulnessCertificate {
        &self.certificate
    }

    pub fn d(&self) -> usize {
        self.copies.len()
    }

    /// First carrier on which x moves the origin box, if any.
    pub fn nontrivial_carrier(&self, x: &Element) -> Option<usize> {
        let o = BoxIndex::origin(self.copies[0].presentation().k());
        self.copies.iter().position(|c| c.coset_action().act(x, &o) != o)
    }

    fn split(&self, x: f64) -> (usize, f64) {
        let d = self.d() as f64;
        let s = ((x * d).floor() as usize).min(self.d() - 1);
        (s, x * d - s as f64)
    }

    pub fn eval(&self, word: &[Letter], x: f64) -> Result<(f64, f64)> {
        if !(0.0..=1.0).contains(&x) {
            return Err(RealizeError::OutOfRange(x));
        }
        let (s, y) = self.split(x);
        let (fy, dy) = self.copies[s].eval(word, y)?;
        Ok(((s as f64 + fy) / self.d() as f64, dy))
    }

    pub fn evaluate(&self, word: &[Letter], x: f64) -> Result<f64> {
        Ok(self.eval(word, x)?.0)
    }

    pub fn derivative(&self, word: &[Letter], x: f64) -> Result<f64> {
        Ok(self.eval(word, x)?.1)
    }
}

impl IntervalAction for GluedAction<'_> {
    fn presentation(&self) -> &Presentation {
        self.copies[0].presentation()
    }
    fn to_point(&self, x: f64) -> Result<Point> {
        if !(0.0..=1.0).contains(&x) {
            return Err(RealizeError::OutOfRange(x));
        }
        let (s, y) = self.split(x);
        if y == 0.0 {
            return Ok(Point::Fixed(x));
        }
        Ok(Point::Inside { carrier: s, local: self.copies[s].to_local(y)? })
    }
    fn apply(&self, word: &[Letter], x: &Point) -> Point {
        match x {
            Point::Fixed(_) => x.clone(),
            Point::Inside { carrier, local } => {
                Point::Inside { carrier: *carrier, local: self.copies[*carrier].apply_word(word, local).0 }
            }
        }
    }
    fn distance(&self, a: &Point, b: &Point) -> Result<f64> {
        let d = self.d() as f64;
        let global = |pt: &Point| -> Result<f64> {
            Ok(match pt {
                Point::Fixed(x) => *x,
                Point::Inside { carrier, local } => {
                    (*carrier as f64 + self.copies[*carrier].to_global(local)?.mid_f64()) / d
                }
            })
        };
        match (a, b) {
            (Point::Inside { carrier: s, local: la }, Point::Inside { carrier: t, local: lb }) if s == t => {
                Ok(self.copies[*s].distance(la, lb)? / d)
            }
            _ => Ok((global(a)? - global(b)?).abs()),
        }
    }
}
