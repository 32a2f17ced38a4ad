//! Left multiplication action of G on G/H_s, with H_s generated by the g_m, m != s.
//! Cosets f_1^{i_1}...f_k^{i_k} g_s^j H_s are identified with (i, j) in Z^{k+1}.

use crate::group::{Element, GroupError, Presentation};
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::RwLock;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoxIndex {
    pub i: Vec<BigInt>,
    pub j: BigInt,
}

impl BoxIndex {
    pub fn new(i: Vec<BigInt>, j: BigInt) -> Self {
        BoxIndex { i, j }
    }

    pub fn from_i64(i: &[i64], j: i64) -> Self {
        BoxIndex { i: i.iter().map(|&x| BigInt::from(x)).collect(), j: BigInt::from(j) }
    }

    pub fn origin(k: usize) -> Self {
        BoxIndex { i: vec![BigInt::zero(); k], j: BigInt::zero() }
    }

    pub fn norm1_i(&self) -> BigInt {
        self.i.iter().map(|x| x.abs()).sum()
    }

    /// In-block predecessor (i, j-1).
    pub fn pred(&self) -> Self {
        BoxIndex { i: self.i.clone(), j: &self.j - 1 }
    }

    pub fn succ(&self) -> Self {
        BoxIndex { i: self.i.clone(), j: &self.j + 1 }
    }

    pub fn to_i64(&self) -> Option<(Vec<i64>, i64)> {
        let i = self.i.iter().map(|x| x.to_i64()).collect::<Option<Vec<_>>>()?;
        Some((i, self.j.to_i64()?))
    }
}

impl std::fmt::Display for BoxIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let i: Vec<String> = self.i.iter().map(|x| x.to_string()).collect();
        write!(f, "(({}),{})", i.join(","), self.j)
    }
}

/// Lexicographic comparison on (i_1, ..., i_k, j).
pub fn lex_compare(a: &BoxIndex, b: &BoxIndex) -> Ordering {
    for (x, y) in a.i.iter().zip(&b.i) {
        match x.cmp(y) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    a.j.cmp(&b.j)
}

pub struct CosetAction<'a> {
    p: &'a Presentation,
    pivot: usize,
    ell_memo: RwLock<HashMap<(usize, Vec<BigInt>), BigInt>>,
    rr_memo: RwLock<HashMap<(usize, Vec<BigInt>), BigInt>>,
}

impl<'a> CosetAction<'a> {
    /// `pivot` is 0-based.
    pub fn new(p: &'a Presentation, pivot: usize) -> Result<Self, GroupError> {
        if pivot >= p.d() {
            return Err(GroupError::InvalidIndex(format!("pivot {} out of 1..={}", pivot + 1, p.d())));
        }
        Ok(CosetAction { p, pivot, ell_memo: RwLock::new(HashMap::new()), rr_memo: RwLock::new(HashMap::new()) })
    }

    pub fn presentation(&self) -> &Presentation {
        self.p
    }

    pub fn pivot(&self) -> usize {
        self.pivot
    }

    pub fn representative(&self, w: &BoxIndex) -> Element {
        let mut m = vec![BigInt::zero(); self.p.d()];
        m[self.pivot] = w.j.clone();
        Element { n: w.i.clone(), m }
    }

    pub fn coset_of(&self, x: &Element) -> BoxIndex {
        BoxIndex { i: x.n.clone(), j: x.m[self.pivot].clone() }
    }

    pub fn act(&self, g: &Element, w: &BoxIndex) -> BoxIndex {
        self.coset_of(&self.p.multiply(g, &self.representative(w)))
    }

    /// Shift of j under generator `gen` at ivec, evaluated with coset height j.
    fn shift_at(&self, gen: usize, ivec: &[BigInt], j: &BigInt) -> BigInt {
        let w = BoxIndex { i: ivec.to_vec(), j: j.clone() };
        let out = self.act(&self.p.generator(gen), &w);
        out.j - j
    }

    fn memo(&self, table: &RwLock<HashMap<(usize, Vec<BigInt>), BigInt>>, gen: usize, t: usize, ivec: &[BigInt]) -> BigInt {
        let key = (t, ivec.to_vec());
        if let Some(v) = table.read().unwrap().get(&key) {
            return v.clone();
        }
        let v = self.shift_at(gen, ivec, &BigInt::zero());
        table.write().unwrap().insert(key, v.clone());
        v
    }

    /// l_t(ivec) for 0-based t.
    pub fn ell(&self, t: usize, ivec: &[BigInt]) -> BigInt {
        self.memo(&self.ell_memo, t, t, ivec)
    }

    /// r_m(ivec) for 0-based m.
    pub fn rr(&self, m: usize, ivec: &[BigInt]) -> BigInt {
        self.memo(&self.rr_memo, self.p.k() + m, m, ivec)
    }

    /// Same shifts evaluated at another coset height; used to assert j-independence.
    pub fn ell_at(&self, t: usize, ivec: &[BigInt], j: &BigInt) -> BigInt {
        self.shift_at(t, ivec, j)
    }

    pub fn rr_at(&self, m: usize, ivec: &[BigInt], j: &BigInt) -> BigInt {
        self.shift_at(self.p.k() + m, ivec, j)
    }

    /// Largest |l_t|, |r_m| (m != pivot) on the sphere ||ivec||_1 = rho.
    pub fn sphere_max(&self, rho: u64) -> BigInt {
        let mut best = BigInt::zero();
        for v in l1_sphere(self.p.k(), rho) {
            for t in 0..self.p.k() {
                best = best.max(self.ell(t, &v).abs());
            }
            for m in 0..self.p.d() {
                if m != self.pivot {
                    best = best.max(self.rr(m, &v).abs());
                }
            }
        }
        best
    }

    /// (M_hat, slope) over 0 < ||ivec||_1 <= n.
    pub fn fit_bound(&self, n: u64) -> BoundFit {
        let d = self.p.d() as i32;
        let mut m_hat = 0.0f64;
        let mut pts = Vec::new();
        for rho in 1..=n {
            let mx = self.sphere_max(rho).to_f64().unwrap_or(f64::INFINITY);
            m_hat = m_hat.max(mx / (rho as f64).powi(d));
            if rho >= 2 && mx > 0.0 {
                pts.push(((rho as f64).ln(), mx.ln()));
            }
        }
        BoundFit { m_hat, slope: least_squares_slope(&pts) }
    }

    /// Whether every shift on rho in [lo, hi] obeys |.| <= m_hat * factor * rho^d.
    pub fn check_bound(&self, m_hat: f64, factor: f64, lo: u64, hi: u64) -> bool {
        let d = self.p.d() as i32;
        (lo.max(1)..=hi).all(|rho| {
            let mx = self.sphere_max(rho).to_f64().unwrap_or(f64::INFINITY);
            mx <= m_hat * factor * (rho as f64).powi(d)
        })
    }

    /// CSV rows `i_1..i_k,generator,value` for every ivec with ||ivec||_inf <= radius.
    pub fn table_csv<W: std::io::Write>(&self, radius: i64, out: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        let k = self.p.k();
        let mut header: Vec<String> = (1..=k).map(|t| format!("i_{t}")).collect();
        header.push("generator".into());
        header.push("value".into());
        wr.write_record(&header)?;
        for v in box_points(k, radius) {
            let iv: Vec<BigInt> = v.iter().map(|&x| BigInt::from(x)).collect();
            for gen in 0..self.p.ngens() {
                let val = if gen < k { self.ell(gen, &iv) } else { self.rr(gen - k, &iv) };
                let mut row: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                row.push(self.p.labels()[gen].clone());
                row.push(val.to_string());
                wr.write_record(&row)?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BoundFit {
    pub m_hat: f64,
    pub slope: f64,
}

pub fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// All integer vectors of length k with ||v||_1 = rho.
pub fn l1_sphere(k: usize, rho: u64) -> Vec<Vec<BigInt>> {
    fn rec(k: usize, rem: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<BigInt>>) {
        if k == 1 {
            for v in if rem == 0 { vec![0] } else { vec![rem, -rem] } {
                cur.push(v);
                out.push(cur.iter().map(|&x| BigInt::from(x)).collect());
                cur.pop();
            }
            return;
        }
        for a in -rem..=rem {
            cur.push(a);
            rec(k - 1, rem - a.abs(), cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k == 0 {
        if rho == 0 {
            out.push(vec![]);
        }
        return out;
    }
    rec(k, rho as i64, &mut Vec::new(), &mut out);
    out
}

/// All integer vectors of length k with ||v||_inf <= radius, in lex order.
pub fn box_points(k: usize, radius: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        let mut next = Vec::new();
        for v in &out {
            for a in -radius..=radius {
                let mut w = v.clone();
                w.push(a);
                next.push(w);
            }
        }
        out = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::catalog;

    fn b(v: i64) -> BigInt {
        BigInt::from(v)
    }

    #[test]
    fn lex_examples() {
        assert_eq!(lex_compare(&BoxIndex::from_i64(&[0], 1), &BoxIndex::from_i64(&[1], 0)), Ordering::Less);
        assert_eq!(lex_compare(&BoxIndex::from_i64(&[4], 4), &BoxIndex::from_i64(&[4], 4)), Ordering::Equal);
        assert_eq!(
            lex_compare(&BoxIndex::from_i64(&[-1], 1_000_000), &BoxIndex::from_i64(&[0], -1_000_000)),
            Ordering::Less
        );
    }

    #[test]
    fn heisenberg_shifts() {
        let h = catalog("heisenberg:1").unwrap();
        let a = CosetAction::new(&h, 0).unwrap();
        for i in -5..=5 {
            assert_eq!(a.ell(0, &[b(i)]), b(0));
        }
        assert_eq!(a.rr(1, &[b(3)]), b(-3));
        let a2 = CosetAction::new(&h, 1).unwrap();
        for i in -5..=5 {
            assert_eq!(a2.rr(0, &[b(i)]), b(0));
            assert_eq!(a2.rr(1, &[b(i)]), b(1));
        }
        let h2 = catalog("heisenberg:2").unwrap();
        let a = CosetAction::new(&h2, 0).unwrap();
        assert_eq!(a.rr(1, &[b(2), b(5)]), b(-2));
        assert_eq!(a.rr(2, &[b(2), b(5)]), b(-5));
    }

    #[test]
    fn heisenberg_act() {
        let h = catalog("heisenberg:1").unwrap();
        let a = CosetAction::new(&h, 0).unwrap();
        let w = BoxIndex::from_i64(&[4], -2);
        assert_eq!(a.act(&h.identity(), &w), w);
        assert_eq!(a.act(&h.generator(0), &w), BoxIndex::from_i64(&[5], -2));
        assert_eq!(a.act(&h.generator(2), &w), BoxIndex::from_i64(&[4], -6));
    }

    #[test]
    fn bound_fits() {
        let p = crate::group::Presentation::new(1, 2, vec![crate::lattice::IMat::identity(2)], vec![], None).unwrap();
        let a = CosetAction::new(&p, 0).unwrap();
        assert_eq!(a.fit_bound(8).m_hat, 0.0);
        let h = catalog("heisenberg:1").unwrap();
        let a = CosetAction::new(&h, 0).unwrap();
        let fit = a.fit_bound(32);
        assert!((0.9..=1.1).contains(&fit.slope), "{}", fit.slope);
    }

    #[test]
    fn spheres() {
        assert_eq!(l1_sphere(2, 1).len(), 4);
        assert_eq!(l1_sphere(2, 3).len(), 12);
        assert_eq!(l1_sphere(1, 0).len(), 1);
        assert_eq!(box_points(2, 1).len(), 9);
    }
}
