//! Metabelian nilpotent groups presented as extensions of Z^k by A = Z^d.
//!
//! Elements are kept in the normal form f_1^{n_1}...f_k^{n_k} g_1^{m_1}...g_d^{m_d}.
//! Conjugation by f_t acts on A through the matrix A_t (column convention:
//! f_t g^m f_t^{-1} = g^{A_t m}) and [f_s, f_t] = g^{c_st} for s < t.

use crate::lattice::{self, binom, IMat};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use std::fmt;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("unknown group id `{0}`")]
    UnknownId(String),
    #[error("invalid grid data: {0}")]
    InvalidGrid(String),
    #[error("malformed group spec, field `{field}`: {msg}")]
    Spec { field: String, msg: String },
    #[error("conjugacy matrix {t} is not unipotent")]
    NotUnipotent { t: usize },
    #[error("conjugacy matrices {s} and {t} do not commute")]
    NotCommuting { s: usize, t: usize },
    #[error("conjugacy matrix {t} is not invertible over Z")]
    NotUnimodular { t: usize },
    #[error("inconsistent presentation: {0}")]
    Inconsistent(String),
    #[error("invalid index: {0}")]
    InvalidIndex(String),
    #[error("cannot parse word: {0}")]
    Word(String),
}

/// Shape data kept for catalog groups of the grid family.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridInfo {
    pub depth: usize,
    pub k: usize,
    pub m: Vec<Vec<BigInt>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Element {
    pub n: Vec<BigInt>,
    pub m: Vec<BigInt>,
}

impl Element {
    pub fn identity(k: usize, d: usize) -> Self {
        Element { n: vec![BigInt::zero(); k], m: vec![BigInt::zero(); d] }
    }

    pub fn is_identity(&self) -> bool {
        self.n.iter().all(|x| x.is_zero()) && self.m.iter().all(|x| x.is_zero())
    }

    pub fn from_i64(n: &[i64], m: &[i64]) -> Self {
        Element {
            n: n.iter().map(|&x| BigInt::from(x)).collect(),
            m: m.iter().map(|&x| BigInt::from(x)).collect(),
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[BigInt]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "(n=({}), m=({}))", join(&self.n), join(&self.m))
    }
}

/// One letter of a word: generator id (0..k are f's, k..k+d are g's) and a nonzero exponent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Letter {
    pub gen: usize,
    pub exp: BigInt,
}

pub type Word = Vec<Letter>;

pub fn word_inverse(w: &[Letter]) -> Word {
    w.iter().rev().map(|l| Letter { gen: l.gen, exp: -&l.exp }).collect()
}

#[derive(Clone, Debug)]
pub struct Presentation {
    k: usize,
    d: usize,
    conj: Vec<IMat>,
    fcomm: Vec<Vec<Vec<BigInt>>>,
    labels: Vec<String>,
    grid: Option<GridInfo>,
    /// N_t^j for j < d, where A_t = I + N_t.
    npow: Vec<Vec<IMat>>,
    /// N'_t^j for j < d, where A_t^{-1} = I + N'_t.
    ninv_pow: Vec<Vec<IMat>>,
}

fn default_labels(k: usize, d: usize) -> Vec<String> {
    let mut l: Vec<String> = (1..=k).map(|t| format!("f{t}")).collect();
    l.extend((1..=d).map(|i| format!("g{i}")));
    l
}

fn nil_powers(n: &IMat, d: usize) -> Vec<IMat> {
    let mut out = vec![IMat::identity(d)];
    for j in 1..d.max(1) {
        out.push(out[j - 1].mul(n));
    }
    out
}

impl Presentation {
    /// `fcomm[s][t]` (0-based, s < t) holds c_st; other entries are ignored.
    pub fn new(
        k: usize,
        d: usize,
        conj: Vec<IMat>,
        fcomm: Vec<Vec<Vec<BigInt>>>,
        labels: Option<Vec<String>>,
    ) -> Result<Self, GroupError> {
        if d == 0 {
            return Err(GroupError::Spec { field: "d".into(), msg: "must be positive".into() });
        }
        if conj.len() != k {
            return Err(GroupError::Spec {
                field: "conj".into(),
                msg: format!("expected {k} matrices, got {}", conj.len()),
            });
        }
        for (t, a) in conj.iter().enumerate() {
            if a.rows != d || a.cols != d {
                return Err(GroupError::Spec {
                    field: format!("conj[{t}]"),
                    msg: format!("expected {d}x{d} matrix"),
                });
            }
        }
        let mut fc = vec![vec![vec![BigInt::zero(); d]; k]; k];
        for s in 0..k {
            for t in s + 1..k {
                if let Some(c) = fcomm.get(s).and_then(|r| r.get(t)) {
                    if !c.is_empty() {
                        if c.len() != d {
                            return Err(GroupError::Spec {
                                field: format!("fcomm[{},{}]", s + 1, t + 1),
                                msg: format!("expected length {d}"),
                            });
                        }
                        fc[s][t] = c.clone();
                    }
                }
            }
        }
        let labels = labels.unwrap_or_else(|| default_labels(k, d));
        if labels.len() != k + d {
            return Err(GroupError::Spec { field: "labels".into(), msg: format!("expected {} labels", k + d) });
        }
        let id = IMat::identity(d);
        let mut npow = Vec::with_capacity(k);
        let mut ninv_pow = Vec::with_capacity(k);
        for (t, a) in conj.iter().enumerate() {
            let n = a.sub(&id);
            let pw = nil_powers(&n, d);
            if !pw[d - 1].mul(&n).is_zero() {
                return Err(GroupError::NotUnipotent { t: t + 1 });
            }
            // (I+N)^{-1} = sum_j (-N)^j
            let mut inv = IMat::zeros(d, d);
            for (j, p) in pw.iter().enumerate() {
                inv = if j % 2 == 0 { inv.add(p) } else { inv.sub(p) };
            }
            let ninv = inv.sub(&id);
            ninv_pow.push(nil_powers(&ninv, d));
            npow.push(pw);
        }
        for s in 0..k {
            for t in s + 1..k {
                if conj[s].mul(&conj[t]) != conj[t].mul(&conj[s]) {
                    return Err(GroupError::NotCommuting { s: s + 1, t: t + 1 });
                }
            }
        }
        Ok(Presentation { k, d, conj, fcomm: fc, labels, grid: None, npow, ninv_pow })
    }

    pub fn k(&self) -> usize {
        self.k
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn conj(&self) -> &[IMat] {
        &self.conj
    }
    pub fn labels(&self) -> &[String] {
        &self.labels
    }
    pub fn grid(&self) -> Option<&GridInfo> {
        self.grid.as_ref()
    }
    pub fn fcomm(&self, s: usize, t: usize) -> &[BigInt] {
        &self.fcomm[s][t]
    }
    pub fn ngens(&self) -> usize {
        self.k + self.d
    }

    pub fn identity(&self) -> Element {
        Element::identity(self.k, self.d)
    }

    /// Generator `gen` as an element (0..k are f's, k.. are g's).
    pub fn generator(&self, gen: usize) -> Element {
        let mut e = self.identity();
        if gen < self.k {
            e.n[gen] = BigInt::one();
        } else {
            e.m[gen - self.k] = BigInt::one();
        }
        e
    }

    pub fn gen_id(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    fn apply_series(pows: &[IMat], coeff: impl Fn(usize) -> BigInt, v: &[BigInt]) -> Vec<BigInt> {
        let mut out = vec![BigInt::zero(); v.len()];
        let mut cur = v.to_vec();
        for (j, _) in pows.iter().enumerate() {
            if j > 0 {
                // cur = N * previous cur, using N = pows[1]
                cur = pows[1].mul_vec(&cur);
            }
            if cur.iter().all(|x| x.is_zero()) {
                break;
            }
            let c = coeff(j);
            if !c.is_zero() {
                for (o, x) in out.iter_mut().zip(&cur) {
                    *o += &c * x;
                }
            }
        }
        out
    }

    /// A_t^a v.
    pub fn conj_pow_apply(&self, t: usize, a: &BigInt, v: &[BigInt]) -> Vec<BigInt> {
        if a.is_zero() {
            return v.to_vec();
        }
        if a.is_positive() {
            Self::apply_series(&self.npow[t], |j| binom(a, j), v)
        } else {
            let b = -a;
            Self::apply_series(&self.ninv_pow[t], |j| binom(&b, j), v)
        }
    }

    /// S(n) v with S(n) = sum_{j} C(n, j+1) N'^j, the unified geometric sum
    /// sum_{l=0}^{n-1} A^{-l} (negative n by the same polynomial).
    fn geom_inv_apply(&self, t: usize, n: &BigInt, v: &[BigInt]) -> Vec<BigInt> {
        Self::apply_series(&self.ninv_pow[t], |j| binom(n, j + 1), v)
    }

    /// prod_t A_t^{n_t}.
    pub fn conj_matrix(&self, n: &[BigInt]) -> IMat {
        let mut m = IMat::identity(self.d);
        for t in 0..self.k {
            if n[t].is_zero() {
                continue;
            }
            let mut p = IMat::zeros(self.d, self.d);
            let (pows, e) = if n[t].is_positive() {
                (&self.npow[t], n[t].clone())
            } else {
                (&self.ninv_pow[t], -&n[t])
            };
            for (j, q) in pows.iter().enumerate() {
                let c = binom(&e, j);
                if !c.is_zero() {
                    p = p.add(&q.scale(&c));
                }
            }
            m = m.mul(&p);
        }
        m
    }

    /// x * f_t^a.
    pub fn mul_f_pow(&self, x: &Element, t: usize, a: &BigInt) -> Element {
        if a.is_zero() {
            return x.clone();
        }
        let d = self.d;
        // delta_1 for each u > t: -A_u^{-1} A_t^{-1} c_tu; delta(a) = S_{A_t^{-1}}(a) delta_1
        let mut acc = vec![BigInt::zero(); d];
        for u in t + 1..self.k {
            let nu = &x.n[u];
            let c = &self.fcomm[t][u];
            let mut eps = vec![BigInt::zero(); d];
            if !nu.is_zero() && c.iter().any(|v| !v.is_zero()) {
                let m1 = BigInt::from(-1);
                let tmp = self.conj_pow_apply(t, &m1, c);
                let tmp = self.conj_pow_apply(u, &m1, &tmp);
                let delta1: Vec<BigInt> = tmp.into_iter().map(|v| -v).collect();
                let delta = self.geom_inv_apply(t, a, &delta1);
                eps = self.geom_inv_apply(u, nu, &delta);
            }
            if !nu.is_zero() {
                acc = self.conj_pow_apply(u, &-nu, &acc);
            }
            for (o, e) in acc.iter_mut().zip(eps) {
                *o += e;
            }
        }
        let moved = self.conj_pow_apply(t, &-a, &x.m);
        let mut n = x.n.clone();
        n[t] += a;
        let m = acc.into_iter().zip(moved).map(|(p, q)| p + q).collect();
        Element { n, m }
    }

    pub fn mul_letter(&self, x: &Element, l: &Letter) -> Element {
        if l.gen < self.k {
            self.mul_f_pow(x, l.gen, &l.exp)
        } else {
            let mut y = x.clone();
            y.m[l.gen - self.k] += &l.exp;
            y
        }
    }

    pub fn normal_form(&self, w: &[Letter]) -> Element {
        let mut x = self.identity();
        for l in w {
            x = self.mul_letter(&x, l);
        }
        x
    }

    pub fn multiply(&self, a: &Element, b: &Element) -> Element {
        let mut x = a.clone();
        for t in 0..self.k {
            if !b.n[t].is_zero() {
                x = self.mul_f_pow(&x, t, &b.n[t]);
            }
        }
        for (o, v) in x.m.iter_mut().zip(&b.m) {
            *o += v;
        }
        x
    }

    pub fn inverse(&self, a: &Element) -> Element {
        let mut x = self.identity();
        for t in (0..self.k).rev() {
            if !a.n[t].is_zero() {
                x = self.mul_f_pow(&x, t, &-&a.n[t]);
            }
        }
        // (f^n g^m)^{-1} = f^{-n}-part * g^{-A(n) m}
        let mut v = a.m.clone();
        for t in (0..self.k).rev() {
            v = self.conj_pow_apply(t, &a.n[t], &v);
        }
        for (o, val) in x.m.iter_mut().zip(v) {
            *o -= val;
        }
        x
    }

    pub fn commutator(&self, a: &Element, b: &Element) -> Element {
        let ab = self.multiply(a, b);
        let ai = self.inverse(a);
        let bi = self.inverse(b);
        self.multiply(&self.multiply(&ab, &ai), &bi)
    }

    pub fn power(&self, a: &Element, e: i64) -> Element {
        let base = if e < 0 { self.inverse(a) } else { a.clone() };
        let mut acc = self.identity();
        let mut sq = base;
        let mut k = e.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                acc = self.multiply(&acc, &sq);
            }
            sq = self.multiply(&sq, &sq);
            k >>= 1;
        }
        acc
    }

    /// Word spelling the normal form of `x`.
    pub fn element_word(&self, x: &Element) -> Word {
        let mut w = Vec::new();
        for t in 0..self.k {
            if !x.n[t].is_zero() {
                w.push(Letter { gen: t, exp: x.n[t].clone() });
            }
        }
        for i in 0..self.d {
            if !x.m[i].is_zero() {
                w.push(Letter { gen: self.k + i, exp: x.m[i].clone() });
            }
        }
        w
    }

    pub fn format_element(&self, x: &Element) -> String {
        let w = self.element_word(x);
        if w.is_empty() {
            return "e".into();
        }
        self.format_word(&w)
    }

    pub fn format_word(&self, w: &[Letter]) -> String {
        w.iter()
            .map(|l| {
                if l.exp.is_one() {
                    self.labels[l.gen].clone()
                } else {
                    format!("{}^{}", self.labels[l.gen], l.exp)
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Parse words such as `f Y f^-1 Y^-1`, `f*Y^2` or `[f,Y] C^-1`.
    pub fn parse_word(&self, s: &str) -> Result<Word, GroupError> {
        let chars: Vec<char> = s.chars().collect();
        let mut pos = 0;
        let w = self.parse_seq(&chars, &mut pos)?;
        skip_ws(&chars, &mut pos);
        if pos != chars.len() {
            return Err(GroupError::Word(format!("unexpected `{}` at {pos}", chars[pos])));
        }
        Ok(w)
    }

    fn parse_seq(&self, c: &[char], pos: &mut usize) -> Result<Word, GroupError> {
        let mut w = Vec::new();
        loop {
            skip_ws(c, pos);
            if *pos >= c.len() || c[*pos] == ',' || c[*pos] == ']' {
                return Ok(w);
            }
            if c[*pos] == '*' || c[*pos] == '.' {
                *pos += 1;
                continue;
            }
            let mut part = if c[*pos] == '[' {
                *pos += 1;
                let u = self.parse_seq(c, pos)?;
                skip_ws(c, pos);
                if *pos >= c.len() || c[*pos] != ',' {
                    return Err(GroupError::Word("expected `,` in commutator".into()));
                }
                *pos += 1;
                let v = self.parse_seq(c, pos)?;
                skip_ws(c, pos);
                if *pos >= c.len() || c[*pos] != ']' {
                    return Err(GroupError::Word("expected `]`".into()));
                }
                *pos += 1;
                let mut out = u.clone();
                out.extend(v.clone());
                out.extend(word_inverse(&u));
                out.extend(word_inverse(&v));
                out
            } else {
                let start = *pos;
                while *pos < c.len() && (c[*pos].is_alphanumeric() || c[*pos] == '_' || c[*pos] == '\'') {
                    *pos += 1;
                }
                if start == *pos {
                    return Err(GroupError::Word(format!("unexpected `{}`", c[*pos])));
                }
                let name: String = c[start..*pos].iter().collect();
                let gen = self
                    .gen_id(&name)
                    .ok_or_else(|| GroupError::Word(format!("unknown generator `{name}`")))?;
                vec![Letter { gen, exp: BigInt::one() }]
            };
            skip_ws(c, pos);
            if *pos < c.len() && c[*pos] == '^' {
                *pos += 1;
                skip_ws(c, pos);
                let start = *pos;
                if *pos < c.len() && (c[*pos] == '-' || c[*pos] == '+') {
                    *pos += 1;
                }
                while *pos < c.len() && c[*pos].is_ascii_digit() {
                    *pos += 1;
                }
                let txt: String = c[start..*pos].iter().collect();
                let e: BigInt = txt.parse().map_err(|_| GroupError::Word(format!("bad exponent `{txt}`")))?;
                part = word_power(&part, &e);
            }
            w.extend(part);
        }
    }

    pub fn to_json(&self) -> Value {
        let conj: Vec<Value> = self
            .conj
            .iter()
            .map(|a| Value::Array(a.to_rows().iter().map(|r| Value::Array(r.iter().map(big_json).collect())).collect()))
            .collect();
        let mut fc = Vec::new();
        for s in 0..self.k {
            for t in s + 1..self.k {
                if self.fcomm[s][t].iter().any(|x| !x.is_zero()) {
                    fc.push(serde_json::json!({
                        "s": s + 1, "t": t + 1,
                        "c": self.fcomm[s][t].iter().map(big_json).collect::<Vec<_>>()
                    }));
                }
            }
        }
        serde_json::json!({
            "k": self.k, "d": self.d, "conj": conj, "fcomm": fc, "labels": self.labels
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self, GroupError> {
        let v: Value = serde_json::from_str(text).map_err(|e| GroupError::Spec {
            field: format!("line {}, column {}", e.line(), e.column()),
            msg: e.to_string(),
        })?;
        Self::from_json(&v)
    }

    pub fn from_json(v: &Value) -> Result<Self, GroupError> {
        let spec_err = |field: &str, msg: &str| GroupError::Spec { field: field.into(), msg: msg.into() };
        let k = v.get("k").and_then(Value::as_u64).ok_or_else(|| spec_err("k", "missing or not a nonnegative integer"))? as usize;
        let d = v.get("d").and_then(Value::as_u64).ok_or_else(|| spec_err("d", "missing or not a positive integer"))? as usize;
        let conj_v = v.get("conj").and_then(Value::as_array).ok_or_else(|| spec_err("conj", "missing array"))?;
        if conj_v.len() != k {
            return Err(spec_err("conj", &format!("expected {k} matrices")));
        }
        let mut conj = Vec::new();
        for (t, mv) in conj_v.iter().enumerate() {
            let field = format!("conj[{t}]");
            let arr = mv.as_array().ok_or_else(|| spec_err(&field, "not an array"))?;
            let flat: Vec<BigInt> = if arr.iter().all(Value::is_array) {
                if arr.len() != d {
                    return Err(spec_err(&field, &format!("expected {d} rows")));
                }
                let mut out = Vec::new();
                for (i, row) in arr.iter().enumerate() {
                    let row = row.as_array().unwrap();
                    if row.len() != d {
                        return Err(spec_err(&format!("{field}[{i}]"), &format!("expected {d} entries")));
                    }
                    for x in row {
                        out.push(json_big(x).ok_or_else(|| spec_err(&format!("{field}[{i}]"), "non-integer entry"))?);
                    }
                }
                out
            } else {
                if arr.len() != d * d {
                    return Err(spec_err(&field, &format!("expected {} entries", d * d)));
                }
                arr.iter()
                    .map(|x| json_big(x).ok_or_else(|| spec_err(&field, "non-integer entry")))
                    .collect::<Result<_, _>>()?
            };
            let rows: Vec<Vec<BigInt>> = flat.chunks(d).map(|c| c.to_vec()).collect();
            conj.push(IMat::from_rows(&rows));
        }
        let mut fcomm = vec![vec![Vec::new(); k]; k];
        if let Some(fv) = v.get("fcomm") {
            let arr = fv.as_array().ok_or_else(|| spec_err("fcomm", "not an array"))?;
            for (idx, e) in arr.iter().enumerate() {
                let field = format!("fcomm[{idx}]");
                let s = e.get("s").and_then(Value::as_u64).ok_or_else(|| spec_err(&field, "missing s"))? as usize;
                let t = e.get("t").and_then(Value::as_u64).ok_or_else(|| spec_err(&field, "missing t"))? as usize;
                if !(1 <= s && s < t && t <= k) {
                    return Err(spec_err(&field, "need 1 <= s < t <= k"));
                }
                let c = e.get("c").and_then(Value::as_array).ok_or_else(|| spec_err(&field, "missing c"))?;
                if c.len() != d {
                    return Err(spec_err(&field, &format!("c must have length {d}")));
                }
                fcomm[s - 1][t - 1] = c
                    .iter()
                    .map(|x| json_big(x).ok_or_else(|| spec_err(&field, "non-integer entry in c")))
                    .collect::<Result<_, _>>()?;
            }
        }
        let labels = match v.get("labels") {
            None | Some(Value::Null) => None,
            Some(l) => {
                let arr = l.as_array().ok_or_else(|| spec_err("labels", "not an array"))?;
                Some(
                    arr.iter()
                        .map(|x| x.as_str().map(String::from).ok_or_else(|| spec_err("labels", "non-string label")))
                        .collect::<Result<Vec<_>, _>>()?,
                )
            }
        };
        Presentation::new(k, d, conj, fcomm, labels)
    }

    /// Change of basis of A by the unimodular P: A_t -> P A_t P^{-1}, c -> P c.
    pub fn rebased(&self, p: &IMat) -> Result<Self, GroupError> {
        let pinv = p.inverse_unimodular().ok_or_else(|| GroupError::Inconsistent("P is not unimodular".into()))?;
        let conj = self.conj.iter().map(|a| p.mul(a).mul(&pinv)).collect();
        let mut fc = vec![vec![Vec::new(); self.k]; self.k];
        for s in 0..self.k {
            for t in s + 1..self.k {
                fc[s][t] = p.mul_vec(&self.fcomm[s][t]);
            }
        }
        Presentation::new(self.k, self.d, conj, fc, Some(self.labels.clone()))
    }
}

fn skip_ws(c: &[char], pos: &mut usize) {
    while *pos < c.len() && c[*pos].is_whitespace() {
        *pos += 1;
    }
}

pub fn word_power(w: &[Letter], e: &BigInt) -> Word {
    if w.len() == 1 {
        let exp = &w[0].exp * e;
        return if exp.is_zero() { vec![] } else { vec![Letter { gen: w[0].gen, exp }] };
    }
    let base = if e.is_negative() { word_inverse(w) } else { w.to_vec() };
    let times = e.abs().to_usize().unwrap_or(0);
    let mut out = Vec::with_capacity(base.len() * times);
    for _ in 0..times {
        out.extend(base.iter().cloned());
    }
    out
}

fn big_json(x: &BigInt) -> Value {
    match x.to_i64() {
        Some(v) => Value::from(v),
        None => Value::String(x.to_string()),
    }
}

fn json_big(x: &Value) -> Option<BigInt> {
    match x {
        Value::Number(n) => n.as_i64().map(BigInt::from).or_else(|| n.to_string().parse().ok()),
        Value::String(s) => s.parse().ok(),
        _ => None,
    }
}

// ---------------------------------------------------------------- catalog

fn unit(d: usize, i: usize, j: usize) -> IMat {
    let mut m = IMat::identity(d);
    m.set(i, j, BigInt::one());
    m
}

pub fn heisenberg(n: usize) -> Result<Presentation, GroupError> {
    if n == 0 {
        return Err(GroupError::UnknownId("heisenberg:0".into()));
    }
    let d = n + 1;
    // basis (C, Y_1..Y_n); f_t Y_t f_t^{-1} = Y_t C
    let conj = (1..=n).map(|t| unit(d, 0, t)).collect();
    let labels = if n == 1 {
        vec!["f".to_string(), "C".to_string(), "Y".to_string()]
    } else {
        let mut l: Vec<String> = (1..=n).map(|t| format!("f{t}")).collect();
        l.push("C".into());
        l.extend((1..=n).map(|t| format!("Y{t}")));
        l
    };
    Presentation::new(n, d, conj, vec![], Some(labels))
}

pub fn chain(d: usize) -> Result<Presentation, GroupError> {
    if d < 2 {
        return Err(GroupError::UnknownId(format!("chain:{d} (need d >= 2)")));
    }
    let mut a = IMat::identity(d);
    for i in 1..d {
        a.set(i - 1, i, BigInt::one());
    }
    let mut labels = vec!["f".to_string()];
    labels.extend((1..=d).map(|i| format!("g{i}")));
    Presentation::new(1, d, vec![a], vec![], Some(labels))
}

pub fn grid(depth: usize, k: usize, m: Vec<Vec<BigInt>>) -> Result<Presentation, GroupError> {
    if depth == 0 || k == 0 {
        return Err(GroupError::InvalidGrid("d and k must be positive".into()));
    }
    if m.len() != k || m.iter().any(|r| r.len() != k) {
        return Err(GroupError::InvalidGrid(format!("matrix must be {k}x{k}")));
    }
    if m.iter().flatten().any(|x| !x.is_positive()) {
        return Err(GroupError::InvalidGrid("entries must be positive".into()));
    }
    if IMat::from_rows(&m).det().is_zero() {
        return Err(GroupError::InvalidGrid("matrix has zero determinant".into()));
    }
    let dim = 1 + k * depth;
    let idx = |i: usize, j: usize| 1 + i * depth + j; // i, j 0-based
    let mut conj = Vec::new();
    for s in 0..k {
        let mut a = IMat::identity(dim);
        for i in 0..k {
            for j in 0..depth {
                let target = if j == 0 { 0 } else { idx(i, j - 1) };
                a.set(target, idx(i, j), m[i][s].clone());
            }
        }
        conj.push(a);
    }
    let mut labels: Vec<String> = (1..=k).map(|s| format!("f{s}")).collect();
    labels.push("g0".into());
    for i in 1..=k {
        for j in 1..=depth {
            labels.push(format!("g{i}_{j}"));
        }
    }
    let mut p = Presentation::new(k, dim, conj, vec![], Some(labels))?;
    p.grid = Some(GridInfo { depth, k, m });
    Ok(p)
}

pub fn product(a: &Presentation, b: &Presentation) -> Result<Presentation, GroupError> {
    let (k, d) = (a.k + b.k, a.d + b.d);
    let mut conj = Vec::new();
    for t in 0..k {
        let mut m = IMat::identity(d);
        let (src, off) = if t < a.k { (&a.conj[t], 0) } else { (&b.conj[t - a.k], a.d) };
        for i in 0..src.rows {
            for j in 0..src.cols {
                m.set(off + i, off + j, src.get(i, j).clone());
            }
        }
        conj.push(m);
    }
    let mut fc = vec![vec![vec![BigInt::zero(); d]; k]; k];
    for s in 0..a.k {
        for t in s + 1..a.k {
            for i in 0..a.d {
                fc[s][t][i] = a.fcomm[s][t][i].clone();
            }
        }
    }
    for s in 0..b.k {
        for t in s + 1..b.k {
            for i in 0..b.d {
                fc[a.k + s][a.k + t][a.d + i] = b.fcomm[s][t][i].clone();
            }
        }
    }
    let mut labels: Vec<String> = a.labels[..a.k].iter().map(|l| format!("{l}_1")).collect();
    labels.extend(b.labels[..b.k].iter().map(|l| format!("{l}_2")));
    labels.extend(a.labels[a.k..].iter().map(|l| format!("{l}_1")));
    labels.extend(b.labels[b.k..].iter().map(|l| format!("{l}_2")));
    Presentation::new(k, d, conj, fc, Some(labels))
}

/// Catalog lookup: `heisenberg:<n>`, `chain:<d>`, `grid:<d>,<k>,<matrix>`, `product:<id>;<id>`.
pub fn catalog(id: &str) -> Result<Presentation, GroupError> {
    let id = id.trim();
    let unknown = || GroupError::UnknownId(id.to_string());
    let (kind, rest) = id.split_once(':').ok_or_else(unknown)?;
    match kind {
        "heisenberg" => heisenberg(rest.trim().parse().map_err(|_| unknown())?),
        "chain" => chain(rest.trim().parse().map_err(|_| unknown())?),
        "grid" => {
            let mut parts = rest.splitn(3, ',');
            let depth: usize = parts.next().and_then(|s| s.trim().parse().ok()).ok_or_else(unknown)?;
            let k: usize = parts.next().and_then(|s| s.trim().parse().ok()).ok_or_else(unknown)?;
            let mtxt = parts.next().ok_or_else(|| GroupError::InvalidGrid("missing matrix".into()))?;
            let mv: Value = serde_json::from_str(mtxt.trim())
                .map_err(|e| GroupError::InvalidGrid(format!("matrix: {e}")))?;
            let rows = mv.as_array().ok_or_else(|| GroupError::InvalidGrid("matrix must be an array".into()))?;
            let mut m = Vec::new();
            for r in rows {
                let r = r.as_array().ok_or_else(|| GroupError::InvalidGrid("rows must be arrays".into()))?;
                m.push(
                    r.iter()
                        .map(|x| json_big(x).ok_or_else(|| GroupError::InvalidGrid("non-integer entry".into())))
                        .collect::<Result<Vec<_>, _>>()?,
                );
            }
            grid(depth, k, m)
        }
        "product" => {
            let (l, r) = rest.split_once(';').ok_or_else(unknown)?;
            product(&catalog(l)?, &catalog(r)?)
        }
        _ => Err(unknown()),
    }
}

/// Resolve a catalog id or a path to a JSON spec file.
pub fn load_group(source: &str) -> Result<Presentation, GroupError> {
    let path = std::path::Path::new(source);
    if !source.contains(':') || path.exists() {
        if let Ok(text) = std::fs::read_to_string(path) {
            return Presentation::from_json_str(&text);
        }
    }
    catalog(source)
}

// ---------------------------------------------------------------- checks

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConsistencyFailure {
    NotUnitriangular { t: usize },
    NotCommuting { s: usize, t: usize },
    NotAssociative { a: Element, b: Element, c: Element },
    NotMaximal { witness: Vec<BigInt> },
}

impl fmt::Display for ConsistencyFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConsistencyFailure::NotUnitriangular { t } => write!(f, "unitriangularity: A_{t} is not upper unitriangular"),
            ConsistencyFailure::NotCommuting { s, t } => write!(f, "commutation: A_{s} A_{t} != A_{t} A_{s}"),
            ConsistencyFailure::NotAssociative { a, b, c } => write!(f, "associativity: witness triple {a} {b} {c}"),
            ConsistencyFailure::NotMaximal { witness } => {
                let w: Vec<String> = witness.iter().map(|x| x.to_string()).collect();
                write!(f, "maximality: prod A_t^n_t = I for n = ({})", w.join(","))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConsistencyReport {
    pub triples_checked: usize,
    pub failures: Vec<ConsistencyFailure>,
}

impl ConsistencyReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

pub const CONSISTENCY_SEED: u64 = 0x6d65_7461_6221;

pub fn random_element<R: Rng>(p: &Presentation, rng: &mut R, bound: i64) -> Element {
    Element {
        n: (0..p.k).map(|_| BigInt::from(rng.gen_range(-bound..=bound))).collect(),
        m: (0..p.d).map(|_| BigInt::from(rng.gen_range(-bound..=bound))).collect(),
    }
}

/// Integer matrix whose columns are lcm(1..d-1) * vec(log A_t).
pub fn log_matrix(p: &Presentation) -> IMat {
    let d = p.d;
    let mut scale = BigInt::one();
    for j in 1..d.max(2) {
        scale = scale.lcm(&BigInt::from(j));
    }
    let mut cols = Vec::new();
    for t in 0..p.k {
        let n = p.conj[t].sub(&IMat::identity(d));
        let mut acc = IMat::zeros(d, d);
        let mut pw = n.clone();
        for j in 1..d.max(1) {
            let c = &scale / BigInt::from(j);
            let term = pw.scale(&c);
            acc = if j % 2 == 1 { acc.add(&term) } else { acc.sub(&term) };
            pw = pw.mul(&n);
        }
        let mut col = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                col.push(acc.get(i, j).clone());
            }
        }
        cols.push(col);
    }
    IMat::from_cols(&cols, d * d)
}

pub fn check_consistency(p: &Presentation) -> ConsistencyReport {
    let mut failures = Vec::new();
    for (t, a) in p.conj.iter().enumerate() {
        if !a.is_unitriangular() {
            failures.push(ConsistencyFailure::NotUnitriangular { t: t + 1 });
        }
    }
    for s in 0..p.k {
        for t in s + 1..p.k {
            if p.conj[s].mul(&p.conj[t]) != p.conj[t].mul(&p.conj[s]) {
                failures.push(ConsistencyFailure::NotCommuting { s: s + 1, t: t + 1 });
            }
        }
    }
    let mut gens = Vec::new();
    for g in 0..p.ngens() {
        let e = p.generator(g);
        gens.push(p.inverse(&e));
        gens.push(e);
    }
    let mut checked = 0;
    let mut assoc_fail = None;
    'outer: for a in &gens {
        for b in &gens {
            for c in &gens {
                checked += 1;
                if p.multiply(&p.multiply(a, b), c) != p.multiply(a, &p.multiply(b, c)) {
                    assoc_fail = Some((a.clone(), b.clone(), c.clone()));
                    break 'outer;
                }
            }
        }
    }
    if assoc_fail.is_none() {
        let mut rng = ChaCha8Rng::seed_from_u64(CONSISTENCY_SEED);
        for _ in 0..1000 {
            let a = random_element(p, &mut rng, 3);
            let b = random_element(p, &mut rng, 3);
            let c = random_element(p, &mut rng, 3);
            checked += 1;
            if p.multiply(&p.multiply(&a, &b), &c) != p.multiply(&a, &p.multiply(&b, &c)) {
                assoc_fail = Some((a, b, c));
                break;
            }
        }
    }
    if let Some((a, b, c)) = assoc_fail {
        failures.push(ConsistencyFailure::NotAssociative { a, b, c });
    }
    if p.k > 0 {
        let ker = lattice::integer_kernel(&log_matrix(p));
        if let Some(w) = ker.into_iter().next() {
            failures.push(ConsistencyFailure::NotMaximal { witness: w });
        }
    }
    ConsistencyReport { triples_checked: checked, failures }
}

// ---------------------------------------------------------------- structure

#[derive(Clone, Debug)]
pub struct StructureReport {
    pub degree: usize,
    /// rank(gamma_i / gamma_{i+1}) for i = 1..=degree
    pub ranks: Vec<usize>,
    pub tau: usize,
    pub center: Vec<Element>,
    /// saturated bases of gamma_i inside A for i >= 2
    pub series: Vec<Vec<Vec<BigInt>>>,
}

fn invariant_closure(p: &Presentation, gens: Vec<Vec<BigInt>>) -> Vec<Vec<BigInt>> {
    let d = p.d;
    let mut basis = lattice::saturate(&gens, d);
    loop {
        let mut all = basis.clone();
        for v in &basis {
            for a in &p.conj {
                all.push(a.mul_vec(v));
            }
        }
        let next = lattice::saturate(&all, d);
        if next.len() == basis.len() {
            return next;
        }
        basis = next;
    }
}

pub fn structure(p: &Presentation) -> Result<StructureReport, GroupError> {
    let rep = check_consistency(p);
    if !rep.ok() {
        let msgs: Vec<String> = rep.failures.iter().map(|f| f.to_string()).collect();
        return Err(GroupError::Inconsistent(msgs.join("; ")));
    }
    let d = p.d;
    let id = IMat::identity(d);
    let mut gens = Vec::new();
    for s in 0..p.k {
        for t in s + 1..p.k {
            gens.push(p.fcomm[s][t].clone());
        }
    }
    for a in &p.conj {
        let n = a.sub(&id);
        for i in 0..d {
            gens.push(n.col(i));
        }
    }
    let mut series = vec![invariant_closure(p, gens)];
    loop {
        let last = series.last().unwrap();
        if last.is_empty() {
            break;
        }
        let mut next = Vec::new();
        for v in last {
            for a in &p.conj {
                next.push(a.sub(&id).mul_vec(v));
            }
        }
        let sat = lattice::saturate(&next, d);
        if sat.len() == last.len() {
            return Err(GroupError::Inconsistent("lower central series does not terminate".into()));
        }
        series.push(sat);
    }
    let mut ranks = vec![p.k + d - series[0].len()];
    for i in 0..series.len() - 1 {
        ranks.push(series[i].len() - series[i + 1].len());
    }
    while ranks.len() > 1 && *ranks.last().unwrap() == 0 {
        ranks.pop();
    }
    let degree = ranks.len();
    let tau = ranks.iter().enumerate().map(|(i, r)| (i + 1) * r).sum();
    // center: (0, m) with (A_t - I) m = 0 for all t (maximality forces n = 0)
    let mut stacked = Vec::new();
    for a in &p.conj {
        stacked.extend(a.sub(&id).to_rows());
    }
    let kernel = if stacked.is_empty() {
        IMat::identity(d).to_rows()
    } else {
        lattice::integer_kernel(&IMat::from_rows(&stacked))
    };
    let center = kernel
        .into_iter()
        .map(|m| Element { n: vec![BigInt::zero(); p.k], m })
        .collect();
    Ok(StructureReport { degree, ranks, tau, center, series })
}

// ---------------------------------------------------------------- triangularize

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum TriangularizeError {
    #[error("matrix {0} is not unipotent")]
    NotUnipotent(usize),
    #[error("matrices {0} and {1} do not commute")]
    NotCommuting(usize, usize),
    #[error("matrices must be square of equal size")]
    Shape,
}

/// Unimodular P with P A_t P^{-1} upper unitriangular for all t.
pub fn triangularize(raw: &[IMat]) -> Result<(IMat, Vec<IMat>), TriangularizeError> {
    let d = raw.first().map(|a| a.rows).unwrap_or(0);
    if raw.iter().any(|a| a.rows != d || a.cols != d) {
        return Err(TriangularizeError::Shape);
    }
    let id = IMat::identity(d);
    for (t, a) in raw.iter().enumerate() {
        if !a.sub(&id).pow_u(d as u64).is_zero() {
            return Err(TriangularizeError::NotUnipotent(t + 1));
        }
    }
    for s in 0..raw.len() {
        for t in s + 1..raw.len() {
            if raw[s].mul(&raw[t]) != raw[t].mul(&raw[s]) {
                return Err(TriangularizeError::NotCommuting(s + 1, t + 1));
            }
        }
    }
    let p = triangularize_rec(raw, d);
    let pinv = p.inverse_unimodular().expect("unimodular by construction");
    let out = raw.iter().map(|a| p.mul(a).mul(&pinv)).collect();
    Ok((p, out))
}

fn triangularize_rec(raw: &[IMat], d: usize) -> IMat {
    if d == 0 {
        return IMat::identity(0);
    }
    let id = IMat::identity(d);
    let mut stacked = Vec::new();
    for a in raw {
        stacked.extend(a.sub(&id).to_rows());
    }
    let fixed = if stacked.is_empty() {
        id.to_rows()
    } else {
        lattice::integer_kernel(&IMat::from_rows(&stacked))
    };
    let r = fixed.len();
    assert!(r > 0, "commuting unipotent matrices share a fixed vector");
    if r == d {
        return IMat::identity(d);
    }
    let b = lattice::extend_to_unimodular(&fixed, d).expect("kernel lattices are saturated");
    let binv = b.inverse_unimodular().unwrap();
    let quot: Vec<IMat> = raw
        .iter()
        .map(|a| {
            let m = binv.mul(a).mul(&b);
            let mut q = IMat::zeros(d - r, d - r);
            for i in 0..d - r {
                for j in 0..d - r {
                    q.set(i, j, m.get(r + i, r + j).clone());
                }
            }
            q
        })
        .collect();
    let pq = triangularize_rec(&quot, d - r);
    let mut blk = IMat::identity(d);
    for i in 0..d - r {
        for j in 0..d - r {
            blk.set(r + i, r + j, pq.get(i, j).clone());
        }
    }
    blk.mul(&binv)
}

// ---------------------------------------------------------------- commutators

/// Left-normed simple commutators of generators of weight 2..=min(max_weight, d+1),
/// and the largest |g_pivot|-coordinate among them.
pub fn simple_commutators(p: &Presentation, max_weight: usize, pivot: usize) -> (Vec<Element>, BigInt) {
    let top = max_weight.min(p.d + 1);
    let gens: Vec<Element> = (0..p.ngens()).map(|g| p.generator(g)).collect();
    let mut all: Vec<Element> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut layer = gens.clone();
    for _w in 2..=top {
        let mut next = Vec::new();
        let mut layer_seen = std::collections::HashSet::new();
        for c in &layer {
            for s in &gens {
                let x = p.commutator(c, s);
                if layer_seen.insert(x.clone()) {
                    next.push(x.clone());
                }
                if seen.insert(x.clone()) {
                    all.push(x);
                }
            }
        }
        layer = next;
    }
    let lambda = all
        .iter()
        .map(|e| e.m[pivot].abs())
        .max()
        .unwrap_or_else(BigInt::zero);
    (all, lambda)
}

/// Check [f^n, g_{i,j}] against the grid identities with lambda_i = sum_s n_s m_{i,s}.
/// `i` and `j` are 1-based as in the catalog labels g{i}_{j}.
pub fn verify_grid_identities(p: &Presentation, n: &[BigInt], i: usize, j: usize) -> Result<bool, GroupError> {
    let g = p.grid().ok_or_else(|| GroupError::InvalidIndex("not a grid presentation".into()))?;
    if i < 1 || i > g.k || j < 1 || j > g.depth || n.len() != g.k {
        return Err(GroupError::InvalidIndex(format!("i={i}, j={j}")));
    }
    let idx = |ii: usize, jj: usize| 1 + (ii - 1) * g.depth + (jj - 1);
    let lambda: BigInt = (0..g.k).map(|s| &n[s] * &g.m[i - 1][s]).sum();
    let f = Element { n: n.to_vec(), m: vec![BigInt::zero(); p.d()] };
    let c = p.commutator(&f, &p.generator(p.k() + idx(i, j)));
    if c.n.iter().any(|x| !x.is_zero()) {
        return Ok(false);
    }
    if j == 1 {
        let mut want = vec![BigInt::zero(); p.d()];
        want[0] = lambda;
        return Ok(c.m == want);
    }
    let mut allowed = vec![false; p.d()];
    allowed[0] = true;
    for jj in 1..=j - 1 {
        allowed[idx(i, jj)] = true;
    }
    let support_ok = c.m.iter().enumerate().all(|(a, v)| v.is_zero() || allowed[a]);
    Ok(support_ok && c.m[idx(i, j - 1)] == lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(v: i64) -> BigInt {
        BigInt::from(v)
    }

    #[test]
    fn heisenberg_one_matrix() {
        let h = catalog("heisenberg:1").unwrap();
        assert_eq!(h.k(), 1);
        assert_eq!(h.d(), 2);
        assert_eq!(h.conj()[0], IMat::from_i64(&[&[1, 1], &[0, 1]]));
    }

    #[test]
    fn conjugation_words() {
        let h = catalog("heisenberg:1").unwrap();
        let w = h.parse_word("f Y f^-1").unwrap();
        assert_eq!(h.normal_form(&w), Element::from_i64(&[0], &[1, 1]));
        let c = h.parse_word("[f,Y]").unwrap();
        assert_eq!(h.normal_form(&c), Element::from_i64(&[0], &[1, 0]));
        assert!(h.normal_form(&[]).is_identity());
    }

    #[test]
    fn conj_matrix_powers() {
        let h = catalog("heisenberg:1").unwrap();
        assert!(h.conj_matrix(&[b(0)]).is_identity());
        assert_eq!(h.conj_matrix(&[b(-1)]), IMat::from_i64(&[&[1, -1], &[0, 1]]));
        assert_eq!(h.conj_matrix(&[b(3)]), IMat::from_i64(&[&[1, 3], &[0, 1]]));
    }

    #[test]
    fn heisenberg_two_commutators() {
        let h = catalog("heisenberg:2").unwrap();
        let f1 = h.generator(0);
        let y1 = h.generator(h.gen_id("Y1").unwrap());
        let y2 = h.generator(h.gen_id("Y2").unwrap());
        let c = h.generator(h.gen_id("C").unwrap());
        assert_eq!(h.commutator(&f1, &y1), c);
        assert!(h.commutator(&f1, &y2).is_identity());
        assert!(h.commutator(&y1, &y1).is_identity());
    }

    #[test]
    fn abelian_inverse() {
        let p = Presentation::new(2, 2, vec![IMat::identity(2), IMat::identity(2)], vec![], None).unwrap();
        let x = Element::from_i64(&[3, -2], &[5, 7]);
        assert_eq!(p.inverse(&x), Element::from_i64(&[-3, 2], &[-5, -7]));
    }

    #[test]
    fn fcomm_collection() {
        // [f1, f2] = g1 with trivial action: a central extension of Z^2
        let fc = vec![vec![vec![], vec![b(1)]], vec![vec![], vec![]]];
        let p = Presentation::new(2, 1, vec![IMat::identity(1), IMat::identity(1)], fc, None).unwrap();
        let c = p.commutator(&p.generator(0), &p.generator(1));
        assert_eq!(c, Element::from_i64(&[0, 0], &[1]));
        let x = Element::from_i64(&[2, -1], &[4]);
        assert!(p.multiply(&x, &p.inverse(&x)).is_identity());
        assert!(p.multiply(&p.inverse(&x), &x).is_identity());
    }

    #[test]
    fn grid_examples() {
        let g = catalog("grid:2,2,[[1,2],[3,1]]").unwrap();
        assert!(verify_grid_identities(&g, &[b(1), b(1)], 1, 1).unwrap());
        let f = Element { n: vec![b(1), b(1)], m: vec![b(0); g.d()] };
        let c = g.commutator(&f, &g.generator(g.gen_id("g1_1").unwrap()));
        let mut want = vec![b(0); g.d()];
        want[0] = b(3);
        assert_eq!(c.m, want);
        let g3 = catalog("grid:3,1,[[2]]").unwrap();
        assert!(verify_grid_identities(&g3, &[b(2)], 1, 3).unwrap());
        let f = Element { n: vec![b(2)], m: vec![b(0); g3.d()] };
        let c = g3.commutator(&f, &g3.generator(g3.gen_id("g1_3").unwrap()));
        assert_eq!(c.m[g3.gen_id("g1_2").unwrap() - 1], b(4));
        assert!(verify_grid_identities(&g3, &[b(0)], 1, 2).unwrap());
    }

    #[test]
    fn catalog_errors() {
        assert!(matches!(catalog("heisenberg:x"), Err(GroupError::UnknownId(_))));
        assert!(catalog("grid:1,1,[]").is_err());
        assert!(matches!(catalog("grid:1,1,[[0]]"), Err(GroupError::InvalidGrid(_))));
        assert!(matches!(catalog("grid:2,2,[[1,2],[2,4]]"), Err(GroupError::InvalidGrid(_))));
        assert!(matches!(catalog("nope:3"), Err(GroupError::UnknownId(_))));
    }

    #[test]
    fn structure_examples() {
        for n in 1..=3 {
            let s = structure(&catalog(&format!("heisenberg:{n}")).unwrap()).unwrap();
            assert_eq!(s.degree, 2);
            assert_eq!(s.center.len(), 1);
        }
        let s = structure(&catalog("heisenberg:1").unwrap()).unwrap();
        assert_eq!(s.ranks, vec![2, 1]);
        assert_eq!(s.tau, 4);
        let g = structure(&catalog("grid:3,2,[[1,1],[1,2]]").unwrap()).unwrap();
        assert_eq!(g.degree, 4);
    }

    #[test]
    fn consistency_examples() {
        assert!(check_consistency(&catalog("heisenberg:2").unwrap()).ok());
        assert!(check_consistency(&catalog("grid:3,2,[[1,1],[1,2]]").unwrap()).ok());
        let p = Presentation::new(1, 2, vec![IMat::identity(2)], vec![], None).unwrap();
        let r = check_consistency(&p);
        assert!(r.failures.iter().any(|f| matches!(f, ConsistencyFailure::NotMaximal { witness } if witness == &vec![b(1)])));
    }

    #[test]
    fn inconsistent_fcomm_detected() {
        // [f2,f3] = g2 is incompatible with f1 moving g2
        let a1 = IMat::from_i64(&[&[1, 1], &[0, 1]]);
        let mut fc = vec![vec![vec![]; 3]; 3];
        fc[1][2] = vec![b(0), b(1)];
        let p = Presentation::new(3, 2, vec![a1, IMat::identity(2), IMat::identity(2)], fc, None).unwrap();
        let r = check_consistency(&p);
        assert!(r.failures.iter().any(|f| matches!(f, ConsistencyFailure::NotAssociative { .. })));
    }

    #[test]
    fn triangularize_lower() {
        let (p, out) = triangularize(&[IMat::from_i64(&[&[1, 0], &[1, 1]])]).unwrap();
        assert_eq!(out[0], IMat::from_i64(&[&[1, 1], &[0, 1]]));
        assert_eq!(p, IMat::from_i64(&[&[0, 1], &[1, 0]]));
        assert!(matches!(
            triangularize(&[IMat::from_i64(&[&[2, 0], &[0, 1]])]),
            Err(TriangularizeError::NotUnipotent(1))
        ));
    }

    #[test]
    fn simple_commutator_sets() {
        let h = catalog("heisenberg:1").unwrap();
        let (set, lam) = simple_commutators(&h, 2, 0);
        assert!(set.contains(&Element::from_i64(&[0], &[1, 0])));
        assert!(set.contains(&Element::from_i64(&[0], &[-1, 0])));
        assert_eq!(lam, b(1));
        let p = Presentation::new(1, 1, vec![IMat::identity(1)], vec![], None).unwrap();
        let (set, lam) = simple_commutators(&p, 3, 0);
        assert!(set.iter().all(|e| e.is_identity()));
        assert_eq!(lam, b(0));
        let g = catalog("grid:2,1,[[2]]").unwrap();
        let (set, _) = simple_commutators(&g, 2, 0);
        let i11 = g.gen_id("g1_1").unwrap() - g.k();
        for s in [2, -2] {
            let mut m = vec![b(0); g.d()];
            m[i11] = b(s);
            assert!(set.contains(&Element { n: vec![b(0)], m }));
        }
    }

    #[test]
    fn json_roundtrip() {
        let h = catalog("heisenberg:2").unwrap();
        let txt = h.to_json().to_string();
        let back = Presentation::from_json_str(&txt).unwrap();
        assert_eq!(back.conj(), h.conj());
        assert_eq!(back.labels(), h.labels());
        let err = Presentation::from_json_str("{\"k\":1,\"d\":2,\"conj\":[[1,2,3]]}").unwrap_err();
        assert!(matches!(err, GroupError::Spec { .. }));
    }
}
