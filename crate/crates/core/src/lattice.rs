//! Dense integer matrices and lattice routines over arbitrary-size integers.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IMat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<BigInt>,
}

impl IMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IMat { rows, cols, data: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IMat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = BigInt::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<BigInt>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut m = IMat::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged matrix rows");
            for (j, v) in row.iter().enumerate() {
                m.data[i * c + j] = v.clone();
            }
        }
        m
    }

    pub fn from_i64(rows: &[&[i64]]) -> Self {
        let v: Vec<Vec<BigInt>> = rows.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect();
        IMat::from_rows(&v)
    }

    pub fn from_cols(cols: &[Vec<BigInt>], nrows: usize) -> Self {
        let mut m = IMat::zeros(nrows, cols.len());
        for (j, col) in cols.iter().enumerate() {
            for i in 0..nrows {
                m.data[i * cols.len() + j] = col[i].clone();
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> Vec<BigInt> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn col(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows).map(|i| self.row(i)).collect()
    }

    pub fn transpose(&self) -> IMat {
        let mut t = IMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &IMat) -> IMat {
        assert_eq!(self.cols, other.rows);
        let mut out = IMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(l, j);
                    if !b.is_zero() {
                        out.data[i * other.cols + j] += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut s = BigInt::zero();
                for j in 0..self.cols {
                    let a = self.get(i, j);
                    if !a.is_zero() && !v[j].is_zero() {
                        s += a * &v[j];
                    }
                }
                s
            })
            .collect()
    }

    pub fn add(&self, other: &IMat) -> IMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        IMat { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &IMat) -> IMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        IMat { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: &BigInt) -> IMat {
        IMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| {
                (0..self.cols).all(|j| {
                    let v = self.get(i, j);
                    if i == j {
                        v.is_one()
                    } else {
                        v.is_zero()
                    }
                })
            })
    }

    /// Upper triangular with ones on the diagonal.
    pub fn is_unitriangular(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| {
                self.get(i, i).is_one() && (0..i).all(|j| self.get(i, j).is_zero())
            })
    }

    pub fn pow_u(&self, mut e: u64) -> IMat {
        assert_eq!(self.rows, self.cols);
        let mut base = self.clone();
        let mut acc = IMat::identity(self.rows);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    /// Fraction-free (Bareiss) determinant.
    pub fn det(&self) -> BigInt {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        if n == 0 {
            return BigInt::one();
        }
        let mut a = self.to_rows();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if a[k][k].is_zero() {
                match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                    Some(i) => {
                        a.swap(i, k);
                        sign = -sign;
                    }
                    None => return BigInt::zero(),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                    a[i][j] = v / &prev;
                }
            }
            prev = a[k][k].clone();
        }
        sign * a[n - 1][n - 1].clone()
    }

    /// Exact inverse, `None` when the matrix is not unimodular.
    pub fn inverse_unimodular(&self) -> Option<IMat> {
        let n = self.rows;
        assert_eq!(n, self.cols);
        let mut a: Vec<Vec<BigRational>> = (0..n)
            .map(|i| {
                let mut row: Vec<BigRational> =
                    (0..n).map(|j| BigRational::from_integer(self.get(i, j).clone())).collect();
                row.extend((0..n).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }));
                row
            })
            .collect();
        for c in 0..n {
            let p = (c..n).find(|&i| !a[i][c].is_zero())?;
            a.swap(p, c);
            let piv = a[c][c].clone();
            for v in a[c].iter_mut() {
                *v = &*v / &piv;
            }
            for i in 0..n {
                if i != c && !a[i][c].is_zero() {
                    let f = a[i][c].clone();
                    let pivot_row = a[c].clone();
                    for (x, y) in a[i].iter_mut().zip(pivot_row.iter()) {
                        *x = &*x - &f * y;
                    }
                }
            }
        }
        let mut out = IMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let v = &a[i][n + j];
                if !v.is_integer() {
                    return None;
                }
                out.set(i, j, v.to_integer());
            }
        }
        Some(out)
    }
}

impl fmt::Display for IMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "[")?;
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", self.get(i, j))?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

/// Binomial coefficient C(n, j) for any integer n and j >= 0.
pub fn binom(n: &BigInt, j: usize) -> BigInt {
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for i in 0..j {
        num *= n - BigInt::from(i);
        den *= BigInt::from(i + 1);
    }
    num / den
}

/// Row-reduce the first `width` columns of `rows` to Hermite normal form using
/// unimodular row operations applied to whole rows. Returns the rank.
pub fn hermite_rows(rows: &mut [Vec<BigInt>], width: usize) -> usize {
    let nrows = rows.len();
    let mut r = 0;
    for c in 0..width {
        if r == nrows {
            break;
        }
        loop {
            let mut best: Option<usize> = None;
            for i in r..nrows {
                if !rows[i][c].is_zero()
                    && best.map_or(true, |b| rows[i][c].abs() < rows[b][c].abs())
                {
                    best = Some(i);
                }
            }
            let Some(b) = best else { break };
            rows.swap(r, b);
            let mut done = true;
            for i in r + 1..nrows {
                if rows[i][c].is_zero() {
                    continue;
                }
                let q = rows[i][c].div_floor(&rows[r][c]);
                let pivot = rows[r].clone();
                for (x, y) in rows[i].iter_mut().zip(pivot.iter()) {
                    *x -= &q * y;
                }
                if !rows[i][c].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if rows[r][c].is_zero() {
            continue;
        }
        if rows[r][c].is_negative() {
            for x in rows[r].iter_mut() {
                *x = -&*x;
            }
        }
        for i in 0..r {
            let q = rows[i][c].div_floor(&rows[r][c]);
            if !q.is_zero() {
                let pivot = rows[r].clone();
                for (x, y) in rows[i].iter_mut().zip(pivot.iter()) {
                    *x -= &q * y;
                }
            }
        }
        r += 1;
    }
    r
}

/// Basis (in Hermite form) of the integer kernel {x : m x = 0}.
pub fn integer_kernel(m: &IMat) -> Vec<Vec<BigInt>> {
    let n = m.cols;
    if m.rows == 0 {
        return IMat::identity(n).to_rows();
    }
    let mut rows: Vec<Vec<BigInt>> = (0..n)
        .map(|c| {
            let mut row = m.col(c);
            row.extend((0..n).map(|j| if j == c { BigInt::one() } else { BigInt::zero() }));
            row
        })
        .collect();
    let rank = hermite_rows(&mut rows, m.rows);
    let mut kernel: Vec<Vec<BigInt>> = rows[rank..].iter().map(|r| r[m.rows..].to_vec()).collect();
    let k = kernel.len();
    hermite_rows(&mut kernel, n);
    kernel.truncate(k);
    kernel.retain(|v| v.iter().any(|x| !x.is_zero()));
    kernel
}

/// Hermite basis of the lattice spanned by `gens` (vectors of length `dim`).
pub fn lattice_basis(gens: &[Vec<BigInt>], dim: usize) -> Vec<Vec<BigInt>> {
    let mut rows = gens.to_vec();
    let rank = hermite_rows(&mut rows, dim);
    rows.truncate(rank);
    rows
}

/// Saturation (Q-span intersected with Z^dim) of the lattice spanned by `gens`.
pub fn saturate(gens: &[Vec<BigInt>], dim: usize) -> Vec<Vec<BigInt>> {
    let basis = lattice_basis(gens, dim);
    if basis.is_empty() {
        return vec![];
    }
    let perp = integer_kernel(&IMat::from_rows(&basis));
    if perp.is_empty() {
        return IMat::identity(dim).to_rows();
    }
    integer_kernel(&IMat::from_rows(&perp))
}

pub fn rank_of(gens: &[Vec<BigInt>], dim: usize) -> usize {
    lattice_basis(gens, dim).len()
}

/// Unimodular matrix whose first columns span the same lattice as the saturated
/// basis `sat` (vectors in Z^dim).
pub fn extend_to_unimodular(sat: &[Vec<BigInt>], dim: usize) -> Option<IMat> {
    let r = sat.len();
    let mut rows: Vec<Vec<BigInt>> = (0..dim)
        .map(|i| {
            let mut row: Vec<BigInt> = sat.iter().map(|v| v[i].clone()).collect();
            row.extend((0..dim).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }));
            row
        })
        .collect();
    let rank = hermite_rows(&mut rows, r);
    if rank != r {
        return None;
    }
    for i in 0..r {
        if !rows[i][i].is_one() {
            return None;
        }
    }
    let v = IMat::from_rows(&rows.iter().map(|row| row[r..].to_vec()).collect::<Vec<_>>());
    v.inverse_unimodular()
}
