//! Direct solvers for the constant nodal matrix.
//!
//! Chains and tapers produce a tridiagonal matrix in natural node order and
//! use a pre-factored Thomas sweep. Junctions fall back to a dense LU with
//! partial pivoting; node counts stay well under a hundred.

use crate::error::{Error, Result};

/// Relative pivot size below which the matrix is treated as singular.
const PIVOT_EPS: f64 = 1e-13;

/// Square matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// True when every entry off the three central diagonals is zero.
    pub fn is_tridiagonal(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| i.abs_diff(j) <= 1 || self.get(i, j) == 0.0))
    }

    fn scale(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Factored form of a nodal matrix, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub enum Factorization {
    Tridiagonal(TridiagonalLu),
    Dense(DenseLu),
}

impl Factorization {
    /// Picks the tridiagonal sweep when the structure allows it.
    pub fn new(m: &DenseMatrix) -> Result<Self> {
        if m.is_tridiagonal() {
            TridiagonalLu::new(m).map(Factorization::Tridiagonal)
        } else {
            DenseLu::new(m).map(Factorization::Dense)
        }
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        match self {
            Factorization::Tridiagonal(f) => f.solve_in_place(rhs),
            Factorization::Dense(f) => f.solve_in_place(rhs),
        }
    }
}

/// Thomas algorithm with the forward elimination factors precomputed.
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    lower: Vec<f64>,
    // Modified super-diagonal c'_i and inverse pivots 1 / (b_i - a_i c'_{i-1}).
    upper_mod: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl TridiagonalLu {
    pub fn new(m: &DenseMatrix) -> Result<Self> {
        let n = m.size();
        let tol = PIVOT_EPS * m.scale();
        let mut lower = vec![0.0; n];
        let mut upper_mod = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        for i in 0..n {
            let a = if i > 0 { m.get(i, i - 1) } else { 0.0 };
            let c = if i + 1 < n { m.get(i, i + 1) } else { 0.0 };
            let prev = if i > 0 { upper_mod[i - 1] } else { 0.0 };
            let pivot = m.get(i, i) - a * prev;
            if !(pivot.abs() > tol) {
                return Err(Error::DegenerateTopology { pivot: i });
            }
            lower[i] = a;
            inv_pivot[i] = 1.0 / pivot;
            upper_mod[i] = c * inv_pivot[i];
        }
        Ok(Self {
            lower,
            upper_mod,
            inv_pivot,
        })
    }

    pub fn solve_in_place(&self, d: &mut [f64]) {
        let n = d.len();
        for i in 0..n {
            let prev = if i > 0 { d[i - 1] } else { 0.0 };
            d[i] = (d[i] - self.lower[i] * prev) * self.inv_pivot[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            d[i] -= self.upper_mod[i] * d[i + 1];
        }
    }
}

/// LU decomposition with partial (row) pivoting.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn new(m: &DenseMatrix) -> Result<Self> {
        let n = m.size();
        let tol = PIVOT_EPS * m.scale();
        let mut lu = m.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, max) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(max > tol) {
                return Err(Error::DegenerateTopology { pivot: k });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[i * n + j] -= f * lu[k * n + j];
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        rhs.copy_from_slice(&x);
    }
}
