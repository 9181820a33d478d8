//! SBM parameterization: class weights, symmetric connection matrix and the
//! partition of `[0, 1]` into class intervals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `sum(alpha) == 1` when constructing [`SbmParams`].
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Dense symmetric `Q x Q` matrix. Writes go to both triangles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn filled(dim: usize, value: f64) -> Self {
        Self { dim, data: vec![value; dim * dim] }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::filled(dim, 0.0)
    }

    /// Builds from the upper triangle listed row-major: `(0,0), (0,1), .., (1,1), ..`.
    pub fn from_upper(dim: usize, upper: &[f64]) -> Result<Self> {
        if upper.len() != dim * (dim + 1) / 2 {
            return Err(Error::Argument(format!(
                "expected {} upper-triangle entries for Q={dim}, got {}",
                dim * (dim + 1) / 2,
                upper.len()
            )));
        }
        let mut m = Self::zeros(dim);
        let mut it = upper.iter();
        for q in 0..dim {
            for r in q..dim {
                m.set(q, r, *it.next().unwrap());
            }
        }
        Ok(m)
    }

    /// Builds from full rows; fails unless the rows are exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (q, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Argument("matrix rows must be square".into()));
            }
            for (r, &v) in row.iter().enumerate() {
                if rows[r][q] != v {
                    return Err(Error::InvalidParams(format!(
                        "connection matrix not symmetric at ({}, {})",
                        q + 1,
                        r + 1
                    )));
                }
                m.data[q * dim + r] = v;
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, q: usize, r: usize) -> f64 {
        self.data[q * self.dim + r]
    }

    #[inline]
    pub fn set(&mut self, q: usize, r: usize, value: f64) {
        self.data[q * self.dim + r] = value;
        self.data[r * self.dim + q] = value;
    }

    #[inline]
    pub fn add(&mut self, q: usize, r: usize, value: f64) {
        let v = self.get(q, r) + value;
        self.set(q, r, v);
    }

    pub fn row(&self, q: usize) -> &[f64] {
        &self.data[q * self.dim..(q + 1) * self.dim]
    }

    /// Upper triangle, row-major.
    pub fn upper(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim * (self.dim + 1) / 2);
        for q in 0..self.dim {
            for r in q..self.dim {
                out.push(self.get(q, r));
            }
        }
        out
    }

    /// `(q, r)` index pairs of the upper triangle in [`SymMatrix::upper`] order.
    pub fn upper_indices(dim: usize) -> impl Iterator<Item = (usize, usize)> {
        (0..dim).flat_map(move |q| (q..dim).map(move |r| (q, r)))
    }

    /// Applies a class relabeling: `out[perm[q], perm[r]] = self[q, r]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = Self::zeros(self.dim);
        for (q, r) in Self::upper_indices(self.dim) {
            out.set(perm[q], perm[r], self.get(q, r));
        }
        out
    }

    /// `M x` for a vector `x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|q| dot(self.row(q), x)).collect()
    }
}

/// Plain summation for short vectors, Neumaier-compensated beyond 16 terms.
pub fn sum(values: &[f64]) -> f64 {
    if values.len() <= 16 {
        return values.iter().sum();
    }
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for &v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    if a.len() <= 16 {
        return a.iter().zip(b).map(|(x, y)| x * y).sum();
    }
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    sum(&prods)
}

/// All permutations of `0..k` in lexicographic order.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(current.clone());
        // next lexicographic permutation
        let Some(i) = (1..k).rev().find(|&i| current[i - 1] < current[i]) else {
            return out;
        };
        let j = (i..k).rev().find(|&j| current[j] > current[i - 1]).unwrap();
        current.swap(i - 1, j);
        current[i..].reverse();
    }
}

/// Cutpoints `0 = A_0 < A_1 < ... < A_Q = 1` with `A_q - A_{q-1} = alpha_q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassPartition {
    cutpoints: Vec<f64>,
}

impl ClassPartition {
    pub fn from_weights(weights: &[f64]) -> Self {
        let mut cutpoints = Vec::with_capacity(weights.len() + 1);
        cutpoints.push(0.0);
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            acc = if weights.len() > 16 { sum(&weights[..=i]) } else { acc + w };
            cutpoints.push(acc);
        }
        if let Some(last) = cutpoints.last_mut() {
            *last = 1.0;
        }
        Self { cutpoints }
    }

    pub fn cutpoints(&self) -> &[f64] {
        &self.cutpoints
    }

    pub fn num_classes(&self) -> usize {
        self.cutpoints.len() - 1
    }

    /// Zero-based class of `x`: intervals are `[A_{q-1}, A_q)` and `x = 1`
    /// belongs to the last class. Zero-width classes are never returned.
    pub fn class_of(&self, x: f64) -> usize {
        Self::class_index(&self.cutpoints, x)
    }
}

/// SBM parameter `theta = (alpha, pi)`.
///
/// Validated once on construction: every `alpha_q > 0`, `sum alpha = 1`
/// within [`WEIGHT_SUM_TOL`], `pi` symmetric with entries in the open
/// interval `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmParams {
    alpha: Vec<f64>,
    pi: SymMatrix,
    partition: ClassPartition,
}

impl SbmParams {
    pub fn new(alpha: Vec<f64>, pi: SymMatrix) -> Result<Self> {
        let q = alpha.len();
        if q == 0 {
            return Err(Error::InvalidParams("Q must be positive".into()));
        }
        if pi.dim() != q {
            return Err(Error::InvalidParams(format!(
                "alpha has {q} classes but pi is {0}x{0}",
                pi.dim()
            )));
        }
        if let Some((i, a)) = alpha.iter().enumerate().find(|(_, a)| !(**a > 0.0)) {
            return Err(Error::InvalidParams(format!("alpha_{} = {a} is not positive", i + 1)));
        }
        let total = sum(&alpha);
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidParams(format!("class weights sum to {total}, not 1")));
        }
        for (a, b) in SymMatrix::upper_indices(q) {
            let p = pi.get(a, b);
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidParams(format!(
                    "pi_{}{} = {p} outside (0, 1)",
                    a + 1,
                    b + 1
                )));
            }
        }
        let partition = ClassPartition::from_weights(&alpha);
        Ok(Self { alpha, pi, partition })
    }

    /// Convenience constructor from the upper triangle of `pi`.
    pub fn from_upper(alpha: Vec<f64>, pi_upper: &[f64]) -> Result<Self> {
        let pi = SymMatrix::from_upper(alpha.len(), pi_upper)?;
        Self::new(alpha, pi)
    }

    /// Two-class parameters `(alpha_1, pi_11, pi_12, pi_22)`.
    pub fn two_class(alpha1: f64, pi11: f64, pi12: f64, pi22: f64) -> Result<Self> {
        Self::from_upper(vec![alpha1, 1.0 - alpha1], &[pi11, pi12, pi22])
    }

    /// Erdős–Rényi graphon with a (label-only) class structure.
    pub fn erdos_renyi(alpha: Vec<f64>, p: f64) -> Result<Self> {
        let q = alpha.len();
        Self::new(alpha, SymMatrix::filled(q, p))
    }

    #[inline]
    pub fn num_classes(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn pi(&self) -> &SymMatrix {
        &self.pi
    }

    pub fn partition(&self) -> &ClassPartition {
        &self.partition
    }

    pub fn class_of(&self, x: f64) -> usize {
        self.partition.class_of(x)
    }

    /// Relabels classes: class `q` becomes class `perm[q]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut alpha = vec![0.0; self.alpha.len()];
        for (q, &a) in self.alpha.iter().enumerate() {
            alpha[perm[q]] = a;
        }
        Self::new(alpha, self.pi.permuted(perm)).expect("relabeling preserves validity")
    }

    pub fn is_connected(&self) -> bool {
        is_connected(&self.alpha, &self.pi)
    }
}

/// Connectivity of the step graphon with weights `alpha` and matrix `pi`,
/// allowing zero entries. The graphon is connected iff the classes with
/// positive weight form a connected graph under the off-diagonal entries
/// `pi_qr > 0`; a lone class needs `pi_qq > 0`.
pub fn is_connected(alpha: &[f64], pi: &SymMatrix) -> bool {
    let live: Vec<usize> = (0..alpha.len()).filter(|&q| alpha[q] > 0.0).collect();
    match live.len() {
        0 => false,
        1 => pi.get(live[0], live[0]) > 0.0,
        _ => {
            let mut seen = vec![false; alpha.len()];
            let mut stack = vec![live[0]];
            seen[live[0]] = true;
            while let Some(q) = stack.pop() {
                for &r in &live {
                    if !seen[r] && r != q && pi.get(q, r) > 0.0 {
                        seen[r] = true;
                        stack.push(r);
                    }
                }
            }
            live.iter().all(|&q| seen[q])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_parameters() {
        assert!(SbmParams::two_class(0.0, 0.5, 0.5, 0.5).is_err());
        assert!(SbmParams::two_class(0.5, 1.0, 0.5, 0.5).is_err());
        assert!(SbmParams::two_class(0.5, 0.5, 0.0, 0.5).is_err());
        assert!(SbmParams::from_upper(vec![0.5, 0.6], &[0.5, 0.5, 0.5]).is_err());
        let asym = SymMatrix::from_rows(&[vec![0.5, 0.4], vec![0.3, 0.5]]);
        assert!(asym.is_err());
    }

    #[test]
    fn class_lookup_is_half_open() {
        let p = SbmParams::two_class(0.25, 0.5, 0.5, 0.5).unwrap();
        assert_eq!(p.class_of(0.0), 0);
        assert_eq!(p.class_of(0.2499), 0);
        assert_eq!(p.class_of(0.25), 1);
        assert_eq!(p.class_of(1.0), 1);
    }

    #[test]
    fn connectivity() {
        let star = SbmParams::two_class(2.0 / 3.0, 0.7, 0.4, 0.8).unwrap();
        assert!(star.is_connected());
        let split = SymMatrix::from_upper(2, &[0.7, 0.0, 0.8]).unwrap();
        assert!(!is_connected(&[0.5, 0.5], &split));
        let single = SbmParams::from_upper(vec![1.0], &[0.3]).unwrap();
        assert!(single.is_connected());
    }

    #[test]
    fn permutation_listing() {
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(3)[1], vec![0, 2, 1]);
        assert_eq!(permutations(1), vec![vec![0]]);
        assert_eq!(permutations(5).len(), 120);
    }

    #[test]
    fn compensated_sum_matches_plain_on_short_input() {
        let v = vec![0.1; 40];
        assert!((sum(&v) - 4.0).abs() < 1e-15);
    }
}
