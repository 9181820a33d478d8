//! Random walk on the step graphon, completion of the visited subgraph, the
//! sufficient statistics of the likelihoods and the empirical CDF of the
//! walk positions.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sbm::{SbmParams, SymMatrix};

/// Symmetric 0/1 adjacency with zero diagonal, stored as packed bit rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl Adjacency {
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        Self { n, words, bits: vec![0; n * words] }
    }

    /// Builds from zero-based unordered pairs.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = Self::new(n);
        for &(i, j) in edges {
            if i >= n || j >= n || i == j {
                return Err(Error::Argument(format!("invalid edge ({}, {})", i + 1, j + 1)));
            }
            adj.set(i, j);
        }
        Ok(adj)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize) {
        self.bits[i * self.words + j / 64] |= 1 << (j % 64);
        self.bits[j * self.words + i / 64] |= 1 << (i % 64);
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    pub fn words_per_row(&self) -> usize {
        self.words
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row(i).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn num_edges(&self) -> usize {
        (0..self.n).map(|i| self.degree(i)).sum::<usize>() / 2
    }

    /// Zero-based edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.get(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// One realization of the explored graph: walk positions, their classes
/// (absent when unobserved) and the adjacency of the completed graph.
#[derive(Debug, Clone, PartialEq)]
pub struct RdsSample {
    pub x: Vec<f64>,
    /// Zero-based class labels.
    pub z: Option<Vec<usize>>,
    pub adjacency: Adjacency,
}

impl RdsSample {
    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn labels(&self) -> Result<&[usize]> {
        self.z
            .as_deref()
            .ok_or_else(|| Error::Argument("sample carries no class labels".into()))
    }

    /// Copy with the class labels removed.
    pub fn without_labels(&self) -> Self {
        Self { z: None, ..self.clone() }
    }

    pub fn chain_edges_present(&self) -> bool {
        (1..self.len()).all(|i| self.adjacency.get(i - 1, i))
    }

    pub fn empirical_cdf(&self) -> EmpiricalCdf {
        EmpiricalCdf::new(&self.x)
    }
}

/// Simulates `n` steps of the walk with kernel `K(x, dy) ∝ kappa(x, y) dy`.
///
/// `X_1` is uniform on `[0, 1)`. From class `q` the next class is `r` with
/// probability `pi_qr alpha_r / pibar_q`, and the next position is uniform
/// on `I_r`, which is the exact kernel for a step graphon.
pub fn simulate_walk<R: Rng + ?Sized>(
    params: &SbmParams,
    n: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::Argument(format!("walk length must be at least 2, got {n}")));
    }
    if !params.is_connected() {
        return Err(Error::InvalidParams("graphon is not connected".into()));
    }
    let q = params.num_classes();
    let alpha = params.alpha();
    let cut = params.partition().cutpoints();
    // cumulative transition rows
    let rows: Vec<Vec<f64>> = (0..q)
        .map(|a| {
            let w: Vec<f64> = (0..q).map(|b| params.pi().get(a, b) * alpha[b]).collect();
            let total: f64 = w.iter().sum();
            let mut acc = 0.0;
            w.iter()
                .map(|v| {
                    acc += v / total;
                    acc
                })
                .collect()
        })
        .collect();

    let position_in = |r: usize, u: f64| -> f64 {
        let x = cut[r] + u * alpha[r];
        if x >= cut[r + 1] && r + 1 < q {
            cut[r + 1].next_down().max(cut[r])
        } else {
            x.min(1.0)
        }
    };

    let mut x = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    let x1: f64 = rng.random();
    z.push(params.class_of(x1));
    x.push(x1);
    for m in 1..n {
        let cum = &rows[z[m - 1]];
        let u: f64 = rng.random();
        let r = cum.partition_point(|&c| c <= u).min(q - 1);
        let pos = position_in(r, rng.random());
        x.push(pos);
        z.push(r);
    }
    Ok((x, z))
}

/// Completes the walk path into `G_n`: consecutive vertices are always
/// joined and every other pair `{i, j}` independently with probability
/// `pi_{z_i z_j}`.
pub fn complete_graph<R: Rng + ?Sized>(
    params: &SbmParams,
    x: &[f64],
    z: &[usize],
    rng: &mut R,
) -> Result<RdsSample> {
    if x.len() != z.len() {
        return Err(Error::Argument("positions and classes differ in length".into()));
    }
    for (i, (&xi, &zi)) in x.iter().zip(z).enumerate() {
        if !(0.0..=1.0).contains(&xi) || params.class_of(xi) != zi {
            return Err(Error::Argument(format!(
                "class {} of vertex {} does not match position {xi}",
                zi + 1,
                i + 1
            )));
        }
    }
    let n = x.len();
    let mut adjacency = Adjacency::new(n);
    for i in 1..n {
        adjacency.set(i - 1, i);
    }
    let pi = params.pi();
    for i in 0..n {
        for j in (i + 2)..n {
            if rng.random::<f64>() < pi.get(z[i], z[j]) {
                adjacency.set(i, j);
            }
        }
    }
    Ok(RdsSample { x: x.to_vec(), z: Some(z.to_vec()), adjacency })
}

/// Walk plus completion in one call.
pub fn simulate<R: Rng + ?Sized>(params: &SbmParams, n: usize, rng: &mut R) -> Result<RdsSample> {
    let (x, z) = simulate_walk(params, n, rng)?;
    complete_graph(params, &x, &z, rng)
}

/// Sufficient statistics of both likelihoods.
///
/// Pair counts are over unordered pairs `i < j`; for `q = r` the pair total
/// is `N_q (N_q - 1) / 2`. Counts are stored as `f64` because the SAEM
/// averages them with fractional step sizes; for a single labeling they are
/// exact integers. `last_type[q]` is the indicator `1{Z_n = q}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountStats {
    pub n_per_class: Vec<f64>,
    pub edges: SymMatrix,
    pub non_edges: SymMatrix,
    pub last_type: Vec<f64>,
}

impl CountStats {
    pub fn zeros(q: usize) -> Self {
        Self {
            n_per_class: vec![0.0; q],
            edges: SymMatrix::zeros(q),
            non_edges: SymMatrix::zeros(q),
            last_type: vec![0.0; q],
        }
    }

    /// Counts for zero-based labels `z` in `0..q`.
    pub fn from_labels(adjacency: &Adjacency, z: &[usize], q: usize) -> Result<Self> {
        let n = adjacency.len();
        if z.len() != n {
            return Err(Error::Argument("label vector length differs from graph size".into()));
        }
        if let Some(&bad) = z.iter().find(|&&c| c >= q) {
            return Err(Error::Argument(format!("label {} exceeds Q={q}", bad + 1)));
        }
        let mut n_per = vec![0usize; q];
        let mut e = vec![0usize; q * q];
        for i in 0..n {
            n_per[z[i]] += 1;
            for j in (i + 1)..n {
                if adjacency.get(i, j) {
                    let (a, b) = (z[i].min(z[j]), z[i].max(z[j]));
                    e[a * q + b] += 1;
                }
            }
        }
        let mut stats = Self::zeros(q);
        for c in 0..q {
            stats.n_per_class[c] = n_per[c] as f64;
        }
        for (a, b) in SymMatrix::upper_indices(q) {
            let pairs = if a == b {
                n_per[a] * n_per[a].saturating_sub(1) / 2
            } else {
                n_per[a] * n_per[b]
            };
            let edges = e[a * q + b];
            stats.edges.set(a, b, edges as f64);
            stats.non_edges.set(a, b, (pairs - edges) as f64);
        }
        if n > 0 {
            stats.last_type[z[n - 1]] = 1.0;
        }
        Ok(stats)
    }

    pub fn num_classes(&self) -> usize {
        self.n_per_class.len()
    }

    pub fn n(&self) -> f64 {
        self.n_per_class.iter().sum()
    }

    /// Zero-based class carrying the largest last-vertex indicator.
    pub fn last_class(&self) -> usize {
        let mut best = 0;
        for (q, &w) in self.last_type.iter().enumerate() {
            if w > self.last_type[best] {
                best = q;
            }
        }
        best
    }

    /// `N^{q<->r} + N^{q</>r}`.
    pub fn pairs(&self, q: usize, r: usize) -> f64 {
        self.edges.get(q, r) + self.non_edges.get(q, r)
    }

    /// Stochastic-approximation update `self <- self + s (other - self)`.
    pub fn blend(&mut self, other: &CountStats, s: f64) {
        let q = self.num_classes();
        for c in 0..q {
            self.n_per_class[c] += s * (other.n_per_class[c] - self.n_per_class[c]);
            self.last_type[c] += s * (other.last_type[c] - self.last_type[c]);
        }
        for (a, b) in SymMatrix::upper_indices(q) {
            self.edges.add(a, b, s * (other.edges.get(a, b) - self.edges.get(a, b)));
            self.non_edges.add(a, b, s * (other.non_edges.get(a, b) - self.non_edges.get(a, b)));
        }
    }

    /// Counts after relabeling class `q` to `perm[q]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let q = self.num_classes();
        let mut out = Self::zeros(q);
        for c in 0..q {
            out.n_per_class[perm[c]] = self.n_per_class[c];
            out.last_type[perm[c]] = self.last_type[c];
        }
        out.edges = self.edges.permuted(perm);
        out.non_edges = self.non_edges.permuted(perm);
        out
    }
}

/// Counts of a labeled sample over `q` classes.
pub fn count_stats(sample: &RdsSample, q: usize) -> Result<CountStats> {
    CountStats::from_labels(&sample.adjacency, sample.labels()?, q)
}

/// Empirical CDF of the walk positions.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(x: &[f64]) -> Self {
        let mut sorted = x.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        Self { sorted }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted_positions(&self) -> &[f64] {
        &self.sorted
    }

    /// `Gamma_n(x) = #{i : X_i <= x} / n`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain { what: "x", value: x });
        }
        let count = self.sorted.partition_point(|&v| v <= x);
        Ok(count as f64 / self.sorted.len() as f64)
    }

    /// `inf{x in [0, 1] : Gamma_n(x) >= v}`: the order statistic
    /// `X_(ceil(v n))` for `v > 0`, and 0 at `v = 0`.
    pub fn inverse(&self, v: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain { what: "v", value: v });
        }
        let n = self.sorted.len();
        if v == 0.0 || n == 0 {
            return Ok(0.0);
        }
        let nf = n as f64;
        // smallest k with k / n >= v, evaluated exactly as the definition reads
        let mut k = ((v * nf).ceil() as usize).clamp(1, n);
        while k > 1 && (k - 1) as f64 / nf >= v {
            k -= 1;
        }
        while k < n && (k as f64) / nf < v {
            k += 1;
        }
        Ok(self.sorted[k - 1])
    }
}

/// On-disk sample document. Labels and edge endpoints are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDocument {
    pub n: usize,
    pub x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<usize>>,
    pub y: Vec<[usize; 2]>,
}

impl From<&RdsSample> for SampleDocument {
    fn from(s: &RdsSample) -> Self {
        Self {
            n: s.len(),
            x: s.x.clone(),
            z: s.z.as_ref().map(|z| z.iter().map(|c| c + 1).collect()),
            y: s.adjacency.edges().into_iter().map(|(i, j)| [i + 1, j + 1]).collect(),
        }
    }
}

impl TryFrom<SampleDocument> for RdsSample {
    type Error = Error;

    fn try_from(doc: SampleDocument) -> Result<Self> {
        if doc.x.len() != doc.n {
            return Err(Error::Parse(format!("n = {} but x has {} entries", doc.n, doc.x.len())));
        }
        if let Some(bad) = doc.x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Parse(format!("position {bad} outside [0, 1]")));
        }
        let z = match doc.z {
            Some(z) => {
                if z.len() != doc.n || z.iter().any(|&c| c == 0) {
                    return Err(Error::Parse("z must hold n labels, 1-based".into()));
                }
                Some(z.into_iter().map(|c| c - 1).collect())
            }
            None => None,
        };
        let mut edges = Vec::with_capacity(doc.y.len());
        for [i, j] in doc.y {
            if i == 0 || j == 0 || i >= j || j > doc.n {
                return Err(Error::Parse(format!("edge [{i}, {j}] must satisfy 1 <= i < j <= n")));
            }
            edges.push((i - 1, j - 1));
        }
        let adjacency = Adjacency::from_edges(doc.n, &edges)?;
        Ok(RdsSample { x: doc.x, z, adjacency })
    }
}

impl RdsSample {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SampleDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SampleDocument = serde_json::from_str(text)?;
        doc.try_into()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
