//! Injective subgraph densities of graphs and step graphons, the truncated
//! subgraph distance and the empirical step graphon built from estimates.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sampler::Adjacency;
use crate::sbm::{permutations, sum, ClassPartition, SbmParams, SymMatrix};

/// Largest motif handled by the graph enumeration.
pub const MAX_MOTIF_SIZE: usize = 5;
/// Exact enumeration is used while `n^(k-1)` stays below this.
pub const EXACT_BUDGET: f64 = 5e7;
/// Number of random injective tuples drawn by the fallback estimator.
pub const SAMPLED_TUPLES: usize = 100_000;
const SAMPLING_SEED: u64 = 0x5eed_d5b0;

/// Simple graph `F` on vertices `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Motif {
    k: usize,
    edges: Vec<(usize, usize)>,
}

impl Motif {
    /// Edges are normalized to `(min, max)` and sorted.
    pub fn new(k: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if k < 2 {
            return Err(Error::Argument(format!("motif needs at least 2 vertices, got {k}")));
        }
        let mut norm: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a == b || a >= k || b >= k {
                return Err(Error::Argument(format!("invalid motif edge ({a}, {b})")));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        if norm.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Argument("motif has a repeated edge".into()));
        }
        Ok(Self { k, edges: norm })
    }

    pub fn edge() -> Self {
        Self { k: 2, edges: vec![(0, 1)] }
    }

    pub fn triangle() -> Self {
        Self { k: 3, edges: vec![(0, 1), (0, 2), (1, 2)] }
    }

    /// Path through `k` vertices in order.
    pub fn path(k: usize) -> Result<Self> {
        let edges: Vec<(usize, usize)> = (1..k).map(|i| (i - 1, i)).collect();
        Self::new(k, &edges)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.k];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(a, b) in &self.edges {
                let w = if a == v { b } else if b == v { a } else { continue };
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    fn relabeled(&self, perm: &[usize]) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|&(a, b)| {
                let (x, y) = (perm[a], perm[b]);
                (x.min(y), x.max(y))
            })
            .collect();
        e.sort_unstable();
        e
    }

    /// Representative of the isomorphism class: smallest sorted edge list
    /// over all vertex relabelings.
    pub fn canonical(&self) -> Self {
        let edges = permutations(self.k)
            .iter()
            .map(|p| self.relabeled(p))
            .min()
            .unwrap_or_default();
        Self { k: self.k, edges }
    }

    /// Relabels vertices in breadth-first order from 0 so that every vertex
    /// after the first has a neighbor placed before it.
    fn bfs_ordered(&self) -> Self {
        let mut order = vec![0];
        let mut seen = vec![false; self.k];
        seen[0] = true;
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for w in 0..self.k {
                if !seen[w] && self.edges.contains(&(v.min(w), v.max(w))) {
                    seen[w] = true;
                    order.push(w);
                }
            }
        }
        for (w, s) in seen.iter().enumerate() {
            if !s {
                order.push(w);
            }
        }
        let mut perm = vec![0; self.k];
        for (new, &old) in order.iter().enumerate() {
            perm[old] = new;
        }
        Self { k: self.k, edges: self.relabeled(&perm) }
    }
}

fn motif_order(a: &Motif, b: &Motif) -> Ordering {
    a.k.cmp(&b.k)
        .then(a.edges.len().cmp(&b.edges.len()))
        .then_with(|| a.edges.cmp(&b.edges))
}

/// Isomorphism classes of connected simple graphs on `2..=max_k` vertices,
/// in canonical form, ordered by vertex count, then edge count, then edge
/// list. There are 1, 2, 6 and 21 classes on 2, 3, 4 and 5 vertices.
pub fn connected_motifs(max_k: usize) -> Vec<Motif> {
    let mut out = Vec::new();
    for k in 2..=max_k {
        let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| ((a + 1)..k).map(move |b| (a, b))).collect();
        let mut classes: Vec<Motif> = Vec::new();
        for mask in 1u32..(1 << pairs.len()) {
            let edges: Vec<(usize, usize)> = (0..pairs.len())
                .filter(|&i| mask >> i & 1 == 1)
                .map(|i| pairs[i])
                .collect();
            let m = Motif { k, edges };
            if !m.is_connected() {
                continue;
            }
            let c = m.canonical();
            if !classes.contains(&c) {
                classes.push(c);
            }
        }
        classes.sort_by(motif_order);
        out.extend(classes);
    }
    out
}

/// A subgraph density, exact or estimated from random tuples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityEstimate {
    pub value: f64,
    /// Monte Carlo standard error; `None` for exact enumeration.
    pub std_error: Option<f64>,
}

impl DensityEstimate {
    pub fn is_approximate(&self) -> bool {
        self.std_error.is_some()
    }
}

/// `t(F, G)`: fraction of injective maps `V(F) -> V(G)` carrying every edge
/// of `F` onto an edge of `G`.
pub fn motif_density_graph(motif: &Motif, graph: &Adjacency) -> Result<DensityEstimate> {
    let (k, n) = (motif.k, graph.len());
    if k > MAX_MOTIF_SIZE {
        return Err(Error::Argument(format!("motifs above {MAX_MOTIF_SIZE} vertices are not enumerated")));
    }
    if k > n {
        return Err(Error::Argument(format!("motif with {k} vertices exceeds graph size {n}")));
    }
    let falling: f64 = (0..k).map(|i| (n - i) as f64).product();
    if (n as f64).powi(k as i32 - 1) <= EXACT_BUDGET {
        let count = count_injections(motif, graph);
        Ok(DensityEstimate { value: count as f64 / falling, std_error: None })
    } else {
        Ok(sampled_density(motif, graph))
    }
}

/// Exact count of edge-preserving injections by backtracking over bitsets.
fn count_injections(motif: &Motif, graph: &Adjacency) -> u64 {
    let m = motif.bfs_ordered();
    let k = m.k;
    // earlier neighbors of each motif vertex
    let back: Vec<Vec<usize>> = (0..k)
        .map(|v| m.edges.iter().filter(|&&(_, b)| b == v).map(|&(a, _)| a).collect())
        .collect();
    let words = graph.words_per_row();
    let n = graph.len();
    let mut all = vec![0u64; words];
    for v in 0..n {
        all[v / 64] |= 1 << (v % 64);
    }
    let mut chosen = vec![0usize; k];

    fn candidates(
        level: usize,
        back: &[Vec<usize>],
        chosen: &[usize],
        graph: &Adjacency,
        all: &[u64],
    ) -> Vec<u64> {
        let mut c = all.to_vec();
        for &b in &back[level] {
            for (w, r) in c.iter_mut().zip(graph.row(chosen[b])) {
                *w &= r;
            }
        }
        for &u in &chosen[..level] {
            c[u / 64] &= !(1 << (u % 64));
        }
        c
    }

    fn recurse(
        level: usize,
        back: &[Vec<usize>],
        chosen: &mut Vec<usize>,
        graph: &Adjacency,
        all: &[u64],
    ) -> u64 {
        let k = back.len();
        let c = candidates(level, back, chosen, graph, all);
        if level + 1 == k {
            return c.iter().map(|w| w.count_ones() as u64).sum();
        }
        let mut total = 0;
        for (wi, &word) in c.iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let v = wi * 64 + bits.trailing_zeros() as usize;
                bits &= bits - 1;
                chosen[level] = v;
                total += recurse(level + 1, back, chosen, graph, all);
            }
        }
        total
    }

    recurse(0, &back, &mut chosen, graph, &all)
}

fn sampled_density(motif: &Motif, graph: &Adjacency) -> DensityEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLING_SEED);
    let n = graph.len();
    let mut tuple = vec![0usize; motif.k];
    let mut hits = 0usize;
    for _ in 0..SAMPLED_TUPLES {
        for i in 0..motif.k {
            tuple[i] = loop {
                let v = rng.random_range(0..n);
                if !tuple[..i].contains(&v) {
                    break v;
                }
            };
        }
        if motif.edges.iter().all(|&(a, b)| graph.get(tuple[a], tuple[b])) {
            hits += 1;
        }
    }
    let m = SAMPLED_TUPLES as f64;
    let p = hits as f64 / m;
    DensityEstimate { value: p, std_error: Some((p * (1.0 - p) / m).sqrt()) }
}

/// A step graphon: class weights and a symmetric value matrix.
pub trait StepFunction {
    fn weights(&self) -> &[f64];
    fn values(&self) -> &SymMatrix;
}

impl StepFunction for SbmParams {
    fn weights(&self) -> &[f64] {
        self.alpha()
    }

    fn values(&self) -> &SymMatrix {
        self.pi()
    }
}

/// `t(F, kappa) = sum_{q_1..q_k} prod_edges pi_{q_l q_l'} prod_h lambda_{q_h}`.
pub fn motif_density_step_graphon<G: StepFunction + ?Sized>(motif: &Motif, g: &G) -> f64 {
    let m = motif.bfs_ordered();
    let back: Vec<Vec<usize>> = (0..m.k)
        .map(|v| m.edges.iter().filter(|&&(_, b)| b == v).map(|&(a, _)| a).collect())
        .collect();
    let (w, pi) = (g.weights(), g.values());
    let mut classes = vec![0usize; m.k];

    fn recurse(
        level: usize,
        back: &[Vec<usize>],
        classes: &mut Vec<usize>,
        w: &[f64],
        pi: &SymMatrix,
    ) -> f64 {
        if level == back.len() {
            return 1.0;
        }
        let mut terms = Vec::with_capacity(w.len());
        for (q, &wq) in w.iter().enumerate() {
            if wq == 0.0 {
                continue;
            }
            let mut f = wq;
            for &b in &back[level] {
                f *= pi.get(classes[b], q);
            }
            if f == 0.0 {
                continue;
            }
            classes[level] = q;
            terms.push(f * recurse(level + 1, back, classes, w, pi));
        }
        sum(&terms)
    }

    recurse(0, &back, &mut classes, w, pi)
}

/// Step graphon `chi_hat` with intervals `J_q = [Lambda_{q-1}, Lambda_q)`.
/// Unlike [`SbmParams`], weights may vanish and values may reach 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalGraphon {
    weights: Vec<f64>,
    pi: SymMatrix,
    cutpoints: Vec<f64>,
}

impl EmpiricalGraphon {
    pub fn new(weights: Vec<f64>, pi: SymMatrix) -> Result<Self> {
        if pi.dim() != weights.len() || weights.is_empty() {
            return Err(Error::Argument("weights and matrix disagree on Q".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
            return Err(Error::Argument(format!("negative class weight {w}")));
        }
        let total = sum(&weights);
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Argument(format!("weights sum to {total}, not 1")));
        }
        if pi.upper().iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Argument("graphon values must lie in [0, 1]".into()));
        }
        let cutpoints = ClassPartition::from_weights(&weights).cutpoints().to_vec();
        Ok(Self { weights, pi, cutpoints })
    }

    pub fn cutpoints(&self) -> &[f64] {
        &self.cutpoints
    }

    pub fn pi(&self) -> &SymMatrix {
        &self.pi
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        for v in [x, y] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain { what: "position", value: v });
            }
        }
        // zero-width intervals never contain a point
        let class = |u: f64| {
            let mut q = ClassPartition::class_index(&self.cutpoints, u);
            while self.weights[q] == 0.0 && q > 0 {
                q -= 1;
            }
            q
        };
        Ok(self.pi.get(class(x), class(y)))
    }
}

impl StepFunction for EmpiricalGraphon {
    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn values(&self) -> &SymMatrix {
        &self.pi
    }
}

/// Builds `chi_hat` from weights and matrix rows, symmetrizing the rows by
/// averaging `(M + M^T) / 2`.
pub fn build_empirical_graphon(weights: &[f64], rows: &[Vec<f64>]) -> Result<EmpiricalGraphon> {
    let q = weights.len();
    if rows.len() != q || rows.iter().any(|r| r.len() != q) {
        return Err(Error::Argument("matrix must be Q x Q".into()));
    }
    let mut pi = SymMatrix::zeros(q);
    for (a, b) in SymMatrix::upper_indices(q) {
        pi.set(a, b, 0.5 * (rows[a][b] + rows[b][a]));
    }
    EmpiricalGraphon::new(weights.to_vec(), pi)
}

/// Either side of a subgraph distance.
#[derive(Debug, Clone, Copy)]
pub enum GraphLike<'a> {
    Graph(&'a Adjacency),
    Sbm(&'a SbmParams),
    Empirical(&'a EmpiricalGraphon),
}

impl<'a> From<&'a Adjacency> for GraphLike<'a> {
    fn from(g: &'a Adjacency) -> Self {
        GraphLike::Graph(g)
    }
}

impl<'a> From<&'a SbmParams> for GraphLike<'a> {
    fn from(g: &'a SbmParams) -> Self {
        GraphLike::Sbm(g)
    }
}

impl<'a> From<&'a EmpiricalGraphon> for GraphLike<'a> {
    fn from(g: &'a EmpiricalGraphon) -> Self {
        GraphLike::Empirical(g)
    }
}

impl GraphLike<'_> {
    pub fn density(&self, motif: &Motif) -> Result<f64> {
        Ok(match self {
            GraphLike::Graph(g) => motif_density_graph(motif, g)?.value,
            GraphLike::Sbm(p) => motif_density_step_graphon(motif, *p),
            GraphLike::Empirical(e) => motif_density_step_graphon(motif, *e),
        })
    }
}

/// `sum_i 2^{-i} |t(F_i, a) - t(F_i, b)|` over [`connected_motifs`]`(max_k)`,
/// indexed from `i = 1`.
pub fn dsub_truncated(a: GraphLike<'_>, b: GraphLike<'_>, max_k: usize) -> Result<f64> {
    if !(2..=MAX_MOTIF_SIZE).contains(&max_k) {
        return Err(Error::Argument(format!("max_k must lie in 2..={MAX_MOTIF_SIZE}, got {max_k}")));
    }
    let mut terms = Vec::new();
    let mut weight = 1.0;
    for motif in connected_motifs(max_k) {
        weight *= 0.5;
        terms.push(weight * (a.density(&motif)? - b.density(&motif)?).abs());
    }
    Ok(sum(&terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn complete(n: usize) -> Adjacency {
        let edges: Vec<(usize, usize)> =
            (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
        Adjacency::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn motif_counts_by_size() {
        let counts: Vec<usize> = (2..=5)
            .map(|k| connected_motifs(k).iter().filter(|m| m.k() == k).count())
            .collect();
        assert_eq!(counts, vec![1, 2, 6, 21]);
        let three = connected_motifs(3);
        assert_eq!(three[0], Motif::edge());
        assert_eq!(three[1].edges().len(), 2);
        assert_eq!(three[2], Motif::triangle());
    }

    #[test]
    fn graph_density_examples() {
        assert_eq!(motif_density_graph(&Motif::edge(), &complete(3)).unwrap().value, 1.0);
        let path = Adjacency::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_abs_diff_eq!(
            motif_density_graph(&Motif::edge(), &path).unwrap().value,
            4.0 / 6.0,
            epsilon = 1e-15
        );
        assert_eq!(motif_density_graph(&Motif::triangle(), &complete(4)).unwrap().value, 1.0);
        assert!(motif_density_graph(&Motif::triangle(), &complete(2)).is_err());
    }

    #[test]
    fn graphon_density_examples() {
        let t = SbmParams::two_class(2.0 / 3.0, 0.7, 0.4, 0.8).unwrap();
        assert_abs_diff_eq!(motif_density_step_graphon(&Motif::edge(), &t), 0.5777778, epsilon = 1e-7);
        let er = SbmParams::erdos_renyi(vec![0.3, 0.7], 0.35).unwrap();
        assert_abs_diff_eq!(motif_density_step_graphon(&Motif::edge(), &er), 0.35, epsilon = 1e-15);
        let one = SbmParams::from_upper(vec![1.0], &[0.4]).unwrap();
        assert_abs_diff_eq!(motif_density_step_graphon(&Motif::triangle(), &one), 0.064, epsilon = 1e-15);
    }

    #[test]
    fn empirical_graphon_cutpoints() {
        let g = build_empirical_graphon(&[0.5, 0.5], &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(g.cutpoints(), &[0.0, 0.5, 1.0]);
        assert_eq!(g.eval(0.2, 0.7).unwrap(), 0.0);
        let er = build_empirical_graphon(&[1.0], &[vec![0.5]]).unwrap();
        assert_eq!(motif_density_step_graphon(&Motif::edge(), &er), 0.5);
        assert!(build_empirical_graphon(&[1.2, -0.2], &[vec![0.5; 2], vec![0.5; 2]]).is_err());
    }

    #[test]
    fn dsub_identity_and_symmetry() {
        let t = SbmParams::two_class(2.0 / 3.0, 0.7, 0.4, 0.8).unwrap();
        let path = Adjacency::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        assert_eq!(dsub_truncated((&t).into(), (&t).into(), 3).unwrap(), 0.0);
        let ab = dsub_truncated((&t).into(), (&path).into(), 4).unwrap();
        let ba = dsub_truncated((&path).into(), (&t).into(), 4).unwrap();
        assert_eq!(ab, ba);
        assert!(dsub_truncated((&t).into(), (&t).into(), 6).is_err());
    }
}
