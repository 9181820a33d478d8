use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rds_sbm::graphon::biased_params;
use rds_sbm::metrics::{connected_motifs, dsub_truncated, motif_density_graph, GraphLike, Motif};
use rds_sbm::sampler::simulate;
use rds_sbm::{Adjacency, SbmParams};

fn random_graph<R: Rng>(n: usize, p: f64, rng: &mut R) -> Adjacency {
    let mut g = Adjacency::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(p) {
                g.set(i, j);
            }
        }
    }
    g
}

/// Injective homomorphism density by enumerating every ordered tuple.
fn brute_density(m: &Motif, g: &Adjacency) -> f64 {
    let (k, n) = (m.k(), g.len());
    let mut hits = 0u64;
    let mut total = 0u64;
    let mut tuple = vec![0usize; k];
    loop {
        let distinct = (0..k).all(|a| (a + 1..k).all(|b| tuple[a] != tuple[b]));
        if distinct {
            total += 1;
            if m.edges().iter().all(|&(a, b)| g.get(tuple[a], tuple[b])) {
                hits += 1;
            }
        }
        let mut pos = 0;
        loop {
            if pos == k {
                return hits as f64 / total as f64;
            }
            tuple[pos] += 1;
            if tuple[pos] < n {
                break;
            }
            tuple[pos] = 0;
            pos += 1;
        }
    }
}

#[test]
fn densities_match_enumeration_on_small_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for n in 3..=7 {
        for _ in 0..5 {
            let g = random_graph(n, rng.random_range(0.2..0.9), &mut rng);
            for m in connected_motifs(3) {
                let d = motif_density_graph(&m, &g).unwrap();
                assert!(d.std_error.is_none());
                assert!((d.value - brute_density(&m, &g)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn dsub_is_a_pseudometric() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let gs: Vec<Adjacency> = (0..3).map(|i| random_graph(30, 0.2 + 0.25 * i as f64, &mut rng)).collect();
    let sbm = SbmParams::two_class(0.5, 0.9, 0.1, 0.6).unwrap();
    let d = |a: GraphLike, b: GraphLike| dsub_truncated(a, b, 3).unwrap();
    for a in &gs {
        assert!(d(a.into(), a.into()).abs() < 1e-15);
        assert!((d(a.into(), (&sbm).into()) - d((&sbm).into(), a.into())).abs() < 1e-15);
        for b in &gs {
            assert!((d(a.into(), b.into()) - d(b.into(), a.into())).abs() < 1e-15);
            for c in &gs {
                assert!(d(a.into(), c.into()) <= d(a.into(), b.into()) + d(b.into(), c.into()) + 1e-12);
            }
        }
    }
}

#[test]
fn sampled_graph_approaches_biased_graphon() {
    let p = SbmParams::two_class(2.0 / 3.0, 0.7, 0.4, 0.8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let s = simulate(&p, 800, &mut rng).unwrap();
    let limit = biased_params(&p);
    let d = dsub_truncated((&s.adjacency).into(), (&limit).into(), 3).unwrap();
    assert!(d < 0.05, "{d}");
}
