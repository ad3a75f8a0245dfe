use mtt_core::metrics::{assignment_solve, ospa, OspaParams};
use proptest::prelude::*;

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

/// Direct OSPA definition: minimum over injections of the smaller set.
fn brute_ospa(x: &[[f64; 2]], y: &[[f64; 2]], p: f64, c: f64) -> f64 {
    let (s, l) = if x.len() <= y.len() { (x, y) } else { (y, x) };
    if l.is_empty() {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for perm in permutations(l.len()) {
        let sum: f64 = s
            .iter()
            .zip(&perm)
            .map(|(a, &j)| ((a[0] - l[j][0]).hypot(a[1] - l[j][1])).min(c).powf(p))
            .sum();
        best = best.min(sum);
    }
    ((best + c.powf(p) * (l.len() - s.len()) as f64) / l.len() as f64).powf(1.0 / p)
}

fn point_set(max: usize) -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec((-200.0..200.0f64, -200.0..200.0f64).prop_map(|(a, b)| [a, b]), 0..=max)
}

#[test]
fn six_by_six_matches_enumeration() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let perms = permutations(6);
    assert_eq!(perms.len(), 720);
    for _ in 0..50 {
        let c: Vec<Vec<f64>> = (0..6).map(|_| (0..6).map(|_| rng.random_range(0.0..100.0)).collect()).collect();
        let brute = perms
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| c[i][j]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        let got = assignment_solve(&c);
        assert!((got.cost - brute).abs() < 1e-9);
        let mut cols: Vec<_> = got.pairs.iter().map(|p| p.1).collect();
        cols.sort_unstable();
        assert_eq!(cols, (0..6).collect::<Vec<_>>());
    }
}

proptest! {
    #[test]
    fn matches_brute_force(x in point_set(5), y in point_set(5), p in 1.0..3.0f64, c in 10.0..300.0f64) {
        let r = ospa(&x, &y, &OspaParams { order: p, cutoff: c });
        prop_assert!((r.total - brute_ospa(&x, &y, p, c)).abs() < 1e-10 * c.max(1.0));
    }

    #[test]
    fn symmetric(x in point_set(5), y in point_set(5)) {
        let params = OspaParams::default();
        prop_assert_eq!(ospa(&x, &y, &params), ospa(&y, &x, &params));
    }

    #[test]
    fn triangle_inequality(x in point_set(5), y in point_set(5), z in point_set(5)) {
        let params = OspaParams::default();
        let xy = ospa(&x, &y, &params).total;
        let yz = ospa(&y, &z, &params).total;
        let xz = ospa(&x, &z, &params).total;
        prop_assert!(xz <= xy + yz + 1e-9);
    }

    #[test]
    fn nondecreasing_in_cutoff(x in point_set(5), y in point_set(5), c in 1.0..200.0f64, dc in 0.0..100.0f64) {
        let a = ospa(&x, &y, &OspaParams { order: 2.0, cutoff: c }).total;
        let b = ospa(&x, &y, &OspaParams { order: 2.0, cutoff: c + dc }).total;
        prop_assert!(b >= a - 1e-9);
    }

    #[test]
    fn components_decompose(x in point_set(5), y in point_set(5), p in 1.0..3.0f64) {
        let params = OspaParams { order: p, cutoff: 150.0 };
        let r = ospa(&x, &y, &params);
        prop_assert!((r.total.powf(p) - r.loc.powf(p) - r.card.powf(p)).abs() < 1e-8 * 150f64.powf(p));
        for v in [r.total, r.loc, r.card] {
            prop_assert!((0.0..=150.0 + 1e-9).contains(&v));
        }
    }
}
