use std::collections::BTreeMap;

use expander_sketch::analysis::{decompose_support, AnalysisError};
use expander_sketch::graphs::{mixing_check, random_regular};
use expander_sketch::inner_code::RnspOptions;
use expander_sketch::matrix::{parse_matrix_market, write_matrix_market};
use expander_sketch::recovery::{l1_minimize, sigma_s, top_s, Norm};
use expander_sketch::{DoubleCover, InnerCode, Side, TannerMatrix};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn graph_params() -> impl Strategy<Value = (usize, usize, u64)> {
    (5usize..30, 2usize..6, any::<u64>()).prop_map(|(n, d, seed)| {
        let n = if n * d % 2 == 1 { n + 1 } else { n };
        (n, d.min(n - 1), seed)
    })
}

fn tanner(n: usize, d: usize, seed: u64) -> (DoubleCover, TannerMatrix) {
    let g = random_regular(n, d, seed).unwrap();
    let h = DoubleCover::new(&g);
    let c0 = InnerCode::identity(d, 1.0 / d as f64, 0.3, &RnspOptions::default()).unwrap();
    let a = TannerMatrix::assemble(&h, &c0).unwrap();
    (h, a)
}

/// Size of the largest edge subset in which every edge has more than
/// `threshold` subset edges at both endpoints (order-free fixpoint).
fn heavy_core(h: &DoubleCover, support: &[usize], threshold: usize) -> usize {
    let mut alive: Vec<usize> = support.to_vec();
    loop {
        let n = h.num_vertices();
        let (mut dl, mut dr) = (vec![0usize; n], vec![0usize; n]);
        for &e in &alive {
            dl[h.endpoint(e, Side::Left)] += 1;
            dr[h.endpoint(e, Side::Right)] += 1;
        }
        let next: Vec<usize> = alive
            .iter()
            .copied()
            .filter(|&e| {
                dl[h.endpoint(e, Side::Left)] > threshold
                    && dr[h.endpoint(e, Side::Right)] > threshold
            })
            .collect();
        if next.len() == alive.len() {
            return alive.len();
        }
        alive = next;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn apply_is_linear_and_parallel_apply_agrees(
        (n, d, seed) in graph_params(),
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
        xseed in any::<u64>(),
    ) {
        let (_, a) = tanner(n, d, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(xseed);
        let x: Vec<f64> = (0..a.cols()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..a.cols()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| alpha * p + beta * q).collect();
        let (ax, ay, ac) = (a.apply(&x).unwrap(), a.apply(&y).unwrap(), a.apply(&combo).unwrap());
        for i in 0..a.rows() {
            prop_assert!((ac[i] - (alpha * ax[i] + beta * ay[i])).abs() < 1e-9);
        }
        prop_assert_eq!(a.par_apply(&x).unwrap(), ax);
    }

    #[test]
    fn structural_counts_are_exact((n, d, seed) in graph_params()) {
        let (_, a) = tanner(n, d, seed);
        let r = a.structure_report();
        prop_assert_eq!(r.rows, 2 * a.k() * n);
        prop_assert_eq!(r.cols, n * d);
        prop_assert_eq!(r.nnz, 2 * n * a.inner().nnz());
        prop_assert!(r.max_col_weight <= 2 * a.inner().column_weight());
    }

    #[test]
    fn double_cover_preserves_degrees((n, d, seed) in graph_params()) {
        let g = random_regular(n, d, seed).unwrap();
        let h = DoubleCover::new(&g);
        prop_assert_eq!(h.num_edges(), n * d);
        let mut count = BTreeMap::new();
        for (u, v) in h.source_edge_multiset() {
            *count.entry((u, v)).or_insert(0) += 1;
        }
        prop_assert_eq!(count.len(), g.num_edges());
        prop_assert!(count.values().all(|&c| c == 2));
        for side in [Side::Left, Side::Right] {
            let mut seen = vec![0; h.num_edges()];
            for v in 0..n {
                let gv = h.gamma(side, v);
                prop_assert_eq!(gv.len(), d);
                prop_assert!(gv.windows(2).all(|w| w[0] < w[1]));
                for (i, &e) in gv.iter().enumerate() {
                    prop_assert_eq!(h.endpoint(e, side), v);
                    prop_assert_eq!(h.slot(e, side), i);
                    seen[e] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn peeling_partitions_the_support(
        (n, d, seed) in graph_params(),
        frac in 0.0f64..1.0,
        hubs in 0usize..4,
        sseed in any::<u64>(),
    ) {
        let g = random_regular(n, d, seed).unwrap();
        let h = DoubleCover::new(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(sseed);
        let mut support: Vec<usize> = (0..h.num_edges()).filter(|_| rng.random_bool(frac * 0.3)).collect();
        for _ in 0..hubs {
            let side = if rng.random_bool(0.5) { Side::Left } else { Side::Right };
            support.extend_from_slice(h.gamma(side, rng.random_range(0..n)));
        }
        support.sort_unstable();
        support.dedup();
        let core = heavy_core(&h, &support, (0.5 * d as f64 + 1e-9).floor() as usize);
        let p = match decompose_support(&h, &support, 0.5) {
            Ok(p) => p,
            Err(AnalysisError::Stalled { remaining, .. }) => {
                // Stalls exactly when some edges are heavy at both ends for good.
                prop_assert_eq!(remaining, core);
                return Ok(());
            }
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        prop_assert_eq!(core, 0);
        let mut peeled: Vec<usize> = p.steps.iter().flat_map(|s| s.t.iter().copied()).collect();
        peeled.sort_unstable();
        prop_assert_eq!(&peeled, &support);
        prop_assert!(p.len() <= 2 * support.len().max(1));
        let mut prev = support.len();
        for (idx, step) in p.steps.iter().enumerate() {
            prop_assert_eq!(step.i, idx + 1);
            prop_assert_eq!(step.side, if step.i % 2 == 1 { Side::Left } else { Side::Right });
            prop_assert_eq!(step.t.len() + step.s.len(), prev);
            prop_assert!(step.s.len() <= prev);
            // V_i is exactly the set of heavy endpoints of S_i.
            let mut deg = vec![0usize; n];
            for &e in step.s.iter() {
                deg[h.endpoint(e, step.side)] += 1;
            }
            let heavy: Vec<usize> = (0..n).filter(|&v| deg[v] > 0).collect();
            prop_assert_eq!(&heavy, &step.v);
            prop_assert!(step.v.iter().all(|&v| deg[v] > p.threshold));
            prev = step.s.len();
        }
        prop_assert_eq!(prev, 0);
    }

    #[test]
    fn sigma_ignores_order_and_ties(
        x in prop::collection::vec(-5i32..5, 1..20),
        s in 0usize..6,
        pseed in any::<u64>(),
    ) {
        let x: Vec<f64> = x.into_iter().map(f64::from).collect();
        let s = s.min(x.len());
        let mut perm = x.clone();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(pseed));
        let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        let tail: f64 = mags[s..].iter().sum();
        prop_assert_eq!(sigma_s(&x, s, Norm::L1), tail);
        prop_assert_eq!(sigma_s(&perm, s, Norm::L1), tail);
        let tail2 = mags[s..].iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((sigma_s(&perm, s, Norm::L2) - tail2).abs() < 1e-12);
        let top = top_s(&x, s);
        prop_assert_eq!(top.len(), s);
        let cut = if s == 0 { f64::INFINITY } else { mags[s - 1] };
        for (j, v) in x.iter().enumerate() {
            if v.abs() > cut {
                prop_assert!(top.contains(&j));
            }
        }
        // Among equal magnitudes at the cut, lower indices win.
        let at_cut: Vec<usize> = (0..x.len()).filter(|&j| x[j].abs() == cut).collect();
        let chosen: Vec<usize> = at_cut.iter().copied().filter(|j| top.contains(j)).collect();
        prop_assert_eq!(&chosen[..], &at_cut[..chosen.len()]);
    }

    #[test]
    fn basis_pursuit_is_monotone_and_homogeneous(
        m in 2usize..5,
        extra in 1usize..4,
        seed in any::<u64>(),
        eta in 0.0f64..2.0,
        c in 0.1f64..10.0,
    ) {
        let n = m + extra;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let a = expander_sketch::matrix::DenseMatrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let tol = 1e-9;
        let lo = l1_minimize(&a, &y, eta, tol).unwrap();
        let hi = l1_minimize(&a, &y, eta * 1.5 + 0.1, tol).unwrap();
        prop_assert!(lo.residual <= eta + 1e-7);
        prop_assert!(hi.objective <= lo.objective + 1e-7);
        let ys: Vec<f64> = y.iter().map(|v| c * v).collect();
        let scaled = l1_minimize(&a, &ys, c * eta, tol).unwrap();
        prop_assert!((scaled.objective - c * lo.objective).abs() <= 1e-6 * (1.0 + c * lo.objective));
        let y_norm: f64 = y.iter().map(|v| v.abs()).sum();
        if eta >= y_norm {
            prop_assert!(lo.objective <= 1e-9);
        }
    }

    #[test]
    fn matrix_market_round_trips((n, d, seed) in graph_params()) {
        let (_, a) = tanner(n, d, seed);
        let text = write_matrix_market(a.pattern(), &["note".to_string()]);
        let back = parse_matrix_market(&text).unwrap().to_binary().unwrap();
        prop_assert_eq!(&back, a.pattern());
    }

    #[test]
    fn generation_and_mixing_are_deterministic((n, d, seed) in graph_params()) {
        let g1 = random_regular(n, d, seed).unwrap();
        let g2 = random_regular(n, d, seed).unwrap();
        prop_assert_eq!(g1.to_text(), g2.to_text());
        let h = DoubleCover::new(&g1);
        prop_assert_eq!(mixing_check(&h, d as f64, 20, seed), mixing_check(&h, d as f64, 20, seed));
    }
}
