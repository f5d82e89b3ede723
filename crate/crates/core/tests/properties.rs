use proptest::prelude::*;

use critlab::chains::{build_generator, ChainKind, ChainSpec};
use critlab::experiment::{chen_eldan_instance, nb_counts_brute_force};
use critlab::graph::Graph;
use critlab::ising::{gibbs_exact, max_susceptibility, susceptibility, IsingModel};
use critlab::seed::rng_for;
use critlab::spectral::{chen_eldan_bound, dirichlet_forms, spectral_gap, variance};
use critlab::walks::{nb_counts, saw_counts};

/// Graph on `n` vertices from an upper-triangle edge mask.
fn graph_strategy(max_n: usize) -> impl Strategy<Value = Graph> {
    (2..=max_n).prop_flat_map(|n| {
        proptest::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |mask| {
            let pairs = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
            let edges: Vec<(usize, usize)> = pairs.zip(mask).filter(|(_, keep)| *keep).map(|(e, _)| e).collect();
            Graph::from_edges(n, &edges).unwrap()
        })
    })
}

fn permuted(g: &Graph, perm: &[usize]) -> Graph {
    let edges: Vec<(usize, usize)> = g.edges().into_iter().map(|(u, v)| (perm[u], perm[v])).collect();
    Graph::from_edges(g.n(), &edges).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn self_avoiding_walks_are_non_backtracking(g in graph_strategy(8), l in 1usize..7) {
        let saw = saw_counts(&g, 0, l, u64::MAX).unwrap();
        let nb = nb_counts(&g, 0, l);
        prop_assert!(saw[l] as f64 <= nb.total);
    }

    #[test]
    fn nb_endpoint_counts_sum_to_total(g in graph_strategy(9), x in 0usize..9, l in 1usize..8) {
        let x = x % g.n();
        let c = nb_counts(&g, x, l);
        let (total, per) = c.exact.clone().unwrap();
        prop_assert_eq!(per.iter().sum::<u128>(), total);
        prop_assert!((c.per_vertex.iter().sum::<f64>() - c.total).abs() <= 1e-9 * c.total.max(1.0));
        let slow = nb_counts_brute_force(&g, x, l);
        prop_assert!(per.iter().zip(&slow).all(|(&a, &b)| a == b as u128));
    }

    #[test]
    fn zero_field_measure_is_flip_symmetric(g in graph_strategy(7), beta in 0.0f64..1.5) {
        let table = gibbs_exact(&IsingModel::uniform(g.clone(), beta)).unwrap();
        for v in 0..g.n() {
            prop_assert!(table.mean(v).abs() <= 1e-12);
        }
    }

    #[test]
    fn reversing_fields_reverses_magnetization(g in graph_strategy(6), beta in 0.0f64..1.2, h in proptest::collection::vec(-1.0f64..1.0, 6)) {
        let n = g.n();
        let plus = gibbs_exact(&IsingModel::uniform(g.clone(), beta).with_fields(h[..n].to_vec())).unwrap();
        let minus = gibbs_exact(&IsingModel::uniform(g, beta).with_fields(h[..n].iter().map(|x| -x).collect())).unwrap();
        for v in 0..n {
            prop_assert!((plus.mean(v) + minus.mean(v)).abs() <= 1e-12);
        }
    }

    #[test]
    fn susceptibility_grows_with_beta(g in graph_strategy(7), b1 in 0.0f64..1.5, b2 in 0.0f64..1.5) {
        let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        for x in 0..g.n() {
            let a = susceptibility(&IsingModel::uniform(g.clone(), lo), x).unwrap();
            let b = susceptibility(&IsingModel::uniform(g.clone(), hi), x).unwrap();
            prop_assert!(a <= b + 1e-12);
        }
    }

    #[test]
    fn correlations_follow_relabelling(g in graph_strategy(7), beta in 0.0f64..1.2, perm in any::<u64>()) {
        let n = g.n();
        let mut order: Vec<usize> = (0..n).collect();
        let mut r = rng_for(perm, &[]);
        rand::seq::SliceRandom::shuffle(&mut order[..], &mut r);
        let h = permuted(&g, &order);
        let a = gibbs_exact(&IsingModel::uniform(g.clone(), beta)).unwrap();
        let b = gibbs_exact(&IsingModel::uniform(h.clone(), beta)).unwrap();
        for u in 0..n {
            for v in 0..n {
                prop_assert!((a.correlation(u, v) - b.correlation(order[u], order[v])).abs() <= 1e-12);
            }
        }
        let (chi_a, _) = max_susceptibility(&IsingModel::uniform(g, beta)).unwrap();
        let (chi_b, _) = max_susceptibility(&IsingModel::uniform(h, beta)).unwrap();
        prop_assert!((chi_a - chi_b).abs() <= 1e-10);
    }

    #[test]
    fn dirichlet_formulas_agree_and_bound_the_gap(
        g in graph_strategy(5),
        beta in 0.0f64..1.0,
        f in proptest::collection::vec(-3.0f64..3.0, 32),
    ) {
        let n = g.n();
        let spec = ChainSpec::new(ChainKind::X1, IsingModel::uniform(g, beta), vec![true; n]);
        let gen = build_generator(&spec).unwrap();
        let f = &f[..gen.state_count()];
        let (quad, edge) = dirichlet_forms(&gen, f);
        prop_assert!((quad - edge).abs() <= 1e-10 * quad.abs().max(1.0));
        let var = variance(&gen.pi, f);
        prop_assume!(var > 1e-9);
        let gap = spectral_gap(&gen).unwrap().gap;
        prop_assert!(edge / var >= gap * (1.0 - 1e-9));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn chen_eldan_bound_falls_as_alpha_grows(seed in any::<u64>(), m in 2usize..5, scale in 1.0f64..4.0) {
        let input = chen_eldan_instance(m, &mut rng_for(seed, &[])).unwrap();
        let base = chen_eldan_bound(&input, &|t| input.exact_alpha(t)).unwrap();
        let loose = chen_eldan_bound(&input, &|t| scale * input.exact_alpha(t)).unwrap();
        prop_assert!(loose.bound <= base.bound * (1.0 + 1e-12));
        prop_assert!(base.ok);
    }
}
