use ctmc_trunc::lpsolve::{solve_lp, LpStatus, Relation, Sense};
use ctmc_trunc::model::{parse_model, ReactionNetwork, State};
use ctmc_trunc::numlin::{assemble_qr, lu_factor, truncated_generator};
use ctmc_trunc::statespace::{
    build_sublevel_truncation, classes_of_graph, detect_levels, in_boundary, interior_set, NormLikeFn,
};
use ctmc_trunc::{LinearProgram, SparseMatrix};
use proptest::prelude::*;

mod common;
use common::vertex_optimum;
use std::collections::HashSet;

fn complex(counts: &[u32]) -> String {
    let names = ["A", "B"];
    let terms: Vec<String> = counts
        .iter()
        .zip(names)
        .filter(|(c, _)| **c > 0)
        .map(|(c, n)| if *c == 1 { n.to_string() } else { format!("{c} {n}") })
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

const EXPRS: [&str; 4] = ["mass_action(k1)", "mass_action(k2)", "k1 * A / (1 + B)", "2.5 + k2 * B^2"];

fn arb_network() -> impl Strategy<Value = (String, ReactionNetwork)> {
    let reaction = (prop::array::uniform2(0u32..3), prop::array::uniform2(0u32..3), 0usize..EXPRS.len());
    (0.01f64..10.0, 0.01f64..10.0, prop::collection::vec(reaction, 1..6)).prop_map(|(k1, k2, rs)| {
        let mut text = format!("species A B\nparam k1 = {k1}\nparam k2 = {k2}\n");
        for (m, mut p, e) in rs {
            if m == p {
                p[0] += 1;
            }
            // expression rates must vanish when reactants are missing
            let e = match (e, m) {
                (2, [0 | 1, 0]) | (3, [0, 0]) | (0 | 1, _) => e,
                _ => e % 2,
            };
            text += &format!("reaction {} -> {} : {}\n", complex(&m), complex(&p), EXPRS[e]);
        }
        let net = parse_model(&text).unwrap();
        (text, net)
    })
}

fn arb_state() -> impl Strategy<Value = State> {
    prop::collection::vec(0u32..8, 2).prop_map(State)
}

proptest! {
    #[test]
    fn exit_rate_is_the_row_sum((_, net) in arb_network(), x in arb_state()) {
        let row = net.rate_row(&x).unwrap();
        let mut s = 0.0;
        for (_, r) in &row {
            s += r;
        }
        prop_assert_eq!(net.exit_rate(&x).unwrap(), s);
        let jp = net.jump_probs(&x).unwrap();
        if s > 0.0 {
            let total: f64 = jp.iter().map(|p| p.1).sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }
        // no self-loops and no duplicate targets
        let targets: HashSet<&State> = row.iter().map(|r| &r.0).collect();
        prop_assert_eq!(targets.len(), row.len());
        prop_assert!(!targets.contains(&x));
    }

    #[test]
    fn print_parse_round_trip((_, net) in arb_network(), x in arb_state()) {
        let printed = net.to_string();
        let again = parse_model(&printed).unwrap();
        prop_assert_eq!(again.to_string(), printed);
        prop_assert_eq!(again.rate_row(&x).unwrap(), net.rate_row(&x).unwrap());
    }

    #[test]
    fn mass_action_needs_reactants(k in 0.1f64..5.0, m in prop::array::uniform2(0u32..4), x in prop::array::uniform2(0u32..6)) {
        let p = if m == [0, 0] { [1, 0] } else { [0, 0] };
        let net = parse_model(&format!("species A B\nreaction {} -> {} : mass_action({k})\n", complex(&m), complex(&p))).unwrap();
        let a = net.propensity(0, &State(x.to_vec())).unwrap();
        if x[0] < m[0] || x[1] < m[1] {
            prop_assert_eq!(a, 0.0);
        } else {
            let mut want = k;
            for i in 0..2 {
                for l in 0..m[i] {
                    want *= (x[i] - l) as f64;
                }
            }
            prop_assert!((a - want).abs() <= 1e-12 * want);
        }
    }

    #[test]
    fn boundary_partition_and_row_sums((_, net) in arb_network(), r in 2.0f64..9.0) {
        let w = NormLikeFn::parse(&net, "A + B").unwrap();
        let t = build_sublevel_truncation(&net, &w, r, &[], 10_000).unwrap();
        let inb = in_boundary(&net, &t).unwrap();
        let int = interior_set(&net, &t).unwrap();
        let mut all: Vec<usize> = inb.iter().chain(&int).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..t.len()).collect::<Vec<_>>());

        let g = truncated_generator(&net, &t).unwrap();
        let q = assemble_qr(&net, &t).unwrap();
        for (i, s) in q.row_sums().into_iter().enumerate() {
            prop_assert!((s + g.q_out[i]).abs() <= 1e-12 * (1.0 + g.exit[i]));
        }
    }

    #[test]
    fn scc_stable_under_intra_class_edge(edges in prop::collection::vec((0usize..12, 0usize..12), 0..40), pick in 0usize..1000) {
        let n = 12;
        let mut succ = vec![Vec::new(); n];
        for (a, b) in edges {
            if a != b && !succ[a].contains(&b) {
                succ[a].push(b);
            }
        }
        let before = classes_of_graph(&succ);
        let sccs = ctmc_trunc::statespace::strongly_connected_components(&succ);
        let big: Vec<&Vec<usize>> = sccs.iter().filter(|c| c.len() >= 2).collect();
        if !big.is_empty() {
            let c = big[pick % big.len()];
            let (a, b) = (c[pick % c.len()], c[(pick / 7 + 1) % c.len()]);
            if a != b && !succ[a].contains(&b) {
                succ[a].push(b);
            }
            prop_assert_eq!(classes_of_graph(&succ), before);
        }
    }

    #[test]
    fn lu_residual_on_dominant_matrices(n in 1usize..60, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut trip = Vec::new();
        for i in 0..n {
            let mut off = 0.0;
            for j in 0..n {
                if i != j && rng.gen::<f64>() < 0.2 {
                    let v: f64 = rng.gen_range(-5.0..5.0);
                    off += v.abs();
                    trip.push((i, j, v));
                }
            }
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            trip.push((i, i, sign * (off + rng.gen_range(0.1..2.0))));
        }
        let a = SparseMatrix::from_triplets(n, n, trip);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = lu_factor(&a);
        prop_assert!(!f.is_singular());
        let x = f.solve(&b).unwrap();
        let ax = a.mul_vec(&x);
        let xn = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = a.max_abs() * n as f64 * xn + 1.0;
        for i in 0..n {
            prop_assert!((ax[i] - b[i]).abs() <= 1e-12 * scale);
        }
    }
}

#[test]
fn toggle_simplex_sizes() {
    let net = ctmc_trunc::bench::toggle_network().unwrap();
    for k in 1..=30usize {
        let t = ctmc_trunc::bench::toggle_truncation(&net, k).unwrap();
        assert_eq!(t.len(), k * (k + 1) / 2, "k = {k}");
    }
}

#[test]
fn levels_make_the_generator_block_tridiagonal() {
    let net = ctmc_trunc::bench::toggle_network().unwrap();
    let t = ctmc_trunc::bench::toggle_truncation(&net, 15).unwrap();
    let f = NormLikeFn::parse(&net, "P1 + P2").unwrap();
    let lv = detect_levels(&net, &t, &f).unwrap();
    assert_eq!(lv.n_levels(), 15);
    let q = assemble_qr(&net, &t).unwrap();
    for (i, j, _) in q.triplets() {
        assert!(lv.level_of[i].abs_diff(lv.level_of[j]) <= 1);
    }
    // a jump of two levels is rejected
    let net2 = parse_model("species A\nreaction 0 -> 2 A : 1\nreaction A -> 0 : mass_action(1)\n").unwrap();
    let w = NormLikeFn::parse(&net2, "A").unwrap();
    let t2 = build_sublevel_truncation(&net2, &w, 10.0, &[], 100).unwrap();
    assert!(detect_levels(&net2, &t2, &w).is_err());
}

fn arb_lp() -> impl Strategy<Value = (usize, Vec<(Vec<f64>, Relation, f64)>, Vec<f64>, Sense)> {
    (1usize..=5).prop_flat_map(|n| {
        let row = (prop::collection::vec(-3.0f64..3.0, n), prop::bool::ANY, -5.0f64..15.0)
            .prop_map(|(a, le, b)| (a, if le { Relation::Le } else { Relation::Ge }, b));
        (Just(n), prop::collection::vec(row, 0..=8), prop::collection::vec(-5.0f64..5.0, n), prop::bool::ANY)
            .prop_map(|(n, rows, c, max)| (n, rows, c, if max { Sense::Maximize } else { Sense::Minimize }))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lp_matches_vertex_enumeration((n, rows, c, sense) in arb_lp()) {
        let mut p = LinearProgram::new(n);
        for (a, rel, b) in &rows {
            p.add_constraint(a.iter().copied().enumerate().collect(), *rel, *b);
        }
        p.bounds = vec![(0.0, 10.0); n];
        p.set_objective(c.clone(), sense);
        let sol = solve_lp(&p);
        match vertex_optimum(n, &rows, &c, sense) {
            Some(v) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.objective - v).abs() <= 1e-7 * (1.0 + v.abs()), "{} vs {}", sol.objective, v);
                prop_assert!(p.max_violation(&sol.point) <= 1e-7);
            }
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
        }
    }

    #[test]
    fn strong_duality(n in 1usize..=5, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut p = LinearProgram::new(n);
        p.add_constraint((0..n).map(|j| (j, 1.0)).collect(), Relation::Le, 10.0);
        for _ in 0..rng.gen_range(0..6) {
            let a: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.gen_range(0.0..3.0))).collect();
            p.add_constraint(a, Relation::Le, rng.gen_range(1.0..10.0));
        }
        for _ in 0..rng.gen_range(0..2) {
            let a: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.gen_range(0.0..1.0))).collect();
            p.add_constraint(a, Relation::Ge, rng.gen_range(0.0..0.5));
        }
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let sense = if rng.gen::<bool>() { Sense::Maximize } else { Sense::Minimize };
        p.set_objective(c, sense);
        let sol = solve_lp(&p);
        prop_assume!(sol.status == LpStatus::Optimal);
        let dual: f64 = p.constraints.iter().zip(&sol.duals).map(|(k, y)| k.rhs * y).sum();
        prop_assert!((dual - sol.objective).abs() <= 1e-7 * (1.0 + sol.objective.abs()), "{} vs {}", dual, sol.objective);
    }
}
