//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use ctmc_trunc::lpsolve::{Relation, Sense};

fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-9 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let m = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= m * a[k][j];
            }
            b[i] -= m * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for last in k - 1..m {
        for mut c in combinations(last, k - 1) {
            c.push(last);
            out.push(c);
        }
    }
    out
}

/// Best objective over all vertices of `{A x (<=|>=) b, 0 <= x <= 10}`.
pub fn vertex_optimum(n: usize, rows: &[(Vec<f64>, Relation, f64)], c: &[f64], sense: Sense) -> Option<f64> {
    let mut planes: Vec<(Vec<f64>, f64)> = rows.iter().map(|(a, _, b)| (a.clone(), *b)).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), 0.0));
        planes.push((e, 10.0));
    }
    let feasible = |x: &[f64]| {
        x.iter().all(|&v| (-1e-9..=10.0 + 1e-9).contains(&v))
            && rows.iter().all(|(a, rel, b)| {
                let ax: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
                match rel {
                    Relation::Le => ax <= b + 1e-9,
                    Relation::Ge => ax >= b - 1e-9,
                    Relation::Eq => (ax - b).abs() <= 1e-9,
                }
            })
    };
    let mut best: Option<f64> = None;
    for idx in combinations(planes.len(), n) {
        let a = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let b = idx.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = gauss(a, b) {
            if feasible(&x) {
                let v: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                best = Some(match (best, sense) {
                    (None, _) => v,
                    (Some(o), Sense::Minimize) => o.min(v),
                    (Some(o), Sense::Maximize) => o.max(v),
                });
            }
        }
    }
    best
}


/// Random program with `n <= 5` variables in `[0, 10]` and at most 8 rows.
pub fn random_lp(rng: &mut impl rand::Rng) -> (usize, Vec<(Vec<f64>, Relation, f64)>, Vec<f64>, Sense) {
    let n = rng.gen_range(1..=5);
    let rows = (0..rng.gen_range(0..=8))
        .map(|_| {
            let a = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let rel = if rng.gen::<bool>() { Relation::Le } else { Relation::Ge };
            (a, rel, rng.gen_range(-5.0..15.0))
        })
        .collect();
    let c = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let sense = if rng.gen::<bool>() { Sense::Maximize } else { Sense::Minimize };
    (n, rows, c, sense)
}

/// Stationary distribution of a birth-death chain by the product formula in log
/// space, on `{0, ..., n-1}` with `n` large enough that the remaining weights are
/// below `exp(-700)` of the peak.
pub fn birth_death_oracle(birth: impl Fn(f64) -> f64, death: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut lw = vec![0.0f64];
    let mut top = 0.0f64;
    let mut x = 1.0;
    loop {
        let next = lw.last().unwrap() + (birth(x - 1.0) / death(x)).ln();
        lw.push(next);
        top = top.max(next);
        if (next < top - 700.0 && birth(x) < death(x + 1.0)) || lw.len() > 1_000_000 {
            break;
        }
        x += 1.0;
    }
    let w: Vec<f64> = lw.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|v| v / z).collect()
}

pub fn schlogl_oracle(k: [f64; 4]) -> Vec<f64> {
    birth_death_oracle(|x| k[0] * x * (x - 1.0) + k[2], |x| k[1] * x * (x - 1.0) * (x - 2.0) + k[3] * x)
}
