//! Revised simplex solver for small and medium dense-inverse problems.
//!
//! Programs are brought to `min c'x, Ax = b, x >= 0` (bound shifts, free-variable
//! splits, slacks), equilibrated with power-of-two Ruiz scaling, and solved in two
//! phases with an explicit basis inverse. Dantzig pricing is used until
//! `10 (m + n)` degenerate pivots have occurred, after which Bland's rule takes
//! over. A prepared program keeps its phase-one basis so many objectives over the
//! same constraints can be optimized from it.

use crate::numlin::LuFactorization;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    pub coeffs: Vec<(usize, T)>,
    pub relation: Relation,
    pub rhs: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T> {
    pub n_vars: usize,
    pub objective: Vec<T>,
    pub sense: Sense,
    pub constraints: Vec<Constraint<T>>,
    /// Per-variable `[lower, upper]`; infinities allowed. Defaults to `[0, inf)`.
    pub bounds: Vec<(T, T)>,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(n_vars: usize) -> Self {
        LinearProgram {
            n_vars,
            objective: vec![T::zero(); n_vars],
            sense: Sense::Minimize,
            constraints: Vec::new(),
            bounds: vec![(T::zero(), T::infinity()); n_vars],
        }
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, T)>, relation: Relation, rhs: T) {
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    pub fn set_objective(&mut self, c: Vec<T>, sense: Sense) {
        assert_eq!(c.len(), self.n_vars);
        self.objective = c;
        self.sense = sense;
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        for c in &self.constraints {
            let lhs: T = c.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            worst = worst.max(lo - x[j]).max(x[j] - hi);
        }
        worst
    }

    pub fn rhs_norm(&self) -> T {
        self.constraints.iter().fold(T::zero(), |m, c| m.max(c.rhs.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    /// Optimal point (empty unless optimal).
    pub point: Vec<T>,
    pub objective: T,
    pub max_violation: T,
    /// One multiplier per constraint; at an optimum `sum_i rhs_i y_i` equals the
    /// objective when all variable bounds are `[0, inf)`.
    pub duals: Vec<T>,
    pub iterations: usize,
    pub diagnostics: String,
}

impl<T: Scalar> LpSolution<T> {
    fn failed(status: LpStatus, iterations: usize, diagnostics: String) -> Self {
        LpSolution {
            status,
            point: Vec::new(),
            objective: T::nan(),
            max_violation: T::nan(),
            duals: Vec::new(),
            iterations,
            diagnostics,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum VarMap {
    Shift { col: usize, lo: f64 },
    Mirror { col: usize, hi: f64 },
    Split { plus: usize, minus: usize },
}

/// Standard-form data in scaled units, column major.
#[derive(Debug, Clone)]
struct Standard<T> {
    m: usize,
    n: usize,
    n_struct: usize,
    first_artificial: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<T>,
    b: Vec<T>,
    row_scale: Vec<T>,
    col_scale: Vec<T>,
    row_flip: Vec<T>,
    n_orig_rows: usize,
    var_map: Vec<VarMap>,
}

impl<T: Scalar> Standard<T> {
    fn col(&self, j: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    fn build(p: &LinearProgram<T>) -> Self {
        let mut rows: Vec<Vec<(usize, T)>> = Vec::new();
        let mut rels = Vec::new();
        let mut rhs = Vec::new();
        let mut var_map = Vec::with_capacity(p.n_vars);
        let mut n_struct = 0;
        let mut bound_rows = Vec::new();
        for &(lo, hi) in &p.bounds {
            if lo.is_finite() {
                var_map.push(VarMap::Shift { col: n_struct, lo: lo.as_f64() });
                if hi.is_finite() {
                    bound_rows.push((n_struct, hi - lo));
                }
                n_struct += 1;
            } else if hi.is_finite() {
                var_map.push(VarMap::Mirror { col: n_struct, hi: hi.as_f64() });
                n_struct += 1;
            } else {
                var_map.push(VarMap::Split { plus: n_struct, minus: n_struct + 1 });
                n_struct += 2;
            }
        }
        for c in &p.constraints {
            let mut row = Vec::new();
            let mut shift = T::zero();
            for &(j, a) in &c.coeffs {
                match var_map[j] {
                    VarMap::Shift { col, lo } => {
                        row.push((col, a));
                        shift += a * T::of(lo);
                    }
                    VarMap::Mirror { col, hi } => {
                        row.push((col, -a));
                        shift += a * T::of(hi);
                    }
                    VarMap::Split { plus, minus } => {
                        row.push((plus, a));
                        row.push((minus, -a));
                    }
                }
            }
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, T)> = Vec::with_capacity(row.len());
            for (j, a) in row {
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += a,
                    _ => merged.push((j, a)),
                }
            }
            merged.retain(|e| e.1 != T::zero());
            rows.push(merged);
            rels.push(c.relation);
            rhs.push(c.rhs - shift);
        }
        let n_orig_rows = rows.len();
        for (col, ub) in bound_rows {
            rows.push(vec![(col, T::one())]);
            rels.push(Relation::Le);
            rhs.push(ub);
        }
        let m = rows.len();
        let mut n = n_struct;
        let mut slack_of = vec![None; m];
        for i in 0..m {
            match rels[i] {
                Relation::Le => {
                    rows[i].push((n, T::one()));
                    slack_of[i] = Some(n);
                    n += 1;
                }
                Relation::Ge => {
                    rows[i].push((n, -T::one()));
                    slack_of[i] = Some(n);
                    n += 1;
                }
                Relation::Eq => {}
            }
        }
        let mut row_flip = vec![T::one(); m];
        for i in 0..m {
            if rhs[i] < T::zero() {
                row_flip[i] = -T::one();
                rhs[i] = -rhs[i];
                for e in rows[i].iter_mut() {
                    e.1 = -e.1;
                }
            }
        }

        // Ruiz equilibration with power-of-two factors (exact scaling)
        let mut row_scale = vec![T::one(); m];
        let mut col_scale = vec![T::one(); n];
        let pow2 = |v: T| -> T { T::of(2f64.powi(v.as_f64().log2().round() as i32)) };
        for _ in 0..20 {
            let mut rmax = vec![T::zero(); m];
            let mut cmax = vec![T::zero(); n];
            for (i, row) in rows.iter().enumerate() {
                for &(j, a) in row {
                    let v = (a * row_scale[i] * col_scale[j]).abs();
                    rmax[i] = rmax[i].max(v);
                    cmax[j] = cmax[j].max(v);
                }
            }
            let mut changed = false;
            for i in 0..m {
                if rmax[i] > T::zero() {
                    let f = pow2(T::one() / rmax[i].sqrt());
                    if f != T::one() {
                        changed = true;
                        row_scale[i] *= f;
                    }
                }
            }
            for j in 0..n {
                if cmax[j] > T::zero() {
                    let f = pow2(T::one() / cmax[j].sqrt());
                    if f != T::one() {
                        changed = true;
                        col_scale[j] *= f;
                    }
                }
            }
            if !changed {
                break;
            }
        }

        // columns, then one artificial per row lacking a usable slack
        let first_artificial = n;
        let mut cols: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for (i, row) in rows.iter().enumerate() {
            for &(j, a) in row {
                cols[j].push((i, a * row_scale[i] * col_scale[j]));
            }
        }
        for i in 0..m {
            let usable = slack_of[i].is_some_and(|s| cols[s][0].1 > T::zero());
            if !usable {
                cols.push(vec![(i, T::one())]);
                n += 1;
            }
        }
        let b: Vec<T> = (0..m).map(|i| rhs[i] * row_scale[i]).collect();
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::new();
        let mut vals = Vec::new();
        for c in &cols {
            for &(i, a) in c {
                row_idx.push(i);
                vals.push(a);
            }
            col_ptr.push(row_idx.len());
        }
        Standard {
            m,
            n,
            n_struct,
            first_artificial,
            col_ptr,
            row_idx,
            vals,
            b,
            row_scale,
            col_scale,
            row_flip,
            n_orig_rows,
            var_map,
        }
    }

    /// Scaled standard-form cost vector for an objective in original variables.
    fn costs(&self, objective: &[T], sense: Sense) -> Vec<T> {
        let sign = if sense == Sense::Maximize { -T::one() } else { T::one() };
        let mut c = vec![T::zero(); self.n];
        for (j, &cj) in objective.iter().enumerate() {
            if cj == T::zero() {
                continue;
            }
            let cj = sign * cj;
            match self.var_map[j] {
                VarMap::Shift { col, .. } => c[col] += cj,
                VarMap::Mirror { col, .. } => c[col] -= cj,
                VarMap::Split { plus, minus } => {
                    c[plus] += cj;
                    c[minus] -= cj;
                }
            }
        }
        for j in 0..self.first_artificial {
            c[j] *= self.col_scale[j];
        }
        c
    }

    fn original_point(&self, x: &[T]) -> Vec<T> {
        let unscale = |col: usize| x[col] * self.col_scale[col];
        self.var_map
            .iter()
            .map(|vm| match *vm {
                VarMap::Shift { col, lo } => T::of(lo) + unscale(col),
                VarMap::Mirror { col, hi } => T::of(hi) - unscale(col),
                VarMap::Split { plus, minus } => unscale(plus) - unscale(minus),
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
struct Basis<T> {
    heads: Vec<usize>,
    position: Vec<usize>,
    binv: Vec<T>,
    xb: Vec<T>,
    since_refactor: usize,
}

const NOT_BASIC: usize = usize::MAX;
const ART_PIVOT: f64 = 1e-7;

enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
    Breakdown(String),
}

struct Simplex<'a, T> {
    s: &'a Standard<T>,
    tol: T,
    piv_tol: T,
}

impl<'a, T: Scalar> Simplex<'a, T> {
    fn initial_basis(&self) -> Basis<T> {
        let s = self.s;
        let m = s.m;
        let mut heads = vec![NOT_BASIC; m];
        // prefer artificials; otherwise the +1 slack of the row
        for j in (s.first_artificial..s.n).rev().chain((s.n_struct..s.first_artificial).rev()) {
            let mut it = s.col(j);
            let (i, a) = it.next().expect("slack and artificial columns are nonempty");
            if a > T::zero() && heads[i] == NOT_BASIC {
                heads[i] = j;
            }
        }
        let mut position = vec![NOT_BASIC; s.n];
        let mut binv = vec![T::zero(); m * m];
        let mut xb = vec![T::zero(); m];
        for i in 0..m {
            let j = heads[i];
            position[j] = i;
            let a = s.col(j).next().unwrap().1;
            binv[i * m + i] = T::one() / a;
            xb[i] = s.b[i] / a;
        }
        Basis { heads, position, binv, xb, since_refactor: 0 }
    }

    fn refactor(&self, basis: &mut Basis<T>) -> Result<(), String> {
        let s = self.s;
        let m = s.m;
        let mut dense = vec![T::zero(); m * m];
        for (k, &j) in basis.heads.iter().enumerate() {
            for (i, a) in s.col(j) {
                dense[i * m + k] = a;
            }
        }
        let f = LuFactorization::from_dense(m, &dense);
        if f.is_singular() {
            return Err("basis matrix became singular".into());
        }
        let mut e = vec![T::zero(); m];
        for c in 0..m {
            e[c] = T::one();
            let col = f.solve(&e).map_err(|err| err.to_string())?;
            e[c] = T::zero();
            for r in 0..m {
                basis.binv[r * m + c] = col[r];
            }
        }
        self.recompute_xb(basis);
        basis.since_refactor = 0;
        Ok(())
    }

    fn recompute_xb(&self, basis: &mut Basis<T>) {
        let m = self.s.m;
        for i in 0..m {
            let row = &basis.binv[i * m..(i + 1) * m];
            basis.xb[i] = row.iter().zip(&self.s.b).map(|(&a, &b)| a * b).sum();
        }
    }

    fn duals(&self, basis: &Basis<T>, c: &[T]) -> Vec<T> {
        let m = self.s.m;
        let mut y = vec![T::zero(); m];
        for (i, &j) in basis.heads.iter().enumerate() {
            let cb = c[j];
            if cb != T::zero() {
                for (yk, &a) in y.iter_mut().zip(&basis.binv[i * m..(i + 1) * m]) {
                    *yk += cb * a;
                }
            }
        }
        y
    }

    fn primal_residual(&self, basis: &Basis<T>) -> T {
        let mut r = self.s.b.clone();
        for (k, &j) in basis.heads.iter().enumerate() {
            for (i, a) in self.s.col(j) {
                r[i] -= a * basis.xb[k];
            }
        }
        r.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Runs simplex iterations on cost vector `c`; artificial columns may enter
    /// only when `allow_artificial`.
    fn run(&self, basis: &mut Basis<T>, c: &[T], allow_artificial: bool, iters: &mut usize) -> Outcome {
        let s = self.s;
        let (m, n) = (s.m, s.n);
        let enter_limit = if allow_artificial { n } else { s.first_artificial };
        let bland_after = 10 * (m + n);
        let max_iters = *iters + 50 * (m + n) + 10_000;
        let refactor_every = (2 * m).max(1000);
        let mut degenerate = 0;
        let mut bland = false;
        let mut y = self.duals(basis, c);
        let mut alpha = vec![T::zero(); m];
        // locked artificials sit on nearly redundant rows; pivoting them out on
        // tiny entries ruins the inverse
        let art_piv = T::of(ART_PIVOT);
        loop {
            if *iters >= max_iters {
                return Outcome::IterationLimit;
            }
            if basis.since_refactor >= refactor_every {
                if let Err(e) = self.refactor(basis) {
                    return Outcome::Breakdown(e);
                }
                y = self.duals(basis, c);
            } else if basis.since_refactor % 50 == 49 {
                y = self.duals(basis, c);
            }

            // pricing
            let mut entering = None;
            let mut best = -self.tol;
            for j in 0..enter_limit {
                if basis.position[j] != NOT_BASIC {
                    continue;
                }
                let mut d = c[j];
                for (i, a) in s.col(j) {
                    d -= y[i] * a;
                }
                if bland {
                    if d < -self.tol {
                        entering = Some((j, d));
                        break;
                    }
                } else if d < best {
                    best = d;
                    entering = Some((j, d));
                }
            }
            let Some((q, dq)) = entering else { return Outcome::Optimal };

            // column of the entering variable in the current basis
            alpha.iter_mut().for_each(|a| *a = T::zero());
            for (k, a) in s.col(q) {
                for i in 0..m {
                    alpha[i] += basis.binv[i * m + k] * a;
                }
            }

            // Harris two-pass ratio test; locked artificials leave at ratio zero
            let mut theta_max = T::infinity();
            for i in 0..m {
                let a = alpha[i];
                let art = basis.heads[i] >= s.first_artificial && !allow_artificial;
                if art {
                    if a.abs() > art_piv {
                        theta_max = T::zero();
                    }
                } else if a > self.piv_tol {
                    let t = (basis.xb[i].max(T::zero()) + self.tol) / a;
                    theta_max = theta_max.min(t);
                }
            }
            if theta_max == T::infinity() {
                return Outcome::Unbounded;
            }
            let mut leave = None;
            let mut leave_key = T::zero();
            for i in 0..m {
                let a = alpha[i];
                let art = basis.heads[i] >= s.first_artificial && !allow_artificial;
                let ratio = if art {
                    if a.abs() <= art_piv {
                        continue;
                    }
                    T::zero()
                } else if a > self.piv_tol {
                    basis.xb[i].max(T::zero()) / a
                } else {
                    continue;
                };
                if ratio > theta_max {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some(p) => {
                        if bland {
                            basis.heads[i] < basis.heads[p]
                        } else {
                            a.abs() > leave_key
                        }
                    }
                };
                if better {
                    leave = Some(i);
                    leave_key = a.abs();
                }
            }
            let Some(p) = leave else { return Outcome::Unbounded };
            let ap = alpha[p];
            let theta = if basis.heads[p] >= s.first_artificial && !allow_artificial {
                T::zero()
            } else {
                (basis.xb[p].max(T::zero()) / ap).max(T::zero())
            };
            if theta <= T::of(1e-12) {
                degenerate += 1;
                if degenerate >= bland_after {
                    bland = true;
                }
            }

            // update primal values, duals and the inverse
            for i in 0..m {
                if i != p {
                    basis.xb[i] -= theta * alpha[i];
                }
            }
            basis.xb[p] = theta;
            let row_p: Vec<T> = basis.binv[p * m..(p + 1) * m].to_vec();
            let f = dq / ap;
            for (yk, &r) in y.iter_mut().zip(&row_p) {
                *yk += f * r;
            }
            for i in 0..m {
                if i == p || alpha[i] == T::zero() {
                    continue;
                }
                let g = alpha[i] / ap;
                let row = &mut basis.binv[i * m..(i + 1) * m];
                for (v, &r) in row.iter_mut().zip(&row_p) {
                    *v -= g * r;
                }
            }
            for v in basis.binv[p * m..(p + 1) * m].iter_mut() {
                *v /= ap;
            }
            let old = basis.heads[p];
            basis.position[old] = NOT_BASIC;
            basis.heads[p] = q;
            basis.position[q] = p;
            basis.since_refactor += 1;
            *iters += 1;
        }
    }
}

/// A program whose constraints have passed phase one.
#[derive(Debug, Clone)]
pub struct PreparedLp<T> {
    program: LinearProgram<T>,
    standard: Standard<T>,
    basis: Basis<T>,
    tol: T,
    phase_one_iterations: usize,
}

#[derive(Debug, Clone)]
pub enum Prepared<T> {
    Ready(Box<PreparedLp<T>>),
    Failed(LpSolution<T>),
}

/// Runs phase one on `p` (its objective is ignored).
pub fn prepare<T: Scalar>(p: &LinearProgram<T>) -> Prepared<T> {
    prepare_with_tol(p, T::of(T::LP_TOL))
}

pub fn prepare_with_tol<T: Scalar>(p: &LinearProgram<T>, tol: T) -> Prepared<T> {
    assert!(p.n_vars > 0, "a linear program needs at least one variable");
    assert_eq!(p.bounds.len(), p.n_vars);
    let s = Standard::build(p);
    let simplex = Simplex { s: &s, tol, piv_tol: tol };
    let mut basis = simplex.initial_basis();
    let mut iters = 0;
    let c1: Vec<T> = (0..s.n).map(|j| if j >= s.first_artificial { T::one() } else { T::zero() }).collect();
    match simplex.run(&mut basis, &c1, true, &mut iters) {
        Outcome::Optimal => {}
        Outcome::Unbounded => {
            return Prepared::Failed(LpSolution::failed(LpStatus::NumericalFailure, iters, "phase one reported unboundedness".into()))
        }
        Outcome::IterationLimit => {
            return Prepared::Failed(LpSolution::failed(LpStatus::NumericalFailure, iters, "iteration limit in phase one".into()))
        }
        Outcome::Breakdown(e) => return Prepared::Failed(LpSolution::failed(LpStatus::NumericalFailure, iters, e)),
    }
    if let Err(e) = simplex.refactor(&mut basis) {
        return Prepared::Failed(LpSolution::failed(LpStatus::NumericalFailure, iters, e));
    }
    let bnorm = s.b.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let infeas: T = basis.heads.iter().zip(&basis.xb).filter(|(&j, _)| j >= s.first_artificial).map(|(_, &x)| x.max(T::zero())).sum();
    if infeas > tol * bnorm {
        return Prepared::Failed(LpSolution::failed(
            LpStatus::Infeasible,
            iters,
            format!("phase one ended with artificial mass {:e} (scaled units)", infeas.as_f64()),
        ));
    }

    // pivot remaining artificials out where the row allows it
    let m = s.m;
    for p in 0..m {
        if basis.heads[p] < s.first_artificial {
            continue;
        }
        basis.xb[p] = T::zero();
        let row_p: Vec<T> = basis.binv[p * m..(p + 1) * m].to_vec();
        let mut best: Option<(usize, T)> = None;
        for j in 0..s.first_artificial {
            if basis.position[j] != NOT_BASIC {
                continue;
            }
            let a: T = s.col(j).map(|(i, v)| row_p[i] * v).sum();
            if a.abs() > T::of(ART_PIVOT) && best.map_or(true, |(_, b)| a.abs() > b.abs()) {
                best = Some((j, a));
            }
        }
        let Some((q, _)) = best else { continue };
        let mut alpha = vec![T::zero(); m];
        for (k, a) in s.col(q) {
            for i in 0..m {
                alpha[i] += basis.binv[i * m + k] * a;
            }
        }
        let ap = alpha[p];
        for i in 0..m {
            if i == p || alpha[i] == T::zero() {
                continue;
            }
            let g = alpha[i] / ap;
            for c in 0..m {
                let r = basis.binv[p * m + c];
                basis.binv[i * m + c] -= g * r;
            }
        }
        for c in 0..m {
            basis.binv[p * m + c] /= ap;
        }
        let old = basis.heads[p];
        basis.position[old] = NOT_BASIC;
        basis.heads[p] = q;
        basis.position[q] = p;
    }
    if let Err(e) = simplex.refactor(&mut basis) {
        return Prepared::Failed(LpSolution::failed(LpStatus::NumericalFailure, iters, e));
    }
    Prepared::Ready(Box::new(PreparedLp { program: p.clone(), standard: s, basis, tol, phase_one_iterations: iters }))
}

impl<T: Scalar> PreparedLp<T> {
    pub fn program(&self) -> &LinearProgram<T> {
        &self.program
    }

    pub fn phase_one_iterations(&self) -> usize {
        self.phase_one_iterations
    }

    /// Optimizes one objective starting from the phase-one basis.
    pub fn solve(&self, objective: &[T], sense: Sense) -> LpSolution<T> {
        let mut basis = self.basis.clone();
        self.solve_from(&mut basis, objective, sense)
    }

    /// Optimizes a sequence of objectives, each warm-started from the previous optimum.
    pub fn solve_chain(&self, objectives: &[(Vec<T>, Sense)]) -> Vec<LpSolution<T>> {
        let mut basis = self.basis.clone();
        objectives.iter().map(|(c, sense)| self.solve_from(&mut basis, c, *sense)).collect()
    }

    fn solve_from(&self, basis: &mut Basis<T>, objective: &[T], sense: Sense) -> LpSolution<T> {
        let s = &self.standard;
        let simplex = Simplex { s, tol: self.tol, piv_tol: self.tol };
        let c = s.costs(objective, sense);
        let mut iters = 0;
        let bnorm = s.b.iter().fold(T::one(), |m, v| m.max(v.abs()));
        let viol_tol = T::of(1e-8) * (T::one() + self.program.rhs_norm());
        let mut refactored = false;
        loop {
            match simplex.run(basis, &c, false, &mut iters) {
                Outcome::Optimal => {}
                Outcome::Unbounded => {
                    return LpSolution::failed(LpStatus::Unbounded, iters, "ratio test found no blocking row".into())
                }
                Outcome::IterationLimit => {
                    return LpSolution::failed(LpStatus::NumericalFailure, iters, "iteration limit in phase two".into())
                }
                Outcome::Breakdown(e) => return LpSolution::failed(LpStatus::NumericalFailure, iters, e),
            }
            simplex.recompute_xb(basis);
            let resid = simplex.primal_residual(basis);
            let min_x = basis.xb.iter().fold(T::zero(), |m, &v| m.min(v));
            let point = self.point(basis);
            let violation = self.program.max_violation(&point);
            let clean = resid <= self.tol * bnorm && min_x >= -self.tol * bnorm && violation <= viol_tol;
            if clean || refactored {
                if !clean {
                    return LpSolution {
                        diagnostics: format!(
                            "optimal basis is inaccurate after refactorization: residual {:e}, violation {:e}",
                            resid.as_f64(),
                            violation.as_f64()
                        ),
                        ..LpSolution::failed(LpStatus::NumericalFailure, iters, String::new())
                    };
                }
                let objective_value = point.iter().zip(objective).map(|(&x, &c)| x * c).sum();
                let y = simplex.duals(basis, &c);
                let sign = if sense == Sense::Maximize { -T::one() } else { T::one() };
                let duals = (0..s.n_orig_rows).map(|i| sign * s.row_scale[i] * s.row_flip[i] * y[i]).collect();
                return LpSolution {
                    status: LpStatus::Optimal,
                    point,
                    objective: objective_value,
                    max_violation: violation,
                    duals,
                    iterations: iters,
                    diagnostics: String::new(),
                };
            }
            if let Err(e) = simplex.refactor(basis) {
                return LpSolution::failed(LpStatus::NumericalFailure, iters, e);
            }
            refactored = true;
        }
    }

    fn point(&self, basis: &Basis<T>) -> Vec<T> {
        let s = &self.standard;
        let mut x = vec![T::zero(); s.n];
        for (k, &j) in basis.heads.iter().enumerate() {
            x[j] = basis.xb[k].max(T::zero());
        }
        s.original_point(&x)
    }
}

pub fn solve_lp<T: Scalar>(p: &LinearProgram<T>) -> LpSolution<T> {
    match prepare(p) {
        Prepared::Ready(prep) => prep.solve(&p.objective, p.sense),
        Prepared::Failed(sol) => sol,
    }
}
