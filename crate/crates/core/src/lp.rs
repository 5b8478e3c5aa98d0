//! Small dense linear programs.
//!
//! Two-phase tableau simplex with Bland's rule. Every LP in this crate has
//! at most a few dozen variables, so a dense tableau is fine and Bland's
//! rule keeps pivoting deterministic and cycle-free.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-10;
const FEAS_EPS: f64 = 1e-9;
const RESIDUAL_TOL: f64 = 1e-8;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

/// `optimize c.x` subject to linear constraints and per-variable bounds.
/// Bounds default to `[0, inf)`.
#[derive(Debug, Clone)]
pub struct LpProblem {
    objective: Vec<f64>,
    sense: Sense,
    constraints: Vec<Constraint>,
    bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub value: f64,
    /// Largest constraint or bound violation of `x`.
    pub residual: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

impl LpProblem {
    pub fn new(objective: Vec<f64>, sense: Sense) -> Self {
        let n = objective.len();
        LpProblem {
            objective,
            sense,
            constraints: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    /// A pure feasibility problem over `n` variables.
    pub fn feasibility(n: usize) -> Self {
        Self::new(vec![0.0; n], Sense::Maximize)
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn constrain(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.num_vars(), "constraint width");
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self
    }

    pub fn bound(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        self.bounds[var] = (lower, upper);
        self
    }

    pub fn free(&mut self, var: usize) -> &mut Self {
        self.bound(var, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn solve(&self) -> Result<LpSolution> {
        let n = self.num_vars();
        if self.bounds.iter().any(|(l, u)| l > u || l.is_nan() || u.is_nan()) {
            return Err(Error::Lp("inconsistent variable bounds".into()));
        }
        if self.constraints.iter().any(|c| !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite())) {
            return Err(Error::Lp("non-finite constraint data".into()));
        }

        // x_j = offset_j + sum_c map_j[c] * y_c with y >= 0
        let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut offsets = vec![0.0; n];
        let mut ny = 0;
        let mut upper: Vec<(usize, f64)> = Vec::new();
        for (j, &(l, u)) in self.bounds.iter().enumerate() {
            if l.is_finite() {
                offsets[j] = l;
                columns[j].push((ny, 1.0));
                if u.is_finite() {
                    upper.push((ny, u - l));
                }
                ny += 1;
            } else if u.is_finite() {
                offsets[j] = u;
                columns[j].push((ny, -1.0));
                ny += 1;
            } else {
                columns[j].push((ny, 1.0));
                columns[j].push((ny + 1, -1.0));
                ny += 2;
            }
        }

        let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
        for c in &self.constraints {
            let mut a = vec![0.0; ny];
            let mut rhs = c.rhs;
            for (j, &v) in c.coeffs.iter().enumerate() {
                rhs -= v * offsets[j];
                for &(col, s) in &columns[j] {
                    a[col] += v * s;
                }
            }
            rows.push((a, c.relation, rhs));
        }
        for &(col, width) in &upper {
            let mut a = vec![0.0; ny];
            a[col] = 1.0;
            rows.push((a, Relation::Le, width));
        }
        let mut cost = vec![0.0; ny];
        for (j, &v) in self.objective.iter().enumerate() {
            let v = if self.sense == Sense::Maximize { v } else { -v };
            for &(col, s) in &columns[j] {
                cost[col] += v * s;
            }
        }

        let (status, y) = solve_standard(rows, &cost)?;
        let x: Vec<f64> = (0..n)
            .map(|j| offsets[j] + columns[j].iter().map(|&(c, s)| s * y[c]).sum::<f64>())
            .collect();
        let value = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        let residual = self.residual(&x);
        if status == LpStatus::Optimal && residual > RESIDUAL_TOL {
            return Err(Error::Lp(format!("solution residual {residual:e} exceeds {RESIDUAL_TOL:e}")));
        }
        Ok(LpSolution { status, x, value, residual })
    }

    fn residual(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
            let viol = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        for (v, &(l, u)) in x.iter().zip(&self.bounds) {
            worst = worst.max(l - v).max(v - u);
        }
        worst
    }
}

/// Maximizes `cost . y` over `rows`, `y >= 0`.
fn solve_standard(rows: Vec<(Vec<f64>, Relation, f64)>, cost: &[f64]) -> Result<(LpStatus, Vec<f64>)> {
    let ny = cost.len();
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    // artificials for every row: simple and deterministic
    let total = ny + n_slack + m;
    let rhs_col = total;
    let mut tab = vec![vec![0.0; total + 1]; m];
    let mut basis = vec![0usize; m];
    let mut slack = ny;
    for (i, (a, rel, b)) in rows.into_iter().enumerate() {
        let sign = if b < 0.0 { -1.0 } else { 1.0 };
        for (j, v) in a.into_iter().enumerate() {
            tab[i][j] = sign * v;
        }
        match rel {
            Relation::Le => {
                tab[i][slack] = sign;
                slack += 1;
            }
            Relation::Ge => {
                tab[i][slack] = -sign;
                slack += 1;
            }
            Relation::Eq => {}
        }
        tab[i][ny + n_slack + i] = 1.0;
        tab[i][rhs_col] = sign * b;
        basis[i] = ny + n_slack + i;
    }
    let art_start = ny + n_slack;

    // phase 1: maximize -sum(artificials)
    let mut phase1 = vec![0.0; total];
    for c in phase1.iter_mut().skip(art_start) {
        *c = -1.0;
    }
    let status = run_simplex(&mut tab, &mut basis, &phase1, total)?;
    debug_assert_eq!(status, LpStatus::Optimal);
    let infeas: f64 = basis
        .iter()
        .enumerate()
        .filter(|(_, &b)| b >= art_start)
        .map(|(i, _)| tab[i][rhs_col])
        .sum();
    if infeas > FEAS_EPS {
        return Ok((LpStatus::Infeasible, vec![0.0; ny]));
    }
    // drive zero-level artificials out of the basis; drop redundant rows
    let mut i = 0;
    while i < tab.len() {
        if basis[i] >= art_start {
            if let Some(j) = (0..art_start).find(|&j| tab[i][j].abs() > PIVOT_EPS) {
                pivot(&mut tab, &mut basis, i, j);
            } else {
                tab.remove(i);
                basis.remove(i);
                continue;
            }
        }
        i += 1;
    }

    let mut phase2 = vec![0.0; total];
    phase2[..ny].copy_from_slice(cost);
    let status = run_simplex(&mut tab, &mut basis, &phase2, art_start)?;
    let mut y = vec![0.0; ny];
    for (i, &b) in basis.iter().enumerate() {
        if b < ny {
            y[b] = tab[i][rhs_col].max(0.0);
        }
    }
    Ok((status, y))
}

/// Bland's-rule primal simplex over columns `0..allowed`.
fn run_simplex(tab: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], allowed: usize) -> Result<LpStatus> {
    let rhs_col = cost.len();
    for _ in 0..MAX_PIVOTS {
        let entering = (0..allowed).find(|&j| {
            if basis.contains(&j) {
                return false;
            }
            let reduced = cost[j] - basis.iter().enumerate().map(|(i, &b)| cost[b] * tab[i][j]).sum::<f64>();
            reduced > COST_EPS
        });
        let Some(j) = entering else {
            return Ok(LpStatus::Optimal);
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..tab.len() {
            if tab[i][j] > PIVOT_EPS {
                let ratio = tab[i][rhs_col] / tab[i][j];
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - 1e-14 || (ratio <= lr + 1e-14 && basis[i] < basis[li]) {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
        }
        let Some((i, _)) = leave else {
            return Ok(LpStatus::Unbounded);
        };
        pivot(tab, basis, i, j);
    }
    Err(Error::Lp("pivot limit reached".into()))
}

fn pivot(tab: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize) {
    let p = tab[row][col];
    tab[row].iter_mut().for_each(|v| *v /= p);
    let pivot_row = tab[row].clone();
    for (i, r) in tab.iter_mut().enumerate() {
        if i != row {
            let f = r[col];
            if f != 0.0 {
                r.iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * pv);
                r[col] = 0.0;
            }
        }
    }
    basis[row] = col;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LpProblem::new(vec![3.0, 5.0], Sense::Maximize);
        lp.constrain(vec![1.0, 0.0], Relation::Le, 4.0)
            .constrain(vec![0.0, 2.0], Relation::Le, 12.0)
            .constrain(vec![3.0, 2.0], Relation::Le, 18.0);
        let s = lp.solve().unwrap();
        assert!(s.is_optimal());
        assert!((s.value - 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn minimize_with_equalities_and_free_vars() {
        // min x + y, x + y = 1, x - y >= -3, x free, y in [0, 0.25]
        let mut lp = LpProblem::new(vec![1.0, 1.0], Sense::Minimize);
        lp.constrain(vec![1.0, 1.0], Relation::Eq, 1.0)
            .constrain(vec![1.0, -1.0], Relation::Ge, -3.0)
            .free(0)
            .bound(1, 0.0, 0.25);
        let s = lp.solve().unwrap();
        assert!(s.is_optimal());
        assert!((s.value - 1.0).abs() < 1e-9);
        assert!(s.x[1] <= 0.25 + 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LpProblem::feasibility(1);
        lp.constrain(vec![1.0], Relation::Ge, 2.0).bound(0, 0.0, 1.0);
        assert_eq!(lp.solve().unwrap().status, LpStatus::Infeasible);
        let mut lp = LpProblem::new(vec![1.0, 0.0], Sense::Maximize);
        lp.constrain(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(lp.solve().unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn negative_lower_bounds_and_redundant_rows() {
        // max -x, x >= -2 via bound, duplicated equality
        let mut lp = LpProblem::new(vec![-1.0, 0.0], Sense::Maximize);
        lp.bound(0, -2.0, 5.0)
            .constrain(vec![1.0, 1.0], Relation::Eq, 0.0)
            .constrain(vec![2.0, 2.0], Relation::Eq, 0.0)
            .free(1);
        let s = lp.solve().unwrap();
        assert!(s.is_optimal());
        assert!((s.x[0] + 2.0).abs() < 1e-9 && (s.x[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_vertex_terminates() {
        // Beale-style degenerate program that cycles without an anti-cycling rule
        let mut lp = LpProblem::new(vec![0.75, -20.0, 0.5, -6.0], Sense::Maximize);
        lp.constrain(vec![0.25, -8.0, -1.0, 9.0], Relation::Le, 0.0)
            .constrain(vec![0.5, -12.0, -0.5, 3.0], Relation::Le, 0.0)
            .constrain(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let s = lp.solve().unwrap();
        assert!(s.is_optimal());
        assert!((s.value - 1.25).abs() < 1e-9);
    }
}
