//! Dense two-phase primal simplex with Bland's anti-cycling rule.
//!
//! Problems here are tiny (a dozen variables, a few hundred rows), so a full
//! tableau is the simplest thing that works.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-10;
const FEAS_EPS: f64 = 1e-9;

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

/// `maximize objective . x` subject to the constraints and `x >= 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

struct Tableau {
    cols: usize,
    // rows * (cols + 1), rhs in the last column
    a: Vec<f64>,
    // reduced costs, last entry is minus the objective value
    obj: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cols + 1
    }

    fn rows(&self) -> usize {
        self.basis.len()
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * self.width() + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width();
        let inv = 1.0 / self.at(r, c);
        for j in 0..w {
            self.a[r * w + j] *= inv;
        }
        self.a[r * w + c] = 1.0;
        let pivot_row: Vec<f64> = self.a[r * w..(r + 1) * w].to_vec();
        for i in 0..self.rows() {
            if i == r {
                continue;
            }
            let f = self.a[i * w + c];
            if f != 0.0 {
                for j in 0..w {
                    self.a[i * w + j] -= f * pivot_row[j];
                }
                self.a[i * w + c] = 0.0;
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for j in 0..w {
                self.obj[j] -= f * pivot_row[j];
            }
            self.obj[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Loads a fresh cost vector and prices out the current basis.
    fn set_costs(&mut self, costs: &[f64]) {
        let w = self.width();
        self.obj = vec![0.0; w];
        self.obj[..costs.len()].copy_from_slice(costs);
        for r in 0..self.rows() {
            let cb = self.obj[self.basis[r]];
            if cb != 0.0 {
                for j in 0..w {
                    self.obj[j] -= cb * self.a[r * w + j];
                }
            }
        }
    }

    /// Runs Bland-rule pivots over the columns allowed by `eligible`.
    fn optimize(
        &mut self,
        eligible: impl Fn(usize) -> bool,
        pivots: &mut usize,
        cap: usize,
        phase: u8,
    ) -> Result<()> {
        loop {
            let entering = (0..self.cols).find(|&j| eligible(j) && self.obj[j] > COST_EPS);
            let Some(c) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows() {
                let coef = self.at(r, c);
                if coef > PIVOT_EPS {
                    let ratio = self.rhs(r) / coef;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-12
                                || (ratio <= lratio + 1e-12 && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::Domain("linear program is unbounded".into()));
            };
            self.pivot(r, c);
            *pivots += 1;
            if *pivots > cap {
                return Err(Error::SolverIterationCap {
                    phase,
                    iterations: *pivots,
                });
            }
        }
    }
}

/// Solves `lp` with at most `max_pivots` pivots across both phases.
pub fn solve(lp: &LinearProgram, max_pivots: usize) -> Result<LpSolution> {
    let n = lp.objective.len();
    let m = lp.constraints.len();
    for c in &lp.constraints {
        if c.coeffs.len() != n {
            return Err(Error::Domain(format!(
                "constraint has {} coefficients, expected {n}",
                c.coeffs.len()
            )));
        }
    }

    // Normalize to non-negative right-hand sides.
    let rows: Vec<(Vec<f64>, Relation, f64)> = lp
        .constraints
        .iter()
        .map(|c| {
            if c.rhs < 0.0 {
                let flipped = match c.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (c.coeffs.iter().map(|v| -v).collect(), flipped, -c.rhs)
            } else {
                (c.coeffs.clone(), c.relation, c.rhs)
            }
        })
        .collect();

    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let cols = n + n_slack + n_art;
    let art_start = n + n_slack;
    let w = cols + 1;

    let mut a = vec![0.0; m * w];
    let mut basis = vec![0; m];
    let mut slack = n;
    let mut art = art_start;
    for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        a[i * w..i * w + n].copy_from_slice(coeffs);
        a[i * w + cols] = *rhs;
        match rel {
            Relation::Le => {
                a[i * w + slack] = 1.0;
                basis[i] = slack;
                slack += 1;
            }
            Relation::Ge => {
                a[i * w + slack] = -1.0;
                slack += 1;
                a[i * w + art] = 1.0;
                basis[i] = art;
                art += 1;
            }
            Relation::Eq => {
                a[i * w + art] = 1.0;
                basis[i] = art;
                art += 1;
            }
        }
    }

    let mut t = Tableau {
        cols,
        a,
        obj: Vec::new(),
        basis,
    };
    let mut pivots = 0;

    if n_art > 0 {
        let mut costs = vec![0.0; cols];
        for c in costs.iter_mut().skip(art_start) {
            *c = -1.0;
        }
        t.set_costs(&costs);
        t.optimize(|_| true, &mut pivots, max_pivots, 1)?;
        let infeasibility = t.obj[cols];
        let scale = rows.iter().map(|r| r.2).fold(1.0, f64::max);
        if infeasibility > FEAS_EPS * scale {
            return Err(Error::Infeasible);
        }
        // Drive zero-level artificials out of the basis.
        let mut r = 0;
        while r < t.rows() {
            if t.basis[r] >= art_start {
                let col = (0..art_start).find(|&j| t.at(r, j).abs() > PIVOT_EPS);
                match col {
                    Some(j) => {
                        t.pivot(r, j);
                        pivots += 1;
                    }
                    None => {
                        // Redundant row.
                        let w = t.width();
                        t.a.drain(r * w..(r + 1) * w);
                        t.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }

    let mut costs = vec![0.0; cols];
    costs[..n].copy_from_slice(&lp.objective);
    t.set_costs(&costs);
    t.optimize(|j| j < art_start, &mut pivots, max_pivots, 2)?;

    let mut x = vec![0.0; n];
    for r in 0..t.rows() {
        if t.basis[r] < n {
            x[t.basis[r]] = t.rhs(r);
        }
    }
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        x,
        objective,
        pivots,
    })
}
