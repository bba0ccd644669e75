//! Dense strictly convex QP with inequality constraints,
//!
//! ```text
//!     minimize    1/2 z' P z + q' z
//!     subject to  A z <= b
//! ```
//!
//! solved by a two-phase primal active-set method. Problems here are tiny
//! (a handful of variables and rows), so every linear system is formed and
//! factorized densely.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest row count accepted by [`enumerate_oracle`].
pub const MAX_ENUMERATION_ROWS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z: DVector<f64>,
    pub lambda: DVector<f64>,
    pub status: QpStatus,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }
}

impl QpProblem {
    pub fn new(p: DMatrix<f64>, q: DVector<f64>, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let prob = QpProblem { p, q, a, b };
        prob.check_dimensions()?;
        Ok(prob)
    }

    /// Problem without constraints.
    pub fn unconstrained(p: DMatrix<f64>, q: DVector<f64>) -> Result<Self> {
        let n = q.len();
        Self::new(p, q, DMatrix::zeros(0, n), DVector::zeros(0))
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    fn check_dimensions(&self) -> Result<()> {
        let n = self.q.len();
        if self.p.nrows() != n || self.p.ncols() != n {
            return Err(Error::Dimension(format!(
                "P is {}x{}, expected {n}x{n}",
                self.p.nrows(),
                self.p.ncols()
            )));
        }
        if self.a.ncols() != n || self.a.nrows() != self.b.len() {
            return Err(Error::Dimension(format!(
                "A is {}x{}, b has {} rows, n = {n}",
                self.a.nrows(),
                self.a.ncols(),
                self.b.len()
            )));
        }
        let scale = self.p.amax().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (self.p[(i, j)] - self.p[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::Dimension("P is not symmetric".into()));
                }
            }
        }
        Ok(())
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.p * z)) + self.q.dot(z)
    }

    /// KKT tolerance `1e-8 * max(1, |q|)`.
    pub fn tolerance(&self) -> f64 {
        1e-8 * self.q.norm().max(1.0)
    }
}

/// Max-norm residuals of the KKT conditions at `(sol.z, sol.lambda)`.
pub fn kkt_residuals(prob: &QpProblem, sol: &QpSolution) -> KktResiduals {
    let grad = &prob.p * &sol.z + &prob.q + prob.a.transpose() * &sol.lambda;
    let slack = &prob.a * &sol.z - &prob.b;
    let stationarity = grad.amax();
    let primal = slack.iter().fold(0.0f64, |acc, &s| acc.max(s));
    let dual = sol.lambda.iter().fold(0.0f64, |acc, &l| acc.max(-l));
    let complementarity = sol
        .lambda
        .iter()
        .zip(slack.iter())
        .fold(0.0f64, |acc, (l, s)| acc.max((l * s).abs()));
    KktResiduals {
        stationarity,
        primal,
        dual,
        complementarity,
    }
}

/// Solves the equality-constrained KKT system
/// `[P A_w'; A_w 0] [x; nu] = [rhs; eq_rhs]`.
fn solve_kkt(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    working: &[usize],
    rhs: &DVector<f64>,
    eq_rhs: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = p.nrows();
    let w = working.len();
    let mut k = DMatrix::zeros(n + w, n + w);
    k.view_mut((0, 0), (n, n)).copy_from(p);
    for (r, &i) in working.iter().enumerate() {
        for j in 0..n {
            k[(n + r, j)] = a[(i, j)];
            k[(j, n + r)] = a[(i, j)];
        }
    }
    let mut full = DVector::zeros(n + w);
    full.rows_mut(0, n).copy_from(rhs);
    full.rows_mut(n, w).copy_from(eq_rhs);
    let lu = k.lu();
    let sol = lu.solve(&full)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((sol.rows(0, n).into_owned(), sol.rows(n, w).into_owned()))
}

fn independent_of(a: &DMatrix<f64>, working: &[usize], row: usize) -> bool {
    let n = a.ncols();
    let mut m = DMatrix::zeros(working.len() + 1, n);
    for (r, &i) in working.iter().enumerate() {
        m.set_row(r, &a.row(i));
    }
    m.set_row(working.len(), &a.row(row));
    let sv = m.singular_values();
    let top = sv.max();
    top > 0.0 && sv.iter().all(|&s| s > 1e-10 * top)
}

struct ActiveSetResult {
    z: DVector<f64>,
    lambda: DVector<f64>,
    converged: bool,
    iterations: usize,
}

/// Primal active-set iterations from a feasible `z`.
///
/// Blocking ties enter in lowest-row order; the most negative multiplier
/// (lowest row on ties) leaves.
fn primal_active_set(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    mut z: DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> ActiveSetResult {
    let n = q.len();
    let m = b.len();
    let mut working: Vec<usize> = Vec::new();
    for i in 0..m {
        if working.len() < n
            && (a.row(i).dot(&z.transpose()) - b[i]).abs() <= tol
            && independent_of(a, &working, i)
        {
            working.push(i);
        }
    }

    for iter in 0..max_iter {
        let g = p * &z + q;
        let Some((step, nu)) = solve_kkt(p, a, &working, &(-&g), &DVector::zeros(working.len()))
        else {
            break;
        };
        // a full working set pins z to a vertex, so any step is roundoff
        if working.len() >= n || step.amax() <= 1e-10 * (1.0 + z.amax()) {
            // stationary on the working set; nu are the multipliers
            let mut leave: Option<(usize, f64)> = None;
            for (r, &l) in nu.iter().enumerate() {
                if l < -tol && leave.is_none_or(|(_, best)| l < best) {
                    leave = Some((r, l));
                }
            }
            match leave {
                None => {
                    let mut lambda = DVector::zeros(m);
                    for (r, &i) in working.iter().enumerate() {
                        lambda[i] = nu[r].max(0.0);
                    }
                    return ActiveSetResult {
                        z,
                        lambda,
                        converged: true,
                        iterations: iter + 1,
                    };
                }
                Some((r, _)) => {
                    working.remove(r);
                }
            }
            continue;
        }

        let mut alpha = 1.0;
        let mut blocking = None;
        for i in 0..m {
            if working.contains(&i) {
                continue;
            }
            let ap = a.row(i).dot(&step.transpose());
            if ap > 1e-14 * (1.0 + step.amax()) {
                let room = (b[i] - a.row(i).dot(&z.transpose())).max(0.0);
                // a row spanned by the working set only blocks through roundoff
                if room <= tol && !independent_of(a, &working, i) {
                    continue;
                }
                let ratio = room / ap;
                if ratio < alpha {
                    alpha = ratio;
                    blocking = Some(i);
                }
            }
        }
        z += alpha * &step;
        if let Some(i) = blocking {
            let pos = working.partition_point(|&w| w < i);
            working.insert(pos, i);
        }
    }
    ActiveSetResult {
        lambda: DVector::zeros(m),
        z,
        converged: false,
        iterations: max_iter,
    }
}

/// Row and column scalings `(r, c)` that bring every row and column of
/// `diag(r) A diag(c)` to unit max-norm (Ruiz equilibration).
fn equilibrate(a: &DMatrix<f64>) -> (DVector<f64>, DVector<f64>) {
    let (m, n) = a.shape();
    let mut r = DVector::from_element(m, 1.0);
    let mut c = DVector::from_element(n, 1.0);
    let mut s = a.clone();
    for _ in 0..20 {
        let mut worst = 0.0f64;
        for i in 0..m {
            let mx = s.row(i).amax();
            if mx > 0.0 {
                let f = 1.0 / mx.sqrt();
                s.row_mut(i).scale_mut(f);
                r[i] *= f;
                worst = worst.max((1.0 - mx).abs());
            }
        }
        for j in 0..n {
            let mx = s.column(j).amax();
            if mx > 0.0 {
                let f = 1.0 / mx.sqrt();
                s.column_mut(j).scale_mut(f);
                c[j] *= f;
                worst = worst.max((1.0 - mx).abs());
            }
        }
        if worst < 1e-3 {
            break;
        }
    }
    (r, c)
}

/// Finds a point satisfying `A z <= b + tol` near `z0`, or `None` if the
/// rows are inconsistent.
///
/// Works on the equilibrated rows `diag(r) A diag(c)`, which have the same
/// feasible set up to the change of variables `z = diag(c) w`. Minimizes
/// `1/2 |w - w0|^2 + 1/2 t^2 + M t` over `A w - t <= b, t >= 0` starting from
/// the feasible pair `(w0, max violation)`. For `M` above the multiplier norm
/// of the projection problem the optimum has `t = 0`, so `M` is raised
/// geometrically until that happens.
fn feasibility_phase(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    z0: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Option<DVector<f64>> {
    let n = z0.len();
    let m = b.len();
    let (r, c) = equilibrate(a);
    let a_s = DMatrix::from_fn(m, n, |i, j| r[i] * a[(i, j)] * c[j]);
    let b_s = b.component_mul(&r);
    let w0 = z0.component_div(&c);

    let p1 = DMatrix::identity(n + 1, n + 1);
    let mut a1 = DMatrix::zeros(m + 1, n + 1);
    a1.view_mut((0, 0), (m, n)).copy_from(&a_s);
    for i in 0..m {
        a1[(i, n)] = -1.0;
    }
    a1[(m, n)] = -1.0;
    let mut b1 = DVector::zeros(m + 1);
    b1.rows_mut(0, m).copy_from(&b_s);

    let violation = (&a_s * &w0 - &b_s).max().max(0.0);
    let scale = 1.0 + w0.amax() + b_s.amax() + violation;
    let inner_tol = 1e-3 * tol / (1.0 + r.amax());
    let mut penalty = 10.0 * scale;
    for _ in 0..12 {
        let mut q1 = DVector::zeros(n + 1);
        q1.rows_mut(0, n).copy_from(&(-&w0));
        q1[n] = penalty;
        let mut start = DVector::zeros(n + 1);
        start.rows_mut(0, n).copy_from(&w0);
        start[n] = violation;
        let res = primal_active_set(&p1, &q1, &a1, &b1, start, inner_tol, max_iter);
        if res.converged {
            let z = res.z.rows(0, n).component_mul(&c);
            if (a * &z - b).max() <= tol {
                return Some(z);
            }
        }
        penalty *= 100.0;
    }
    None
}

/// Cholesky check of positive definiteness.
fn check_pd(p: &DMatrix<f64>) -> Result<()> {
    if p.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(())
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Iteration cap is `iteration_factor * (n + m)`.
    pub iteration_factor: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            iteration_factor: 50,
        }
    }
}

pub fn solve_qp(prob: &QpProblem) -> Result<QpSolution> {
    solve_qp_with(prob, &SolverOptions::default())
}

pub fn solve_qp_with(prob: &QpProblem, opts: &SolverOptions) -> Result<QpSolution> {
    prob.check_dimensions()?;
    check_pd(&prob.p)?;
    let n = prob.n();
    let m = prob.m();
    let tol = prob.tolerance();
    let max_iter = opts.iteration_factor.max(1) * (n + m).max(1);

    let chol = prob.p.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let z0 = chol.solve(&(-&prob.q));

    let feasible0 = m == 0 || (&prob.a * &z0 - &prob.b).max() <= tol;
    let start = if feasible0 {
        z0
    } else {
        match feasibility_phase(&prob.a, &prob.b, &z0, tol, max_iter) {
            Some(z) => z,
            None => {
                return Ok(QpSolution {
                    objective: f64::NAN,
                    z: z0,
                    lambda: DVector::zeros(m),
                    status: QpStatus::Infeasible,
                    iterations: 0,
                })
            }
        }
    };

    let res = primal_active_set(&prob.p, &prob.q, &prob.a, &prob.b, start, tol, max_iter);
    let status = if res.converged {
        QpStatus::Optimal
    } else {
        QpStatus::Degenerate
    };
    Ok(QpSolution {
        objective: prob.objective(&res.z),
        z: res.z,
        lambda: res.lambda,
        status,
        iterations: res.iterations,
    })
}

/// Brute-force solve over every candidate active set.
pub fn enumerate_oracle(prob: &QpProblem) -> Result<QpSolution> {
    prob.check_dimensions()?;
    check_pd(&prob.p)?;
    let n = prob.n();
    let m = prob.m();
    if m > MAX_ENUMERATION_ROWS {
        return Err(Error::TooManyConstraints {
            m,
            max: MAX_ENUMERATION_ROWS,
        });
    }
    let tol = prob.tolerance();
    let mut best: Option<QpSolution> = None;
    for mask in 0u32..(1u32 << m) {
        let set: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        if set.len() > n {
            continue;
        }
        let eq_rhs = DVector::from_iterator(set.len(), set.iter().map(|&i| prob.b[i]));
        let Some((z, nu)) = solve_kkt(&prob.p, &prob.a, &set, &(-&prob.q), &eq_rhs) else {
            continue;
        };
        if set.len() > 1 && !independent_of(&prob.a, &set[..set.len() - 1], set[set.len() - 1]) {
            continue;
        }
        if nu.iter().any(|&l| l < -tol) {
            continue;
        }
        if (&prob.a * &z - &prob.b).iter().any(|&s| s > tol) {
            continue;
        }
        let objective = prob.objective(&z);
        if best.as_ref().is_none_or(|b| objective < b.objective) {
            let mut lambda = DVector::zeros(m);
            for (r, &i) in set.iter().enumerate() {
                lambda[i] = nu[r].max(0.0);
            }
            best = Some(QpSolution {
                z,
                lambda,
                status: QpStatus::Optimal,
                objective,
                iterations: 0,
            });
        }
    }
    Ok(best.unwrap_or_else(|| QpSolution {
        z: DVector::zeros(n),
        lambda: DVector::zeros(m),
        status: QpStatus::Infeasible,
        objective: f64::NAN,
        iterations: 0,
    }))
}
