//! Finite-dimensional solving of the discretized primal: weighted-sum and
//! ε-constraint scalarizations via an augmented-Lagrangian outer loop with
//! a preconditioned limited-memory quasi-Newton inner loop.
//!
//! Discretization: decision variables are the node values of x (interior
//! nodes in fixed-zero mode, all nodes with natural boundaries, the single
//! point x ∈ Rⁿ for static problems). Constraints are the integrands g
//! collocated at every node, plus the ε-constraint rows, plus — in
//! fixed-zero mode — the two discrete-derivative boundary rows per
//! component as linear equality constraints.
//!
//! The square-root objective terms are smoothed as sqrt(xᵀBx + μ²) with μ
//! halved every outer iteration from 1e-2 down to 1e-8; multiplier recovery
//! restores the exact nonsmooth optimality conditions afterwards.
//!
//! Inequality constraints use the standard shifted squared-hinge form:
//! ψ(c) = (max(0, ν + ρc)² − ν²) / 2ρ with update ν ← max(0, ν + ρc).
//!
//! The inner loop is L-BFGS whose initial matrix is the inverse of the
//! discrete H² Gram matrix W + DᵀWD + (D²)ᵀWD² (per component). Without
//! this the ẍ-dependent problems condition like h⁻⁴ and no first-order
//! method reaches collocation-level stationarity.

use crate::grid::{self, TimeGrid, Trajectory};
use crate::linalg::{self, Matrix};
use crate::problem::{primal_objective, BoundaryKind, PrimalPoint, ProblemSpec};
use crate::report::{Report, Sense};
use crate::{expr, Error, Result};
use std::collections::VecDeque;

/// Solver options; defaults give reproducible desk-scale runs.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// KKT tolerance on the density-scaled gradient.
    pub tol: f64,
    /// Constraint violation tolerance.
    pub feas_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Initial sqrt-term smoothing parameter.
    pub mu_start: f64,
    /// Final smoothing parameter.
    pub mu_floor: f64,
    /// L-BFGS memory.
    pub memory: usize,
    /// Initial penalty parameter.
    pub rho0: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-6,
            feas_tol: 1e-6,
            max_outer: 50,
            max_inner: 500,
            mu_start: 1e-2,
            mu_floor: 1e-8,
            memory: 20,
            rho0: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Infeasible,
}

/// One outer augmented-Lagrangian iteration.
#[derive(Debug, Clone, Copy)]
pub struct OuterRecord {
    pub rho: f64,
    pub violation: f64,
    /// Whether the iterate improved the best constraint violation so far.
    pub accepted: bool,
}

/// Result of a trajectory-mode solve.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x: PrimalPoint,
    /// True (unsmoothed) objective values at `x`.
    pub objective: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub history: Vec<OuterRecord>,
}

impl SolveResult {
    pub fn require_converged(&self) -> Result<&Self> {
        match self.status {
            SolveStatus::Converged => Ok(self),
            SolveStatus::MaxIter => Err(Error::MaxIterExceeded { outer: 0, inner: self.iterations }),
            SolveStatus::Infeasible => {
                Err(Error::InfeasibleStart("solver finished infeasible".into()))
            }
        }
    }
}

/// Result of a static-mode solve.
#[derive(Debug, Clone)]
pub struct StaticSolveResult {
    pub x: Vec<f64>,
    pub objective: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub history: Vec<OuterRecord>,
}

// ---------------------------------------------------------------------------
// NLP instance
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum Disc {
    Trajectory {
        grid: TimeGrid,
        /// Node indices that are decision variables.
        free: Vec<usize>,
        fixed_zero: bool,
    },
    Static,
}

/// The discretized scalarized problem: objective and constraint callables
/// with gradients assembled from exact expression partials chained through
/// the grid operators.
pub struct NlpInstance {
    pub spec: ProblemSpec,
    disc: Disc,
    /// Objective = Σ wᵢ (∫ fⁱ + smoothed sqrt term).
    weights: Vec<f64>,
    /// (objective index, bound): smoothed objective i <= bound.
    eps_rows: Vec<(usize, f64)>,
}

/// Per-expression cached values and partials over all nodes.
struct Parts {
    val: Vec<f64>,
    px: Vec<f64>,
    pxd: Vec<f64>,
    pxdd: Vec<f64>,
}

struct Cache {
    f: Vec<Parts>,
    g: Vec<Parts>,
    /// Gradient of the smoothed sqrt term (w.r.t. x only), nn x n per objective.
    sq_gx: Vec<Vec<f64>>,
    /// Smoothed objective values Σ_k ω_k (fⁱ + sqrtⁱ).
    smooth_obj: Vec<f64>,
    /// Discrete ẋ rows at both ends (equality constraint values), fixed-zero only.
    eq_vals: Vec<f64>,
}

impl NlpInstance {
    pub fn trajectory(
        spec: &ProblemSpec,
        grid: &TimeGrid,
        weights: &[f64],
        eps_rows: Vec<(usize, f64)>,
    ) -> Result<Self> {
        check_weights(weights, spec.p, false)?;
        let fixed_zero = spec.boundary == BoundaryKind::FixedZero;
        let free: Vec<usize> = if fixed_zero {
            (1..grid.n_nodes - 1).collect()
        } else {
            (0..grid.n_nodes).collect()
        };
        Ok(NlpInstance {
            spec: spec.clone(),
            disc: Disc::Trajectory { grid: grid.clone(), free, fixed_zero },
            weights: weights.to_vec(),
            eps_rows,
        })
    }

    pub fn fixed_point(
        spec: &ProblemSpec,
        weights: &[f64],
        eps_rows: Vec<(usize, f64)>,
    ) -> Result<Self> {
        if !spec.is_static() {
            return Err(Error::NotStatic(format!(
                "`{}` cannot be solved as a static problem",
                spec.name
            )));
        }
        check_weights(weights, spec.p, false)?;
        Ok(NlpInstance {
            spec: spec.clone(),
            disc: Disc::Static,
            weights: weights.to_vec(),
            eps_rows,
        })
    }

    pub fn dim(&self) -> usize {
        match &self.disc {
            Disc::Trajectory { free, .. } => free.len() * self.spec.n,
            Disc::Static => self.spec.n,
        }
    }

    fn grad_scale(&self) -> f64 {
        match &self.disc {
            Disc::Trajectory { grid, .. } => grid.h,
            Disc::Static => 1.0,
        }
    }

    fn n_ineq_nodes(&self) -> usize {
        match &self.disc {
            Disc::Trajectory { grid, .. } => grid.n_nodes,
            Disc::Static => 1,
        }
    }

    fn n_eq(&self) -> usize {
        match &self.disc {
            Disc::Trajectory { fixed_zero: true, .. } => 2 * self.spec.n,
            _ => 0,
        }
    }

    /// Embed the decision vector into a full trajectory (or static point).
    pub fn unpack(&self, v: &[f64]) -> Trajectory {
        match &self.disc {
            Disc::Trajectory { grid, free, .. } => {
                let mut tr = Trajectory::zeros(grid, self.spec.n);
                for (slot, &k) in free.iter().enumerate() {
                    for c in 0..self.spec.n {
                        tr.set(k, c, v[slot * self.spec.n + c]);
                    }
                }
                tr
            }
            Disc::Static => {
                // Single-node carrier grid; only row 0 is meaningful.
                let grid = grid::make_grid(0.0, 1.0, 5).unwrap();
                let mut tr = Trajectory::zeros(&grid, self.spec.n);
                for c in 0..self.spec.n {
                    tr.set(0, c, v[c]);
                }
                tr
            }
        }
    }

    fn pack(&self, tr: &Trajectory) -> Vec<f64> {
        match &self.disc {
            Disc::Trajectory { free, .. } => {
                let mut v = vec![0.0; self.dim()];
                for (slot, &k) in free.iter().enumerate() {
                    for c in 0..self.spec.n {
                        v[slot * self.spec.n + c] = tr.get(k, c);
                    }
                }
                v
            }
            Disc::Static => tr.row(0).to_vec(),
        }
    }

    fn quad_weights(&self) -> Vec<f64> {
        match &self.disc {
            Disc::Trajectory { grid, .. } => grid.quad_weights(),
            Disc::Static => vec![1.0],
        }
    }

    fn evaluate(&self, v: &[f64], mu: f64) -> Result<Cache> {
        let n = self.spec.n;
        let (points, x_traj): (Vec<(f64, Vec<f64>, Vec<f64>, Vec<f64>)>, Trajectory) =
            match &self.disc {
                Disc::Trajectory { grid, .. } => {
                    let x = self.unpack(v);
                    let xd = grid::derivative(&x);
                    let xdd = grid::second_derivative(&x);
                    let pts = (0..grid.n_nodes)
                        .map(|k| {
                            (
                                grid.nodes[k],
                                x.row(k).to_vec(),
                                xd.row(k).to_vec(),
                                xdd.row(k).to_vec(),
                            )
                        })
                        .collect();
                    (pts, x)
                }
                Disc::Static => {
                    let x = self.unpack(v);
                    let zeros = vec![0.0; n];
                    (vec![(0.0, v.to_vec(), zeros.clone(), zeros)], x)
                }
            };
        let nn = points.len();

        let eval_parts = |e: &expr::Expr| -> Result<Parts> {
            let mut parts = Parts {
                val: vec![0.0; nn],
                px: vec![0.0; nn * n],
                pxd: vec![0.0; nn * n],
                pxdd: vec![0.0; nn * n],
            };
            for (k, (t, x, xd, xdd)) in points.iter().enumerate() {
                let ep = expr::EvalPoint::new(*t, x, xd, xdd);
                let (val, px, pxd, pxdd) = expr::value_and_partials(e, &ep)?;
                parts.val[k] = val;
                parts.px[k * n..(k + 1) * n].copy_from_slice(&px);
                parts.pxd[k * n..(k + 1) * n].copy_from_slice(&pxd);
                parts.pxdd[k * n..(k + 1) * n].copy_from_slice(&pxdd);
            }
            Ok(parts)
        };

        let f: Vec<Parts> = self.spec.f.iter().map(&eval_parts).collect::<Result<_>>()?;
        let g: Vec<Parts> = self.spec.g.iter().map(&eval_parts).collect::<Result<_>>()?;

        let mut sq_vals_all = Vec::with_capacity(self.spec.p);
        let mut sq_gx = Vec::with_capacity(self.spec.p);
        for i in 0..self.spec.p {
            let mut vals = vec![0.0; nn];
            let mut gx = vec![0.0; nn * n];
            for (k, (_, x, _, _)) in points.iter().enumerate() {
                let bx = self.spec.b[i].matvec(x);
                let q = linalg::dot(x, &bx).max(0.0);
                let root = (q + mu * mu).sqrt();
                vals[k] = root;
                if root > 0.0 {
                    for c in 0..n {
                        gx[k * n + c] = bx[c] / root;
                    }
                }
            }
            sq_vals_all.push(vals);
            sq_gx.push(gx);
        }

        let w = self.quad_weights();
        let mut smooth_obj = vec![0.0; self.spec.p];
        for i in 0..self.spec.p {
            smooth_obj[i] = (0..nn)
                .map(|k| w[k] * (f[i].val[k] + sq_vals_all[i][k]))
                .sum();
        }

        let mut eq_vals = Vec::new();
        if let Disc::Trajectory { grid, fixed_zero: true, .. } = &self.disc {
            let xd = grid::derivative(&x_traj);
            for c in 0..n {
                eq_vals.push(xd.get(0, c));
                eq_vals.push(xd.get(grid.n_nodes - 1, c));
            }
        }

        Ok(Cache { f, g, sq_gx, smooth_obj, eq_vals })
    }

    /// Smoothed scalarized objective value.
    pub fn objective_value(&self, v: &[f64], mu: f64) -> Result<f64> {
        let cache = self.evaluate(v, mu)?;
        Ok(self
            .weights
            .iter()
            .zip(&cache.smooth_obj)
            .map(|(w, o)| w * o)
            .sum())
    }

    /// Gradient of the smoothed scalarized objective.
    pub fn objective_grad(&self, v: &[f64], mu: f64) -> Result<Vec<f64>> {
        let cache = self.evaluate(v, mu)?;
        let zero_hinges = vec![0.0; self.spec.m * self.n_ineq_nodes()];
        let zero_eps = vec![0.0; self.eps_rows.len()];
        let zero_eq = vec![0.0; self.n_eq()];
        Ok(self.assemble_grad(&cache, &zero_hinges, &zero_eps, &zero_eq))
    }

    /// Inequality constraint values: node-collocated g rows then ε rows.
    fn ineq_values(&self, cache: &Cache) -> Vec<f64> {
        let nn = self.n_ineq_nodes();
        let mut c = Vec::with_capacity(self.spec.m * nn + self.eps_rows.len());
        for j in 0..self.spec.m {
            for k in 0..nn {
                c.push(cache.g[j].val[k]);
            }
        }
        for (i, bound) in &self.eps_rows {
            c.push(cache.smooth_obj[*i] - bound);
        }
        c
    }

    /// Gradient of weighted objective + Σ hinge·∇c + Σ τ·∇c_eq, assembled in
    /// one pass: accumulate per-node weights into (x, ẋ, ẍ) slots, then pull
    /// the ẋ and ẍ slots back through Dᵀ.
    fn assemble_grad(
        &self,
        cache: &Cache,
        hinges: &[f64],
        eps_hinges: &[f64],
        eq_taus: &[f64],
    ) -> Vec<f64> {
        let n = self.spec.n;
        let nn = self.n_ineq_nodes();
        let w = self.quad_weights();

        // Effective objective weight per objective: scalarization weight
        // plus any ε-row hinge on that objective.
        let mut eff_w = self.weights.clone();
        for (slot, (i, _)) in self.eps_rows.iter().enumerate() {
            eff_w[*i] += eps_hinges[slot];
        }

        let mut acc_x = vec![0.0; nn * n];
        let mut acc_xd = vec![0.0; nn * n];
        let mut acc_xdd = vec![0.0; nn * n];
        for k in 0..nn {
            for i in 0..self.spec.p {
                let wi = eff_w[i] * w[k];
                if wi == 0.0 {
                    continue;
                }
                for c in 0..n {
                    acc_x[k * n + c] += wi * (cache.f[i].px[k * n + c] + cache.sq_gx[i][k * n + c]);
                    acc_xd[k * n + c] += wi * cache.f[i].pxd[k * n + c];
                    acc_xdd[k * n + c] += wi * cache.f[i].pxdd[k * n + c];
                }
            }
            for j in 0..self.spec.m {
                let hjk = hinges[j * nn + k];
                if hjk == 0.0 {
                    continue;
                }
                for c in 0..n {
                    acc_x[k * n + c] += hjk * cache.g[j].px[k * n + c];
                    acc_xd[k * n + c] += hjk * cache.g[j].pxd[k * n + c];
                    acc_xdd[k * n + c] += hjk * cache.g[j].pxdd[k * n + c];
                }
            }
        }

        match &self.disc {
            Disc::Static => {
                // No derivative chaining: gradient is the x slot itself.
                acc_x
            }
            Disc::Trajectory { grid, free, fixed_zero } => {
                let mut full = vec![0.0; grid.n_nodes * n];
                for c in 0..n {
                    let col_x: Vec<f64> = (0..nn).map(|k| acc_x[k * n + c]).collect();
                    let col_xd: Vec<f64> = (0..nn).map(|k| acc_xd[k * n + c]).collect();
                    let col_xdd: Vec<f64> = (0..nn).map(|k| acc_xdd[k * n + c]).collect();
                    let gx1 = grid::apply_d_transpose(&col_xd, grid);
                    let gx2 =
                        grid::apply_d_transpose(&grid::apply_d_transpose(&col_xdd, grid), grid);
                    for k in 0..nn {
                        full[k * n + c] += col_x[k] + gx1[k] + gx2[k];
                    }
                }
                // Equality rows: τ · ∇(Dx)_end — rows 0 and N-1 of D.
                if *fixed_zero {
                    let nn_full = grid.n_nodes;
                    let row_a = grid::d_row(0, nn_full, grid.h);
                    let row_b = grid::d_row(nn_full - 1, nn_full, grid.h);
                    for c in 0..n {
                        let tau_a = eq_taus[2 * c];
                        let tau_b = eq_taus[2 * c + 1];
                        for (node, wgt) in &row_a {
                            full[node * n + c] += tau_a * wgt;
                        }
                        for (node, wgt) in &row_b {
                            full[node * n + c] += tau_b * wgt;
                        }
                    }
                }
                let mut out = vec![0.0; free.len() * n];
                for (slot, &k) in free.iter().enumerate() {
                    out[slot * n..(slot + 1) * n].copy_from_slice(&full[k * n..(k + 1) * n]);
                }
                out
            }
        }
    }

    /// Build the per-component H² preconditioner restricted to free nodes.
    fn build_preconditioner(&self) -> Option<Matrix> {
        let Disc::Trajectory { grid, free, .. } = &self.disc else {
            return None;
        };
        let nn = grid.n_nodes;
        let w = grid.quad_weights();
        let nf = free.len();
        let mut m = Matrix::zeros(nf, nf);
        for (col_slot, &col_node) in free.iter().enumerate() {
            let mut e = vec![0.0; nn];
            e[col_node] = 1.0;
            let de = grid::apply_d(&e, grid);
            let d2e = grid::apply_d(&de, grid);
            // (W + DᵀWD + D²ᵀWD²) e
            let mut we: Vec<f64> = e.iter().zip(&w).map(|(a, wk)| a * wk).collect();
            let wde: Vec<f64> = de.iter().zip(&w).map(|(a, wk)| a * wk).collect();
            let wd2e: Vec<f64> = d2e.iter().zip(&w).map(|(a, wk)| a * wk).collect();
            let t1 = grid::apply_d_transpose(&wde, grid);
            let t2 = grid::apply_d_transpose(&grid::apply_d_transpose(&wd2e, grid), grid);
            for k in 0..nn {
                we[k] += t1[k] + t2[k];
            }
            for (row_slot, &row_node) in free.iter().enumerate() {
                m[(row_slot, col_slot)] = we[row_node];
            }
        }
        Some(m)
    }
}

fn check_weights(weights: &[f64], p: usize, allow_zero: bool) -> Result<()> {
    if weights.len() != p {
        return Err(Error::Domain(format!(
            "expected {p} weights, got {}",
            weights.len()
        )));
    }
    let sum: f64 = weights.iter().sum();
    let min = weights.iter().cloned().fold(f64::INFINITY, f64::min);
    if (!allow_zero && min <= 0.0) || (allow_zero && min < 0.0) {
        return Err(Error::Domain("weights must be positive".into()));
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("weights must sum to 1, got {sum}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Augmented Lagrangian + L-BFGS
// ---------------------------------------------------------------------------

struct Multipliers {
    /// Collocated inequality rows (m x nodes), then ε rows appended.
    nu: Vec<f64>,
    eps: Vec<f64>,
    eq: Vec<f64>,
}

struct AlEval {
    value: f64,
    grad: Vec<f64>,
}

fn al_value_grad(
    inst: &NlpInstance,
    v: &[f64],
    mu: f64,
    mults: &Multipliers,
    rho: f64,
) -> Result<(AlEval, Cache)> {
    let cache = inst.evaluate(v, mu)?;
    let nn = inst.n_ineq_nodes();
    let cvals = inst.ineq_values(&cache);
    let n_node_rows = inst.spec.m * nn;

    let mut value: f64 = inst
        .weights
        .iter()
        .zip(&cache.smooth_obj)
        .map(|(w, o)| w * o)
        .sum();

    let mut hinges = vec![0.0; n_node_rows];
    for r in 0..n_node_rows {
        let shifted = mults.nu[r] + rho * cvals[r];
        let hinge = shifted.max(0.0);
        hinges[r] = hinge;
        value += (hinge * hinge - mults.nu[r] * mults.nu[r]) / (2.0 * rho);
    }
    let mut eps_hinges = vec![0.0; inst.eps_rows.len()];
    for (slot, c) in cvals[n_node_rows..].iter().enumerate() {
        let shifted = mults.eps[slot] + rho * c;
        let hinge = shifted.max(0.0);
        eps_hinges[slot] = hinge;
        value += (hinge * hinge - mults.eps[slot] * mults.eps[slot]) / (2.0 * rho);
    }
    let mut eq_taus = vec![0.0; cache.eq_vals.len()];
    for (q, c) in cache.eq_vals.iter().enumerate() {
        eq_taus[q] = mults.eq[q] + rho * c;
        value += mults.eq[q] * c + 0.5 * rho * c * c;
    }

    let grad = inst.assemble_grad(&cache, &hinges, &eps_hinges, &eq_taus);
    Ok((AlEval { value, grad }, cache))
}

/// Minimize the augmented Lagrangian with L-BFGS. The preconditioner is
/// applied per state component through the initial Hessian slot of the
/// two-loop recursion.
#[allow(clippy::too_many_arguments)]
fn lbfgs_minimize(
    inst: &NlpInstance,
    v: &mut Vec<f64>,
    mu: f64,
    mults: &Multipliers,
    rho: f64,
    grad_tol: f64,
    max_iter: usize,
    precond: Option<&Matrix>,
    memory: usize,
) -> Result<usize> {
    let n = inst.spec.n;
    let apply_precond = |g: &[f64]| -> Vec<f64> {
        match precond {
            None => g.to_vec(),
            Some(chol) => {
                let nf = chol.rows;
                let mut out = vec![0.0; g.len()];
                for c in 0..n {
                    let col: Vec<f64> = (0..nf).map(|s| g[s * n + c]).collect();
                    let sol = linalg::cholesky_solve(chol, &col);
                    for s in 0..nf {
                        out[s * n + c] = sol[s];
                    }
                }
                out
            }
        }
    };

    let (mut cur, _) = al_value_grad(inst, v, mu, mults, rho)?;
    let mut s_hist: VecDeque<Vec<f64>> = VecDeque::new();
    let mut y_hist: VecDeque<Vec<f64>> = VecDeque::new();
    let mut rho_hist: VecDeque<f64> = VecDeque::new();

    let mut iters = 0;
    while iters < max_iter {
        if linalg::norm_inf(&cur.grad) <= grad_tol {
            break;
        }
        // Two-loop recursion with H0 = gamma * M^{-1}.
        let mut q = cur.grad.clone();
        let mut alphas = Vec::with_capacity(s_hist.len());
        for idx in (0..s_hist.len()).rev() {
            let a = rho_hist[idx] * linalg::dot(&s_hist[idx], &q);
            for (qv, yv) in q.iter_mut().zip(&y_hist[idx]) {
                *qv -= a * yv;
            }
            alphas.push(a);
        }
        let mut r = apply_precond(&q);
        if let (Some(s_last), Some(y_last)) = (s_hist.back(), y_hist.back()) {
            let my = apply_precond(y_last);
            let denom = linalg::dot(y_last, &my);
            if denom > 0.0 {
                let gamma = linalg::dot(s_last, y_last) / denom;
                r.iter_mut().for_each(|x| *x *= gamma);
            }
        }
        alphas.reverse();
        for idx in 0..s_hist.len() {
            let beta = rho_hist[idx] * linalg::dot(&y_hist[idx], &r);
            let a = alphas[idx];
            for (rv, sv) in r.iter_mut().zip(&s_hist[idx]) {
                *rv += (a - beta) * sv;
            }
        }
        let mut dir: Vec<f64> = r.iter().map(|x| -x).collect();
        let mut slope = linalg::dot(&cur.grad, &dir);
        if slope >= 0.0 {
            // Not a descent direction; drop memory and fall back.
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            dir = apply_precond(&cur.grad).iter().map(|x| -x).collect();
            slope = linalg::dot(&cur.grad, &dir);
            if slope >= 0.0 {
                break;
            }
        }

        // Backtracking Armijo line search.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = v.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            match al_value_grad(inst, &trial, mu, mults, rho) {
                Ok((eval, _)) if eval.value <= cur.value + 1e-4 * step * slope => {
                    accepted = Some((trial, eval));
                    break;
                }
                _ => step *= 0.5,
            }
        }
        iters += 1;
        let Some((trial, eval)) = accepted else {
            break; // line search failed at machine-level steps
        };
        let s: Vec<f64> = trial.iter().zip(v.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = eval.grad.iter().zip(&cur.grad).map(|(a, b)| a - b).collect();
        let sy = linalg::dot(&s, &y);
        if sy > 1e-12 * linalg::norm2(&s) * linalg::norm2(&y) {
            if s_hist.len() == memory {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
            rho_hist.push_back(1.0 / sy);
            s_hist.push_back(s);
            y_hist.push_back(y);
        }
        *v = trial;
        cur = eval;
    }
    Ok(iters)
}

struct RawSolve {
    v: Vec<f64>,
    kkt_residual: f64,
    iterations: usize,
    status: SolveStatus,
    history: Vec<OuterRecord>,
}

fn solve_nlp(inst: &NlpInstance, v0: Vec<f64>, opts: &SolveOptions) -> Result<RawSolve> {
    if v0.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("start point contains non-finite values".into()));
    }
    let mut v = v0;
    let precond = inst.build_preconditioner();
    let chol = match precond {
        Some(m) => Some(linalg::cholesky(&m)?),
        None => None,
    };
    let grad_scale = inst.grad_scale();
    let final_grad_tol = opts.tol * grad_scale;

    let nn = inst.n_ineq_nodes();
    let mut mults = Multipliers {
        nu: vec![0.0; inst.spec.m * nn],
        eps: vec![0.0; inst.eps_rows.len()],
        eq: vec![0.0; inst.n_eq()],
    };
    let mut rho = opts.rho0;
    let mut mu = opts.mu_start;
    let mut history = Vec::new();
    let mut total_inner = 0;
    let mut best_viol = f64::INFINITY;
    let mut status = SolveStatus::MaxIter;
    let mut kkt = f64::INFINITY;

    for outer in 0..opts.max_outer {
        let inner_tol = (1e-2 * 0.25f64.powi(outer as i32) * grad_scale).max(final_grad_tol);
        total_inner += lbfgs_minimize(
            inst,
            &mut v,
            mu,
            &mults,
            rho,
            inner_tol,
            opts.max_inner,
            chol.as_ref(),
            opts.memory,
        )?;

        let cache = inst.evaluate(&v, mu)?;
        let cvals = inst.ineq_values(&cache);
        let n_node_rows = inst.spec.m * nn;
        let mut viol = 0.0f64;
        for c in &cvals {
            viol = viol.max(*c);
        }
        viol = viol.max(0.0);
        for c in &cache.eq_vals {
            viol = viol.max(c.abs());
        }

        // Multiplier updates.
        for r in 0..n_node_rows {
            mults.nu[r] = (mults.nu[r] + rho * cvals[r]).max(0.0);
        }
        for (slot, c) in cvals[n_node_rows..].iter().enumerate() {
            mults.eps[slot] = (mults.eps[slot] + rho * c).max(0.0);
        }
        for (q, c) in cache.eq_vals.iter().enumerate() {
            mults.eq[q] += rho * c;
        }

        let accepted = viol <= best_viol;
        if accepted {
            best_viol = viol;
        }
        history.push(OuterRecord { rho, violation: viol, accepted });

        // Stationarity of the Lagrangian with the updated multipliers.
        let (post, post_cache) = al_value_grad(inst, &v, mu, &mults, rho)?;
        let scaled_grad = linalg::norm_inf(&post.grad) / grad_scale;
        let mut comp = 0.0f64;
        let post_c = inst.ineq_values(&post_cache);
        for r in 0..n_node_rows {
            comp = comp.max((mults.nu[r] * post_c[r]).abs());
        }
        for (slot, c) in post_c[n_node_rows..].iter().enumerate() {
            comp = comp.max((mults.eps[slot] * c).abs());
        }
        kkt = scaled_grad.max(viol);

        let comp_tol = 10.0 * opts.tol * (1.0 + linalg::norm_inf(&mults.nu));
        if scaled_grad <= opts.tol
            && viol <= opts.feas_tol
            && mu <= opts.mu_floor * 1.0001
            && comp <= comp_tol
        {
            status = SolveStatus::Converged;
            break;
        }

        // Penalty growth: monotone, only when feasibility stalls.
        if viol > opts.feas_tol && viol > 0.25 * best_viol {
            rho = (rho * 4.0).min(1e12);
        }
        mu = (mu * 0.5).max(opts.mu_floor);
    }

    if status != SolveStatus::Converged {
        let stuck_infeasible = best_viol > opts.feas_tol.max(1e-3);
        if stuck_infeasible {
            status = SolveStatus::Infeasible;
        }
    }

    Ok(RawSolve { v, kkt_residual: kkt, iterations: total_inner, status, history })
}

// ---------------------------------------------------------------------------
// Public solve entry points
// ---------------------------------------------------------------------------

/// Minimize Σ wᵢ·(objective i) over the discretized feasible set.
pub fn solve_weighted(
    spec: &ProblemSpec,
    grid: &TimeGrid,
    weights: &[f64],
    x0: Option<&Trajectory>,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    let inst = NlpInstance::trajectory(spec, grid, weights, Vec::new())?;
    run_trajectory(spec, inst, x0, opts)
}

/// Minimize objective `k` subject to the primal constraints plus
/// objective_i <= bounds[..] for i != k (Lemma-1 scalarization).
pub fn solve_epsilon_constraint(
    spec: &ProblemSpec,
    grid: &TimeGrid,
    k: usize,
    bounds: &[f64],
    x0: Option<&Trajectory>,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    let inst = epsilon_instance(spec, Some(grid), k, bounds)?;
    run_trajectory(spec, inst, x0, opts)
}

fn epsilon_instance(
    spec: &ProblemSpec,
    grid: Option<&TimeGrid>,
    k: usize,
    bounds: &[f64],
) -> Result<NlpInstance> {
    if k >= spec.p {
        return Err(Error::Domain(format!(
            "objective index {k} out of range for p = {}",
            spec.p
        )));
    }
    if bounds.len() != spec.p - 1 {
        return Err(Error::Domain(format!(
            "expected {} bounds, got {}",
            spec.p - 1,
            bounds.len()
        )));
    }
    // Weight vector e_k: the minimized objective is k, the others enter
    // only through the ε rows.
    let mut weights = vec![0.0; spec.p];
    weights[k] = 1.0;
    let mut eps_rows = Vec::new();
    let mut b_iter = bounds.iter();
    for i in 0..spec.p {
        if i != k {
            eps_rows.push((i, *b_iter.next().unwrap()));
        }
    }
    let disc = match grid {
        Some(gr) => {
            let fixed_zero = spec.boundary == BoundaryKind::FixedZero;
            let free: Vec<usize> = if fixed_zero {
                (1..gr.n_nodes - 1).collect()
            } else {
                (0..gr.n_nodes).collect()
            };
            Disc::Trajectory { grid: gr.clone(), free, fixed_zero }
        }
        None => Disc::Static,
    };
    Ok(NlpInstance { spec: spec.clone(), disc, weights, eps_rows })
}

/// Uniform positive weights summing to one.
pub fn uniform_weights(p: usize) -> Vec<f64> {
    vec![1.0 / p as f64; p]
}

fn run_trajectory(
    spec: &ProblemSpec,
    inst: NlpInstance,
    x0: Option<&Trajectory>,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    let v0 = match x0 {
        Some(tr) => inst.pack(tr),
        None => vec![0.0; inst.dim()],
    };
    let raw = solve_nlp(&inst, v0, opts)?;
    let x = PrimalPoint::from_trajectory(inst.unpack(&raw.v));
    let objective = primal_objective(spec, &x)?;
    Ok(SolveResult {
        x,
        objective,
        kkt_residual: raw.kkt_residual,
        iterations: raw.iterations,
        status: raw.status,
        history: raw.history,
    })
}

/// Static-mode weighted solve: the decision vector is the single point x.
pub fn solve_weighted_static(
    spec: &ProblemSpec,
    weights: &[f64],
    x0: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<StaticSolveResult> {
    let inst = NlpInstance::fixed_point(spec, weights, Vec::new())?;
    run_static(spec, inst, x0, opts)
}

/// Static-mode ε-constraint solve.
pub fn solve_epsilon_constraint_static(
    spec: &ProblemSpec,
    k: usize,
    bounds: &[f64],
    x0: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<StaticSolveResult> {
    if !spec.is_static() {
        return Err(Error::NotStatic(spec.name.clone()));
    }
    let inst = epsilon_instance(spec, None, k, bounds)?;
    run_static(spec, inst, x0, opts)
}

fn run_static(
    spec: &ProblemSpec,
    inst: NlpInstance,
    x0: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<StaticSolveResult> {
    let v0 = match x0 {
        Some(x) => x.to_vec(),
        None => vec![0.0; inst.dim()],
    };
    let raw = solve_nlp(&inst, v0, opts)?;
    let primal = crate::dual::StaticPrimal { spec: spec.clone() };
    let objective = primal.objective(&raw.v)?;
    Ok(StaticSolveResult {
        x: raw.v,
        objective,
        kkt_residual: raw.kkt_residual,
        iterations: raw.iterations,
        status: raw.status,
        history: raw.history,
    })
}

// ---------------------------------------------------------------------------
// Efficiency certification and frontier sweeps
// ---------------------------------------------------------------------------

/// Result of the Lemma-1 efficiency certification.
#[derive(Debug, Clone)]
pub struct EfficiencyCheck {
    pub report: Report,
    /// Per-objective improvement found by the k-th scalarized solve.
    pub improvements: Vec<f64>,
    pub certified: bool,
}

/// Certify efficiency of a feasible point by solving the ε-constraint
/// problem P_k for every k with bounds fixed at the point's own objective
/// values; the point is efficient iff no solve improves objective k by more
/// than `tol` (ties at exactly `tol` count as efficient).
pub fn efficiency_check(
    spec: &ProblemSpec,
    grid: &TimeGrid,
    xbar: &PrimalPoint,
    tol: f64,
    opts: &SolveOptions,
) -> Result<EfficiencyCheck> {
    let base_obj = primal_objective(spec, xbar)?;
    let mut report = Report::new(format!("efficiency certificate on `{}`", spec.name));
    let mut improvements = Vec::with_capacity(spec.p);
    for k in 0..spec.p {
        let bounds: Vec<f64> = (0..spec.p).filter(|i| *i != k).map(|i| base_obj[i]).collect();
        let sol = solve_epsilon_constraint(spec, grid, k, &bounds, Some(&xbar.x), opts)?;
        let improvement = base_obj[k] - sol.objective[k];
        improvements.push(improvement);
        report.check_with_note(
            format!("improvement of objective {k}"),
            improvement,
            tol,
            Sense::Le,
            format!("solver status {:?}", sol.status),
        );
    }
    let certified = report.pass();
    Ok(EfficiencyCheck { report, improvements, certified })
}

/// Static-mode variant of [`efficiency_check`].
pub fn efficiency_check_static(
    spec: &ProblemSpec,
    xbar: &[f64],
    tol: f64,
    opts: &SolveOptions,
) -> Result<EfficiencyCheck> {
    let primal = crate::dual::StaticPrimal { spec: spec.clone() };
    let base_obj = primal.objective(xbar)?;
    let mut report = Report::new(format!("static efficiency certificate on `{}`", spec.name));
    let mut improvements = Vec::with_capacity(spec.p);
    for k in 0..spec.p {
        let bounds: Vec<f64> = (0..spec.p).filter(|i| *i != k).map(|i| base_obj[i]).collect();
        let sol = solve_epsilon_constraint_static(spec, k, &bounds, Some(xbar), opts)?;
        let improvement = base_obj[k] - sol.objective[k];
        improvements.push(improvement);
        report.check_with_note(
            format!("improvement of objective {k}"),
            improvement,
            tol,
            Sense::Le,
            format!("solver status {:?}", sol.status),
        );
    }
    let certified = report.pass();
    Ok(EfficiencyCheck { report, improvements, certified })
}

/// One weight vector of a sweep together with its outcome.
pub struct SweepEntry {
    pub weights: Vec<f64>,
    pub result: Result<SolveResult>,
}

/// Frontier sweep outcome; failed solves are recorded, not fatal.
pub struct SweepOutcome {
    pub entries: Vec<SweepEntry>,
}

impl SweepOutcome {
    /// Indices of entries that converged and are pairwise distinct in
    /// decision space (max-norm distance > `dedupe_tol`).
    pub fn distinct_indices(&self, dedupe_tol: f64) -> Vec<usize> {
        let mut kept: Vec<usize> = Vec::new();
        'outer: for (idx, e) in self.entries.iter().enumerate() {
            let Ok(sol) = &e.result else { continue };
            for &kidx in &kept {
                let prev = self.entries[kidx].result.as_ref().unwrap();
                if let Ok(d) = sol.x.x.max_distance(&prev.x.x) {
                    if d <= dedupe_tol {
                        continue 'outer;
                    }
                }
            }
            kept.push(idx);
        }
        kept
    }
}

/// Solve once per weight vector.
pub fn pareto_sweep(
    spec: &ProblemSpec,
    grid: &TimeGrid,
    weight_list: &[Vec<f64>],
    opts: &SolveOptions,
) -> SweepOutcome {
    let entries = weight_list
        .iter()
        .map(|w| SweepEntry {
            weights: w.clone(),
            result: solve_weighted(spec, grid, w, None, opts),
        })
        .collect();
    SweepOutcome { entries }
}

/// Evenly spaced interior weight grid for p = 2; for larger p a coarse
/// simplex lattice would be needed, which no catalog problem requires.
pub fn weight_grid(p: usize, count: usize) -> Vec<Vec<f64>> {
    assert!(count >= 1);
    if p == 1 {
        return vec![vec![1.0]];
    }
    assert_eq!(p, 2, "weight_grid only supports p <= 2");
    (0..count)
        .map(|i| {
            let w = (i + 1) as f64 / (count + 1) as f64;
            vec![w, 1.0 - w]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::linalg::Matrix;

    fn unconstrained_quadratic() -> ProblemSpec {
        ProblemSpec {
            name: "uq".into(),
            n: 1,
            p: 1,
            m: 1,
            f: vec![expr::parse("x0^2 / 2 + xd0^2 / 2", 1).unwrap()],
            b: vec![Matrix::zeros(1, 1)],
            g: vec![expr::parse("x0 - 100", 1).unwrap()],
            boundary: BoundaryKind::FixedZero,
        }
    }

    #[test]
    fn unconstrained_quadratic_minimizer_is_zero() {
        let spec = unconstrained_quadratic();
        let gr = make_grid(0.0, 1.0, 41).unwrap();
        let sol = solve_weighted(&spec, &gr, &[1.0], None, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Converged);
        assert!(sol.x.x.values.iter().all(|v| v.abs() < 1e-8));
        assert!(sol.kkt_residual <= 1e-6);
    }

    #[test]
    fn weight_validation() {
        let spec = unconstrained_quadratic();
        let gr = make_grid(0.0, 1.0, 21).unwrap();
        assert!(solve_weighted(&spec, &gr, &[0.5], None, &SolveOptions::default()).is_err());
    }

    #[test]
    fn objective_gradient_matches_finite_differences() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for name in ["P1", "P2", "P3"] {
            let spec = crate::catalog::builtin(name).unwrap().spec;
            let gr = make_grid(0.0, 1.0, 13).unwrap();
            let inst =
                NlpInstance::trajectory(&spec, &gr, &uniform_weights(spec.p), Vec::new()).unwrap();
            let dim = inst.dim();
            let mu = 1e-3;
            for _ in 0..50 {
                let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.4..0.4)).collect();
                let grad = inst.objective_grad(&v, mu).unwrap();
                // Probe a handful of random coordinates per point.
                for _ in 0..3 {
                    let idx = rng.gen_range(0..dim);
                    let h = 1e-6;
                    let mut vp = v.clone();
                    vp[idx] += h;
                    let mut vm = v.clone();
                    vm[idx] -= h;
                    let fd = (inst.objective_value(&vp, mu).unwrap()
                        - inst.objective_value(&vm, mu).unwrap())
                        / (2.0 * h);
                    let denom = fd.abs().max(grad[idx].abs()).max(1e-3);
                    assert!(
                        (grad[idx] - fd).abs() / denom < 1e-5,
                        "{name}: grad[{idx}] = {} vs fd {}",
                        grad[idx],
                        fd
                    );
                }
            }
        }
    }

    #[test]
    fn static_solver_finds_known_minimum() {
        // S1 objective 1 alone: min (x0-1)^2-ish with |x| term lands at (0.5, 0).
        let spec = crate::catalog::builtin("S1").unwrap().spec;
        let sol =
            solve_weighted_static(&spec, &[1.0 - 1e-9, 1e-9], None, &SolveOptions::default())
                .unwrap();
        assert_eq!(sol.status, SolveStatus::Converged);
        assert!((sol.x[0] - 0.5).abs() < 1e-4, "x = {:?}", sol.x);
        assert!(sol.x[1].abs() < 1e-4);
    }

    #[test]
    fn epsilon_constraint_reduces_to_weighted_for_p1() {
        // p = 1: no ε rows; identical problem to the weighted solve.
        let spec = unconstrained_quadratic();
        let gr = make_grid(0.0, 1.0, 21).unwrap();
        let a = solve_weighted(&spec, &gr, &[1.0], None, &SolveOptions::default()).unwrap();
        let b =
            solve_epsilon_constraint(&spec, &gr, 0, &[], None, &SolveOptions::default()).unwrap();
        assert!(a.x.x.max_distance(&b.x.x).unwrap() < 1e-10);
    }

    #[test]
    fn infeasible_epsilon_bounds_detected() {
        let spec = crate::catalog::builtin("P1").unwrap().spec;
        let gr = make_grid(0.0, 1.0, 21).unwrap();
        let mut opts = SolveOptions::default();
        opts.max_outer = 25;
        let sol = solve_epsilon_constraint(&spec, &gr, 0, &[-1e6], None, &opts).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
        assert!(sol.require_converged().is_err());
    }

    #[test]
    fn penalty_growth_monotone_and_accepted_violation_nonincreasing() {
        let spec = crate::catalog::builtin("P1").unwrap().spec;
        let gr = make_grid(0.0, 1.0, 41).unwrap();
        let sol =
            solve_weighted(&spec, &gr, &[0.5, 0.5], None, &SolveOptions::default()).unwrap();
        let mut prev_rho = 0.0;
        let mut prev_accepted = f64::INFINITY;
        for rec in &sol.history {
            assert!(rec.rho >= prev_rho, "penalty must grow monotonically");
            prev_rho = rec.rho;
            if rec.accepted {
                assert!(rec.violation <= prev_accepted + 1e-15);
                prev_accepted = rec.violation;
            }
        }
    }
}
