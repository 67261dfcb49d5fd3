//! The mixed-type dual: constraint partitions, dual objective, feasibility
//! and stationarity residuals, the Wolfe / Mond-Weir special cases, natural
//! boundary transversality and the static specialization.
//!
//! A dual candidate is (u, y, z¹..zᵖ, λ). The dual constraints checked here
//! are, in the order of the formulation: boundary conditions on u, the
//! stationarity equation
//!
//! ```text
//! Σᵢ λⁱ (fⁱ_x + Bⁱzⁱ) + Σⱼ yʲ gʲ_x − D(λᵀf_ẋ + yᵀg_ẋ) + D²(λᵀf_ẍ + yᵀg_ẍ) = 0
//! ```
//!
//! the per-block integral constraints Σ_{j∈J_α} ∫ yʲ gʲ dt >= 0 (α >= 1),
//! the normalization zⁱᵀBⁱzⁱ <= 1, y >= 0, and λ in the positive simplex.

use crate::expr::{self, EvalPoint};
use crate::grid::{self, Trajectory};
use crate::linalg;
use crate::problem::{
    primal_feasibility, primal_objective, quad_form, BoundaryKind, PrimalPoint, ProblemSpec,
};
use crate::report::{Report, Sense};
use crate::{Error, Result};

/// Feasibility gate used by the weak-duality check when the caller's
/// dominance tolerance is tighter than what discretization residuals can
/// meet (the stationarity residual of a recovered dual point is O(h²)).
pub const FEASIBILITY_GATE_TOL: f64 = 1e-4;

// ---------------------------------------------------------------------------
// Partition
// ---------------------------------------------------------------------------

/// Index sets J₀, …, J_r partitioning the constraint indices {0, …, m-1}.
///
/// Stored 0-based; the text form (`J0={1,3};J1={2}`) is 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub m: usize,
    sets: Vec<Vec<usize>>,
}

/// Which classical dual the partition induces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualClass {
    Wolfe,
    MondWeir,
    Mixed,
}

impl Partition {
    /// Build from 0-based index sets; validates disjoint cover of {0..m-1}.
    pub fn new(m: usize, sets: Vec<Vec<usize>>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidPartition("m must be at least 1".into()));
        }
        if sets.is_empty() {
            return Err(Error::InvalidPartition("need at least J0".into()));
        }
        let mut seen = vec![false; m];
        for (alpha, s) in sets.iter().enumerate() {
            for &j in s {
                if j >= m {
                    return Err(Error::InvalidPartition(format!(
                        "index {} in J{alpha} out of range for m = {m}",
                        j + 1
                    )));
                }
                if seen[j] {
                    return Err(Error::InvalidPartition(format!(
                        "index {} appears in two blocks",
                        j + 1
                    )));
                }
                seen[j] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!(
                "index {} not covered by any block",
                missing + 1
            )));
        }
        let mut sets = sets;
        for s in &mut sets {
            s.sort_unstable();
        }
        Ok(Partition { m, sets })
    }

    /// All constraints in the objective block: the Wolfe partition.
    pub fn wolfe(m: usize) -> Self {
        Partition::new(m, vec![(0..m).collect()]).expect("wolfe partition is always valid")
    }

    /// Empty objective block, everything in one integral block: Mond-Weir.
    pub fn mond_weir(m: usize) -> Self {
        Partition::new(m, vec![Vec::new(), (0..m).collect()])
            .expect("mond-weir partition is always valid")
    }

    pub fn j0(&self) -> &[usize] {
        &self.sets[0]
    }

    /// Number of integral blocks r (sets beyond J₀).
    pub fn r(&self) -> usize {
        self.sets.len() - 1
    }

    /// Block J_α for α in 0..=r.
    pub fn block(&self, alpha: usize) -> &[usize] {
        &self.sets[alpha]
    }

    /// Parse the 1-based text form `J0={1,3};J1={2};J2={}`.
    pub fn parse(text: &str, m: usize) -> Result<Self> {
        let mut sets: Vec<Vec<usize>> = Vec::new();
        for (pos, part) in text.split(';').enumerate() {
            let part = part.trim();
            let (key, body) = part.split_once('=').ok_or_else(|| {
                Error::InvalidPartition(format!("block `{part}` is not `Jk={{...}}`"))
            })?;
            let key = key.trim();
            let expect = format!("J{pos}");
            if key != expect {
                return Err(Error::InvalidPartition(format!(
                    "expected block `{expect}`, found `{key}`"
                )));
            }
            let body = body.trim();
            let inner = body
                .strip_prefix('{')
                .and_then(|s| s.strip_suffix('}'))
                .ok_or_else(|| {
                    Error::InvalidPartition(format!("block body `{body}` must be {{...}}"))
                })?;
            let mut indices = Vec::new();
            for tok in inner.split(',') {
                let tok = tok.trim();
                if tok.is_empty() {
                    continue;
                }
                let one_based: usize = tok.parse().map_err(|_| {
                    Error::InvalidPartition(format!("bad index `{tok}` in {key}"))
                })?;
                if one_based == 0 {
                    return Err(Error::InvalidPartition("indices are 1-based".into()));
                }
                indices.push(one_based - 1);
            }
            sets.push(indices);
        }
        Partition::new(m, sets)
    }

    /// 1-based text form.
    pub fn to_text(&self) -> String {
        self.sets
            .iter()
            .enumerate()
            .map(|(alpha, s)| {
                let inner = s
                    .iter()
                    .map(|j| (j + 1).to_string())
                    .collect::<Vec<_>>()
                    .join(",");
                format!("J{alpha}={{{inner}}}")
            })
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Wolfe iff J₀ covers everything; Mond-Weir iff J₀ is empty and a single
/// block carries all constraints; Mixed otherwise.
pub fn classify(part: &Partition) -> DualClass {
    if part.j0().len() == part.m {
        return DualClass::Wolfe;
    }
    if part.j0().is_empty() {
        let nonempty: Vec<&Vec<usize>> =
            part.sets[1..].iter().filter(|s| !s.is_empty()).collect();
        if nonempty.len() == 1 && nonempty[0].len() == part.m {
            return DualClass::MondWeir;
        }
    }
    DualClass::Mixed
}

// ---------------------------------------------------------------------------
// Dual points
// ---------------------------------------------------------------------------

/// Candidate feasible point of the mixed dual.
#[derive(Debug, Clone)]
pub struct DualPoint {
    /// Dual trajectory u (n components).
    pub u: Trajectory,
    /// Multiplier functions y (m components, nodewise).
    pub y: Trajectory,
    /// Auxiliary vectors z¹..zᵖ for the square-root terms (n components each).
    pub z: Vec<Trajectory>,
    /// Positive simplex weights over the objectives.
    pub lambda: Vec<f64>,
}

impl DualPoint {
    pub fn shape_check(&self, spec: &ProblemSpec) -> Result<()> {
        if self.u.dim != spec.n {
            return Err(Error::GridMismatch(format!(
                "u has {} components, expected n = {}",
                self.u.dim, spec.n
            )));
        }
        if self.y.dim != spec.m {
            return Err(Error::GridMismatch(format!(
                "y has {} components, expected m = {}",
                self.y.dim, spec.m
            )));
        }
        if self.z.len() != spec.p {
            return Err(Error::GridMismatch(format!(
                "{} z-vectors, expected p = {}",
                self.z.len(),
                spec.p
            )));
        }
        for (i, zi) in self.z.iter().enumerate() {
            if zi.dim != spec.n || !zi.grid.same_as(&self.u.grid) {
                return Err(Error::GridMismatch(format!("z[{i}] shape/grid mismatch")));
            }
        }
        if !self.y.grid.same_as(&self.u.grid) {
            return Err(Error::GridMismatch("y is not on u's grid".into()));
        }
        if self.lambda.len() != spec.p {
            return Err(Error::GridMismatch(format!(
                "lambda has {} entries, expected p = {}",
                self.lambda.len(),
                spec.p
            )));
        }
        Ok(())
    }

    fn primal_view(&self) -> PrimalPoint {
        PrimalPoint::from_trajectory(self.u.clone())
    }
}

// ---------------------------------------------------------------------------
// Dual objective (mixed + the two classical references)
// ---------------------------------------------------------------------------

/// Mixed-dual objective: component i is
/// ∫ fⁱ(t,u,u̇,ü) + uᵀBⁱzⁱ + Σ_{j∈J₀} yʲ gʲ(t,u,u̇,ü) dt.
pub fn dual_objective(spec: &ProblemSpec, part: &Partition, dp: &DualPoint) -> Result<Vec<f64>> {
    dp.shape_check(spec)?;
    dual_objective_with_indices(spec, dp, part.j0())
}

/// Wolfe-dual objective of the classical formulation:
/// ∫ fⁱ + uᵀBⁱzⁱ + y(t)ᵀ g(t,u,u̇,ü) dt, with the full inner product yᵀg.
///
/// Kept as an independent code path so the J₀ = M collapse of the mixed
/// dual can be checked against it.
pub fn wolfe_objective(spec: &ProblemSpec, dp: &DualPoint) -> Result<Vec<f64>> {
    dp.shape_check(spec)?;
    let up = dp.primal_view();
    let gr = up.grid().clone();
    let mut out = Vec::with_capacity(spec.p);
    for i in 0..spec.p {
        let mut vals = vec![0.0; gr.n_nodes];
        for k in 0..gr.n_nodes {
            let ep = up.eval_point(k);
            let f_val = expr::evaluate(&spec.f[i], &ep)?;
            let bz = linalg::dot(up.x.row(k), &spec.b[i].matvec(dp.z[i].row(k)));
            let mut ytg = 0.0;
            for j in 0..spec.m {
                ytg += dp.y.get(k, j) * expr::evaluate(&spec.g[j], &ep)?;
            }
            vals[k] = f_val + bz + ytg;
        }
        out.push(grid::integrate(&vals, &gr)?);
    }
    Ok(out)
}

/// Mond-Weir objective: ∫ fⁱ + uᵀBⁱzⁱ dt, no constraint terms.
pub fn mond_weir_objective(spec: &ProblemSpec, dp: &DualPoint) -> Result<Vec<f64>> {
    dp.shape_check(spec)?;
    dual_objective_with_indices(spec, dp, &[])
}

fn dual_objective_with_indices(
    spec: &ProblemSpec,
    dp: &DualPoint,
    j0: &[usize],
) -> Result<Vec<f64>> {
    let up = dp.primal_view();
    let gr = up.grid().clone();
    let mut out = Vec::with_capacity(spec.p);
    for i in 0..spec.p {
        let mut vals = vec![0.0; gr.n_nodes];
        for k in 0..gr.n_nodes {
            let ep = up.eval_point(k);
            let f_val = expr::evaluate(&spec.f[i], &ep)?;
            let bz = linalg::dot(up.x.row(k), &spec.b[i].matvec(dp.z[i].row(k)));
            let mut yg = 0.0;
            for &j in j0 {
                yg += dp.y.get(k, j) * expr::evaluate(&spec.g[j], &ep)?;
            }
            vals[k] = f_val + bz + yg;
        }
        out.push(grid::integrate(&vals, &gr)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Stationarity
// ---------------------------------------------------------------------------

/// Interior node range over which stationarity-type residuals are measured.
///
/// The one-sided closures of D (and their spread through D²) contaminate a
/// fixed band at each end of the grid, and in fixed-zero mode the boundary
/// rows carry the multipliers of the boundary conditions rather than the
/// stationarity identity, so that band is excluded.
pub fn interior_band(n_nodes: usize) -> std::ops::Range<usize> {
    let b = (n_nodes / 8).clamp(2, 5);
    b..n_nodes - b
}

/// Assemble the stationarity field
/// Σᵢ λⁱ(fⁱ_x + Bⁱzⁱ) + Σⱼ yʲgʲ_x − D(λᵀf_ẋ + yᵀg_ẋ) + D²(λᵀf_ẍ + yᵀg_ẍ)
/// as an n-component trajectory.
pub fn stationarity_field(spec: &ProblemSpec, dp: &DualPoint) -> Result<Trajectory> {
    dp.shape_check(spec)?;
    let up = dp.primal_view();
    let gr = up.grid().clone();
    let nn = gr.n_nodes;
    let n = spec.n;

    let mut term_x = Trajectory::zeros(&gr, n);
    let mut w_xd = Trajectory::zeros(&gr, n);
    let mut w_xdd = Trajectory::zeros(&gr, n);

    for k in 0..nn {
        let ep = up.eval_point(k);
        for i in 0..spec.p {
            let (_, fx, fxd, fxdd) = expr::value_and_partials(&spec.f[i], &ep)?;
            let bz = spec.b[i].matvec(dp.z[i].row(k));
            let li = dp.lambda[i];
            for c in 0..n {
                term_x.values[k * n + c] += li * (fx[c] + bz[c]);
                w_xd.values[k * n + c] += li * fxd[c];
                w_xdd.values[k * n + c] += li * fxdd[c];
            }
        }
        for j in 0..spec.m {
            let (_, gx, gxd, gxdd) = expr::value_and_partials(&spec.g[j], &ep)?;
            let yj = dp.y.get(k, j);
            for c in 0..n {
                term_x.values[k * n + c] += yj * gx[c];
                w_xd.values[k * n + c] += yj * gxd[c];
                w_xdd.values[k * n + c] += yj * gxdd[c];
            }
        }
    }

    let d_wxd = grid::derivative(&w_xd);
    let d2_wxdd = grid::second_derivative(&w_xdd);
    let mut field = term_x;
    for (f, (d1, d2)) in field
        .values
        .iter_mut()
        .zip(d_wxd.values.iter().zip(&d2_wxdd.values))
    {
        *f = *f - d1 + d2;
    }
    Ok(field)
}

/// Max norm of the stationarity field over the interior band.
pub fn stationarity_residual(spec: &ProblemSpec, dp: &DualPoint) -> Result<f64> {
    let field = stationarity_field(spec, dp)?;
    let band = interior_band(field.grid.n_nodes);
    let mut worst = 0.0f64;
    for k in band {
        worst = worst.max(linalg::norm_inf(field.row(k)));
    }
    Ok(worst)
}

/// Per-objective stationarity vectors used by the converse-duality rank
/// proxy: for each i,
/// (fⁱ_x + Bⁱzⁱ + Σ_{j∈J₀} yʲgʲ_x) − D(fⁱ_ẋ + Σ_{J₀} yʲgʲ_ẋ) + D²(fⁱ_ẍ + Σ_{J₀} yʲgʲ_ẍ).
pub fn objective_stationarity_fields(
    spec: &ProblemSpec,
    dp: &DualPoint,
    j0: &[usize],
) -> Result<Vec<Trajectory>> {
    dp.shape_check(spec)?;
    let up = dp.primal_view();
    let gr = up.grid().clone();
    let nn = gr.n_nodes;
    let n = spec.n;

    // Shared y-weighted constraint partials over J0.
    let mut yg_x = Trajectory::zeros(&gr, n);
    let mut yg_xd = Trajectory::zeros(&gr, n);
    let mut yg_xdd = Trajectory::zeros(&gr, n);
    for k in 0..nn {
        let ep = up.eval_point(k);
        for &j in j0 {
            let (_, gx, gxd, gxdd) = expr::value_and_partials(&spec.g[j], &ep)?;
            let yj = dp.y.get(k, j);
            for c in 0..n {
                yg_x.values[k * n + c] += yj * gx[c];
                yg_xd.values[k * n + c] += yj * gxd[c];
                yg_xdd.values[k * n + c] += yj * gxdd[c];
            }
        }
    }

    let mut fields = Vec::with_capacity(spec.p);
    for i in 0..spec.p {
        let mut t_x = yg_x.clone();
        let mut t_xd = yg_xd.clone();
        let mut t_xdd = yg_xdd.clone();
        for k in 0..nn {
            let ep = up.eval_point(k);
            let (_, fx, fxd, fxdd) = expr::value_and_partials(&spec.f[i], &ep)?;
            let bz = spec.b[i].matvec(dp.z[i].row(k));
            for c in 0..n {
                t_x.values[k * n + c] += fx[c] + bz[c];
                t_xd.values[k * n + c] += fxd[c];
                t_xdd.values[k * n + c] += fxdd[c];
            }
        }
        let d1 = grid::derivative(&t_xd);
        let d2 = grid::second_derivative(&t_xdd);
        let mut field = t_x;
        for (f, (a, b)) in field.values.iter_mut().zip(d1.values.iter().zip(&d2.values)) {
            *f = *f - a + b;
        }
        fields.push(field);
    }
    Ok(fields)
}

// ---------------------------------------------------------------------------
// Dual feasibility
// ---------------------------------------------------------------------------

/// Per-block values Σ_{j∈J_α} ∫ yʲ gʲ dt for α = 1..r.
pub fn partition_integral_sums(
    spec: &ProblemSpec,
    part: &Partition,
    dp: &DualPoint,
) -> Result<Vec<f64>> {
    let up = dp.primal_view();
    let gr = up.grid().clone();
    let mut sums = Vec::with_capacity(part.r());
    for alpha in 1..=part.r() {
        let mut vals = vec![0.0; gr.n_nodes];
        for k in 0..gr.n_nodes {
            let ep = up.eval_point(k);
            for &j in part.block(alpha) {
                vals[k] += dp.y.get(k, j) * expr::evaluate(&spec.g[j], &ep)?;
            }
        }
        sums.push(grid::integrate(&vals, &gr)?);
    }
    Ok(sums)
}

/// Full dual feasibility report: boundary rows (fixed-zero mode),
/// stationarity, block integral constraints, z-normalization, y >= 0 and
/// the λ simplex conditions.
pub fn dual_feasibility(
    spec: &ProblemSpec,
    part: &Partition,
    dp: &DualPoint,
    tol: f64,
) -> Result<Report> {
    dp.shape_check(spec)?;
    if part.m != spec.m {
        return Err(Error::InvalidPartition(format!(
            "partition over {} constraints, problem has {}",
            part.m, spec.m
        )));
    }
    let mut report = Report::new(format!(
        "dual feasibility of `{}` ({:?} partition)",
        spec.name,
        classify(part)
    ));
    let nn = dp.u.grid.n_nodes;

    if spec.boundary == BoundaryKind::FixedZero {
        let du = grid::derivative(&dp.u);
        report.check("|u(a)|", linalg::norm_inf(dp.u.row(0)), tol, Sense::AbsLe);
        report.check("|u(b)|", linalg::norm_inf(dp.u.row(nn - 1)), tol, Sense::AbsLe);
        report.check("|Du(a)|", linalg::norm_inf(du.row(0)), tol, Sense::AbsLe);
        report.check("|Du(b)|", linalg::norm_inf(du.row(nn - 1)), tol, Sense::AbsLe);
    }

    report.check(
        "stationarity residual",
        stationarity_residual(spec, dp)?,
        tol,
        Sense::AbsLe,
    );

    // (4): block integrals are one-sided; quadrature noise must not reject.
    let sums = partition_integral_sums(spec, part, dp)?;
    for (alpha, s) in sums.iter().enumerate() {
        report.check(
            format!("block integral J{} sum", alpha + 1),
            *s,
            -tol,
            Sense::Ge,
        );
    }

    let mut z_excess = f64::NEG_INFINITY;
    for (i, z) in dp.z.iter().enumerate() {
        for k in 0..nn {
            z_excess = z_excess.max(quad_form(z.row(k), &spec.b[i]) - 1.0);
        }
    }
    report.check("max zᵀBz - 1", z_excess, tol, Sense::Le);

    let y_min = dp
        .y
        .values
        .iter()
        .fold(f64::INFINITY, |acc, v| acc.min(*v));
    report.check("min y", y_min, -tol, Sense::Ge);

    let lambda_min = dp.lambda.iter().cloned().fold(f64::INFINITY, f64::min);
    report.check("min lambda", lambda_min, 0.0, Sense::Ge);
    let sum: f64 = dp.lambda.iter().sum();
    report.check("|lambda sum - 1|", (sum - 1.0).abs(), tol, Sense::AbsLe);

    Ok(report)
}

// ---------------------------------------------------------------------------
// Weak duality
// ---------------------------------------------------------------------------

/// Check the weak-duality conclusion on one primal/dual pair.
///
/// Computes Δᵢ = primalᵢ(x) − dualᵢ(dp). The theorem forbids the dual value
/// vector from dominating the primal one, so a violation is flagged iff
/// Δᵢ <= tol for every i and Δ_k < −tol for some k. Feasibility of both
/// points is gated at `max(tol, FEASIBILITY_GATE_TOL)` — the recovered dual
/// stationarity residual is O(h²) and must not mask a dominance check run
/// at a tighter tolerance.
pub fn weak_duality_check(
    spec: &ProblemSpec,
    part: &Partition,
    x: &PrimalPoint,
    dp: &DualPoint,
    tol: f64,
) -> Result<Report> {
    let gate = tol.max(FEASIBILITY_GATE_TOL);
    let pf = primal_feasibility(spec, x, gate)?;
    if !pf.pass() {
        return Err(Error::InfeasibleInput(format!(
            "primal point fails feasibility at tol {gate:.1e}"
        )));
    }
    let df = dual_feasibility(spec, part, dp, gate)?;
    if !df.pass() {
        return Err(Error::InfeasibleInput(format!(
            "dual point fails feasibility at tol {gate:.1e}"
        )));
    }

    let pv = primal_objective(spec, x)?;
    let dv = dual_objective(spec, part, dp)?;
    let mut report = Report::new(format!("weak duality on `{}`", spec.name));
    let mut all_le = true;
    let mut some_lt = false;
    for i in 0..spec.p {
        let delta = pv[i] - dv[i];
        report.info(format!("delta[{i}] = primal - dual"), delta);
        if delta > tol {
            all_le = false;
        }
        if delta < -tol {
            some_lt = true;
        }
    }
    let violated = all_le && some_lt;
    report.check(
        "dominance violation",
        if violated { 1.0 } else { 0.0 },
        0.5,
        Sense::Le,
    );
    Ok(report)
}

// ---------------------------------------------------------------------------
// Natural boundary: transversality
// ---------------------------------------------------------------------------

/// Endpoint residuals of the natural-boundary dual constraints: for each
/// objective i, |fⁱ_ẋ + Σ_{J₀} yʲgʲ_ẋ| and |fⁱ_ẍ + Σ_{J₀} yʲgʲ_ẍ| at both
/// interval ends.
pub fn transversality_residual(
    spec: &ProblemSpec,
    part: &Partition,
    dp: &DualPoint,
) -> Result<Report> {
    if spec.boundary != BoundaryKind::Natural {
        return Err(Error::WrongBoundaryKind(format!(
            "transversality applies to natural-boundary problems; `{}` is {}",
            spec.name,
            spec.boundary.as_str()
        )));
    }
    dp.shape_check(spec)?;
    let up = dp.primal_view();
    let nn = up.grid().n_nodes;
    let mut report = Report::new(format!("transversality residuals of `{}`", spec.name));
    for (end_name, k) in [("a", 0usize), ("b", nn - 1)] {
        let ep = up.eval_point(k);
        for i in 0..spec.p {
            let (_, _, fxd, fxdd) = expr::value_and_partials(&spec.f[i], &ep)?;
            let mut vxd = fxd;
            let mut vxdd = fxdd;
            for &j in part.j0() {
                let (_, _, gxd, gxdd) = expr::value_and_partials(&spec.g[j], &ep)?;
                let yj = dp.y.get(k, j);
                for c in 0..spec.n {
                    vxd[c] += yj * gxd[c];
                    vxdd[c] += yj * gxdd[c];
                }
            }
            report.info(
                format!("|f{i}_xd + y g_xd| at {end_name}"),
                linalg::norm_inf(&vxd),
            );
            report.info(
                format!("|f{i}_xdd + y g_xdd| at {end_name}"),
                linalg::norm_inf(&vxdd),
            );
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Static specialization (§ nonlinear programming)
// ---------------------------------------------------------------------------

/// Primal evaluator of the static pair: integrals collapse to a single
/// evaluation.
#[derive(Debug, Clone)]
pub struct StaticPrimal {
    pub spec: ProblemSpec,
}

/// Dual evaluator of the static pair; stationarity drops all D terms.
#[derive(Debug, Clone)]
pub struct StaticDual {
    pub spec: ProblemSpec,
    pub part: Partition,
}

fn static_eval_point<'a>(x: &'a [f64], zeros: &'a [f64]) -> EvalPoint<'a> {
    EvalPoint::new(0.0, x, zeros, zeros)
}

impl StaticPrimal {
    pub fn objective(&self, x: &[f64]) -> Result<Vec<f64>> {
        let zeros = vec![0.0; self.spec.n];
        let ep = static_eval_point(x, &zeros);
        (0..self.spec.p)
            .map(|i| {
                Ok(expr::evaluate(&self.spec.f[i], &ep)?
                    + crate::problem::sqrt_term(x, &self.spec.b[i]))
            })
            .collect()
    }

    pub fn feasibility(&self, x: &[f64], tol: f64) -> Result<Report> {
        let zeros = vec![0.0; self.spec.n];
        let ep = static_eval_point(x, &zeros);
        let mut report = Report::new(format!("static primal feasibility of `{}`", self.spec.name));
        for j in 0..self.spec.m {
            report.check(
                format!("g[{j}]"),
                expr::evaluate(&self.spec.g[j], &ep)?,
                tol,
                Sense::Le,
            );
        }
        Ok(report)
    }
}

impl StaticDual {
    /// Component i: fⁱ(u) + uᵀBⁱzⁱ + Σ_{j∈J₀} yʲgʲ(u).
    pub fn objective(&self, u: &[f64], y: &[f64], z: &[Vec<f64>], _lambda: &[f64]) -> Result<Vec<f64>> {
        let zeros = vec![0.0; self.spec.n];
        let ep = static_eval_point(u, &zeros);
        let mut out = Vec::with_capacity(self.spec.p);
        for i in 0..self.spec.p {
            let mut v = expr::evaluate(&self.spec.f[i], &ep)?
                + linalg::dot(u, &self.spec.b[i].matvec(&z[i]));
            for &j in self.part.j0() {
                v += y[j] * expr::evaluate(&self.spec.g[j], &ep)?;
            }
            out.push(v);
        }
        Ok(out)
    }

    /// |Σᵢ λⁱ(fⁱ_u + Bⁱzⁱ) + Σⱼ yʲ gʲ_u|_∞ — no D terms in the static pair.
    pub fn stationarity_residual(
        &self,
        u: &[f64],
        y: &[f64],
        z: &[Vec<f64>],
        lambda: &[f64],
    ) -> Result<f64> {
        let zeros = vec![0.0; self.spec.n];
        let ep = static_eval_point(u, &zeros);
        let mut acc = vec![0.0; self.spec.n];
        for i in 0..self.spec.p {
            let (_, fx, _, _) = expr::value_and_partials(&self.spec.f[i], &ep)?;
            let bz = self.spec.b[i].matvec(&z[i]);
            for c in 0..self.spec.n {
                acc[c] += lambda[i] * (fx[c] + bz[c]);
            }
        }
        for j in 0..self.spec.m {
            let (_, gx, _, _) = expr::value_and_partials(&self.spec.g[j], &ep)?;
            for c in 0..self.spec.n {
                acc[c] += y[j] * gx[c];
            }
        }
        Ok(linalg::norm_inf(&acc))
    }

    /// Static dual feasibility: stationarity, per-block sums Σ yʲgʲ(u) >= 0,
    /// zᵀBz <= 1, y >= 0, λ in the positive simplex.
    pub fn feasibility(
        &self,
        u: &[f64],
        y: &[f64],
        z: &[Vec<f64>],
        lambda: &[f64],
        tol: f64,
    ) -> Result<Report> {
        let zeros = vec![0.0; self.spec.n];
        let ep = static_eval_point(u, &zeros);
        let mut report = Report::new(format!("static dual feasibility of `{}`", self.spec.name));
        report.check(
            "stationarity residual",
            self.stationarity_residual(u, y, z, lambda)?,
            tol,
            Sense::AbsLe,
        );
        for alpha in 1..=self.part.r() {
            let mut s = 0.0;
            for &j in self.part.block(alpha) {
                s += y[j] * expr::evaluate(&self.spec.g[j], &ep)?;
            }
            report.check(format!("block sum J{alpha}"), s, -tol, Sense::Ge);
        }
        let mut z_excess = f64::NEG_INFINITY;
        for (i, zi) in z.iter().enumerate() {
            z_excess = z_excess.max(quad_form(zi, &self.spec.b[i]) - 1.0);
        }
        report.check("max zᵀBz - 1", z_excess, tol, Sense::Le);
        report.check(
            "min y",
            y.iter().cloned().fold(f64::INFINITY, f64::min),
            -tol,
            Sense::Ge,
        );
        report.check(
            "min lambda",
            lambda.iter().cloned().fold(f64::INFINITY, f64::min),
            0.0,
            Sense::Ge,
        );
        let sum: f64 = lambda.iter().sum();
        report.check("|lambda sum - 1|", (sum - 1.0).abs(), tol, Sense::AbsLe);
        Ok(report)
    }
}

/// Split a static problem into its (VP)₁ / (Mix D)₁ evaluators.
pub fn static_duality_pair(
    spec: &ProblemSpec,
    part: &Partition,
) -> Result<(StaticPrimal, StaticDual)> {
    if !spec.is_static() {
        return Err(Error::NotStatic(format!(
            "`{}` references t, xd or xdd",
            spec.name
        )));
    }
    if part.m != spec.m {
        return Err(Error::InvalidPartition(
            "partition size does not match problem".into(),
        ));
    }
    Ok((
        StaticPrimal { spec: spec.clone() },
        StaticDual { spec: spec.clone(), part: part.clone() },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::linalg::Matrix;

    #[test]
    fn classify_examples() {
        let m = 3;
        let wolfe = Partition::parse("J0={1,2,3}", m).unwrap();
        assert_eq!(classify(&wolfe), DualClass::Wolfe);
        let mw = Partition::parse("J0={};J1={1,2,3}", m).unwrap();
        assert_eq!(classify(&mw), DualClass::MondWeir);
        let mixed = Partition::parse("J0={1};J1={2,3}", m).unwrap();
        assert_eq!(classify(&mixed), DualClass::Mixed);
        // Split blocks are mixed even with empty J0.
        let split = Partition::parse("J0={};J1={1};J2={2,3}", m).unwrap();
        assert_eq!(classify(&split), DualClass::Mixed);
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::parse("J0={1};J1={1,2}", 2).is_err()); // overlap
        assert!(Partition::parse("J0={1}", 2).is_err()); // missing 2
        assert!(Partition::parse("J0={1,4}", 3).is_err()); // out of range
        assert!(Partition::parse("J1={1}", 1).is_err()); // must start at J0
        assert!(Partition::parse("J0={1};J1={}", 1).is_ok()); // empty block fine
        let p = Partition::parse("J0={1,3};J1={2};J2={}", 3).unwrap();
        assert_eq!(p.to_text(), "J0={1,3};J1={2};J2={}");
        assert_eq!(p.j0(), &[0, 2]);
    }

    fn trivial_spec() -> ProblemSpec {
        // f = xd^2/2, g = x0 - 1, B = 0: every stationarity term vanishes at 0.
        ProblemSpec {
            name: "trivial".into(),
            n: 1,
            p: 1,
            m: 1,
            f: vec![expr::parse("xd0^2 / 2", 1).unwrap()],
            b: vec![Matrix::zeros(1, 1)],
            g: vec![expr::parse("x0 - 1", 1).unwrap()],
            boundary: BoundaryKind::FixedZero,
        }
    }

    fn zero_dual_point(spec: &ProblemSpec, n_nodes: usize) -> DualPoint {
        let gr = make_grid(0.0, 1.0, n_nodes).unwrap();
        DualPoint {
            u: Trajectory::zeros(&gr, spec.n),
            y: Trajectory::zeros(&gr, spec.m),
            z: (0..spec.p).map(|_| Trajectory::zeros(&gr, spec.n)).collect(),
            lambda: vec![1.0 / spec.p as f64; spec.p],
        }
    }

    #[test]
    fn stationarity_zero_on_trivial_point() {
        let spec = trivial_spec();
        let dp = zero_dual_point(&spec, 41);
        assert!(stationarity_residual(&spec, &dp).unwrap() < 1e-13);
    }

    #[test]
    fn dual_feasibility_trivial_and_bad_lambda() {
        let spec = trivial_spec();
        let part = Partition::wolfe(1);
        let dp = zero_dual_point(&spec, 41);
        let rep = dual_feasibility(&spec, &part, &dp, 1e-8).unwrap();
        assert!(rep.pass(), "{rep}");

        let mut bad = dp.clone();
        bad.lambda = vec![0.5];
        let rep = dual_feasibility(&spec, &part, &bad, 1e-8).unwrap();
        assert!(!rep.pass());
        assert!(!rep.get("|lambda sum - 1|").unwrap().pass);
    }

    #[test]
    fn dual_objective_zero_case_and_mondweir_reduction() {
        let spec = trivial_spec();
        let dp = zero_dual_point(&spec, 41);
        let wolfe = Partition::wolfe(1);
        let obj = dual_objective(&spec, &wolfe, &dp).unwrap();
        assert_eq!(obj, vec![0.0]);

        // With J0 empty the mixed objective must equal the Mond-Weir one.
        let mw = Partition::mond_weir(1);
        let mixed = dual_objective(&spec, &mw, &dp).unwrap();
        let reference = mond_weir_objective(&spec, &dp).unwrap();
        assert_eq!(mixed, reference);
    }

    #[test]
    fn transversality_requires_natural() {
        let spec = trivial_spec();
        let part = Partition::wolfe(1);
        let dp = zero_dual_point(&spec, 41);
        assert!(matches!(
            transversality_residual(&spec, &part, &dp),
            Err(Error::WrongBoundaryKind(_))
        ));
    }

    #[test]
    fn transversality_constant_partial() {
        // f = xd0: the xd-partial is identically 1 at both endpoints.
        let spec = ProblemSpec {
            name: "linear-xd".into(),
            n: 1,
            p: 1,
            m: 1,
            f: vec![expr::parse("xd0", 1).unwrap()],
            b: vec![Matrix::zeros(1, 1)],
            g: vec![expr::parse("x0 - 1", 1).unwrap()],
            boundary: BoundaryKind::Natural,
        };
        let part = Partition::wolfe(1);
        let dp = zero_dual_point(&spec, 41);
        let rep = transversality_residual(&spec, &part, &dp).unwrap();
        assert_eq!(rep.get("|f0_xd + y g_xd| at a").unwrap().value, 1.0);
        assert_eq!(rep.get("|f0_xd + y g_xd| at b").unwrap().value, 1.0);
        assert_eq!(rep.get("|f0_xdd + y g_xdd| at a").unwrap().value, 0.0);
    }

    #[test]
    fn static_pair_requires_static_expressions() {
        let spec = trivial_spec(); // uses xd0
        assert!(matches!(
            static_duality_pair(&spec, &Partition::wolfe(1)),
            Err(Error::NotStatic(_))
        ));
    }

    #[test]
    fn static_primal_evaluates_pointwise() {
        let spec = ProblemSpec {
            name: "static-toy".into(),
            n: 2,
            p: 2,
            m: 1,
            f: vec![
                expr::parse("x0^2 + x1^2", 2).unwrap(),
                expr::parse("x0 - x1", 2).unwrap(),
            ],
            b: vec![Matrix::identity(2), Matrix::zeros(2, 2)],
            g: vec![expr::parse("x0 + x1 - 2", 2).unwrap()],
            boundary: BoundaryKind::Natural,
        };
        let (primal, dual) = static_duality_pair(&spec, &Partition::wolfe(1)).unwrap();
        let obj = primal.objective(&[0.0, 0.0]).unwrap();
        assert_eq!(obj, vec![0.0, 0.0]);
        let obj = primal.objective(&[3.0, 4.0]).unwrap();
        assert_eq!(obj, vec![25.0 + 5.0, -1.0]);
        assert!(primal.feasibility(&[0.0, 0.0], 1e-9).unwrap().pass());
        assert!(!primal.feasibility(&[2.0, 2.0], 1e-9).unwrap().pass());

        // Stationarity with no multipliers at the f-critical point.
        let z = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let res = dual
            .stationarity_residual(&[0.5, -0.5], &[0.0], &z, &[0.0, 1.0])
            .unwrap();
        // f2 gradient is (1,-1) so the residual is 1 with lambda = (0,1).
        assert!((res - 1.0).abs() < 1e-12);
    }

    #[test]
    fn relabeling_symmetry() {
        // Permuting constraint indices together with the partition and the
        // y rows leaves dual_objective and stationarity_residual unchanged.
        let spec = ProblemSpec {
            name: "perm".into(),
            n: 1,
            p: 1,
            m: 2,
            f: vec![expr::parse("x0^2 + xd0^2", 1).unwrap()],
            b: vec![Matrix::identity(1)],
            g: vec![
                expr::parse("x0 - 1", 1).unwrap(),
                expr::parse("-(x0) - 2", 1).unwrap(),
            ],
            boundary: BoundaryKind::FixedZero,
        };
        let mut spec_perm = spec.clone();
        spec_perm.g.swap(0, 1);

        let gr = make_grid(0.0, 1.0, 31).unwrap();
        let u = Trajectory::from_fn(&gr, 1, |t| vec![t * (1.0 - t)]);
        let mut y = Trajectory::zeros(&gr, 2);
        for k in 0..gr.n_nodes {
            y.set(k, 0, 0.3 + 0.1 * gr.nodes[k]);
            y.set(k, 1, 0.7);
        }
        let mut y_perm = Trajectory::zeros(&gr, 2);
        for k in 0..gr.n_nodes {
            y_perm.set(k, 0, y.get(k, 1));
            y_perm.set(k, 1, y.get(k, 0));
        }
        let z = vec![Trajectory::from_fn(&gr, 1, |_| vec![0.5])];
        let dp = DualPoint { u: u.clone(), y, z: z.clone(), lambda: vec![1.0] };
        let dp_perm = DualPoint { u, y: y_perm, z, lambda: vec![1.0] };

        // J0 = {1}, J1 = {2} and its relabeled twin J0 = {2}, J1 = {1}.
        let part = Partition::parse("J0={1};J1={2}", 2).unwrap();
        let part_perm = Partition::parse("J0={2};J1={1}", 2).unwrap();

        let obj = dual_objective(&spec, &part, &dp).unwrap();
        let obj_perm = dual_objective(&spec_perm, &part_perm, &dp_perm).unwrap();
        for (a, b) in obj.iter().zip(&obj_perm) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        let r = stationarity_residual(&spec, &dp).unwrap();
        let r_perm = stationarity_residual(&spec_perm, &dp_perm).unwrap();
        assert!((r - r_perm).abs() <= 1e-12 * r.abs().max(1.0));

        let sums = partition_integral_sums(&spec, &part, &dp).unwrap();
        let sums_perm = partition_integral_sums(&spec_perm, &part_perm, &dp_perm).unwrap();
        assert!((sums[0] - sums_perm[0]).abs() <= 1e-12 * sums[0].abs().max(1.0));
    }
}
