//! Sampling-based certification of the invexity-family hypotheses for
//! integral functionals Φ(x) = ∫ φ(t, x, ẋ, ẍ) dt with a candidate kernel
//! η(t, x, u).
//!
//! A PASS certificate is evidence over the sampled pairs, never a proof;
//! a FAIL certificate carries a concrete witness pair that re-evaluates as
//! a violation independently of the sampling loop.

use crate::dual::Partition;
use crate::grid::{self, Trajectory};
use crate::linalg;
use crate::problem::{BoundaryKind, PrimalPoint, ProblemSpec};
use crate::report::{fmt_f64, Report, Sense};
use crate::{expr, Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Tolerance below which a sampled inequality defect counts as noise.
pub const VIOLATION_TOL: f64 = 1e-7;
/// Slack applied to the "hypothesis side" of the pseudo/quasi conditions.
pub const HYPOTHESIS_SLACK: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// Rule mapping a trajectory pair (x, u) to the kernel trajectory η.
pub trait Kernel {
    fn eta(&self, x: &Trajectory, u: &Trajectory) -> Result<Trajectory>;
}

/// The default kernel η(t) = x(t) − u(t). Vanishes (with its discrete
/// derivative) wherever x and u agree, as the definition requires.
#[derive(Debug, Clone, Copy, Default)]
pub struct DifferenceKernel;

impl Kernel for DifferenceKernel {
    fn eta(&self, x: &Trajectory, u: &Trajectory) -> Result<Trajectory> {
        x.axpy(-1.0, u)
    }
}

/// Adapter for user-supplied kernels.
pub struct FnKernel<F>(pub F);

impl<F> Kernel for FnKernel<F>
where
    F: Fn(&Trajectory, &Trajectory) -> Result<Trajectory>,
{
    fn eta(&self, x: &Trajectory, u: &Trajectory) -> Result<Trajectory> {
        (self.0)(x, u)
    }
}

// ---------------------------------------------------------------------------
// Functionals
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FunctionalKind {
    /// Σᵢ λⁱ [fⁱ + xᵀBⁱzⁱ + Σ_{j∈J₀} yʲgʲ] — the pseudoinvexity side of the
    /// weak-duality hypotheses.
    Combined,
    /// Σ_{j∈J_α} yʲgʲ for one block α >= 1 — the quasi-invexity side.
    Block(usize),
}

/// Integral functional with multipliers frozen at construction.
pub struct FunctionalSpec {
    pub label: String,
    spec: ProblemSpec,
    part: Partition,
    lambda: Vec<f64>,
    y: Trajectory,
    z: Vec<Trajectory>,
    kind: FunctionalKind,
}

impl FunctionalSpec {
    /// The combined objective-side functional of the weak-duality theorem.
    pub fn combined(
        spec: &ProblemSpec,
        part: &Partition,
        lambda: &[f64],
        y: &Trajectory,
        z: &[Trajectory],
    ) -> Result<Self> {
        if lambda.len() != spec.p {
            return Err(Error::Domain(format!(
                "lambda has {} entries, expected {}",
                lambda.len(),
                spec.p
            )));
        }
        let sum: f64 = lambda.iter().sum();
        if lambda.iter().any(|l| *l <= 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(
                "lambda must be strictly positive and sum to 1".into(),
            ));
        }
        if y.values.iter().any(|v| *v < -1e-12) {
            return Err(Error::Domain("multiplier function y must be nonnegative".into()));
        }
        Ok(FunctionalSpec {
            label: format!("{}-combined", spec.name),
            spec: spec.clone(),
            part: part.clone(),
            lambda: lambda.to_vec(),
            y: y.clone(),
            z: z.to_vec(),
            kind: FunctionalKind::Combined,
        })
    }

    /// The per-block constraint functional Σ_{j∈J_α} yʲgʲ, α >= 1.
    pub fn constraint_block(
        spec: &ProblemSpec,
        part: &Partition,
        alpha: usize,
        y: &Trajectory,
    ) -> Result<Self> {
        if alpha == 0 || alpha > part.r() {
            return Err(Error::Domain(format!(
                "block index {alpha} out of range 1..={}",
                part.r()
            )));
        }
        if y.values.iter().any(|v| *v < -1e-12) {
            return Err(Error::Domain("multiplier function y must be nonnegative".into()));
        }
        Ok(FunctionalSpec {
            label: format!("{}-block{alpha}", spec.name),
            spec: spec.clone(),
            part: part.clone(),
            lambda: Vec::new(),
            y: y.clone(),
            z: Vec::new(),
            kind: FunctionalKind::Block(alpha),
        })
    }

    fn check_grid(&self, x: &Trajectory) -> Result<()> {
        if !x.grid.same_as(&self.y.grid) {
            return Err(Error::GridMismatch(
                "trajectory is not on the functional's grid".into(),
            ));
        }
        if x.dim != self.spec.n {
            return Err(Error::GridMismatch(format!(
                "trajectory has {} components, expected {}",
                x.dim, self.spec.n
            )));
        }
        Ok(())
    }

    /// Φ(x) = ∫ φ(t, x, ẋ, ẍ) dt.
    pub fn value(&self, x: &Trajectory) -> Result<f64> {
        self.check_grid(x)?;
        let pt = PrimalPoint::from_trajectory(x.clone());
        let gr = pt.grid().clone();
        let mut vals = vec![0.0; gr.n_nodes];
        for k in 0..gr.n_nodes {
            vals[k] = self.integrand(&pt, k)?;
        }
        grid::integrate(&vals, &gr)
    }

    fn integrand(&self, pt: &PrimalPoint, k: usize) -> Result<f64> {
        let ep = pt.eval_point(k);
        match self.kind {
            FunctionalKind::Combined => {
                let mut yg = 0.0;
                for &j in self.part.j0() {
                    yg += self.y.get(k, j) * expr::evaluate(&self.spec.g[j], &ep)?;
                }
                let mut acc = 0.0;
                for i in 0..self.spec.p {
                    let f_val = expr::evaluate(&self.spec.f[i], &ep)?;
                    let bz = linalg::dot(pt.x.row(k), &self.spec.b[i].matvec(self.z[i].row(k)));
                    acc += self.lambda[i] * (f_val + bz + yg);
                }
                Ok(acc)
            }
            FunctionalKind::Block(alpha) => {
                let mut acc = 0.0;
                for &j in self.part.block(alpha) {
                    acc += self.y.get(k, j) * expr::evaluate(&self.spec.g[j], &ep)?;
                }
                Ok(acc)
            }
        }
    }

    /// (φ_x, φ_ẋ, φ_ẍ) at node k of the point `pt`.
    fn integrand_partials(
        &self,
        pt: &PrimalPoint,
        k: usize,
    ) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let n = self.spec.n;
        let ep = pt.eval_point(k);
        let mut px = vec![0.0; n];
        let mut pxd = vec![0.0; n];
        let mut pxdd = vec![0.0; n];
        match self.kind {
            FunctionalKind::Combined => {
                let mut ygx = vec![0.0; n];
                let mut ygxd = vec![0.0; n];
                let mut ygxdd = vec![0.0; n];
                for &j in self.part.j0() {
                    let (_, gx, gxd, gxdd) = expr::value_and_partials(&self.spec.g[j], &ep)?;
                    let yj = self.y.get(k, j);
                    for c in 0..n {
                        ygx[c] += yj * gx[c];
                        ygxd[c] += yj * gxd[c];
                        ygxdd[c] += yj * gxdd[c];
                    }
                }
                for i in 0..self.spec.p {
                    let (_, fx, fxd, fxdd) = expr::value_and_partials(&self.spec.f[i], &ep)?;
                    let bz = self.spec.b[i].matvec(self.z[i].row(k));
                    let li = self.lambda[i];
                    for c in 0..n {
                        px[c] += li * (fx[c] + bz[c] + ygx[c]);
                        pxd[c] += li * (fxd[c] + ygxd[c]);
                        pxdd[c] += li * (fxdd[c] + ygxdd[c]);
                    }
                }
            }
            FunctionalKind::Block(alpha) => {
                for &j in self.part.block(alpha) {
                    let (_, gx, gxd, gxdd) = expr::value_and_partials(&self.spec.g[j], &ep)?;
                    let yj = self.y.get(k, j);
                    for c in 0..n {
                        px[c] += yj * gx[c];
                        pxd[c] += yj * gxd[c];
                        pxdd[c] += yj * gxdd[c];
                    }
                }
            }
        }
        Ok((px, pxd, pxdd))
    }
}

/// ∫ ηᵀφ_x + (Dη)ᵀφ_ẋ + (D²η)ᵀφ_ẍ dt, partials evaluated at (u, u̇, ü).
pub fn directional_value(
    f: &FunctionalSpec,
    x: &Trajectory,
    u: &Trajectory,
    kernel: &dyn Kernel,
) -> Result<f64> {
    f.check_grid(x)?;
    f.check_grid(u)?;
    let eta = kernel.eta(x, u)?;
    if !eta.grid.same_as(&u.grid) || eta.dim != u.dim {
        return Err(Error::GridMismatch("kernel returned a mismatched trajectory".into()));
    }
    let d_eta = grid::derivative(&eta);
    let d2_eta = grid::second_derivative(&eta);
    let upt = PrimalPoint::from_trajectory(u.clone());
    let gr = upt.grid().clone();
    let mut vals = vec![0.0; gr.n_nodes];
    for k in 0..gr.n_nodes {
        let (px, pxd, pxdd) = f.integrand_partials(&upt, k)?;
        vals[k] = linalg::dot(eta.row(k), &px)
            + linalg::dot(d_eta.row(k), &pxd)
            + linalg::dot(d2_eta.row(k), &pxdd);
    }
    grid::integrate(&vals, &gr)
}

// ---------------------------------------------------------------------------
// Trajectory sampling
// ---------------------------------------------------------------------------

/// Random smooth trajectory from the degree-<=6 polynomial span.
///
/// Fixed-zero mode uses the basis s²(1−s)²·s^q (q = 0,1,2), each scaled to
/// sup-norm 1, so samples satisfy x = 0 and ẋ = 0 at both endpoints exactly
/// and reach O(1) amplitudes; natural mode uses plain monomials s^q,
/// q = 0..6. Coefficients are uniform in [-1, 1].
pub fn sample_trajectory(
    grid: &crate::grid::TimeGrid,
    dim: usize,
    boundary: BoundaryKind,
    rng: &mut impl Rng,
) -> Trajectory {
    let basis = basis_functions(boundary);
    let mut tr = Trajectory::zeros(grid, dim);
    let span = grid.b - grid.a;
    for c in 0..dim {
        let coefs: Vec<f64> = (0..basis.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        for (k, &t) in grid.nodes.iter().enumerate() {
            let s = (t - grid.a) / span;
            let mut v = 0.0;
            for (b, &co) in basis.iter().zip(&coefs) {
                v += co * b(s);
            }
            tr.set(k, c, v);
        }
    }
    tr
}

type BasisFn = fn(f64) -> f64;

fn basis_functions(boundary: BoundaryKind) -> Vec<BasisFn> {
    match boundary {
        BoundaryKind::FixedZero => vec![bc0, bc1, bc2],
        BoundaryKind::Natural => vec![
            |_s| 1.0,
            |s| s,
            |s| s * s,
            |s| s * s * s,
            |s| s.powi(4),
            |s| s.powi(5),
            |s| s.powi(6),
        ],
    }
}

// s²(1-s)² s^q normalized to sup-norm 1; the sup is attained at
// s = (q+2)/(q+4) and is computed in closed form below.
fn bc_raw(s: f64, q: i32) -> f64 {
    s * s * (1.0 - s) * (1.0 - s) * s.powi(q)
}

fn bc_norm(q: i32) -> f64 {
    let smax = (q as f64 + 2.0) / (q as f64 + 4.0);
    bc_raw(smax, q)
}

fn bc0(s: f64) -> f64 {
    bc_raw(s, 0) / bc_norm(0)
}
fn bc1(s: f64) -> f64 {
    bc_raw(s, 1) / bc_norm(1)
}
fn bc2(s: f64) -> f64 {
    bc_raw(s, 2) / bc_norm(2)
}

// ---------------------------------------------------------------------------
// Certification
// ---------------------------------------------------------------------------

/// Which definition a certificate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertKind {
    Invex,
    Pseudoinvex,
    QuasiInvex,
}

impl CertKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CertKind::Invex => "invex",
            CertKind::Pseudoinvex => "pseudoinvex",
            CertKind::QuasiInvex => "quasi-invex",
        }
    }
}

/// A concrete violating pair, stored so it can be re-evaluated outside the
/// sampling loop.
#[derive(Debug, Clone)]
pub struct Witness {
    pub pair_index: usize,
    pub x: Trajectory,
    pub u: Trajectory,
    pub f_x: f64,
    pub f_u: f64,
    pub directional: f64,
    pub violation: f64,
}

impl Witness {
    /// Recompute (Φ(x), Φ(u), directional value) from the stored pair.
    pub fn reverify(&self, f: &FunctionalSpec, kernel: &dyn Kernel) -> Result<(f64, f64, f64)> {
        Ok((
            f.value(&self.x)?,
            f.value(&self.u)?,
            directional_value(f, &self.x, &self.u, kernel)?,
        ))
    }
}

/// Certificate produced by the `certify_*` functions.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub kind: CertKind,
    pub label: String,
    pub pairs: usize,
    pub seed: u64,
    pub worst_violation: f64,
    pub pass: bool,
    pub witness: Option<Witness>,
    pub report: Report,
}

impl Certificate {
    /// CSV row: functional-id, kind, pairs, worst-violation, witness-seed,
    /// witness-pair.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}\n",
            self.label,
            self.kind.as_str(),
            self.pairs,
            fmt_f64(self.worst_violation),
            self.seed,
            self.witness
                .as_ref()
                .map_or(String::from("-"), |w| w.pair_index.to_string())
        )
    }

    pub fn csv_header() -> &'static str {
        "functional,kind,pairs,worst_violation,witness_seed,witness_pair\n"
    }
}

fn certify(
    f: &FunctionalSpec,
    kernel: &dyn Kernel,
    pairs: usize,
    seed: u64,
    kind: CertKind,
) -> Result<Certificate> {
    if pairs == 0 {
        return Err(Error::Domain("need at least one sample pair".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = f.y.grid.clone();
    let dim = f.spec.n;
    let boundary = f.spec.boundary;

    let mut worst = f64::NEG_INFINITY;
    let mut witness: Option<Witness> = None;
    for pair_index in 0..pairs {
        let x = sample_trajectory(&grid, dim, boundary, &mut rng);
        let u = sample_trajectory(&grid, dim, boundary, &mut rng);
        let f_x = f.value(&x)?;
        let f_u = f.value(&u)?;
        let dir = directional_value(f, &x, &u, kernel)?;
        // Violation magnitude per definition; <= 0 means the pair conforms.
        let violation = match kind {
            CertKind::Invex => dir - (f_x - f_u),
            CertKind::Pseudoinvex => {
                if dir >= -HYPOTHESIS_SLACK {
                    f_u - f_x
                } else {
                    0.0
                }
            }
            CertKind::QuasiInvex => {
                if f_x <= f_u + HYPOTHESIS_SLACK {
                    dir
                } else {
                    0.0
                }
            }
        };
        if violation > worst {
            worst = violation;
            if violation > VIOLATION_TOL {
                witness = Some(Witness {
                    pair_index,
                    x: x.clone(),
                    u: u.clone(),
                    f_x,
                    f_u,
                    directional: dir,
                    violation,
                });
            }
        }
    }

    let pass = worst <= VIOLATION_TOL;
    let mut report = Report::new(format!("{} certificate for {}", kind.as_str(), f.label));
    report.check("worst violation", worst, VIOLATION_TOL, Sense::Le);
    report.info("pairs sampled", pairs as f64);
    report.info_note(
        "certificate",
        if pass { 1.0 } else { 0.0 },
        "PASS is sampling evidence only, never a proof; FAIL carries a witness pair",
    );
    if let Some(w) = &witness {
        report.info(format!("witness pair index (seed {seed})"), w.pair_index as f64);
    }
    Ok(Certificate {
        kind,
        label: f.label.clone(),
        pairs,
        seed,
        worst_violation: worst,
        pass,
        witness,
        report,
    })
}

/// Invexity: Φ(x) − Φ(u) >= directional value for every sampled pair.
pub fn certify_invex(
    f: &FunctionalSpec,
    kernel: &dyn Kernel,
    pairs: usize,
    seed: u64,
) -> Result<Certificate> {
    certify(f, kernel, pairs, seed, CertKind::Invex)
}

/// Pseudoinvexity: nonnegative directional value forces Φ(x) >= Φ(u).
pub fn certify_pseudoinvex(
    f: &FunctionalSpec,
    kernel: &dyn Kernel,
    pairs: usize,
    seed: u64,
) -> Result<Certificate> {
    certify(f, kernel, pairs, seed, CertKind::Pseudoinvex)
}

/// Quasi-invexity: Φ(x) <= Φ(u) forces a nonpositive directional value.
pub fn certify_quasiinvex(
    f: &FunctionalSpec,
    kernel: &dyn Kernel,
    pairs: usize,
    seed: u64,
) -> Result<Certificate> {
    certify(f, kernel, pairs, seed, CertKind::QuasiInvex)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::linalg::Matrix;

    fn quadratic_spec() -> ProblemSpec {
        ProblemSpec {
            name: "quad".into(),
            n: 1,
            p: 1,
            m: 1,
            f: vec![expr::parse("x0^2 / 2", 1).unwrap()],
            b: vec![Matrix::zeros(1, 1)],
            g: vec![expr::parse("x0 - 10", 1).unwrap()],
            boundary: BoundaryKind::FixedZero,
        }
    }

    fn combined(spec: &ProblemSpec, n_nodes: usize) -> FunctionalSpec {
        let gr = make_grid(0.0, 1.0, n_nodes).unwrap();
        let part = Partition::wolfe(spec.m);
        let y = Trajectory::zeros(&gr, spec.m);
        let z: Vec<Trajectory> =
            (0..spec.p).map(|_| Trajectory::zeros(&gr, spec.n)).collect();
        FunctionalSpec::combined(spec, &part, &[1.0], &y, &z).unwrap()
    }

    #[test]
    fn directional_value_zero_when_points_agree() {
        let spec = quadratic_spec();
        let f = combined(&spec, 31);
        let gr = f.y.grid.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = sample_trajectory(&gr, 1, BoundaryKind::FixedZero, &mut rng);
        let v = directional_value(&f, &x, &x, &DifferenceKernel).unwrap();
        assert!(v.abs() < 1e-14);
    }

    #[test]
    fn directional_value_matches_closed_form() {
        // φ = x²/2, η = x − u: the directional value is ∫ u (x − u) dt.
        // With u = t(1-t) and x = 2 t(1-t) that is ∫ t²(1-t)² = 1/30.
        let spec = quadratic_spec();
        let f = combined(&spec, 201);
        let gr = f.y.grid.clone();
        let u = Trajectory::from_fn(&gr, 1, |t| vec![t * (1.0 - t)]);
        let x = u.scale(2.0);
        let v = directional_value(&f, &x, &u, &DifferenceKernel).unwrap();
        assert!((v - 1.0 / 30.0).abs() < 1e-6, "got {v}");
    }

    #[test]
    fn directional_value_vanishes_for_state_free_integrand() {
        let spec = ProblemSpec {
            name: "time-only".into(),
            n: 1,
            p: 1,
            m: 1,
            f: vec![expr::parse("sin(t)", 1).unwrap()],
            b: vec![Matrix::zeros(1, 1)],
            g: vec![expr::parse("x0 - 10", 1).unwrap()],
            boundary: BoundaryKind::FixedZero,
        };
        let f = combined(&spec, 31);
        let gr = f.y.grid.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = sample_trajectory(&gr, 1, BoundaryKind::FixedZero, &mut rng);
        let u = sample_trajectory(&gr, 1, BoundaryKind::FixedZero, &mut rng);
        let v = directional_value(&f, &x, &u, &DifferenceKernel).unwrap();
        assert!(v.abs() < 1e-14);
    }

    #[test]
    fn convex_quadratic_certifies_invex_and_pseudoinvex() {
        let spec = quadratic_spec();
        let f = combined(&spec, 41);
        let cert = certify_invex(&f, &DifferenceKernel, 200, 11).unwrap();
        assert!(cert.pass, "worst violation {}", cert.worst_violation);
        let cert = certify_pseudoinvex(&f, &DifferenceKernel, 200, 11).unwrap();
        assert!(cert.pass);
    }

    #[test]
    fn zero_functional_certifies_trivially() {
        let spec = ProblemSpec {
            name: "zero".into(),
            n: 1,
            p: 1,
            m: 1,
            f: vec![expr::parse("0", 1).unwrap()],
            b: vec![Matrix::zeros(1, 1)],
            g: vec![expr::parse("x0 - 10", 1).unwrap()],
            boundary: BoundaryKind::FixedZero,
        };
        let f = combined(&spec, 31);
        let cert = certify_invex(&f, &DifferenceKernel, 50, 5).unwrap();
        assert!(cert.pass);
        assert!(cert.worst_violation.abs() < 1e-12);
    }

    #[test]
    fn sine_functional_fails_with_reverifiable_witness() {
        let spec = ProblemSpec {
            name: "sine".into(),
            n: 1,
            p: 1,
            m: 1,
            f: vec![expr::parse("4*sin(3*x0)", 1).unwrap()],
            b: vec![Matrix::zeros(1, 1)],
            g: vec![expr::parse("x0 - 10", 1).unwrap()],
            boundary: BoundaryKind::FixedZero,
        };
        let f = combined(&spec, 41);
        let cert = certify_invex(&f, &DifferenceKernel, 300, 23).unwrap();
        assert!(!cert.pass, "a strongly nonconvex integrand should fail");
        let w = cert.witness.expect("FAIL must carry a witness");
        let (f_x, f_u, dir) = w.reverify(&f, &DifferenceKernel).unwrap();
        assert!(
            dir - (f_x - f_u) > VIOLATION_TOL,
            "witness must re-evaluate as a violation"
        );
    }

    #[test]
    fn linear_functional_is_quasi_invex() {
        let spec = ProblemSpec {
            name: "linear".into(),
            n: 1,
            p: 1,
            m: 1,
            f: vec![expr::parse("x0", 1).unwrap()],
            b: vec![Matrix::zeros(1, 1)],
            g: vec![expr::parse("2*x0 - 1", 1).unwrap()],
            boundary: BoundaryKind::FixedZero,
        };
        // Block functional y¹ g¹ with y ≡ 0.4 is linear in x.
        let gr = make_grid(0.0, 1.0, 41).unwrap();
        let part = Partition::mond_weir(1);
        let y = Trajectory::from_fn(&gr, 1, |_| vec![0.4]);
        let f = FunctionalSpec::constraint_block(&spec, &part, 1, &y).unwrap();
        let cert = certify_quasiinvex(&f, &DifferenceKernel, 200, 17).unwrap();
        assert!(cert.pass, "worst violation {}", cert.worst_violation);

        // Constant functional: both sides degenerate, still a PASS.
        let y0 = Trajectory::zeros(&gr, 1);
        let f0 = FunctionalSpec::constraint_block(&spec, &part, 1, &y0).unwrap();
        let cert = certify_quasiinvex(&f0, &DifferenceKernel, 50, 17).unwrap();
        assert!(cert.pass);
        assert!(cert.worst_violation.abs() < 1e-12);
    }

    #[test]
    fn invex_implies_pseudoinvex_on_same_samples() {
        let spec = quadratic_spec();
        let f = combined(&spec, 31);
        let inv = certify_invex(&f, &DifferenceKernel, 150, 29).unwrap();
        let pseudo = certify_pseudoinvex(&f, &DifferenceKernel, 150, 29).unwrap();
        assert!(inv.pass);
        assert!(pseudo.pass);
    }

    #[test]
    fn directional_value_linear_in_eta_and_multipliers() {
        let spec = quadratic_spec();
        let f = combined(&spec, 41);
        let gr = f.y.grid.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let x = sample_trajectory(&gr, 1, BoundaryKind::FixedZero, &mut rng);
        let u = sample_trajectory(&gr, 1, BoundaryKind::FixedZero, &mut rng);

        let base = directional_value(&f, &x, &u, &DifferenceKernel).unwrap();
        let scaled_kernel = FnKernel(|x: &Trajectory, u: &Trajectory| {
            Ok(x.axpy(-1.0, u)?.scale(2.5))
        });
        let scaled = directional_value(&f, &x, &u, &scaled_kernel).unwrap();
        assert!((scaled - 2.5 * base).abs() < 1e-10 * base.abs().max(1.0));
    }

    #[test]
    fn fixed_zero_samples_respect_boundary() {
        // Values vanish exactly at the ends; the discrete derivative there
        // is the O(h²) stencil error on a function whose true derivative
        // vanishes, so it must shrink by ~4 when h halves.
        let end_residual = |n_nodes: usize| {
            let gr = make_grid(0.0, 1.0, n_nodes).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let mut worst = 0.0f64;
            for _ in 0..10 {
                let x = sample_trajectory(&gr, 2, BoundaryKind::FixedZero, &mut rng);
                let nn = gr.n_nodes;
                assert!(linalg::norm_inf(x.row(0)) < 1e-15);
                assert!(linalg::norm_inf(x.row(nn - 1)) < 1e-15);
                let xd = grid::derivative(&x);
                worst = worst
                    .max(linalg::norm_inf(xd.row(0)))
                    .max(linalg::norm_inf(xd.row(nn - 1)));
            }
            worst
        };
        let ratio = end_residual(61) / end_residual(121);
        assert!(
            (3.2..=4.8).contains(&ratio),
            "endpoint derivative residual should be O(h²), ratio = {ratio}"
        );
    }

    #[test]
    fn certification_is_deterministic_in_seed() {
        let spec = quadratic_spec();
        let f = combined(&spec, 31);
        let a = certify_invex(&f, &DifferenceKernel, 100, 1234).unwrap();
        let b = certify_invex(&f, &DifferenceKernel, 100, 1234).unwrap();
        assert_eq!(a.worst_violation, b.worst_violation);
    }
}
