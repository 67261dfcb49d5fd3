//! Built-in problem catalog.
//!
//! P1 — convex quadratic, two objectives, two constraints, fixed-zero.
//! P2 — genuine ẍ dependence, fixed-zero. P2-natural — same integrands with
//! free endpoints. P3 — nonconvex (sine terms), exhibits invexity failure.
//! S1 — static two-variable pair for the nonlinear-programming
//! specialization.

use crate::grid::{TimeGrid, Trajectory};
use crate::invexity::{self};
use crate::linalg::Matrix;
use crate::problem::{BoundaryKind, PrimalPoint, ProblemSpec};
use crate::{expr, Error, Result};
use rand::Rng;

/// Catalog entry: the spec plus listing metadata.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub spec: ProblemSpec,
    pub convexity: &'static str,
}

pub const NAMES: [&str; 5] = ["P1", "P2", "P2-natural", "P3", "S1"];

/// Look up a built-in problem by name.
pub fn builtin(name: &str) -> Option<CatalogEntry> {
    let entry = match name {
        "P1" => CatalogEntry { spec: p1(), convexity: "convex quadratic" },
        "P2" => CatalogEntry { spec: p2(BoundaryKind::FixedZero), convexity: "convex, xdd-dependent" },
        "P2-natural" => CatalogEntry { spec: p2(BoundaryKind::Natural), convexity: "convex, xdd-dependent, free endpoints" },
        "P3" => CatalogEntry { spec: p3(), convexity: "nonconvex (sine terms)" },
        "S1" => CatalogEntry { spec: s1(), convexity: "convex, static" },
        _ => return None,
    };
    Some(entry)
}

/// All catalog entries, in listing order.
pub fn all() -> Vec<CatalogEntry> {
    NAMES.iter().map(|n| builtin(n).unwrap()).collect()
}

fn parse_all(texts: &[&str], n: usize) -> Vec<expr::Expr> {
    texts.iter().map(|t| expr::parse(t, n).unwrap()).collect()
}

fn p1() -> ProblemSpec {
    let spec = ProblemSpec {
        name: "P1".into(),
        n: 2,
        p: 2,
        m: 2,
        f: parse_all(
            &[
                "xd0^2 + xd1^2 + x0^2 + x1^2 - 8*t*(1-t)*x0",
                "xd0^2 + xd1^2 + 2*x0^2 + x1^2 + 4*t*(1-t)*x0 - 4*t*(1-t)*x1",
            ],
            2,
        ),
        b: vec![
            Matrix::identity(2),
            Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]),
        ],
        g: parse_all(&["x0 - 0.25", "-x0"], 2),
        boundary: BoundaryKind::FixedZero,
    };
    spec.validate().expect("P1 is well formed");
    spec
}

fn p2(boundary: BoundaryKind) -> ProblemSpec {
    let name = match boundary {
        BoundaryKind::FixedZero => "P2",
        BoundaryKind::Natural => "P2-natural",
    };
    let spec = ProblemSpec {
        name: name.into(),
        n: 1,
        p: 2,
        m: 2,
        f: parse_all(
            &[
                "xdd0^2 + x0^2 - 16*t^2*(1-t)^2*x0",
                "xdd0^2 + 4*x0^2 + 2*x0 + 8*t*(1-t)*x0",
            ],
            1,
        ),
        b: vec![Matrix::identity(1), Matrix::zeros(1, 1)],
        g: parse_all(&["x0 - 1", "-x0 - 0.5"], 1),
        boundary,
    };
    spec.validate().expect("P2 is well formed");
    spec
}

fn p3() -> ProblemSpec {
    let spec = ProblemSpec {
        name: "P3".into(),
        n: 1,
        p: 2,
        m: 1,
        f: parse_all(
            &[
                "xd0^2 + 2*x0^2 + 4*sin(3*x0)",
                "xd0^2 + x0^2 - 4*t*(1-t)*x0",
            ],
            1,
        ),
        b: vec![Matrix::identity(1), Matrix::zeros(1, 1)],
        g: parse_all(&["x0 - 1.5"], 1),
        boundary: BoundaryKind::FixedZero,
    };
    spec.validate().expect("P3 is well formed");
    spec
}

fn s1() -> ProblemSpec {
    let spec = ProblemSpec {
        name: "S1".into(),
        n: 2,
        p: 2,
        m: 2,
        f: parse_all(
            &[
                "x0^2 + x1^2 - 2*x0",
                "x0^2 + x1^2 + 2*x0 - 3*x1",
            ],
            2,
        ),
        b: vec![Matrix::identity(2), Matrix::zeros(2, 2)],
        g: parse_all(&["x0 + x1 - 1.5", "-x0 - 0.5"], 2),
        boundary: BoundaryKind::Natural,
    };
    spec.validate().expect("S1 is well formed");
    spec
}

/// Project a fixed-zero trajectory onto the discrete boundary subspace:
/// force the one-sided derivative stencils at both ends to evaluate to
/// exactly zero by adjusting the second node from each end. The adjustment
/// is O(h³) for smooth inputs whose continuous derivative vanishes there.
pub fn project_discrete_bc(tr: &mut Trajectory) {
    let nn = tr.grid.n_nodes;
    for c in 0..tr.dim {
        tr.set(0, c, 0.0);
        tr.set(nn - 1, c, 0.0);
        // Row 0 of D: (-4x_0 + 7x_1 - 4x_2 + x_3)/2h = 0 with x_0 = 0
        // => x_2 = (7x_1 + x_3)/4, and mirrored at the right end.
        let x1 = tr.get(1, c);
        let x3 = tr.get(3, c);
        tr.set(2, c, (7.0 * x1 + x3) / 4.0);
        let xm1 = tr.get(nn - 2, c);
        let xm3 = tr.get(nn - 4, c);
        tr.set(nn - 3, c, (7.0 * xm1 + xm3) / 4.0);
    }
}

/// Draw a random feasible primal point for a catalog problem.
///
/// The construction is problem-specific: sign-constrained components are
/// built as squares of smooth samples and everything is scaled inside the
/// constraint margins, so no rejection loop is needed for the built-ins.
/// Unknown (file-loaded) problems fall back to rejection sampling over
/// smooth samples and report failure after `attempts` draws.
pub fn feasible_sample(
    spec: &ProblemSpec,
    grid: &TimeGrid,
    rng: &mut impl Rng,
) -> Result<PrimalPoint> {
    match spec.name.as_str() {
        "P1" => Ok(sample_p1(spec, grid, rng)),
        "P2" | "P2-natural" => Ok(sample_amplitude_capped(spec, grid, rng, 0.45)),
        "P3" => Ok(sample_amplitude_capped(spec, grid, rng, 1.3)),
        _ => generic_rejection_sample(spec, grid, rng, 200),
    }
}

fn sample_p1(spec: &ProblemSpec, grid: &TimeGrid, rng: &mut impl Rng) -> PrimalPoint {
    // g1: x0 <= 0.25, g2: x0 >= 0. Build x0 as a scaled square (so x0 >= 0
    // pointwise) capped at 0.22; x1 is unconstrained.
    let base = invexity::sample_trajectory(grid, 2, BoundaryKind::FixedZero, rng);
    let mut tr = Trajectory::zeros(grid, 2);
    let max_sq = base
        .component(0)
        .iter()
        .fold(0.0f64, |m, v| m.max(v * v))
        .max(1e-12);
    let cap: f64 = rng.gen_range(0.02..=0.22);
    let scale = cap / max_sq;
    for k in 0..grid.n_nodes {
        let b0 = base.get(k, 0);
        tr.set(k, 0, scale * b0 * b0);
        tr.set(k, 1, 0.8 * base.get(k, 1));
    }
    project_discrete_bc(&mut tr);
    // The projection only touches nodes next to the boundary where the
    // square is already tiny and nonnegative scaling is preserved by 4*x1.
    let _ = spec;
    PrimalPoint::from_trajectory(tr)
}

fn sample_amplitude_capped(
    spec: &ProblemSpec,
    grid: &TimeGrid,
    rng: &mut impl Rng,
    amplitude: f64,
) -> PrimalPoint {
    // Rescale by the realized sup so the cap binds exactly; a random
    // fraction keeps the sample amplitudes diverse.
    let base = invexity::sample_trajectory(grid, spec.n, spec.boundary, rng);
    let sup = base.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let frac: f64 = rng.gen_range(0.15..=1.0);
    let mut tr = base.scale(amplitude * frac / sup);
    if spec.boundary == BoundaryKind::FixedZero {
        project_discrete_bc(&mut tr);
    }
    PrimalPoint::from_trajectory(tr)
}

fn generic_rejection_sample(
    spec: &ProblemSpec,
    grid: &TimeGrid,
    rng: &mut impl Rng,
    attempts: usize,
) -> Result<PrimalPoint> {
    for _ in 0..attempts {
        let mut tr = invexity::sample_trajectory(grid, spec.n, spec.boundary, rng);
        if spec.boundary == BoundaryKind::FixedZero {
            project_discrete_bc(&mut tr);
        }
        let pt = PrimalPoint::from_trajectory(tr);
        if crate::problem::primal_feasibility(spec, &pt, 1e-6)?.pass() {
            return Ok(pt);
        }
    }
    Err(Error::Domain(format!(
        "no feasible sample for `{}` after {attempts} attempts",
        spec.name
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::problem::primal_feasibility;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn catalog_contains_expected_problems() {
        let names: Vec<&str> = all().iter().map(|e| match e.spec.name.as_str() {
            "P1" => "P1",
            "P2" => "P2",
            "P2-natural" => "P2-natural",
            "P3" => "P3",
            "S1" => "S1",
            other => panic!("unexpected problem {other}"),
        }).collect();
        assert_eq!(names, NAMES.to_vec());
        assert!(builtin("nope").is_none());
    }

    #[test]
    fn catalog_specs_validate() {
        for e in all() {
            e.spec.validate().unwrap();
        }
        assert!(builtin("S1").unwrap().spec.is_static());
        assert!(!builtin("P1").unwrap().spec.is_static());
        assert!(builtin("P2").unwrap().spec.uses_xdd());
        assert!(!builtin("P1").unwrap().spec.uses_xdd());
    }

    #[test]
    fn samplers_produce_feasible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for name in ["P1", "P2", "P2-natural", "P3"] {
            let spec = builtin(name).unwrap().spec;
            let gr = make_grid(0.0, 1.0, 101).unwrap();
            for _ in 0..20 {
                let pt = feasible_sample(&spec, &gr, &mut rng).unwrap();
                let rep = primal_feasibility(&spec, &pt, 1e-6).unwrap();
                assert!(rep.pass(), "{name} sample infeasible:\n{rep}");
            }
        }
    }

    #[test]
    fn discrete_bc_projection_zeroes_endpoint_stencils() {
        let gr = make_grid(0.0, 1.0, 61).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut tr = invexity::sample_trajectory(&gr, 2, BoundaryKind::FixedZero, &mut rng);
        project_discrete_bc(&mut tr);
        let d = crate::grid::derivative(&tr);
        assert!(crate::linalg::norm_inf(d.row(0)) < 1e-14);
        assert!(crate::linalg::norm_inf(d.row(gr.n_nodes - 1)) < 1e-14);
    }
}
