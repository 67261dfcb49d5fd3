//! The primal model: p objective integrands with square-root terms, m
//! inequality constraint integrands, constant PSD matrices B^i, boundary
//! conditions, feasibility and objective evaluation.

use crate::expr::{self, EvalPoint, Expr};
use crate::grid::{self, Trajectory};
use crate::linalg::{self, Matrix};
use crate::report::{Report, Sense};
use crate::{Error, Result};

/// Boundary treatment for the trajectory and its first derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// x(a) = 0 = x(b) and ẋ(a) = 0 = ẋ(b).
    FixedZero,
    /// Free endpoints; transversality conditions appear on the dual side.
    Natural,
}

impl BoundaryKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryKind::FixedZero => "fixed_zero",
            BoundaryKind::Natural => "natural",
        }
    }
}

/// A complete primal instance.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub f: Vec<Expr>,
    pub b: Vec<Matrix>,
    pub g: Vec<Expr>,
    pub boundary: BoundaryKind,
}

impl ProblemSpec {
    /// Validate counts, matrix shapes, symmetry and positive
    /// semidefiniteness (min eigenvalue >= -1e-10).
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.p < 1 || self.m < 1 {
            return Err(Error::Config(format!(
                "problem `{}` needs n, p, m >= 1 (got n={}, p={}, m={})",
                self.name, self.n, self.p, self.m
            )));
        }
        if self.f.len() != self.p {
            return Err(Error::Config(format!(
                "problem `{}`: expected {} objective integrands, got {}",
                self.name,
                self.p,
                self.f.len()
            )));
        }
        if self.g.len() != self.m {
            return Err(Error::Config(format!(
                "problem `{}`: expected {} constraint integrands, got {}",
                self.name,
                self.m,
                self.g.len()
            )));
        }
        if self.b.len() != self.p {
            return Err(Error::Config(format!(
                "problem `{}`: expected {} B matrices, got {}",
                self.name,
                self.p,
                self.b.len()
            )));
        }
        for (i, bi) in self.b.iter().enumerate() {
            if bi.rows != self.n || bi.cols != self.n {
                return Err(Error::Config(format!(
                    "problem `{}`: B[{}] must be {}x{}, got {}x{}",
                    self.name, i, self.n, self.n, bi.rows, bi.cols
                )));
            }
            if bi.symmetry_defect() > 1e-12 {
                return Err(Error::Config(format!(
                    "problem `{}`: B[{}] is not symmetric (defect {:.3e})",
                    self.name,
                    i,
                    bi.symmetry_defect()
                )));
            }
            if !psd_check(bi, 1e-10)? {
                return Err(Error::Config(format!(
                    "problem `{}`: B[{}] is not positive semidefinite",
                    self.name, i
                )));
            }
        }
        Ok(())
    }

    /// True when no integrand mentions t, ẋ or ẍ (the §5 specialization).
    pub fn is_static(&self) -> bool {
        self.f.iter().chain(self.g.iter()).all(|e| {
            let u = expr::var_usage(e);
            !u.uses_t && !u.uses_xd && !u.uses_xdd
        })
    }

    /// True when some integrand depends on ẍ.
    pub fn uses_xdd(&self) -> bool {
        self.f
            .iter()
            .chain(self.g.iter())
            .any(|e| expr::var_usage(e).uses_xdd)
    }
}

/// Candidate primal point: a trajectory with its derived derivatives.
#[derive(Debug, Clone)]
pub struct PrimalPoint {
    pub x: Trajectory,
    pub xd: Trajectory,
    pub xdd: Trajectory,
}

impl PrimalPoint {
    pub fn from_trajectory(x: Trajectory) -> Self {
        let xd = grid::derivative(&x);
        let xdd = grid::second_derivative(&x);
        PrimalPoint { x, xd, xdd }
    }

    pub fn eval_point(&self, k: usize) -> EvalPoint<'_> {
        EvalPoint::new(
            self.x.grid.nodes[k],
            self.x.row(k),
            self.xd.row(k),
            self.xdd.row(k),
        )
    }

    pub fn grid(&self) -> &crate::grid::TimeGrid {
        &self.x.grid
    }
}

/// The nondifferentiable objective term (vᵀ B v)^1/2.
///
/// Clamps the quadratic form at zero before the root so roundoff on PSD
/// matrices cannot produce NaN.
pub fn sqrt_term(v: &[f64], b: &Matrix) -> f64 {
    quad_form(v, b).max(0.0).sqrt()
}

/// vᵀ B v.
pub fn quad_form(v: &[f64], b: &Matrix) -> f64 {
    linalg::dot(v, &b.matvec(v))
}

/// Vector of primal objective values ∫ f^i + (xᵀB^i x)^½ dt.
pub fn primal_objective(spec: &ProblemSpec, pt: &PrimalPoint) -> Result<Vec<f64>> {
    let g = pt.grid();
    let mut out = Vec::with_capacity(spec.p);
    for i in 0..spec.p {
        let mut vals = vec![0.0; g.n_nodes];
        for k in 0..g.n_nodes {
            let ep = pt.eval_point(k);
            vals[k] = expr::evaluate(&spec.f[i], &ep)? + sqrt_term(pt.x.row(k), &spec.b[i]);
        }
        out.push(grid::integrate(&vals, g)?);
    }
    Ok(out)
}

/// Feasibility report: constraint values at every node plus boundary
/// residuals (fixed-zero mode measures ẋ through the discrete operator).
pub fn primal_feasibility(spec: &ProblemSpec, pt: &PrimalPoint, tol: f64) -> Result<Report> {
    let g = pt.grid();
    let mut report = Report::new(format!("primal feasibility of `{}`", spec.name));
    let mut worst = f64::NEG_INFINITY;
    let mut worst_at = (0usize, 0usize);
    for j in 0..spec.m {
        let mut max_j = f64::NEG_INFINITY;
        for k in 0..g.n_nodes {
            let v = expr::evaluate(&spec.g[j], &pt.eval_point(k))?;
            if v > max_j {
                max_j = v;
            }
            if v > worst {
                worst = v;
                worst_at = (j, k);
            }
        }
        report.check(format!("max g[{j}]"), max_j, tol, Sense::Le);
    }
    report.info_note(
        "worst constraint node",
        worst,
        format!("g[{}] at node {}", worst_at.0, worst_at.1),
    );
    if spec.boundary == BoundaryKind::FixedZero {
        let nn = g.n_nodes;
        report.check("|x(a)|", linalg::norm_inf(pt.x.row(0)), tol, Sense::AbsLe);
        report.check("|x(b)|", linalg::norm_inf(pt.x.row(nn - 1)), tol, Sense::AbsLe);
        report.check("|xd(a)|", linalg::norm_inf(pt.xd.row(0)), tol, Sense::AbsLe);
        report.check("|xd(b)|", linalg::norm_inf(pt.xd.row(nn - 1)), tol, Sense::AbsLe);
    }
    Ok(report)
}

/// Symmetric PSD test: symmetry defect within `tol` and smallest
/// eigenvalue >= -tol, computed by the cyclic Jacobi method in [`linalg`].
pub fn psd_check(b: &Matrix, tol: f64) -> Result<bool> {
    if !b.is_square() {
        return Err(Error::NonSquare { rows: b.rows, cols: b.cols });
    }
    if b.symmetry_defect() > tol {
        return Ok(false);
    }
    let eig = linalg::sym_eigenvalues(b)?;
    Ok(eig.first().map_or(true, |min| *min >= -tol))
}

// ---------------------------------------------------------------------------
// Problem definition files
// ---------------------------------------------------------------------------
//
// Line-oriented `key = value` format. Keys:
//   name = <string>
//   n = <int>, p = <int>, m = <int>
//   boundary = fixed_zero | natural
//   f.1 = <expr> ... f.p = <expr>          (1-based)
//   g.1 = <expr> ... g.m = <expr>
//   B.1 = r00,r01;r10,r11                  (semicolon-separated rows)
// Blank lines and lines starting with `#` are ignored.

/// Parse a problem definition file body.
pub fn parse_problem_file(text: &str) -> Result<ProblemSpec> {
    let mut name = String::from("unnamed");
    let mut n = None;
    let mut p = None;
    let mut m = None;
    let mut boundary = BoundaryKind::FixedZero;
    let mut f_raw: Vec<(usize, String)> = Vec::new();
    let mut g_raw: Vec<(usize, String)> = Vec::new();
    let mut b_raw: Vec<(usize, String)> = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected `key = value`", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        let bad_int = |what: &str| Error::Config(format!("line {}: bad {what}", lineno + 1));
        match key {
            "name" => name = value.to_string(),
            "n" => n = Some(value.parse::<usize>().map_err(|_| bad_int("n"))?),
            "p" => p = Some(value.parse::<usize>().map_err(|_| bad_int("p"))?),
            "m" => m = Some(value.parse::<usize>().map_err(|_| bad_int("m"))?),
            "boundary" => {
                boundary = match value {
                    "fixed_zero" => BoundaryKind::FixedZero,
                    "natural" => BoundaryKind::Natural,
                    other => {
                        return Err(Error::Config(format!(
                            "line {}: unknown boundary kind `{other}`",
                            lineno + 1
                        )))
                    }
                }
            }
            _ => {
                let indexed = |prefix: &str| -> Option<usize> {
                    key.strip_prefix(prefix).and_then(|s| s.parse::<usize>().ok())
                };
                if let Some(i) = indexed("f.") {
                    f_raw.push((i, value.to_string()));
                } else if let Some(j) = indexed("g.") {
                    g_raw.push((j, value.to_string()));
                } else if let Some(i) = indexed("B.") {
                    b_raw.push((i, value.to_string()));
                } else {
                    return Err(Error::Config(format!(
                        "line {}: unknown key `{key}`",
                        lineno + 1
                    )));
                }
            }
        }
    }

    let n = n.ok_or_else(|| Error::Config("missing key `n`".into()))?;
    let p = p.ok_or_else(|| Error::Config("missing key `p`".into()))?;
    let m = m.ok_or_else(|| Error::Config("missing key `m`".into()))?;

    let collect_exprs = |mut raw: Vec<(usize, String)>, count: usize, what: &str| -> Result<Vec<Expr>> {
        raw.sort_by_key(|(i, _)| *i);
        let indices: Vec<usize> = raw.iter().map(|(i, _)| *i).collect();
        let expected: Vec<usize> = (1..=count).collect();
        if indices != expected {
            return Err(Error::Config(format!(
                "{what} entries must be exactly {what}.1 ..= {what}.{count}"
            )));
        }
        raw.into_iter().map(|(_, s)| expr::parse(&s, n)).collect()
    };
    let f = collect_exprs(f_raw, p, "f")?;
    let g = collect_exprs(g_raw, m, "g")?;

    b_raw.sort_by_key(|(i, _)| *i);
    let b_indices: Vec<usize> = b_raw.iter().map(|(i, _)| *i).collect();
    if b_indices != (1..=p).collect::<Vec<_>>() {
        return Err(Error::Config(format!("B entries must be exactly B.1 ..= B.{p}")));
    }
    let mut b = Vec::with_capacity(p);
    for (_, s) in b_raw {
        b.push(parse_matrix(&s, n)?);
    }

    let spec = ProblemSpec { name, n, p, m, f, b, g, boundary };
    spec.validate()?;
    Ok(spec)
}

fn parse_matrix(s: &str, n: usize) -> Result<Matrix> {
    let rows: Vec<&str> = s.split(';').collect();
    if rows.len() != n {
        return Err(Error::Config(format!(
            "matrix needs {n} rows, got {}",
            rows.len()
        )));
    }
    let mut m = Matrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<&str> = row.split(',').collect();
        if cells.len() != n {
            return Err(Error::Config(format!(
                "matrix row {} needs {n} entries, got {}",
                i + 1,
                cells.len()
            )));
        }
        for (j, cell) in cells.iter().enumerate() {
            m[(i, j)] = cell
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad matrix entry `{}`", cell.trim())))?;
        }
    }
    Ok(m)
}

/// Serialize a spec back to the file format (used for golden files).
pub fn format_problem_file(spec: &ProblemSpec) -> String {
    let mut out = String::new();
    out.push_str(&format!("name = {}\n", spec.name));
    out.push_str(&format!("n = {}\n", spec.n));
    out.push_str(&format!("p = {}\n", spec.p));
    out.push_str(&format!("m = {}\n", spec.m));
    out.push_str(&format!("boundary = {}\n", spec.boundary.as_str()));
    for (i, e) in spec.f.iter().enumerate() {
        out.push_str(&format!("f.{} = {}\n", i + 1, e));
    }
    for (i, bi) in spec.b.iter().enumerate() {
        let rows: Vec<String> = (0..bi.rows)
            .map(|r| {
                (0..bi.cols)
                    .map(|c| format!("{}", bi[(r, c)]))
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect();
        out.push_str(&format!("B.{} = {}\n", i + 1, rows.join(";")));
    }
    for (j, e) in spec.g.iter().enumerate() {
        out.push_str(&format!("g.{} = {}\n", j + 1, e));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn identity2() -> Matrix {
        Matrix::identity(2)
    }

    #[test]
    fn sqrt_term_examples() {
        assert_eq!(sqrt_term(&[3.0, 4.0], &identity2()), 5.0);
        assert_eq!(sqrt_term(&[7.0, -2.0], &Matrix::zeros(2, 2)), 0.0);
        let b = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        // vᵀBv = 2 + 2*2 + 2*4 = 14 for v = (1,2)
        assert!((sqrt_term(&[1.0, 2.0], &b) - 14.0f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn sqrt_term_positive_homogeneity() {
        let b = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let v = [0.3, -1.7];
        for alpha in [-2.5, -1.0, 0.0, 0.7, 3.0] {
            let scaled = [alpha * v[0], alpha * v[1]];
            let lhs = sqrt_term(&scaled, &b);
            let rhs = alpha.abs() * sqrt_term(&v, &b);
            assert!((lhs - rhs).abs() < 1e-12 * rhs.max(1.0));
        }
    }

    #[test]
    fn sqrt_term_kernel_characterization() {
        // For PSD B: sqrt_term(v) = 0 iff Bv = 0.
        let b = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        let in_kernel = [0.0, 5.0];
        assert_eq!(sqrt_term(&in_kernel, &b), 0.0);
        assert!(linalg::norm_inf(&b.matvec(&in_kernel)) < 1e-8);
        let off_kernel = [1.0, 0.0];
        assert!(sqrt_term(&off_kernel, &b) > 1e-8);
        assert!(linalg::norm_inf(&b.matvec(&off_kernel)) > 1e-8);
    }

    #[test]
    fn psd_check_examples() {
        assert!(psd_check(&identity2(), 1e-10).unwrap());
        let flip = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(!psd_check(&flip, 1e-10).unwrap());
        let semidefinite = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert!(psd_check(&semidefinite, 1e-10).unwrap());
        let rect = Matrix::zeros(2, 3);
        assert!(matches!(psd_check(&rect, 1e-10), Err(Error::NonSquare { .. })));
    }

    fn toy_spec(g_text: &str) -> ProblemSpec {
        ProblemSpec {
            name: "toy".into(),
            n: 1,
            p: 1,
            m: 1,
            f: vec![expr::parse("x0^2", 1).unwrap()],
            b: vec![Matrix::zeros(1, 1)],
            g: vec![expr::parse(g_text, 1).unwrap()],
            boundary: BoundaryKind::FixedZero,
        }
    }

    #[test]
    fn feasibility_of_zero_trajectory() {
        let g = make_grid(0.0, 1.0, 11).unwrap();
        let pt = PrimalPoint::from_trajectory(Trajectory::zeros(&g, 1));

        let spec = toy_spec("x0 - 1");
        let rep = primal_feasibility(&spec, &pt, 1e-6).unwrap();
        assert!(rep.pass(), "{rep}");

        let spec = toy_spec("1 - x0");
        let rep = primal_feasibility(&spec, &pt, 1e-6).unwrap();
        assert!(!rep.pass());
        assert_eq!(rep.get("max g[0]").unwrap().value, 1.0);
    }

    #[test]
    fn objective_zero_at_zero_trajectory() {
        let g = make_grid(0.0, 1.0, 21).unwrap();
        let pt = PrimalPoint::from_trajectory(Trajectory::zeros(&g, 1));
        let spec = toy_spec("x0 - 1");
        let obj = primal_objective(&spec, &pt).unwrap();
        assert_eq!(obj, vec![0.0]);
    }

    #[test]
    fn objective_sqrt_only() {
        // p = 1, f = 0, B = 1 (1x1 identity), x(t) = t on [0,1]: integral of |t| = 1/2.
        let gr = make_grid(0.0, 1.0, 51).unwrap();
        let spec = ProblemSpec {
            name: "sqrt-only".into(),
            n: 1,
            p: 1,
            m: 1,
            f: vec![expr::parse("0", 1).unwrap()],
            b: vec![Matrix::identity(1)],
            g: vec![expr::parse("x0 - 10", 1).unwrap()],
            boundary: BoundaryKind::Natural,
        };
        let x = Trajectory::from_fn(&gr, 1, |t| vec![t]);
        let pt = PrimalPoint::from_trajectory(x);
        let obj = primal_objective(&spec, &pt).unwrap();
        assert!((obj[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn problem_file_round_trip() {
        let text = "# demo\nname = demo\nn = 2\np = 1\nm = 1\nboundary = natural\n\
                    f.1 = x0^2 + x1^2\nB.1 = 1,0;0,1\ng.1 = x0 - 1\n";
        let spec = parse_problem_file(text).unwrap();
        assert_eq!(spec.n, 2);
        assert_eq!(spec.boundary, BoundaryKind::Natural);
        let formatted = format_problem_file(&spec);
        let spec2 = parse_problem_file(&formatted).unwrap();
        assert_eq!(spec2.name, spec.name);
        assert_eq!(spec2.f[0], spec.f[0]);
        assert_eq!(spec2.b[0], spec.b[0]);
    }

    #[test]
    fn problem_file_rejects_bad_input() {
        assert!(parse_problem_file("n = 1\np = 1\nm = 1\nf.1 = x0\nB.1 = 1\n").is_err()); // no g
        let non_psd = "name = bad\nn = 2\np = 1\nm = 1\nboundary = fixed_zero\n\
                       f.1 = x0\nB.1 = 0,1;1,0\ng.1 = x0\n";
        assert!(parse_problem_file(non_psd).is_err());
        let bad_key = "n = 1\np = 1\nm = 1\nzz = 3\nf.1 = x0\nB.1 = 1\ng.1 = x0\n";
        assert!(matches!(parse_problem_file(bad_key), Err(Error::Config(_))));
    }
}
