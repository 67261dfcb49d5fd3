//! Uniform time grid, finite-difference derivative operators and
//! trapezoidal quadrature.
//!
//! The differentiation operator `D` uses second-order central differences at
//! interior nodes and second-order one-sided stencils at the two endpoints,
//! so `D` is a fixed linear operator on node values. `D²` is `D` applied
//! twice by default, which keeps the discrete adjoint identities used by the
//! duality residuals exact on the interior of the grid; a direct three-point
//! stencil is available separately.

use crate::{Error, Result};

/// Uniform discretization of the interval I = [a, b].
#[derive(Debug, Clone)]
pub struct TimeGrid {
    pub a: f64,
    pub b: f64,
    pub n_nodes: usize,
    pub h: f64,
    pub nodes: Vec<f64>,
}

impl TimeGrid {
    /// Grids are interchangeable when they discretize the same interval
    /// with the same node count.
    pub fn same_as(&self, other: &TimeGrid) -> bool {
        self.n_nodes == other.n_nodes && self.a == other.a && self.b == other.b
    }

    /// Trapezoidal quadrature weights: h/2 at the endpoints, h inside.
    pub fn quad_weights(&self) -> Vec<f64> {
        let mut w = vec![self.h; self.n_nodes];
        w[0] = 0.5 * self.h;
        w[self.n_nodes - 1] = 0.5 * self.h;
        w
    }
}

/// Build a uniform grid with `n_nodes` nodes on [a, b].
pub fn make_grid(a: f64, b: f64, n_nodes: usize) -> Result<TimeGrid> {
    if !(b > a) {
        return Err(Error::Domain(format!("interval requires b > a, got [{a}, {b}]")));
    }
    if n_nodes < 5 {
        return Err(Error::Domain(format!("grid needs at least 5 nodes, got {n_nodes}")));
    }
    let h = (b - a) / (n_nodes - 1) as f64;
    let mut nodes: Vec<f64> = (0..n_nodes).map(|k| a + h * k as f64).collect();
    // Pin the endpoints exactly.
    nodes[0] = a;
    nodes[n_nodes - 1] = b;
    Ok(TimeGrid { a, b, n_nodes, h, nodes })
}

/// Sampled vector function on a grid: row k holds x(t_k) in R^n.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub dim: usize,
    /// Row-major node-major storage: values[k * dim + c].
    pub values: Vec<f64>,
}

impl Trajectory {
    pub fn zeros(grid: &TimeGrid, dim: usize) -> Self {
        assert!(dim >= 1, "trajectory needs dim >= 1");
        Trajectory { grid: grid.clone(), dim, values: vec![0.0; grid.n_nodes * dim] }
    }

    /// Sample a function of time componentwise.
    pub fn from_fn(grid: &TimeGrid, dim: usize, f: impl Fn(f64) -> Vec<f64>) -> Self {
        let mut tr = Trajectory::zeros(grid, dim);
        for (k, &t) in grid.nodes.iter().enumerate() {
            let row = f(t);
            assert_eq!(row.len(), dim);
            tr.values[k * dim..(k + 1) * dim].copy_from_slice(&row);
        }
        tr
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn set(&mut self, k: usize, c: usize, v: f64) {
        self.values[k * self.dim + c] = v;
    }

    pub fn get(&self, k: usize, c: usize) -> f64 {
        self.values[k * self.dim + c]
    }

    /// One component as a contiguous vector of node values.
    pub fn component(&self, c: usize) -> Vec<f64> {
        (0..self.grid.n_nodes).map(|k| self.get(k, c)).collect()
    }

    pub fn set_component(&mut self, c: usize, vals: &[f64]) {
        assert_eq!(vals.len(), self.grid.n_nodes);
        for (k, &v) in vals.iter().enumerate() {
            self.set(k, c, v);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// self + alpha * other, componentwise; grids must match.
    pub fn axpy(&self, alpha: f64, other: &Trajectory) -> Result<Trajectory> {
        check_pair(self, other)?;
        let mut out = self.clone();
        for (o, v) in out.values.iter_mut().zip(&other.values) {
            *o += alpha * v;
        }
        Ok(out)
    }

    pub fn scale(&self, alpha: f64) -> Trajectory {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// Max-norm distance in node-value space.
    pub fn max_distance(&self, other: &Trajectory) -> Result<f64> {
        check_pair(self, other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
    }
}

fn check_pair(a: &Trajectory, b: &Trajectory) -> Result<()> {
    if !a.grid.same_as(&b.grid) {
        return Err(Error::GridMismatch("trajectories on different grids".into()));
    }
    if a.dim != b.dim {
        return Err(Error::GridMismatch(format!(
            "trajectory widths differ: {} vs {}",
            a.dim, b.dim
        )));
    }
    Ok(())
}

/// Stencil of row `k` of D as (column, weight) pairs.
///
/// Interior rows are central differences (f_{k+1} - f_{k-1}) / 2h with
/// truncation error +h²f'''/6. The endpoint rows use the error-matched
/// one-sided closure (-4f_0 + 7f_1 - 4f_2 + f_3) / 2h, whose leading error
/// is the same +h²f'''/6. Matching the error coefficient (rather than just
/// the order) makes the error field of D a smooth O(h²) function all the
/// way to the boundary, so the composition D∘D stays O(h²) there as well;
/// an ordinary one-sided closure leaves an O(h²) kink that the second
/// application differentiates into an O(h) endpoint error.
pub(crate) fn d_stencil(k: usize, n: usize, h: f64) -> Vec<(usize, f64)> {
    let s = 1.0 / (2.0 * h);
    if k == 0 {
        vec![(0, -4.0 * s), (1, 7.0 * s), (2, -4.0 * s), (3, s)]
    } else if k == n - 1 {
        vec![
            (n - 1, 4.0 * s),
            (n - 2, -7.0 * s),
            (n - 3, 4.0 * s),
            (n - 4, -s),
        ]
    } else {
        vec![(k - 1, -s), (k + 1, s)]
    }
}

/// Row `k` of the D operator, exposed for boundary-condition rows.
pub fn d_row(k: usize, n_nodes: usize, h: f64) -> Vec<(usize, f64)> {
    d_stencil(k, n_nodes, h)
}

/// Apply D to a single component vector.
pub fn apply_d(vals: &[f64], grid: &TimeGrid) -> Vec<f64> {
    let n = grid.n_nodes;
    assert_eq!(vals.len(), n);
    let mut out = vec![0.0; n];
    for k in 0..n {
        let mut acc = 0.0;
        for (c, w) in d_stencil(k, n, grid.h) {
            acc += w * vals[c];
        }
        out[k] = acc;
    }
    out
}

/// Apply Dᵀ to a single component vector (scatter form of the stencil).
pub fn apply_d_transpose(vals: &[f64], grid: &TimeGrid) -> Vec<f64> {
    let n = grid.n_nodes;
    assert_eq!(vals.len(), n);
    let mut out = vec![0.0; n];
    for k in 0..n {
        for (c, w) in d_stencil(k, n, grid.h) {
            out[c] += w * vals[k];
        }
    }
    out
}

/// First derivative of a trajectory: D applied componentwise.
pub fn derivative(x: &Trajectory) -> Trajectory {
    let mut out = Trajectory::zeros(&x.grid, x.dim);
    for c in 0..x.dim {
        out.set_component(c, &apply_d(&x.component(c), &x.grid));
    }
    out
}

/// Second derivative as D applied twice (the default; see module docs).
pub fn second_derivative(x: &Trajectory) -> Trajectory {
    derivative(&derivative(x))
}

/// Second derivative by a direct three-point stencil with one-sided
/// closures. Narrower stencil than the composed default, but it is not
/// the exact square of D; kept for comparison runs.
pub fn second_derivative_direct(x: &Trajectory) -> Trajectory {
    let n = x.grid.n_nodes;
    let h2 = x.grid.h * x.grid.h;
    let mut out = Trajectory::zeros(&x.grid, x.dim);
    for c in 0..x.dim {
        let v = x.component(c);
        let mut d = vec![0.0; n];
        d[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2;
        for k in 1..n - 1 {
            d[k] = (v[k - 1] - 2.0 * v[k] + v[k + 1]) / h2;
        }
        d[n - 1] = (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) / h2;
        out.set_component(c, &d);
    }
    out
}

/// Trapezoidal rule over the grid.
pub fn integrate(f: &[f64], grid: &TimeGrid) -> Result<f64> {
    if f.len() != grid.n_nodes {
        return Err(Error::LengthMismatch { expected: grid.n_nodes, got: f.len() });
    }
    let w = grid.quad_weights();
    Ok(f.iter().zip(&w).map(|(v, wk)| v * wk).sum())
}

/// Discrete integration-by-parts defect |∫(Dφ)ᵀψ dt + ∫φᵀ(Dψ) dt|.
///
/// For φ vanishing at both endpoints the continuous sum of the two
/// integrals is exactly zero (the boundary term drops), so the returned
/// value measures how well the discrete operators reproduce the
/// integration-by-parts step of the weak-duality argument. Decays as
/// O(h²) on smooth inputs.
pub fn adjoint_identity_residual(phi: &Trajectory, psi: &Trajectory) -> Result<f64> {
    check_pair(phi, psi)?;
    let grid = &phi.grid;
    let dphi = derivative(phi);
    let dpsi = derivative(psi);
    let n = grid.n_nodes;
    let mut f1 = vec![0.0; n];
    let mut f2 = vec![0.0; n];
    for k in 0..n {
        f1[k] = crate::linalg::dot(dphi.row(k), psi.row(k));
        f2[k] = crate::linalg::dot(phi.row(k), dpsi.row(k));
    }
    Ok((integrate(&f1, grid)? + integrate(&f2, grid)?).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_traj(grid: &TimeGrid, f: impl Fn(f64) -> f64) -> Trajectory {
        Trajectory::from_fn(grid, 1, |t| vec![f(t)])
    }

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn make_grid_basic() {
        let g = make_grid(0.0, 1.0, 5).unwrap();
        assert_eq!(g.nodes, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.h, 0.25);
        let g2 = make_grid(-1.0, 1.0, 101).unwrap();
        assert!((g2.h - 0.02).abs() < 1e-15);
        assert_eq!(g2.nodes[0], -1.0);
        assert_eq!(g2.nodes[100], 1.0);
    }

    #[test]
    fn make_grid_rejects_bad_input() {
        assert!(matches!(make_grid(0.0, 1.0, 2), Err(Error::Domain(_))));
        assert!(matches!(make_grid(1.0, 1.0, 11), Err(Error::Domain(_))));
        assert!(matches!(make_grid(2.0, 1.0, 11), Err(Error::Domain(_))));
    }

    #[test]
    fn grid_nodes_equally_spaced() {
        let g = make_grid(-2.5, 7.25, 137).unwrap();
        for k in 1..g.n_nodes {
            let gap = g.nodes[k] - g.nodes[k - 1];
            assert!((gap - g.h).abs() <= 1e-12 * (g.b - g.a));
        }
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let g = make_grid(0.0, 1.0, 11).unwrap();
        let x = scalar_traj(&g, |_| 3.5);
        let d = derivative(&x);
        assert!(d.values.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn derivative_exact_on_linear() {
        let g = make_grid(0.0, 1.0, 11).unwrap();
        let x = scalar_traj(&g, |t| t);
        let d = derivative(&x);
        for v in &d.values {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_second_order_on_cubic() {
        // x = t^3, exact derivative 3t^2; halving h should divide the max
        // error by about 4.
        let err = |n: usize| {
            let g = make_grid(0.0, 1.0, n).unwrap();
            let x = scalar_traj(&g, |t| t * t * t);
            let d = derivative(&x);
            let exact: Vec<f64> = g.nodes.iter().map(|t| 3.0 * t * t).collect();
            max_err(&d.component(0), &exact)
        };
        let ratio = err(21) / err(41);
        assert!(
            (3.5..=4.5).contains(&ratio),
            "expected order-2 convergence, ratio = {ratio}"
        );
    }

    #[test]
    fn second_derivative_exact_on_quadratic() {
        let g = make_grid(0.0, 2.0, 21).unwrap();
        let x = scalar_traj(&g, |t| t * t);
        for d2 in [second_derivative(&x), second_derivative_direct(&x)] {
            for v in &d2.values {
                assert!((v - 2.0).abs() < 1e-10, "got {v}");
            }
        }
        let c = scalar_traj(&g, |_| -7.0);
        assert!(second_derivative(&c).values.iter().all(|v| v.abs() < 1e-11));
    }

    #[test]
    fn second_derivative_second_order_on_sine() {
        let err = |n: usize| {
            let g = make_grid(0.0, std::f64::consts::PI, n).unwrap();
            let x = scalar_traj(&g, |t| t.sin());
            let d2 = second_derivative(&x);
            let exact: Vec<f64> = g.nodes.iter().map(|t| -t.sin()).collect();
            max_err(&d2.component(0), &exact)
        };
        let ratio = err(41) / err(81);
        assert!(
            (3.5..=4.5).contains(&ratio),
            "expected order-2 convergence, ratio = {ratio}"
        );
    }

    #[test]
    fn integrate_trapezoid() {
        let g = make_grid(0.0, 1.0, 11).unwrap();
        let ones = vec![1.0; 11];
        assert!((integrate(&ones, &g).unwrap() - 1.0).abs() < 1e-15);
        let lin: Vec<f64> = g.nodes.clone();
        assert!((integrate(&lin, &g).unwrap() - 0.5).abs() < 1e-15);

        let g = make_grid(0.0, 1.0, 101).unwrap();
        let sq: Vec<f64> = g.nodes.iter().map(|t| t * t).collect();
        assert!((integrate(&sq, &g).unwrap() - 1.0 / 3.0).abs() < 2e-5);
    }

    #[test]
    fn integrate_rejects_length_mismatch() {
        let g = make_grid(0.0, 1.0, 11).unwrap();
        assert!(matches!(
            integrate(&[1.0; 10], &g),
            Err(Error::LengthMismatch { expected: 11, got: 10 })
        ));
    }

    #[test]
    fn adjoint_identity_zero_phi() {
        let g = make_grid(0.0, 1.0, 21).unwrap();
        let phi = Trajectory::zeros(&g, 2);
        let psi = Trajectory::from_fn(&g, 2, |t| vec![t, 1.0 - t]);
        assert_eq!(adjoint_identity_residual(&phi, &psi).unwrap(), 0.0);
    }

    #[test]
    fn adjoint_identity_polynomial() {
        // phi = t(1-t) vanishes at both ends; each integral is +-1/6.
        let g = make_grid(0.0, 1.0, 201).unwrap();
        let phi = scalar_traj(&g, |t| t * (1.0 - t));
        let psi = scalar_traj(&g, |t| t);
        let res = adjoint_identity_residual(&phi, &psi).unwrap();
        assert!(res <= 1e-3, "residual {res}");
    }

    #[test]
    fn adjoint_identity_sine() {
        let g = make_grid(0.0, 1.0, 201).unwrap();
        let pi = std::f64::consts::PI;
        let phi = scalar_traj(&g, |t| (pi * t).sin());
        let res = adjoint_identity_residual(&phi, &phi).unwrap();
        assert!(res <= 1e-3, "residual {res}");
    }

    #[test]
    fn adjoint_identity_order2() {
        // The residual must decay at least at O(h^2); superconvergence from
        // error cancellation between the two integrals is acceptable.
        let pi = std::f64::consts::PI;
        let res = |n: usize| {
            let g = make_grid(0.0, 1.0, n).unwrap();
            let phi = scalar_traj(&g, |t| (pi * t).sin());
            let psi = scalar_traj(&g, |t| (t * t).exp());
            adjoint_identity_residual(&phi, &psi).unwrap()
        };
        let ratio = res(51) / res(101);
        assert!(
            ratio >= 3.0,
            "adjoint residual should decay at least at O(h^2), ratio = {ratio}"
        );
    }

    #[test]
    fn adjoint_identity_rejects_mismatch() {
        let g1 = make_grid(0.0, 1.0, 21).unwrap();
        let g2 = make_grid(0.0, 1.0, 31).unwrap();
        let phi = Trajectory::zeros(&g1, 1);
        let psi = Trajectory::zeros(&g2, 1);
        assert!(matches!(
            adjoint_identity_residual(&phi, &psi),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn d_transpose_is_adjoint_of_d() {
        // <Du, v> = <u, Dᵀv> must hold to rounding, by construction.
        let g = make_grid(0.0, 1.0, 17).unwrap();
        let u: Vec<f64> = (0..17).map(|k| ((k * 7 % 13) as f64) * 0.1 - 0.5).collect();
        let v: Vec<f64> = (0..17).map(|k| ((k * 5 % 11) as f64) * 0.2 - 1.0).collect();
        let lhs = crate::linalg::dot(&apply_d(&u, &g), &v);
        let rhs = crate::linalg::dot(&u, &apply_d_transpose(&v, &g));
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn derivative_is_linear() {
        let g = make_grid(0.0, 1.0, 31).unwrap();
        let x = Trajectory::from_fn(&g, 2, |t| vec![t * t, (2.0 * t).sin()]);
        let y = Trajectory::from_fn(&g, 2, |t| vec![t.exp(), 1.0 / (1.0 + t)]);
        let (alpha, beta) = (1.7, -0.3);
        let combo = x.scale(alpha).axpy(beta, &y).unwrap();
        let lhs = derivative(&combo);
        let rhs = derivative(&x).scale(alpha).axpy(beta, &derivative(&y)).unwrap();
        assert!(lhs.max_distance(&rhs).unwrap() < 1e-10);
    }
}
