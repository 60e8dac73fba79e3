use crate::error::{domain, Error, Result};

/// Solves a tridiagonal system with the Thomas algorithm (no pivoting).
///
/// `lower[i]` multiplies `x[i-1]` in row `i` (so `lower[0]` is ignored) and
/// `upper[i]` multiplies `x[i+1]` (so `upper[n-1]` is ignored).
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(domain("tridiagonal bands and right-hand side must have equal length"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];

    let mut pivot = diag[0];
    if pivot.abs() < f64::MIN_POSITIVE || !pivot.is_finite() {
        return Err(Error::SingularSolve { row: 0, pivot });
    }
    c[0] = upper[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * c[i - 1];
        if pivot.abs() < f64::MIN_POSITIVE || !pivot.is_finite() {
            return Err(Error::SingularSolve { row: i, pivot });
        }
        c[i] = upper[i] / pivot;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / pivot;
    }

    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Boundary condition imposed at the right end `x = L` of a heat-equation grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RightBoundary {
    /// `∂_x u(L) = flux`, held constant over the step.
    Neumann(f64),
    /// `u(L) = value` at the new time level.
    Dirichlet(f64),
}

/// One Crank–Nicolson step of `∂_t u = ∂_xx u + reaction·u` on a uniform grid.
///
/// `field` holds the nodal values `u_0..u_N` with spacing `h`. The left node is
/// pinned to `left` at the new level. A Neumann right boundary is eliminated
/// through a ghost node, which keeps the scheme second order.
pub fn crank_nicolson_heat_step(
    field: &[f64],
    left: f64,
    right: RightBoundary,
    h: f64,
    dt: f64,
    reaction: f64,
) -> Result<Vec<f64>> {
    if !(h > 0.0) || !(dt > 0.0) {
        return Err(domain(format!("grid spacing and step must be positive (h = {h}, dt = {dt})")));
    }
    let n_nodes = field.len();
    if n_nodes < 3 {
        return Err(domain("heat grid needs at least three nodes"));
    }
    let last = n_nodes - 1;
    let sigma = dt / (2.0 * h * h);
    let rho = 0.5 * dt * reaction;
    let centre_new = 1.0 + 2.0 * sigma - rho;
    let centre_old = 1.0 - 2.0 * sigma + rho;

    // Unknowns are u_1..u_N for Neumann, u_1..u_{N-1} for Dirichlet.
    let m = match right {
        RightBoundary::Neumann(_) => last,
        RightBoundary::Dirichlet(_) => last - 1,
    };
    let mut lower = vec![-sigma; m];
    let mut diag = vec![centre_new; m];
    let mut upper = vec![-sigma; m];
    let mut rhs = vec![0.0; m];

    for (row, r) in rhs.iter_mut().enumerate() {
        let i = row + 1;
        *r = if i < last {
            sigma * field[i - 1] + centre_old * field[i] + sigma * field[i + 1]
        } else {
            0.0
        };
    }
    rhs[0] += sigma * left;

    match right {
        RightBoundary::Neumann(flux) => {
            let row = m - 1;
            lower[row] = -2.0 * sigma;
            diag[row] = centre_new;
            upper[row] = 0.0;
            rhs[row] = 2.0 * sigma * field[last - 1] + centre_old * field[last] + 4.0 * sigma * h * flux;
        }
        RightBoundary::Dirichlet(value) => {
            upper[m - 1] = 0.0;
            rhs[m - 1] += sigma * value;
        }
    }
    lower[0] = 0.0;

    let interior = solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
    let mut out = Vec::with_capacity(n_nodes);
    out.push(left);
    out.extend_from_slice(&interior);
    if let RightBoundary::Dirichlet(value) = right {
        out.push(value);
    }
    Ok(out)
}
