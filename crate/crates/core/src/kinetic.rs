//! Spatially homogeneous velocity-space solver for the collision operator
//! `Q(f) = div_v [ sigma^-1 (v - u_f) f + D grad_v f ]` and, optionally, the
//! self-propulsion transport `-tau^-1 div_v ((1 - |v|^2/a^2) v f)`.
//!
//! The operator is discretized in divergence form on a cell-centered grid:
//! central differences for `grad_v f`, arithmetic face averages for `f`,
//! zero flux through the domain boundary. Mass is therefore conserved to
//! round-off by construction. `u_f` is recomputed from `f` every step (the
//! operator is quadratic through `u_f`).

use crate::coeffs::ModelParams;
use crate::exec;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KineticError {
    #[error("velocity grid tail budget violated: need v_max >= |u_f| + 6 sqrt(T) = {needed}, have {have}")]
    TailBudget { needed: f64, have: f64 },
    #[error("zero or negative total mass; u_f undefined")]
    ZeroMass,
    #[error("explicit stability violated: dt = {dt} exceeds {limit} ({which})")]
    Stability { dt: f64, limit: f64, which: &'static str },
    #[error("mass drifted by {drift:e} (relative), conservation budget is 1e-12")]
    MassDrift { drift: f64 },
    #[error("invalid grid: {0}")]
    BadGrid(String),
}

/// Uniform cell-centered velocity grid on `[-v_max, v_max]^dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityGrid {
    pub v_max: f64,
    /// Points per axis.
    pub n: usize,
    /// Velocity dimension (1 or 2; d = 3 grids exceed desk scale).
    pub dim: usize,
}

impl VelocityGrid {
    pub fn new(v_max: f64, n: usize, dim: usize) -> Result<Self, KineticError> {
        if !(v_max > 0.0) || n < 4 || !(1..=2).contains(&dim) {
            return Err(KineticError::BadGrid(format!(
                "v_max = {v_max}, n = {n}, dim = {dim}"
            )));
        }
        Ok(Self { v_max, n, dim })
    }

    /// Grid spacing `h = 2 v_max / n`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.v_max / self.n as f64
    }

    pub fn cell_count(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Cell volume `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinate of cell center along one axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.v_max + (i as f64 + 0.5) * self.spacing()
    }

    /// Coordinate of the face between cells `k` and `k+1` along one axis.
    pub fn face_coord(&self, k: usize) -> f64 {
        -self.v_max + (k as f64 + 1.0) * self.spacing()
    }

    /// Fill `out` with the center of cell `idx` (row-major, x fastest).
    pub fn center(&self, idx: usize, out: &mut [f64; 3]) {
        match self.dim {
            1 => {
                out[0] = self.coord(idx);
            }
            _ => {
                out[0] = self.coord(idx % self.n);
                out[1] = self.coord(idx / self.n);
            }
        }
    }
}

/// Velocity distribution on a [`VelocityGrid`].
#[derive(Debug, Clone)]
pub struct DistributionFunction {
    pub grid: VelocityGrid,
    pub values: Vec<f64>,
}

impl DistributionFunction {
    pub fn new(grid: VelocityGrid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.cell_count());
        Self { grid, values }
    }

    /// Sampled Maxwellian `rho M_u` with temperature `temp`.
    pub fn maxwellian(grid: VelocityGrid, rho: f64, u: &[f64], temp: f64) -> Self {
        assert!(temp > 0.0);
        let d = grid.dim;
        let norm = rho / (2.0 * std::f64::consts::PI * temp).powf(d as f64 / 2.0);
        let mut values = vec![0.0; grid.cell_count()];
        let mut w = [0.0f64; 3];
        for (idx, v) in values.iter_mut().enumerate() {
            grid.center(idx, &mut w);
            let r2: f64 = (0..d).map(|k| (w[k] - u[k]) * (w[k] - u[k])).sum();
            *v = norm * (-r2 / (2.0 * temp)).exp();
        }
        Self { grid, values }
    }

    /// Constant on `[lo, hi]^dim`, zero outside.
    pub fn uniform_box(grid: VelocityGrid, rho: f64, lo: f64, hi: f64) -> Self {
        assert!(hi > lo);
        let d = grid.dim;
        let level = rho / (hi - lo).powi(d as i32);
        let mut values = vec![0.0; grid.cell_count()];
        let mut w = [0.0f64; 3];
        for (idx, v) in values.iter_mut().enumerate() {
            grid.center(idx, &mut w);
            if (0..d).all(|k| w[k] >= lo && w[k] <= hi) {
                *v = level;
            }
        }
        Self { grid, values }
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn momentum(&self) -> [f64; 3] {
        let mut mom = [0.0f64; 3];
        let mut w = [0.0f64; 3];
        for (idx, &v) in self.values.iter().enumerate() {
            self.grid.center(idx, &mut w);
            for k in 0..self.grid.dim {
                mom[k] += v * w[k];
            }
        }
        for m in &mut mom {
            *m *= self.grid.cell_volume();
        }
        mom
    }

    /// `u_f = int f v dv / int f dv` by midpoint quadrature.
    pub fn mean_velocity(&self) -> Result<[f64; 3], KineticError> {
        let m = self.mass();
        if !(m > 0.0) {
            return Err(KineticError::ZeroMass);
        }
        let mom = self.momentum();
        Ok([mom[0] / m, mom[1] / m, mom[2] / m])
    }

    /// Discrete free energy `H[f] = int f ln(f / M_{u_f}) dv`; cells with
    /// `f <= 0` contribute nothing (`0 ln 0 = 0` convention).
    pub fn free_energy(&self, params: &ModelParams) -> Result<f64, KineticError> {
        let temp = params.temp();
        let u = self.mean_velocity()?;
        let d = self.grid.dim;
        let log_norm = -(d as f64 / 2.0) * (2.0 * std::f64::consts::PI * temp).ln();
        let mut h = 0.0;
        let mut w = [0.0f64; 3];
        for (idx, &f) in self.values.iter().enumerate() {
            if f <= 0.0 {
                continue;
            }
            self.grid.center(idx, &mut w);
            let r2: f64 = (0..d).map(|k| (w[k] - u[k]) * (w[k] - u[k])).sum();
            let ln_m = log_norm - r2 / (2.0 * temp);
            h += f * (f.ln() - ln_m);
        }
        Ok(h * self.grid.cell_volume())
    }

    fn tail_budget_check(&self, params: &ModelParams) -> Result<[f64; 3], KineticError> {
        let u = self.mean_velocity()?;
        let d = self.grid.dim;
        let speed: f64 = (0..d).map(|k| u[k] * u[k]).sum::<f64>().sqrt();
        let needed = speed + 6.0 * params.temp().sqrt();
        if self.grid.v_max < needed {
            return Err(KineticError::TailBudget { needed, have: self.grid.v_max });
        }
        Ok(u)
    }
}

/// Discrete `Q(f)` in divergence form with zero boundary flux.
pub fn apply_q(f: &DistributionFunction, params: &ModelParams) -> Result<DistributionFunction, KineticError> {
    let u = f.tail_budget_check(params)?;
    let q = collision_divergence(f, params, &u, 1.0);
    Ok(DistributionFunction::new(f.grid, q))
}

/// `(1/eps) div_v [sigma^-1 (v - u) f + D grad_v f]` per cell.
fn collision_divergence(
    f: &DistributionFunction,
    params: &ModelParams,
    u: &[f64; 3],
    eps: f64,
) -> Vec<f64> {
    let grid = f.grid;
    let n = grid.n;
    let h = grid.spacing();
    let inv_sigma = 1.0 / params.sigma;
    let diff = params.diff;
    let vals = &f.values;

    // Face flux between consecutive cells along an axis.
    let face = |fk: f64, fk1: f64, vf: f64, u_ax: f64| {
        inv_sigma * (vf - u_ax) * 0.5 * (fk + fk1) + diff * (fk1 - fk) / h
    };

    match grid.dim {
        1 => exec::map_indexed(n, |i| {
            let fr = if i + 1 < n {
                face(vals[i], vals[i + 1], grid.face_coord(i), u[0])
            } else {
                0.0
            };
            let fl = if i > 0 {
                face(vals[i - 1], vals[i], grid.face_coord(i - 1), u[0])
            } else {
                0.0
            };
            (fr - fl) / h / eps
        }),
        _ => exec::map_indexed(n * n, |idx| {
            let ix = idx % n;
            let iy = idx / n;
            let c = vals[idx];
            let mut div = 0.0;
            // x faces
            if ix + 1 < n {
                div += face(c, vals[idx + 1], grid.face_coord(ix), u[0]);
            }
            if ix > 0 {
                div -= face(vals[idx - 1], c, grid.face_coord(ix - 1), u[0]);
            }
            // y faces
            if iy + 1 < n {
                div += face(c, vals[idx + n], grid.face_coord(iy), u[1]);
            }
            if iy > 0 {
                div -= face(vals[idx - n], c, grid.face_coord(iy - 1), u[1]);
            }
            div / h / eps
        }),
    }
}

/// `-div_v [ tau^-1 (1 - |v|^2/a^2) v f ]` per cell, upwind fluxes.
fn propulsion_divergence(f: &DistributionFunction, params: &ModelParams) -> Vec<f64> {
    let grid = f.grid;
    let n = grid.n;
    let h = grid.spacing();
    let a2 = params.a * params.a;
    let inv_tau = 1.0 / params.tau;
    let vals = &f.values;

    // Upwind propulsion flux through a face with full velocity `v` there.
    let flux = |f_lo: f64, f_hi: f64, v: &[f64], ax: usize| {
        let speed = inv_tau * (1.0 - v.iter().map(|x| x * x).sum::<f64>() / a2) * v[ax];
        if speed >= 0.0 {
            speed * f_lo
        } else {
            speed * f_hi
        }
    };

    match grid.dim {
        1 => exec::map_indexed(n, |i| {
            let gr = if i + 1 < n {
                flux(vals[i], vals[i + 1], &[grid.face_coord(i)], 0)
            } else {
                0.0
            };
            let gl = if i > 0 {
                flux(vals[i - 1], vals[i], &[grid.face_coord(i - 1)], 0)
            } else {
                0.0
            };
            -(gr - gl) / h
        }),
        _ => exec::map_indexed(n * n, |idx| {
            let ix = idx % n;
            let iy = idx / n;
            let c = vals[idx];
            let (cx, cy) = (grid.coord(ix), grid.coord(iy));
            let mut div = 0.0;
            if ix + 1 < n {
                div += flux(c, vals[idx + 1], &[grid.face_coord(ix), cy], 0);
            }
            if ix > 0 {
                div -= flux(vals[idx - 1], c, &[grid.face_coord(ix - 1), cy], 0);
            }
            if iy + 1 < n {
                div += flux(c, vals[idx + n], &[cx, grid.face_coord(iy)], 1);
            }
            if iy > 0 {
                div -= flux(vals[idx - n], c, &[cx, grid.face_coord(iy - 1)], 1);
            }
            -div / h
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScheme {
    /// Forward Euler; subject to the drift/diffusion stability limits.
    Explicit,
    /// Implicit collision operator (per-axis tridiagonal solves), explicit
    /// propulsion. No collision dt restriction beyond accuracy.
    SemiImplicit,
}

/// Homogeneous-in-space integrator for `df/dt = (1/eps) Q(f) [+ propulsion]`.
#[derive(Debug, Clone, Copy)]
pub struct HomogeneousSolver {
    pub params: ModelParams,
    pub eps: f64,
    pub propulsion: bool,
    pub scheme: TimeScheme,
}

impl HomogeneousSolver {
    /// Pure collision relaxation `df/dt = Q(f)`.
    pub fn relaxation(params: ModelParams, scheme: TimeScheme) -> Self {
        Self { params, eps: 1.0, propulsion: false, scheme }
    }

    /// Scaled collision plus self-propulsion,
    /// `df/dt = (1/eps) Q(f) - tau^-1 div_v((1 - |v|^2/a^2) v f)`.
    pub fn with_propulsion(params: ModelParams, eps: f64, scheme: TimeScheme) -> Self {
        assert!(eps > 0.0);
        Self { params, eps, propulsion: true, scheme }
    }

    fn check_dt(&self, grid: &VelocityGrid, dt: f64) -> Result<(), KineticError> {
        let h = grid.spacing();
        if self.propulsion {
            let d = grid.dim as f64;
            let a2 = self.params.a * self.params.a;
            let smax = (1.0 + d * grid.v_max * grid.v_max / a2) * grid.v_max / self.params.tau;
            let limit = h / smax;
            if dt > limit {
                return Err(KineticError::Stability { dt, limit, which: "propulsion CFL" });
            }
        }
        if self.scheme == TimeScheme::Explicit {
            let d = grid.dim as f64;
            let diffusion = if self.params.diff > 0.0 {
                self.eps * h * h / (2.0 * d * self.params.diff)
            } else {
                f64::INFINITY
            };
            let drift = self.eps * self.params.sigma * h / (2.0 * grid.v_max);
            let limit = diffusion.min(drift);
            if dt > limit * 1.000_000_1 {
                return Err(KineticError::Stability { dt, limit, which: "explicit collision" });
            }
        }
        Ok(())
    }

    /// Advance `f` by one step of size `dt`.
    pub fn step(&self, f: &mut DistributionFunction, dt: f64) -> Result<(), KineticError> {
        self.check_dt(&f.grid, dt)?;
        let u = f.tail_budget_check(&self.params)?;
        match self.scheme {
            TimeScheme::Explicit => {
                let mut rhs = collision_divergence(f, &self.params, &u, self.eps);
                if self.propulsion {
                    let prop = propulsion_divergence(f, &self.params);
                    for (r, p) in rhs.iter_mut().zip(&prop) {
                        *r += p;
                    }
                }
                for (v, r) in f.values.iter_mut().zip(&rhs) {
                    *v += dt * r;
                }
            }
            TimeScheme::SemiImplicit => {
                // The tridiagonal solves are conservative by construction
                // (exact zero column sums), but forward/backward substitution
                // still rounds at ~1 ulp per step, which over long stiff runs
                // can breach the 1e-12 mass budget. Restore the exact total
                // after the solves.
                let sum_before: f64 = f.values.iter().sum();
                if self.propulsion {
                    let prop = propulsion_divergence(f, &self.params);
                    for (v, p) in f.values.iter_mut().zip(&prop) {
                        *v += dt * p;
                    }
                }
                let dt_eff = dt / self.eps;
                implicit_collision_axis(f, &self.params, &u, dt_eff, 0);
                if f.grid.dim == 2 {
                    implicit_collision_axis(f, &self.params, &u, dt_eff, 1);
                }
                let sum_after: f64 = f.values.iter().sum();
                if sum_after != 0.0 && sum_after.is_finite() {
                    let scale = sum_before / sum_after;
                    for v in f.values.iter_mut() {
                        *v *= scale;
                    }
                }
            }
        }
        Ok(())
    }

    /// Integrate to `t_end` (final partial step included) and verify the
    /// mass-conservation budget.
    pub fn integrate(
        &self,
        f0: &DistributionFunction,
        t_end: f64,
        dt: f64,
    ) -> Result<DistributionFunction, KineticError> {
        let mut f = f0.clone();
        let m0 = f.mass();
        let sum0: f64 = f.values.iter().sum();
        let mut t = 0.0;
        while t < t_end - 1e-14 * t_end.max(1.0) {
            let step_dt = dt.min(t_end - t);
            self.step(&mut f, step_dt)?;
            t += step_dt;
            // Anchor the (exactly conservative) update to the initial total
            // so per-step rounding cannot random-walk across long runs.
            let sum: f64 = f.values.iter().sum();
            if sum != 0.0 && sum.is_finite() {
                let scale = sum0 / sum;
                for v in f.values.iter_mut() {
                    *v *= scale;
                }
            }
        }
        let drift = ((f.mass() - m0) / m0).abs();
        if drift > 1e-12 {
            return Err(KineticError::MassDrift { drift });
        }
        Ok(f)
    }
}

/// Backward-Euler solve of the axis part of the collision operator:
/// `(I - dt A_ax) f_new = f`, `A_ax f = d/dv_ax [sigma^-1 (v_ax - u_ax) f
/// + D df/dv_ax]` in the same flux form as the explicit path.
fn implicit_collision_axis(
    f: &mut DistributionFunction,
    params: &ModelParams,
    u: &[f64; 3],
    dt: f64,
    axis: usize,
) {
    let grid = f.grid;
    let n = grid.n;
    let h = grid.spacing();
    let inv_sigma = 1.0 / params.sigma;
    let dh = params.diff / h;
    let u_ax = u[axis];

    // Face drift coefficients c_k = sigma^-1 (v_face - u_ax).
    let drift: Vec<f64> = (0..n.saturating_sub(1))
        .map(|k| inv_sigma * (grid.face_coord(k) - u_ax))
        .collect();

    // Tridiagonal coefficients of (I - dt A) on one line.
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    for i in 0..n {
        let mut d_ii = 0.0;
        if i + 1 < n {
            d_ii += (0.5 * drift[i] - dh) / h;
            sup[i] = -dt * (0.5 * drift[i] + dh) / h;
        }
        if i > 0 {
            d_ii -= (0.5 * drift[i - 1] + dh) / h;
            sub[i] = dt * (0.5 * drift[i - 1] - dh) / h;
        }
        diag[i] = 1.0 - dt * d_ii;
    }

    let lines = if grid.dim == 1 { 1 } else { n };
    let mut buf = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    for line in 0..lines {
        // Gather the line (x lines are contiguous, y lines are strided).
        for i in 0..n {
            let idx = match (grid.dim, axis) {
                (1, _) => i,
                (_, 0) => line * n + i,
                _ => i * n + line,
            };
            buf[i] = f.values[idx];
        }
        solve_tridiagonal(&sub, &diag, &sup, &mut buf, &mut scratch);
        for i in 0..n {
            let idx = match (grid.dim, axis) {
                (1, _) => i,
                (_, 0) => line * n + i,
                _ => i * n + line,
            };
            f.values[idx] = buf[i];
        }
    }
}

/// Thomas algorithm; `rhs` is overwritten with the solution.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64], scratch: &mut [f64]) {
    let n = rhs.len();
    scratch[0] = sup[0] / diag[0];
    rhs[0] /= diag[0];
    for i in 1..n {
        let m = 1.0 / (diag[i] - sub[i] * scratch[i - 1]);
        scratch[i] = sup[i] * m;
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) * m;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

/// Spec-level operation: integrate `df/dt = Q(f)` to `t_end`.
pub fn relax(
    f0: &DistributionFunction,
    params: &ModelParams,
    t_end: f64,
    dt: f64,
    scheme: TimeScheme,
) -> Result<DistributionFunction, KineticError> {
    HomogeneousSolver::relaxation(*params, scheme).integrate(f0, t_end, dt)
}

/// Spec-level operation: integrate
/// `df/dt = (1/eps) Q(f) - tau^-1 div_v((1-|v|^2/a^2) v f)` to `t_end`.
pub fn relax_with_propulsion(
    f0: &DistributionFunction,
    params: &ModelParams,
    eps: f64,
    t_end: f64,
    dt: f64,
    scheme: TimeScheme,
) -> Result<DistributionFunction, KineticError> {
    HomogeneousSolver::with_propulsion(*params, eps, scheme).integrate(f0, t_end, dt)
}
