//! Fast-relaxation limit models: the Self-Organized Hydrodynamics system
//! (low noise, `T < T_c`) and the density diffusion equation (high noise,
//! `T > T_c`).
//!
//! The SOH solver is coefficient-agnostic: driven with `(c, c, T/c)` it
//! realizes the plain fast-relaxation limit, driven with
//! `(c1(alpha), c2(alpha), delta_alpha)` it realizes the alpha-family.
//! `omega` is stored as a vector (never an angle) and renormalized to unit
//! length each step; a probe mode leaves the raw drift visible.

use crate::coeffs::DerivedCoefficients;
use crate::exec;
use crate::grid::SpatialGrid;
use crate::hydro::{track_feature_speed, HydroError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SohError {
    #[error("CFL violated: dt = {dt} exceeds {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("stability violated: dt = {dt} exceeds {limit} (explicit diffusion)")]
    DiffusionStability { dt: f64, limit: f64 },
    #[error("density floor: rho = {rho} in cell {idx} (below 1e-12 of the mean)")]
    DensityFloor { idx: usize, rho: f64 },
    #[error("coefficients not in the SOH regime: {0}")]
    Regime(String),
    #[error(transparent)]
    Tracking(#[from] HydroError),
}

/// Transport/pressure coefficient triple of the generic SOH system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SohCoeffs {
    /// Density convection speed `c1`.
    pub c1: f64,
    /// Orientation convection speed `c2`.
    pub c2: f64,
    /// Pressure coefficient `delta` multiplying `P(grad ln rho)`.
    pub delta: f64,
}

impl SohCoeffs {
    /// The plain fast-relaxation limit `(c, c, T/c)`; requires `T < T_c`.
    pub fn from_comfort_speed(c: &DerivedCoefficients) -> Result<Self, SohError> {
        let speed = c
            .comfort_speed
            .ok_or_else(|| SohError::Regime(format!("T = {} >= T_c = {}", c.temp, c.temp_crit)))?;
        Ok(Self { c1: speed, c2: speed, delta: c.temp / speed })
    }

    /// The alpha-family `(c1(alpha), c2(alpha), delta_alpha)`; requires
    /// `T < T_c(alpha)`.
    pub fn from_alpha(c: &DerivedCoefficients) -> Result<Self, SohError> {
        match (c.c1_alpha, c.c2_alpha, c.delta_alpha) {
            (Some(c1), Some(c2), Some(delta)) => Ok(Self { c1, c2, delta }),
            _ => Err(SohError::Regime(format!(
                "T = {} >= T_c(alpha) = {}",
                c.temp, c.temp_crit_alpha
            ))),
        }
    }
}

/// `(rho, omega)` with `|omega| = 1`, d = 2 orientation components.
#[derive(Debug, Clone)]
pub struct SohState {
    pub grid: SpatialGrid,
    pub rho: Vec<f64>,
    /// Orientation, layout `[cell * 2 + component]`.
    pub omega: Vec<f64>,
    pub coeffs: SohCoeffs,
    pub time: f64,
}

impl SohState {
    pub fn from_profiles(
        grid: SpatialGrid,
        coeffs: SohCoeffs,
        rho: impl Fn(f64, f64) -> f64,
        angle: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let nc = grid.cells();
        let mut r = vec![0.0; nc];
        let mut omega = vec![0.0; nc * 2];
        for idx in 0..nc {
            let (x, y) = (grid.x(idx % grid.nx), grid.y(idx / grid.nx));
            r[idx] = rho(x, y);
            assert!(r[idx] > 0.0);
            let th = angle(x, y);
            omega[idx * 2] = th.cos();
            omega[idx * 2 + 1] = th.sin();
        }
        Self { grid, rho: r, omega, coeffs, time: 0.0 }
    }

    pub fn total_mass(&self) -> f64 {
        self.rho.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Largest `| |omega| - 1 |` over cells.
    pub fn norm_drift(&self) -> f64 {
        self.omega
            .chunks(2)
            .map(|w| ((w[0] * w[0] + w[1] * w[1]).sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

fn density_floor_check(state: &SohState) -> Result<(), SohError> {
    let mean = state.rho.iter().sum::<f64>() / state.rho.len() as f64;
    let floor = 1e-12 * mean;
    for (idx, &r) in state.rho.iter().enumerate() {
        if r < floor {
            return Err(SohError::DensityFloor { idx, rho: r });
        }
    }
    Ok(())
}

/// One SOH step: conservative upwind mass flux `c1 rho omega`, upwind
/// orientation transport at `c2 omega` plus the projected pressure source
/// `-delta P(grad ln rho)`, then cellwise renormalization (skipped in the
/// drift probe).
pub fn soh_step(state: &SohState, dt: f64, renormalize: bool) -> Result<SohState, SohError> {
    density_floor_check(state)?;
    let grid = state.grid;
    let nc = grid.cells();
    let sdim = grid.spatial_dim();
    let h = grid.spacing();
    let SohCoeffs { c1, c2, delta } = state.coeffs;

    // CFL including the pressure-source contribution.
    let mut grad_ln_max: f64 = 0.0;
    for idx in 0..nc {
        for dir in 0..sdim {
            let p = grid.neighbor(idx, dir, 1);
            let m = grid.neighbor(idx, dir, -1);
            let g = (state.rho[p].ln() - state.rho[m].ln()) / (2.0 * h);
            grad_ln_max = grad_ln_max.max(g.abs());
        }
    }
    let speed = c1.abs().max(c2.abs() + delta.abs() * grad_ln_max * h);
    let limit = 0.45 * h / speed.max(1e-300);
    if dt > limit * (1.0 + 1e-9) {
        return Err(SohError::CflViolation { dt, limit });
    }

    let rho = &state.rho;
    let omega = &state.omega;

    // Mass: face flux c1 * omega_n * rho_upwind.
    let mut rho_new = vec![0.0f64; nc];
    exec::fill_chunks(&mut rho_new, 1, |idx, out| {
        let mut div = 0.0;
        for dir in 0..sdim {
            let p = grid.neighbor(idx, dir, 1);
            let m = grid.neighbor(idx, dir, -1);
            let face = |a: usize, b: usize| -> f64 {
                let v = c1 * 0.5 * (omega[a * 2 + dir] + omega[b * 2 + dir]);
                if v >= 0.0 {
                    v * rho[a]
                } else {
                    v * rho[b]
                }
            };
            div += face(idx, p) - face(m, idx);
        }
        out[0] = rho[idx] - dt * div / h;
    });

    // Orientation: upwind directional derivative + projected pressure.
    let mut omega_new = vec![0.0f64; nc * 2];
    exec::fill_chunks(&mut omega_new, 2, |idx, out| {
        let w = [omega[idx * 2], omega[idx * 2 + 1]];
        let mut rhs = [0.0f64; 2];
        // -c2 (omega . grad) omega, upwind along each spatial direction.
        for dir in 0..sdim {
            let s = c2 * w[dir];
            let (a, b) = if s >= 0.0 {
                (grid.neighbor(idx, dir, -1), idx)
            } else {
                (idx, grid.neighbor(idx, dir, 1))
            };
            for k in 0..2 {
                rhs[k] -= s * (omega[b * 2 + k] - omega[a * 2 + k]) / h;
            }
        }
        // -delta P(grad ln rho); the gradient is spatial, embedded in the
        // first components of the orientation space.
        let mut g = [0.0f64; 2];
        for dir in 0..sdim {
            let p = grid.neighbor(idx, dir, 1);
            let m = grid.neighbor(idx, dir, -1);
            g[dir] = (rho[p].ln() - rho[m].ln()) / (2.0 * h);
        }
        let wg = w[0] * g[0] + w[1] * g[1];
        for k in 0..2 {
            rhs[k] -= delta * (g[k] - w[k] * wg);
        }
        out[0] = w[0] + dt * rhs[0];
        out[1] = w[1] + dt * rhs[1];
        if renormalize {
            let n = (out[0] * out[0] + out[1] * out[1]).sqrt();
            if n > 0.0 {
                out[0] /= n;
                out[1] /= n;
            }
        }
    });

    Ok(SohState {
        grid,
        rho: rho_new,
        omega: omega_new,
        coeffs: state.coeffs,
        time: state.time + dt,
    })
}

/// Run `steps` steps *without* renormalization and report the accumulated
/// `max | |omega| - 1 |`.
pub fn norm_drift_probe(state: &SohState, steps: usize, dt: f64) -> Result<f64, SohError> {
    let mut s = state.clone();
    let mut drift: f64 = 0.0;
    for _ in 0..steps {
        s = soh_step(&s, dt, false)?;
        drift = drift.max(s.norm_drift());
    }
    Ok(drift)
}

/// Density field of the high-noise diffusion limit.
#[derive(Debug, Clone)]
pub struct DiffusionState {
    pub grid: SpatialGrid,
    pub rho: Vec<f64>,
    pub d_diff: f64,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffusionScheme {
    /// Forward-time centered-space; requires `dt D / h^2 <= 0.25`.
    Explicit,
    /// Crank-Nicolson (per-axis cyclic tridiagonal solves); unconditional.
    Trapezoidal,
}

impl DiffusionState {
    pub fn new(grid: SpatialGrid, rho: Vec<f64>, d_diff: f64) -> Self {
        assert_eq!(rho.len(), grid.cells());
        assert!(d_diff > 0.0);
        Self { grid, rho, d_diff, time: 0.0 }
    }

    pub fn total_mass(&self) -> f64 {
        self.rho.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Reconstructed velocity `u = -D_diff grad ln rho` (centered).
    pub fn velocity(&self) -> Vec<f64> {
        let grid = self.grid;
        let sdim = grid.spatial_dim();
        let h = grid.spacing();
        let mut u = vec![0.0; grid.cells() * sdim];
        for idx in 0..grid.cells() {
            for dir in 0..sdim {
                let p = grid.neighbor(idx, dir, 1);
                let m = grid.neighbor(idx, dir, -1);
                u[idx * sdim + dir] =
                    -self.d_diff * (self.rho[p].ln() - self.rho[m].ln()) / (2.0 * h);
            }
        }
        u
    }
}

/// One heat-equation step `d rho/dt = D_diff lap rho`.
pub fn diffusion_step(
    state: &DiffusionState,
    dt: f64,
    scheme: DiffusionScheme,
) -> Result<DiffusionState, SohError> {
    let grid = state.grid;
    let h = grid.spacing();
    let r = state.d_diff * dt / (h * h);
    let mut out = state.clone();
    match scheme {
        DiffusionScheme::Explicit => {
            let limit = 0.25 * h * h / state.d_diff;
            if dt > limit * (1.0 + 1e-9) {
                return Err(SohError::DiffusionStability { dt, limit });
            }
            let rho = &state.rho;
            exec::fill_chunks(&mut out.rho, 1, |idx, o| {
                let mut lap = 0.0;
                for dir in 0..grid.spatial_dim() {
                    let p = grid.neighbor(idx, dir, 1);
                    let m = grid.neighbor(idx, dir, -1);
                    lap += rho[p] - 2.0 * rho[idx] + rho[m];
                }
                o[0] = rho[idx] + r * lap;
            });
        }
        DiffusionScheme::Trapezoidal => {
            // Crank-Nicolson per axis (Lie splitting in 2D).
            for dir in 0..grid.spatial_dim() {
                crank_nicolson_axis(&mut out.rho, grid, r, dir);
            }
        }
    }
    out.time = state.time + dt;
    Ok(out)
}

/// Crank-Nicolson along one periodic axis via the Sherman-Morrison cyclic
/// tridiagonal solve.
fn crank_nicolson_axis(rho: &mut [f64], grid: SpatialGrid, r: f64, dir: usize) {
    let n = if dir == 0 { grid.nx } else { grid.ny };
    if n == 1 {
        return;
    }
    let lines = grid.cells() / n;
    let half = 0.5 * r;
    let mut line = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for l in 0..lines {
        let at = |i: usize| -> usize {
            if dir == 0 {
                l * grid.nx + i
            } else {
                i * grid.nx + l
            }
        };
        for i in 0..n {
            line[i] = rho[at(i)];
        }
        for i in 0..n {
            let p = (i + 1) % n;
            let m = (i + n - 1) % n;
            rhs[i] = line[i] + half * (line[p] - 2.0 * line[i] + line[m]);
        }
        let sol = cyclic_tridiagonal(1.0 + 2.0 * half, -half, &rhs);
        for i in 0..n {
            rho[at(i)] = sol[i];
        }
    }
}

/// Solve the cyclic tridiagonal system with constant diagonal `b` and
/// off-diagonal `c` (wraps at the corners) by Sherman-Morrison.
fn cyclic_tridiagonal(b: f64, c: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let gamma = -b;
    // Modified diagonal.
    let mut diag = vec![b; n];
    diag[0] = b - gamma;
    diag[n - 1] = b - c * c / gamma;
    let solve = |d: &[f64], r: &[f64]| -> Vec<f64> {
        let mut cp = vec![0.0; n];
        let mut x = vec![0.0; n];
        cp[0] = c / d[0];
        x[0] = r[0] / d[0];
        for i in 1..n {
            let m = 1.0 / (d[i] - c * cp[i - 1]);
            cp[i] = c * m;
            x[i] = (r[i] - c * x[i - 1]) * m;
        }
        for i in (0..n - 1).rev() {
            x[i] -= cp[i] * x[i + 1];
        }
        x
    };
    let x = solve(&diag, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = c;
    let z = solve(&diag, &u);
    let vx = x[0] + (c / gamma) * x[n - 1];
    let vz = z[0] + (c / gamma) * z[n - 1];
    let factor = vx / (1.0 + vz);
    (0..n).map(|i| x[i] - factor * z[i]).collect()
}

/// Measured propagation speed of a feature in a SOH field sequence
/// (quasi-1D).
pub fn soh_feature_speed(
    states: &[SohState],
    extract: impl Fn(&SohState, usize) -> f64,
) -> Result<f64, SohError> {
    if states.is_empty() || states[0].grid.spatial_dim() != 1 {
        return Err(SohError::Tracking(HydroError::NotQuasi1d));
    }
    let times: Vec<f64> = states.iter().map(|s| s.time).collect();
    let profiles: Vec<Vec<f64>> = states
        .iter()
        .map(|s| (0..s.grid.cells()).map(|i| extract(s, i)).collect())
        .collect();
    Ok(track_feature_speed(&times, &profiles, states[0].grid.length_x)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gauss_bump(x: f64, center: f64, width: f64) -> f64 {
        let mut d = (x - center).rem_euclid(1.0);
        if d > 0.5 {
            d -= 1.0;
        }
        (-(d / width).powi(2)).exp()
    }

    #[test]
    fn uniform_state_is_steady() {
        let grid = SpatialGrid::line(32, 1.0).unwrap();
        let c = SohCoeffs { c1: 0.5, c2: 0.5, delta: 0.4 };
        let s0 = SohState::from_profiles(grid, c, |_, _| 1.0, |_, _| 0.3);
        let s1 = soh_step(&s0, 1e-3, true).unwrap();
        for (a, b) in s0.rho.iter().zip(&s1.rho) {
            assert_eq!(a, b);
        }
        for (a, b) in s0.omega.iter().zip(&s1.omega) {
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn aligned_gradient_keeps_omega_and_advects_density() {
        // omega = x_hat, rho = rho(x): P(grad ln rho) = 0, density moves at c1.
        let grid = SpatialGrid::line(256, 1.0).unwrap();
        let c = SohCoeffs { c1: 0.6, c2: 0.4, delta: 0.5 };
        let mut s =
            SohState::from_profiles(grid, c, |x, _| 1.0 + 0.2 * gauss_bump(x, 0.3, 0.06), |_, _| 0.0);
        let mut snaps = vec![s.clone()];
        for _ in 0..250 {
            s = soh_step(&s, 5e-4, true).unwrap();
            snaps.push(s.clone());
        }
        // omega_y stays exactly zero.
        assert!(s.omega.chunks(2).all(|w| w[1].abs() < 1e-14));
        let speed = soh_feature_speed(&snaps, |st, i| st.rho[i]).unwrap();
        assert_relative_eq!(speed, 0.6, max_relative = 0.03);
        // Mass conserved exactly.
        assert_relative_eq!(s.total_mass(), snaps[0].total_mass(), max_relative = 1e-13);
    }

    #[test]
    fn omega_perturbation_travels_at_c2() {
        let grid = SpatialGrid::line(256, 1.0).unwrap();
        let c = SohCoeffs { c1: 0.6, c2: 0.4, delta: 0.5 };
        let mut s = SohState::from_profiles(
            grid,
            c,
            |_, _| 1.0,
            |x, _| 0.02 * gauss_bump(x, 0.3, 0.06),
        );
        let mut snaps = vec![s.clone()];
        for _ in 0..250 {
            s = soh_step(&s, 5e-4, true).unwrap();
            snaps.push(s.clone());
        }
        let speed = soh_feature_speed(&snaps, |st, i| st.omega[i * 2 + 1]).unwrap();
        assert_relative_eq!(speed, 0.4, max_relative = 0.05);
    }

    #[test]
    fn linearized_mode_speeds_match_jacobian_eigenvalues() {
        // About a uniform aligned base state the quasi-1D quasilinear matrix
        // A(U) has eigenvalues {c1, c2}; build A by finite differences of the
        // flux operator and compare against the measured feature speeds.
        let c = SohCoeffs { c1: 0.7, c2: 0.45, delta: 0.3 };
        let rho0: f64 = 1.0;
        // Quasilinear RHS: d/dt (rho, wy) = -A d/dx (rho, wy) evaluated at
        // frozen coefficients; A_ij extracted column by column.
        let flux_rhs = |state: [f64; 2], grad: [f64; 2]| -> [f64; 2] {
            let (rho, wy) = (state[0], state[1]);
            let wx = (1.0 - wy * wy).sqrt();
            // d/dx (c1 rho wx) with d(wx)/d(wy) = -wy/wx.
            let drho = c.c1 * (wx * grad[0] + rho * (-wy / wx) * grad[1]);
            let dwy = c.c2 * wx * grad[1] + c.delta * (-wy * wx) * grad[0] / rho;
            [-drho, -dwy]
        };
        let base = [rho0, 0.0];
        let mut a = [[0.0f64; 2]; 2];
        for j in 0..2 {
            let mut g = [0.0; 2];
            g[j] = 1.0;
            let r = flux_rhs(base, g);
            a[0][j] = -r[0];
            a[1][j] = -r[1];
        }
        // Eigenvalues of the 2x2.
        let tr = a[0][0] + a[1][1];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let disc = (tr * tr / 4.0 - det).sqrt();
        let (l1, l2) = (tr / 2.0 + disc, tr / 2.0 - disc);
        assert_relative_eq!(l1.max(l2), c.c1, max_relative = 1e-12);
        assert_relative_eq!(l1.min(l2), c.c2, max_relative = 1e-12);

        // Solver side: density and orientation features measured separately.
        let grid = SpatialGrid::line(256, 1.0).unwrap();
        let run = |rho_amp: f64, wy_amp: f64| -> Vec<SohState> {
            let mut s = SohState::from_profiles(
                grid,
                c,
                move |x, _| rho0 + rho_amp * gauss_bump(x, 0.3, 0.06),
                move |x, _| wy_amp * gauss_bump(x, 0.3, 0.06),
            );
            let mut snaps = vec![s.clone()];
            for _ in 0..200 {
                s = soh_step(&s, 5e-4, true).unwrap();
                snaps.push(s.clone());
            }
            snaps
        };
        let speed_rho = soh_feature_speed(&run(0.05, 0.0), |st, i| st.rho[i]).unwrap();
        let speed_wy = soh_feature_speed(&run(0.0, 0.01), |st, i| st.omega[i * 2 + 1]).unwrap();
        assert_relative_eq!(speed_rho, l1.max(l2), max_relative = 0.05);
        assert_relative_eq!(speed_wy, l1.min(l2), max_relative = 0.05);
    }

    #[test]
    fn norm_drift_first_order_and_renormalized_exact() {
        let grid = SpatialGrid::line(128, 1.0).unwrap();
        let c = SohCoeffs { c1: 0.5, c2: 0.4, delta: 0.3 };
        let ic = || {
            SohState::from_profiles(
                grid,
                c,
                |x, _| 1.0 + 0.2 * gauss_bump(x, 0.4, 0.08),
                |x, _| 0.3 * gauss_bump(x, 0.55, 0.08),
            )
        };
        // Uniform state: no drift at all.
        let uni = SohState::from_profiles(grid, c, |_, _| 1.0, |_, _| 0.2);
        assert!(norm_drift_probe(&uni, 50, 1e-3).unwrap() < 1e-14);
        // The accumulated drift is bounded by O(dt) * steps: halving dt at a
        // fixed step count halves it.
        let d1 = norm_drift_probe(&ic(), 64, 1.0e-3).unwrap();
        let d2 = norm_drift_probe(&ic(), 64, 0.5e-3).unwrap();
        let ratio = d1 / d2;
        assert!(
            (1.5..=2.6).contains(&ratio),
            "drift ratio {ratio} (d1 = {d1}, d2 = {d2})"
        );
        // With renormalization the constraint is exact.
        let mut s = ic();
        for _ in 0..100 {
            s = soh_step(&s, 1e-3, true).unwrap();
            assert!(s.norm_drift() <= 1e-12);
        }
    }

    #[test]
    fn diffusion_gaussian_variance_growth() {
        // var(t) = var(0) + 2 D t in 1D, fitted within 1%.
        let grid = SpatialGrid::line(512, 4.0).unwrap();
        let d_diff = 1.0;
        let sigma0: f64 = 0.15;
        let rho0: Vec<f64> = (0..512)
            .map(|i| {
                let x = grid.x(i) - 2.0;
                1e-6 + (-(x * x) / (2.0 * sigma0 * sigma0)).exp()
            })
            .collect();
        let mut s = DiffusionState::new(grid, rho0, d_diff);
        let variance = |s: &DiffusionState| -> f64 {
            let mass: f64 = s.rho.iter().sum();
            let mean: f64 =
                s.rho.iter().enumerate().map(|(i, r)| r * s.grid.x(i)).sum::<f64>() / mass;
            s.rho
                .iter()
                .enumerate()
                .map(|(i, r)| r * (s.grid.x(i) - mean).powi(2))
                .sum::<f64>()
                / mass
        };
        let v0 = variance(&s);
        let t_end = 5e-3;
        let dt = 1e-5;
        while s.time < t_end - 1e-12 {
            s = diffusion_step(&s, dt, DiffusionScheme::Explicit).unwrap();
        }
        let grown = variance(&s) - v0;
        assert_relative_eq!(grown, 2.0 * d_diff * s.time, max_relative = 0.01);
        // Same with the trapezoidal scheme at a dt above the explicit limit.
        let rho1: Vec<f64> = (0..512)
            .map(|i| {
                let x = grid.x(i) - 2.0;
                1e-6 + (-(x * x) / (2.0 * sigma0 * sigma0)).exp()
            })
            .collect();
        let mut s2 = DiffusionState::new(grid, rho1, d_diff);
        let v0 = variance(&s2);
        let dt_big = 2e-4;
        assert!(matches!(
            diffusion_step(&s2, dt_big, DiffusionScheme::Explicit),
            Err(SohError::DiffusionStability { .. })
        ));
        while s2.time < t_end - 1e-12 {
            s2 = diffusion_step(&s2, dt_big, DiffusionScheme::Trapezoidal).unwrap();
        }
        let grown = variance(&s2) - v0;
        assert_relative_eq!(grown, 2.0 * d_diff * s2.time, max_relative = 0.01);
    }

    #[test]
    fn diffusion_uniform_is_stationary_with_zero_velocity() {
        let grid = SpatialGrid::line(64, 1.0).unwrap();
        let s = DiffusionState::new(grid, vec![1.5; 64], 0.7);
        let s1 = diffusion_step(&s, 5e-5, DiffusionScheme::Explicit).unwrap();
        assert!(s1.rho.iter().all(|&r| (r - 1.5).abs() < 1e-15));
        assert!(s1.velocity().iter().all(|&u| u.abs() < 1e-15));
    }

    #[test]
    fn mass_conserved_both_schemes() {
        let grid = SpatialGrid::line(128, 1.0).unwrap();
        let rho: Vec<f64> = (0..128)
            .map(|i| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * grid.x(i)).sin())
            .collect();
        for scheme in [DiffusionScheme::Explicit, DiffusionScheme::Trapezoidal] {
            let mut s = DiffusionState::new(grid, rho.clone(), 1.0);
            let m0 = s.total_mass();
            let dt = 1e-5;
            for _ in 0..200 {
                s = diffusion_step(&s, dt, scheme).unwrap();
            }
            assert_relative_eq!(s.total_mass(), m0, max_relative = 1e-12);
        }
    }

    #[test]
    fn density_floor_aborts() {
        let grid = SpatialGrid::line(16, 1.0).unwrap();
        let c = SohCoeffs { c1: 0.5, c2: 0.5, delta: 0.1 };
        let mut s = SohState::from_profiles(grid, c, |_, _| 1.0, |_, _| 0.0);
        s.rho[3] = 1e-15;
        assert!(matches!(
            soh_step(&s, 1e-4, true),
            Err(SohError::DensityFloor { .. })
        ));
    }
}
