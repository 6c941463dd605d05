//! Model parameters and every derived coefficient used across the hierarchy.
//!
//! All other modules take their constants from here: the temperature
//! `T = sigma * D`, the critical temperature `T_c = a^2 / (d+2)`, the comfort
//! fluid speed `c = sqrt(a^2 - (d+2) T)`, the diffusion coefficient of the
//! high-noise limit `D_diff = T T_c / (T - T_c)`, and the full block of
//! Navier-Stokes correction coefficients (`lambda^eps`, `pi^eps`, `chi^eps`,
//! `tau^eps`, `mu`) together with their `alpha = eps * lambda`
//! reparametrization (`xi_alpha`, `kappa_alpha`, `T_c(alpha)`, `c1(alpha)`,
//! `c2(alpha)`, `delta_alpha`).
//!
//! Regime-dependent quantities (`c` for `T < T_c`, `s^2` and `D_diff` for
//! `T > T_c`, `c1(alpha)` for `T < T_c(alpha)`) are `Option`s: absent means
//! "not defined in this regime", never NaN.

use crate::config::Config;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoeffsError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("alpha = {alpha} outside [0, {max}) (xi_alpha = 1 - (d+8) alpha / 2 must stay positive)")]
    AlphaOutOfRange { alpha: f64, max: f64 },
    #[error("regime violation: {0}")]
    RegimeViolation(String),
    #[error("unsupported velocity dimension {0} (must be 1, 2 or 3)")]
    UnsupportedDim(usize),
    #[error("missing config key [{section}] {key}")]
    MissingKey { section: String, key: String },
}

/// Physical parameters of the agent model.
///
/// `sigma` and `diff` are the coefficients that enter the collision operator
/// `Q(f) = div_v [ sigma^-1 (v - u_f) f + D grad_v f ]`; the particle
/// integrator uses them directly and shrinks the interaction radius to
/// `eps * radius`. The scale-separated regime (large social force, large
/// diffusion) is obtained by mapping `sigma -> eps * sigma`,
/// `diff -> diff / eps` via [`ModelParams::particle_scaled`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Comfort speed `a` of the self-propulsion force.
    pub a: f64,
    /// Self-propulsion relaxation time `tau`.
    pub tau: f64,
    /// Social (velocity consensus) relaxation time `sigma`.
    pub sigma: f64,
    /// Velocity diffusion coefficient `D`.
    pub diff: f64,
    /// Interaction range `R`.
    pub radius: f64,
    /// Scale-separation parameter `eps`.
    pub eps: f64,
    /// Velocity-space dimension `d` (1, 2 or 3).
    pub dim: usize,
}

impl ModelParams {
    pub fn new(
        a: f64,
        tau: f64,
        sigma: f64,
        diff: f64,
        radius: f64,
        eps: f64,
        dim: usize,
    ) -> Result<Self, CoeffsError> {
        let p = Self { a, tau, sigma, diff, radius, eps, dim };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), CoeffsError> {
        let pos = [
            (self.a, "a"),
            (self.tau, "tau"),
            (self.sigma, "sigma"),
            (self.radius, "radius"),
        ];
        for (v, name) in pos {
            if !(v > 0.0) {
                return Err(CoeffsError::InvalidParams(format!("{name} = {v} must be > 0")));
            }
        }
        for (v, name) in [(self.diff, "diff"), (self.eps, "eps")] {
            if !(v >= 0.0) {
                return Err(CoeffsError::InvalidParams(format!("{name} = {v} must be >= 0")));
            }
        }
        if !(1..=3).contains(&self.dim) {
            return Err(CoeffsError::UnsupportedDim(self.dim));
        }
        Ok(())
    }

    /// Temperature `T = sigma * D`.
    pub fn temp(&self) -> f64 {
        self.sigma * self.diff
    }

    /// Parameters of the scale-separated particle run: the social force and
    /// the velocity diffusion are rescaled (`sigma -> eps sigma`,
    /// `D -> D / eps`) so that the particle system realizes the kinetic
    /// scaling while `T = sigma D` is unchanged. Requires `eps > 0`.
    pub fn particle_scaled(&self) -> Result<Self, CoeffsError> {
        if !(self.eps > 0.0) {
            return Err(CoeffsError::InvalidParams(
                "particle_scaled requires eps > 0".into(),
            ));
        }
        Self::new(
            self.a,
            self.tau,
            self.eps * self.sigma,
            self.diff / self.eps,
            self.radius,
            self.eps,
            self.dim,
        )
    }

    /// Read parameters from the `[model]` section of a key=value config.
    pub fn from_config(cfg: &Config) -> Result<Self, CoeffsError> {
        let f = |key: &str| {
            cfg.get_f64("model", key)
                .map_err(|e| CoeffsError::InvalidParams(e.to_string()))?
                .ok_or_else(|| CoeffsError::MissingKey { section: "model".into(), key: key.into() })
        };
        let dim = cfg
            .get_usize("model", "dim")
            .map_err(|e| CoeffsError::InvalidParams(e.to_string()))?
            .ok_or_else(|| CoeffsError::MissingKey { section: "model".into(), key: "dim".into() })?;
        Self::new(f("a")?, f("tau")?, f("sigma")?, f("diff")?, f("radius")?, f("eps")?, dim)
    }
}

/// Second moment of the unit-ball indicator kernel,
/// `k = |S^{d-1}| / (2 d (d+2))`: `1/3`, `pi/8`, `2 pi/15` for d = 1, 2, 3.
pub fn kernel_moment(dim: usize) -> Result<f64, CoeffsError> {
    match dim {
        1 => Ok(1.0 / 3.0),
        2 => Ok(std::f64::consts::PI / 8.0),
        3 => Ok(2.0 * std::f64::consts::PI / 15.0),
        d => Err(CoeffsError::UnsupportedDim(d)),
    }
}

/// Second moment of the unit-ball indicator normalized to unit integral,
/// `k / |B_d| = 1 / (2 (d+2))`. This is the constant that multiplies `R^2`
/// in the Taylor expansion of the nonlocal average when the kernel is
/// normalized, and the one the kernel-expansion oracle needs.
pub fn normalized_kernel_moment(dim: usize) -> Result<f64, CoeffsError> {
    if !(1..=3).contains(&dim) {
        return Err(CoeffsError::UnsupportedDim(dim));
    }
    Ok(1.0 / (2.0 * (dim as f64 + 2.0)))
}

/// All derived coefficients for one parameter set.
#[derive(Debug, Clone, Copy)]
pub struct DerivedCoefficients {
    pub params: ModelParams,
    /// `T = sigma D`.
    pub temp: f64,
    /// `T_c = a^2 / (d+2)`.
    pub temp_crit: f64,
    /// Comfort fluid speed `c = sqrt(a^2 - (d+2) T)`; defined for `T < T_c`.
    pub comfort_speed: Option<f64>,
    /// `s^2 = (d+2)(T - T_c)`; defined for `T > T_c`.
    pub s_sq: Option<f64>,
    /// `D_diff = T T_c / (T - T_c)`; defined for `T > T_c`.
    pub d_diff: Option<f64>,
    /// `lambda = 2 sigma T / (tau a^2)`.
    pub lambda: f64,
    /// `lambda^eps = 1 - eps lambda` (momentum convection weight).
    pub lambda_eps: f64,
    /// Fluid viscosity `mu = sigma T`.
    pub mu: f64,
    /// Kernel second moment `k` (unit-ball indicator by default).
    pub kernel_moment: f64,
    /// `k_R = k R^2`.
    pub k_r: f64,
    /// Prefactor `lambda / 2` of the velocity-dependent pressure correction
    /// `pi(rho,|u|) = (lambda/2) rho ((d+2) T - a^2 + |u|^2)`.
    pub pi_coeff: f64,
    /// `chi^eps`; the bulk comfort speed of the NS model is `a sqrt(chi^eps)`.
    pub chi_eps: f64,
    /// `tau^eps = tau / xi_alpha` (NS relaxation time).
    pub tau_eps: f64,
    /// `alpha = eps lambda`.
    pub alpha: f64,
    /// `xi_alpha = 1 - (d+8) alpha / 2`.
    pub xi_alpha: f64,
    /// `kappa_alpha = alpha a^2 / (2 sigma T)`, so that `eps = kappa_alpha tau`.
    pub kappa_alpha: f64,
    /// `T_c(alpha) = T_c (1 - (d+2) alpha/2) / (1 - (d+4) alpha/2)`.
    pub temp_crit_alpha: f64,
    /// `c1(alpha) = a sqrt(chi)`; defined for `T < T_c(alpha)`.
    pub c1_alpha: Option<f64>,
    /// `c2(alpha) = (1 - 3 alpha/2) c1(alpha)`.
    pub c2_alpha: Option<f64>,
    /// `delta_alpha = T_alpha / c1(alpha)`.
    pub delta_alpha: Option<f64>,
    /// Limit pressure coefficient `T_alpha = pi_alpha(1, c1(alpha))`.
    pub temp_alpha: f64,
    /// `nu = (d+2)/(d+8) (1 - (d+4) T / a^2)` (relaxation shift in B1).
    pub nu: f64,
}

/// Evaluate `chi` for a given `alpha = eps lambda`. At `alpha = 0` this
/// reduces, operation for operation, to `1 - (d+2) T / a^2`.
fn chi_of_alpha(a: f64, temp: f64, d: f64, alpha: f64) -> f64 {
    let ah = 0.5 * alpha;
    let d2t_over_a2 = (d + 2.0) * temp / (a * a);
    (1.0 - ah * (d + 2.0) - d2t_over_a2 * (1.0 - ah * (d + 4.0))) / (1.0 - ah * (d + 8.0))
}

fn temp_crit_of_alpha(temp_crit: f64, d: f64, alpha: f64) -> f64 {
    temp_crit * (1.0 - 0.5 * (d + 2.0) * alpha) / (1.0 - 0.5 * (d + 4.0) * alpha)
}

impl DerivedCoefficients {
    /// Derive every coefficient with `alpha = eps * lambda` (the Euler /
    /// Navier-Stokes convention).
    pub fn derive(params: ModelParams) -> Result<Self, CoeffsError> {
        params.validate()?;
        let lambda = 2.0 * params.sigma * params.temp() / (params.tau * params.a * params.a);
        let alpha = params.eps * lambda;
        Self::derive_inner(params, alpha)
    }

    /// Derive with a free `alpha` (the fast-relaxation-limit convention of
    /// the alpha-parametrized SOH family). The implied scale separation is
    /// `eps = alpha / lambda = kappa_alpha tau`.
    pub fn derive_with_alpha(params: ModelParams, alpha: f64) -> Result<Self, CoeffsError> {
        params.validate()?;
        if !(alpha >= 0.0) {
            return Err(CoeffsError::AlphaOutOfRange {
                alpha,
                max: 2.0 / (params.dim as f64 + 8.0),
            });
        }
        let temp = params.temp();
        let lambda = 2.0 * params.sigma * temp / (params.tau * params.a * params.a);
        let eps = if alpha == 0.0 { 0.0 } else { alpha / lambda };
        let params = ModelParams { eps, ..params };
        Self::derive_inner(params, alpha)
    }

    fn derive_inner(params: ModelParams, alpha: f64) -> Result<Self, CoeffsError> {
        let d = params.dim as f64;
        let a = params.a;
        let temp = params.temp();
        let temp_crit = a * a / (d + 2.0);
        let alpha_max = 2.0 / (d + 8.0);
        if !(alpha >= 0.0) || alpha >= alpha_max {
            return Err(CoeffsError::AlphaOutOfRange { alpha, max: alpha_max });
        }

        let lambda = 2.0 * params.sigma * temp / (params.tau * a * a);
        let lambda_eps = 1.0 - alpha;
        let mu = params.sigma * temp;
        let k = kernel_moment(params.dim)?;
        let k_r = k * params.radius * params.radius;
        let pi_coeff = 0.5 * lambda;
        let chi_eps = chi_of_alpha(a, temp, d, alpha);
        let xi_alpha = 1.0 - 0.5 * (d + 8.0) * alpha;
        let tau_eps = params.tau / xi_alpha;
        let kappa_alpha = if alpha == 0.0 { 0.0 } else { alpha * a * a / (2.0 * params.sigma * temp) };
        let temp_crit_alpha = temp_crit_of_alpha(temp_crit, d, alpha);
        let nu = (d + 2.0) / (d + 8.0) * (1.0 - (d + 4.0) * temp / (a * a));

        let c_sq = chi_of_alpha(a, temp, d, 0.0) * (a * a);
        let comfort_speed = (temp < temp_crit).then(|| c_sq.sqrt());
        let s_sq = (temp > temp_crit).then(|| (d + 2.0) * (temp - temp_crit));
        let d_diff = (temp > temp_crit).then(|| temp * temp_crit / (temp - temp_crit));

        let c1_sq = chi_eps * (a * a);
        let c1_alpha = (temp < temp_crit_alpha).then(|| c1_sq.sqrt());
        let c2_alpha = c1_alpha.map(|c1| (1.0 - 1.5 * alpha) * c1);
        let temp_alpha = temp - 0.5 * alpha * ((d + 2.0) * temp - a * a + c1_sq);
        let delta_alpha = c1_alpha.and_then(|c1| (c1 > 0.0).then(|| temp_alpha / c1));

        Ok(Self {
            params,
            temp,
            temp_crit,
            comfort_speed,
            s_sq,
            d_diff,
            lambda,
            lambda_eps,
            mu,
            kernel_moment: k,
            k_r,
            pi_coeff,
            chi_eps,
            tau_eps,
            alpha,
            xi_alpha,
            kappa_alpha,
            temp_crit_alpha,
            c1_alpha,
            c2_alpha,
            delta_alpha,
            temp_alpha,
            nu,
        })
    }

    /// Squared relaxation target of the Euler source, `a^2 - (d+2) T`
    /// (negative above `T_c`).
    pub fn euler_target_sq(&self) -> f64 {
        chi_of_alpha(self.params.a, self.temp, self.params.dim as f64, 0.0)
            * (self.params.a * self.params.a)
    }

    /// Squared relaxation target of the NS source, `chi^eps a^2`.
    pub fn ns_target_sq(&self) -> f64 {
        self.chi_eps * (self.params.a * self.params.a)
    }

    /// Velocity-dependent pressure `pi^eps(rho, |u|) = T rho - eps pi(rho, |u|)`.
    pub fn pressure_eps(&self, rho: f64, speed_sq: f64) -> f64 {
        let base = self.temp * rho;
        if self.params.eps == 0.0 {
            base
        } else {
            base - self.params.eps * self.pi_correction(rho, speed_sq)
        }
    }

    /// `pi(rho, |u|) = (lambda/2) rho ((d+2) T - a^2 + |u|^2)`.
    pub fn pi_correction(&self, rho: f64, speed_sq: f64) -> f64 {
        let d = self.params.dim as f64;
        self.pi_coeff * rho * ((d + 2.0) * self.temp - self.params.a * self.params.a + speed_sq)
    }

    /// Rows `(name, value, defined-in-this-regime)` for the CSV table.
    pub fn table(&self) -> Vec<(&'static str, Option<f64>, bool)> {
        let some = |v: f64| (Some(v), true);
        let opt = |v: Option<f64>| (v, v.is_some());
        let rows: Vec<(&'static str, (Option<f64>, bool))> = vec![
            ("temp", some(self.temp)),
            ("temp_crit", some(self.temp_crit)),
            ("comfort_speed", opt(self.comfort_speed)),
            ("s_sq", opt(self.s_sq)),
            ("d_diff", opt(self.d_diff)),
            ("lambda", some(self.lambda)),
            ("lambda_eps", some(self.lambda_eps)),
            ("mu", some(self.mu)),
            ("kernel_moment", some(self.kernel_moment)),
            ("k_r", some(self.k_r)),
            ("pi_coeff", some(self.pi_coeff)),
            ("chi_eps", some(self.chi_eps)),
            ("tau_eps", some(self.tau_eps)),
            ("alpha", some(self.alpha)),
            ("xi_alpha", some(self.xi_alpha)),
            ("kappa_alpha", some(self.kappa_alpha)),
            ("temp_crit_alpha", some(self.temp_crit_alpha)),
            ("c1_alpha", opt(self.c1_alpha)),
            ("c2_alpha", opt(self.c2_alpha)),
            ("delta_alpha", opt(self.delta_alpha)),
            ("temp_alpha", some(self.temp_alpha)),
            ("nu", some(self.nu)),
        ];
        rows.into_iter().map(|(n, (v, ok))| (n, v, ok)).collect()
    }
}

/// `c1(alpha)` sweep result.
#[derive(Debug, Clone)]
pub struct C1Sweep {
    pub values: Vec<(f64, f64)>,
    pub increasing: bool,
}

/// Evaluate `c1(alpha)` on a grid and check strict monotonicity.
///
/// The closed interval `[0, 2/(d+8)]` is accepted; at the right endpoint
/// `xi_alpha = 0` and `c1` is `+inf`, which still orders correctly. Errors
/// when some grid point has `T >= T_c(alpha)` or lies outside the interval.
pub fn c1_increasing_check(params: &ModelParams, alphas: &[f64]) -> Result<C1Sweep, CoeffsError> {
    params.validate()?;
    let d = params.dim as f64;
    let a = params.a;
    let temp = params.temp();
    let temp_crit = a * a / (d + 2.0);
    let alpha_max = 2.0 / (d + 8.0);
    let mut values = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        if !(0.0..=alpha_max).contains(&alpha) {
            return Err(CoeffsError::AlphaOutOfRange { alpha, max: alpha_max });
        }
        let tca = temp_crit_of_alpha(temp_crit, d, alpha);
        if temp >= tca {
            return Err(CoeffsError::RegimeViolation(format!(
                "T = {temp} >= T_c(alpha) = {tca} at alpha = {alpha}"
            )));
        }
        let c1 = (chi_of_alpha(a, temp, d, alpha) * a * a).sqrt();
        values.push((alpha, c1));
    }
    let increasing = values.windows(2).all(|w| w[1].1 > w[0].1);
    Ok(C1Sweep { values, increasing })
}

/// `T_c(alpha)` as a standalone function (valid on the closed interval).
pub fn temp_crit_alpha(params: &ModelParams, alpha: f64) -> Result<f64, CoeffsError> {
    params.validate()?;
    let d = params.dim as f64;
    let alpha_max = 2.0 / (d + 8.0);
    if !(0.0..=alpha_max).contains(&alpha) {
        return Err(CoeffsError::AlphaOutOfRange { alpha, max: alpha_max });
    }
    Ok(temp_crit_of_alpha(params.a * params.a / (d + 2.0), d, alpha))
}

/// Closed-form solution of the speed relaxation ODE
/// `d|u|^2/dt = 2 rate |u|^2 (target_sq - |u|^2)`, which integrates
/// `du/dt = rate * u (target_sq - |u|^2)`. `target_sq` may be negative
/// (decay to zero, the high-noise branch) or zero (algebraic decay).
pub fn relax_speed_sq(speed_sq_0: f64, target_sq: f64, rate: f64, t: f64) -> f64 {
    if speed_sq_0 == 0.0 {
        return 0.0;
    }
    if target_sq == 0.0 {
        return speed_sq_0 / (1.0 + 2.0 * rate * speed_sq_0 * t);
    }
    let e = (-2.0 * target_sq * rate * t).exp();
    let y = speed_sq_0 * target_sq / ((target_sq - speed_sq_0) * e + speed_sq_0);
    // Guards the decaying branch against exp overflow at very large rate*t.
    if y.is_finite() && y >= 0.0 {
        y
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn base(dim: usize, diff: f64, eps: f64) -> ModelParams {
        ModelParams::new(1.0, 1.0, 1.0, diff, 1.0, eps, dim).unwrap()
    }

    #[test]
    fn critical_temperature_arithmetic() {
        // a = 1: T_c = 1/(d+2).
        let c = DerivedCoefficients::derive(base(1, 0.1, 0.0)).unwrap();
        assert_relative_eq!(c.temp_crit, 1.0 / 3.0, max_relative = 1e-15);
        let c = DerivedCoefficients::derive(base(2, 0.1, 0.0)).unwrap();
        assert_relative_eq!(c.temp_crit, 0.25, max_relative = 1e-15);
    }

    #[test]
    fn d_diff_worked_example() {
        // T = 0.5 above T_c = 1/3 gives D_diff = (0.5/3)/(1/6) = 1.
        let c = DerivedCoefficients::derive(base(1, 0.5, 0.0)).unwrap();
        assert!(c.comfort_speed.is_none());
        assert_relative_eq!(c.s_sq.unwrap(), 0.5, max_relative = 1e-12);
        assert_relative_eq!(c.d_diff.unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn eps_zero_collapses_to_euler_coefficients() {
        let p = base(2, 0.2, 0.0);
        let c = DerivedCoefficients::derive(p).unwrap();
        assert_eq!(c.lambda_eps, 1.0);
        assert_eq!(c.tau_eps, p.tau);
        let chi_ref = 1.0 - (p.dim as f64 + 2.0) * c.temp / (p.a * p.a);
        assert_eq!(c.chi_eps, chi_ref);
        assert_eq!(c.ns_target_sq(), c.euler_target_sq());
    }

    #[test]
    fn alpha_zero_matches_comfort_speed() {
        let p = base(2, 0.2, 0.0);
        let c = DerivedCoefficients::derive_with_alpha(p, 0.0).unwrap();
        let cs = c.comfort_speed.unwrap();
        assert_relative_eq!(cs, 0.2f64.sqrt(), max_relative = 1e-15);
        assert_eq!(c.c1_alpha.unwrap(), cs);
        assert_eq!(c.c2_alpha.unwrap(), cs);
        assert_eq!(c.temp_alpha, c.temp);
    }

    #[test]
    fn kernel_moments() {
        assert_relative_eq!(kernel_moment(1).unwrap(), 1.0 / 3.0);
        assert_relative_eq!(kernel_moment(2).unwrap(), std::f64::consts::PI / 8.0);
        assert_relative_eq!(kernel_moment(3).unwrap(), 2.0 * std::f64::consts::PI / 15.0);
        assert!(kernel_moment(4).is_err());
        assert_relative_eq!(normalized_kernel_moment(1).unwrap(), 1.0 / 6.0);
        assert_relative_eq!(normalized_kernel_moment(2).unwrap(), 0.125);
    }

    #[test]
    fn c2_relation_by_construction() {
        let p = base(2, 0.2, 0.0);
        for &alpha in &[0.02, 0.05, 0.1, 0.15] {
            let c = DerivedCoefficients::derive_with_alpha(p, alpha).unwrap();
            let c1 = c.c1_alpha.unwrap();
            assert_eq!(c.c2_alpha.unwrap(), (1.0 - 1.5 * alpha) * c1);
        }
    }

    #[test]
    fn temp_alpha_is_limit_of_pressure() {
        // T_alpha must equal pi_alpha(1, c1(alpha)): the pressure coefficient
        // the NS system relaxes to. Checked against an independent evaluation
        // through pressure_eps with eps = alpha / lambda.
        let p = base(2, 0.2, 0.0);
        let alpha = 0.1;
        let c = DerivedCoefficients::derive_with_alpha(p, alpha).unwrap();
        let c1 = c.c1_alpha.unwrap();
        let pressure = c.pressure_eps(1.0, c1 * c1);
        assert_relative_eq!(c.temp_alpha, pressure, max_relative = 1e-12);
    }

    #[test]
    fn c1_monotone_sweep() {
        let p = base(2, 0.2, 0.0);
        let alphas: Vec<f64> = (0..50).map(|i| 0.2 * i as f64 / 49.0).collect();
        let sweep = c1_increasing_check(&p, &alphas).unwrap();
        assert!(sweep.increasing);
        // Single point: vacuous.
        assert!(c1_increasing_check(&p, &[0.05]).unwrap().increasing);
        // Two-point comparison with values exposed.
        let two = c1_increasing_check(&p, &[0.0, 0.1]).unwrap();
        assert!(two.values[1].1 > two.values[0].1);
    }

    #[test]
    fn c1_sweep_regime_errors() {
        // T above T_c(alpha) for small alpha.
        let p = base(2, 0.26, 0.0);
        let err = c1_increasing_check(&p, &[0.0]).unwrap_err();
        assert!(matches!(err, CoeffsError::RegimeViolation(_)));
        let p = base(2, 0.2, 0.0);
        assert!(c1_increasing_check(&p, &[0.25]).is_err());
    }

    #[test]
    fn derive_rejects_alpha_at_boundary() {
        let p = base(2, 0.2, 0.0);
        let err = DerivedCoefficients::derive_with_alpha(p, 0.2).unwrap_err();
        assert!(matches!(err, CoeffsError::AlphaOutOfRange { .. }));
    }

    #[test]
    fn temp_crit_alpha_range() {
        let p = base(2, 0.1, 0.0);
        let tc0 = temp_crit_alpha(&p, 0.0).unwrap();
        let tc_end = temp_crit_alpha(&p, 0.2).unwrap();
        assert_relative_eq!(tc0, 0.25, max_relative = 1e-15);
        assert_relative_eq!(tc_end, 1.5 * tc0, max_relative = 1e-12);
        let mut prev = tc0;
        for i in 1..=20 {
            let t = temp_crit_alpha(&p, 0.2 * i as f64 / 20.0).unwrap();
            assert!(t > prev && t <= 1.5 * tc0 + 1e-12);
            prev = t;
        }
    }

    #[test]
    fn chi_converges_to_c_sq() {
        // chi^eps a^2 -> c^2 with relative gap <= 10 eps lambda for
        // eps lambda <= 0.1 (away from the critical point).
        for &(diff, dim) in &[(0.1, 2usize), (0.05, 3), (0.15, 1)] {
            for &eps in &[0.001, 0.01, 0.05] {
                let p = ModelParams::new(1.0, 1.0, 1.0, diff, 1.0, eps, dim).unwrap();
                let c = DerivedCoefficients::derive(p).unwrap();
                if c.alpha > 0.1 {
                    continue;
                }
                let c_sq = c.euler_target_sq();
                let gap = (c.ns_target_sq() - c_sq).abs() / c_sq;
                assert!(
                    gap <= 10.0 * c.alpha,
                    "gap {gap} vs 10*alpha {}",
                    10.0 * c.alpha
                );
            }
        }
    }

    #[test]
    fn dimensionless_coefficients_scale_invariant() {
        // Rescale velocities by s, time by 1/s: a -> s a, sigma -> sigma/s,
        // tau -> tau/s, D -> s^3 D. All dimensionless coefficients unchanged.
        let p = ModelParams::new(1.3, 0.7, 0.9, 0.11, 1.0, 0.04, 2).unwrap();
        let c = DerivedCoefficients::derive(p).unwrap();
        for &s in &[0.5, 2.0, 7.3] {
            let q = ModelParams::new(
                s * p.a,
                p.tau / s,
                p.sigma / s,
                s * s * s * p.diff,
                p.radius,
                p.eps,
                p.dim,
            )
            .unwrap();
            let cq = DerivedCoefficients::derive(q).unwrap();
            assert_relative_eq!(cq.lambda, c.lambda, max_relative = 1e-12);
            assert_relative_eq!(cq.chi_eps, c.chi_eps, max_relative = 1e-12);
            assert_relative_eq!(cq.xi_alpha, c.xi_alpha, max_relative = 1e-12);
            assert_relative_eq!(cq.alpha, c.alpha, max_relative = 1e-12);
        }
    }

    #[test]
    fn relax_speed_closed_form_limits() {
        // Fixed points and long-time limits.
        assert_eq!(relax_speed_sq(0.0, 0.5, 1.0, 3.0), 0.0);
        assert_relative_eq!(relax_speed_sq(0.5, 0.5, 2.0, 10.0), 0.5, max_relative = 1e-12);
        assert!(relax_speed_sq(0.3, 0.5, 1.0, 100.0) > 0.499999);
        // Negative target: monotone decay to zero.
        let mut prev = 0.3;
        for i in 1..=10 {
            let y = relax_speed_sq(0.3, -0.5, 1.0, i as f64);
            assert!(y < prev && y >= 0.0);
            prev = y;
        }
        // Zero target: algebraic decay 1/(1 + 2 r y0 t).
        assert_relative_eq!(
            relax_speed_sq(0.4, 0.0, 1.5, 2.0),
            0.4 / (1.0 + 2.0 * 1.5 * 0.4 * 2.0),
            max_relative = 1e-14
        );
    }
}
