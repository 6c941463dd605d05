//! Independent oracles the limit studies compare against: the exact periodic
//! heat solution (spectral, direct DFT) and a Runge-Kutta integration of the
//! speed relaxation ODE. Both stay clear of the finite-volume code paths
//! they validate.

/// Exact solution of `d rho/dt = d_diff lap rho` on a periodic interval at
/// time `t`, starting from the trigonometric interpolant of `rho0`.
pub fn heat_exact_periodic(rho0: &[f64], length: f64, d_diff: f64, t: f64) -> Vec<f64> {
    let n = rho0.len();
    let two_pi = 2.0 * std::f64::consts::PI;
    // Forward DFT (direct O(n^2); n is a few hundred here).
    let mut re = vec![0.0f64; n];
    let mut im = vec![0.0f64; n];
    for k in 0..n {
        let mut sr = 0.0;
        let mut si = 0.0;
        for (j, &v) in rho0.iter().enumerate() {
            let phase = -two_pi * (k * j) as f64 / n as f64;
            sr += v * phase.cos();
            si += v * phase.sin();
        }
        re[k] = sr;
        im[k] = si;
    }
    // Decay each mode by exp(-D kappa^2 t) with the signed frequency.
    for k in 0..n {
        let ks = if k <= n / 2 { k as isize } else { k as isize - n as isize };
        let kappa = two_pi * ks as f64 / length;
        let decay = (-d_diff * kappa * kappa * t).exp();
        re[k] *= decay;
        im[k] *= decay;
    }
    // Inverse DFT.
    (0..n)
        .map(|j| {
            let mut s = 0.0;
            for k in 0..n {
                let phase = two_pi * (k * j) as f64 / n as f64;
                s += re[k] * phase.cos() - im[k] * phase.sin();
            }
            s / n as f64
        })
        .collect()
}

/// RK4 integration of `dy/dt = 2 rate y (target_sq - y)` (the squared-speed
/// relaxation ODE); the independent check of the closed form.
pub fn rk4_speed_ode(y0: f64, target_sq: f64, rate: f64, t_end: f64, steps: usize) -> f64 {
    let f = |y: f64| 2.0 * rate * y * (target_sq - y);
    let dt = t_end / steps as f64;
    let mut y = y0;
    for _ in 0..steps {
        let k1 = f(y);
        let k2 = f(y + 0.5 * dt * k1);
        let k3 = f(y + 0.5 * dt * k2);
        let k4 = f(y + dt * k3);
        y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    y
}

/// Relative L1 distance `sum |a - b| / sum |b|`.
pub fn l1_relative(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    let den: f64 = b.iter().map(|y| y.abs()).sum();
    num / den.max(1e-300)
}

/// Mean absolute difference, `sum |a - b| / len`.
pub fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    num / a.len().max(1) as f64
}
