//! N-agent stochastic dynamics: noisy velocity consensus toward the local
//! kernel-weighted mean plus self-propulsion toward the comfort speed, in a
//! periodic box.
//!
//! Euler-Maruyama update per step (new velocity moves the position):
//!
//! ```text
//! v <- v + dt [ sigma^-1 (vbar_i - v) + tau^-1 (1 - |v|^2/a^2) v ] + sqrt(2 D dt) xi
//! x <- x + dt v   (wrapped into [0, L))
//! ```
//!
//! `vbar_i` is the mean velocity over neighbors within `eps * radius`
//! (indicator kernel, periodic minimum-image distance), always including the
//! particle itself, so an isolated agent keeps its own velocity.
//!
//! Noise is drawn from a counter-based stream keyed by
//! `(seed, step, particle)`: trajectories are bit-identical for any thread
//! count and for sequential execution. The cell-list path accumulates
//! neighbors in ascending index order, which makes it bit-identical to the
//! all-pairs oracle.

use crate::coeffs::ModelParams;
use crate::exec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParticleError {
    #[error("dt = {dt} violates the stability guard 0.1 min(tau, sigma) = {limit}")]
    Stability { dt: f64, limit: f64 },
    #[error("interaction radius {radius} must be below half the box length {half}")]
    RadiusTooLarge { radius: f64, half: f64 },
    #[error("velocity diverged at particle {index}: |v| = {speed}")]
    Diverged { index: usize, speed: f64 },
    #[error("invalid particle state: {0}")]
    BadState(String),
}

/// Positions and velocities of `n` agents in `[0, L)^dx` with `vdim >= dx`
/// velocity components.
#[derive(Debug, Clone)]
pub struct ParticleState {
    pub box_len: f64,
    pub dx: usize,
    pub vdim: usize,
    /// Positions, layout `[particle * dx + axis]`.
    pub pos: Vec<f64>,
    /// Velocities, layout `[particle * vdim + component]`.
    pub vel: Vec<f64>,
    pub time: f64,
    pub rng_seed: u64,
    /// Number of steps taken; also the RNG stream counter.
    pub step_count: u64,
}

const INIT_STREAM: u64 = u64::MAX;

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn stream_rng(seed: u64, stream: u64, particle: u64) -> ChaCha8Rng {
    let key = mix64(mix64(mix64(seed) ^ stream) ^ particle);
    ChaCha8Rng::seed_from_u64(key)
}

impl ParticleState {
    /// Uniform random positions, Maxwellian velocities around `u0`.
    pub fn random(
        n: usize,
        box_len: f64,
        dx: usize,
        vdim: usize,
        u0: &[f64],
        temp: f64,
        seed: u64,
    ) -> Result<Self, ParticleError> {
        if n == 0 || !(box_len > 0.0) || !(1..=2).contains(&dx) || vdim < dx || vdim > 3 {
            return Err(ParticleError::BadState(format!(
                "n = {n}, box = {box_len}, dx = {dx}, vdim = {vdim}"
            )));
        }
        let spread = temp.max(0.0).sqrt();
        let mut pos = vec![0.0; n * dx];
        let mut vel = vec![0.0; n * vdim];
        for i in 0..n {
            let mut rng = stream_rng(seed, INIT_STREAM, i as u64);
            for ax in 0..dx {
                pos[i * dx + ax] = box_len * rng.random::<f64>();
            }
            for k in 0..vdim {
                let g: f64 = rng.sample(StandardNormal);
                vel[i * vdim + k] = u0[k] + spread * g;
            }
        }
        Ok(Self { box_len, dx, vdim, pos, vel, time: 0.0, rng_seed: seed, step_count: 0 })
    }

    /// Sample positions from a quasi-1D density profile (inverse transform
    /// over cells) and velocities from the local Maxwellian `M_{u0(x)}`.
    pub fn from_profile(
        n: usize,
        box_len: f64,
        vdim: usize,
        rho: impl Fn(f64) -> f64,
        u0: impl Fn(f64) -> [f64; 3],
        temp: f64,
        seed: u64,
    ) -> Result<Self, ParticleError> {
        let m = 4096;
        let h = box_len / m as f64;
        let mut cdf = vec![0.0; m + 1];
        for i in 0..m {
            let w = rho((i as f64 + 0.5) * h);
            if !(w >= 0.0) {
                return Err(ParticleError::BadState("density profile must be >= 0".into()));
            }
            cdf[i + 1] = cdf[i] + w;
        }
        let total = cdf[m];
        if !(total > 0.0) {
            return Err(ParticleError::BadState("density profile has zero mass".into()));
        }
        let spread = temp.max(0.0).sqrt();
        let mut pos = vec![0.0; n];
        let mut vel = vec![0.0; n * vdim];
        for i in 0..n {
            let mut rng = stream_rng(seed, INIT_STREAM, i as u64);
            let target = total * rng.random::<f64>();
            let cell = cdf.partition_point(|&c| c <= target).saturating_sub(1).min(m - 1);
            let frac = (target - cdf[cell]) / (cdf[cell + 1] - cdf[cell]).max(1e-300);
            let x = (cell as f64 + frac) * h;
            pos[i] = x.rem_euclid(box_len);
            let u = u0(pos[i]);
            for k in 0..vdim {
                let g: f64 = rng.sample(StandardNormal);
                vel[i * vdim + k] = u[k] + spread * g;
            }
        }
        Ok(Self { box_len, dx: 1, vdim, pos, vel, time: 0.0, rng_seed: seed, step_count: 0 })
    }

    pub fn n(&self) -> usize {
        self.pos.len() / self.dx
    }

    pub fn velocity(&self, i: usize) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[..self.vdim].copy_from_slice(&self.vel[i * self.vdim..(i + 1) * self.vdim]);
        v
    }

    pub fn speed(&self, i: usize) -> f64 {
        self.vel[i * self.vdim..(i + 1) * self.vdim]
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

/// Minimum-image displacement along one periodic axis. Positions live in
/// [0, L), so a single wrap suffices; ties at exactly L/2 square to the same
/// distance either way.
#[inline(always)]
fn min_image(mut d: f64, box_len: f64) -> f64 {
    let half = 0.5 * box_len;
    if d > half {
        d -= box_len;
    } else if d < -half {
        d += box_len;
    }
    d
}

/// Periodic minimum-image squared distance.
fn min_image_dist_sq(a: &[f64], b: &[f64], box_len: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = min_image(x - y, box_len);
            d * d
        })
        .sum()
}

/// Mean neighbor velocities for all particles, brute-force over all pairs.
pub fn neighbor_means_all_pairs(state: &ParticleState, radius: f64) -> Vec<f64> {
    let n = state.n();
    let (dx, vdim) = (state.dx, state.vdim);
    let r2 = radius * radius;
    let box_len = state.box_len;
    let pos = &state.pos;
    let vel = &state.vel;
    let mut out = vec![0.0; n * vdim];
    exec::fill_chunks(&mut out, vdim, |i, mean| {
        let xi = pos[i * dx];
        let yi = if dx == 2 { pos[i * dx + 1] } else { 0.0 };
        let mut count = 0usize;
        for j in 0..n {
            let ddx = min_image(xi - pos[j * dx], box_len);
            let mut dist = ddx * ddx;
            if dx == 2 {
                let ddy = min_image(yi - pos[j * dx + 1], box_len);
                dist += ddy * ddy;
            }
            if dist <= r2 {
                for k in 0..vdim {
                    mean[k] += vel[j * vdim + k];
                }
                count += 1;
            }
        }
        for m in mean.iter_mut() {
            *m /= count as f64;
        }
    });
    out
}

/// Mean neighbor velocities via a uniform cell list. Neighbor indices are
/// sorted before accumulation so the result is bit-identical to the
/// all-pairs path.
pub fn neighbor_means_cell_list(state: &ParticleState, radius: f64) -> Vec<f64> {
    let n = state.n();
    let (dx, vdim) = (state.dx, state.vdim);
    let m = (state.box_len / radius).floor() as usize;
    debug_assert!(m >= 3);
    let cells_total = m.pow(dx as u32);
    let box_len = state.box_len;
    let pos = &state.pos;
    let vel = &state.vel;
    let cell_of = |x: f64| -> usize { (((x / box_len) * m as f64).floor() as usize).min(m - 1) };
    let mut cells: Vec<Vec<usize>> = vec![Vec::new(); cells_total];
    for i in 0..n {
        let cx = cell_of(pos[i * dx]);
        let idx = if dx == 1 { cx } else { cell_of(pos[i * dx + 1]) * m + cx };
        cells[idx].push(i);
    }

    let r2 = radius * radius;
    let wrap = |c: isize| -> usize {
        // c is within [-1, m]; cheaper than rem_euclid.
        if c < 0 {
            m - 1
        } else if c as usize >= m {
            0
        } else {
            c as usize
        }
    };
    let mut out = vec![0.0; n * vdim];
    exec::fill_chunks(&mut out, vdim, |i, mean| {
        let xi = pos[i * dx];
        let yi = if dx == 2 { pos[i * dx + 1] } else { 0.0 };
        let cx = cell_of(xi) as isize;
        let cy = if dx == 2 { cell_of(yi) as isize } else { 0 };
        let mut neighbors: Vec<usize> = Vec::with_capacity(64);
        let dy_range = if dx == 2 { -1..=1 } else { 0..=0 };
        for dy in dy_range {
            for dxx in -1isize..=1 {
                let cell = if dx == 1 {
                    wrap(cx + dxx)
                } else {
                    wrap(cy + dy) * m + wrap(cx + dxx)
                };
                for &j in &cells[cell] {
                    let ddx = min_image(xi - pos[j * dx], box_len);
                    let mut dist = ddx * ddx;
                    if dx == 2 {
                        let ddy = min_image(yi - pos[j * dx + 1], box_len);
                        dist += ddy * ddy;
                    }
                    if dist <= r2 {
                        neighbors.push(j);
                    }
                }
            }
        }
        neighbors.sort_unstable();
        for &j in &neighbors {
            for k in 0..vdim {
                mean[k] += vel[j * vdim + k];
            }
        }
        for v in mean.iter_mut() {
            *v /= neighbors.len() as f64;
        }
    });
    out
}

/// Kernel-weighted mean velocity of a single agent's neighborhood
/// (indicator kernel; self always included).
pub fn neighbor_mean_velocity(
    state: &ParticleState,
    i: usize,
    radius: f64,
) -> Result<[f64; 3], ParticleError> {
    if radius >= 0.5 * state.box_len {
        return Err(ParticleError::RadiusTooLarge { radius, half: 0.5 * state.box_len });
    }
    let (dx, vdim) = (state.dx, state.vdim);
    let xi = &state.pos[i * dx..(i + 1) * dx];
    let r2 = radius * radius;
    let mut mean = [0.0; 3];
    let mut count = 0usize;
    for j in 0..state.n() {
        let xj = &state.pos[j * dx..(j + 1) * dx];
        if min_image_dist_sq(xi, xj, state.box_len) <= r2 {
            for k in 0..vdim {
                mean[k] += state.vel[j * vdim + k];
            }
            count += 1;
        }
    }
    for v in &mut mean {
        *v /= count as f64;
    }
    Ok(mean)
}

fn neighbor_means(state: &ParticleState, radius: f64) -> Vec<f64> {
    if radius <= 0.0 {
        return state.vel.clone();
    }
    let m = (state.box_len / radius).floor() as usize;
    if state.n() > 512 && m >= 3 {
        neighbor_means_cell_list(state, radius)
    } else {
        neighbor_means_all_pairs(state, radius)
    }
}

/// One Euler-Maruyama step.
pub fn step(
    state: &ParticleState,
    params: &ModelParams,
    dt: f64,
) -> Result<ParticleState, ParticleError> {
    let limit = 0.1 * params.tau.min(params.sigma);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(ParticleError::Stability { dt, limit });
    }
    let radius = params.eps * params.radius;
    if radius >= 0.5 * state.box_len {
        return Err(ParticleError::RadiusTooLarge { radius, half: 0.5 * state.box_len });
    }

    let vbar = neighbor_means(state, radius);
    let n = state.n();
    let (dx, vdim) = (state.dx, state.vdim);
    let inv_sigma = 1.0 / params.sigma;
    let inv_tau = 1.0 / params.tau;
    let a2 = params.a * params.a;
    let noise_amp = (2.0 * params.diff * dt).sqrt();
    let (seed, stream) = (state.rng_seed, state.step_count);

    let mut out = state.clone();
    // Pack (vel, pos) updates per particle into one disjoint-write pass.
    let mut packed = vec![0.0f64; n * (vdim + dx)];
    let vel = &state.vel;
    let pos = &state.pos;
    let box_len = state.box_len;
    exec::fill_chunks(&mut packed, vdim + dx, |i, chunk| {
        let v = &vel[i * vdim..(i + 1) * vdim];
        let vb = &vbar[i * vdim..(i + 1) * vdim];
        let speed_sq: f64 = v.iter().map(|x| x * x).sum();
        let prop = inv_tau * (1.0 - speed_sq / a2);
        let mut rng = stream_rng(seed, stream, i as u64);
        for k in 0..vdim {
            let g: f64 = rng.sample(StandardNormal);
            chunk[k] = v[k] + dt * (inv_sigma * (vb[k] - v[k]) + prop * v[k]) + noise_amp * g;
        }
        for ax in 0..dx {
            let x = pos[i * dx + ax] + dt * chunk[ax];
            chunk[vdim + ax] = x.rem_euclid(box_len);
        }
    });
    for i in 0..n {
        out.vel[i * vdim..(i + 1) * vdim].copy_from_slice(&packed[i * (vdim + dx)..i * (vdim + dx) + vdim]);
        out.pos[i * dx..(i + 1) * dx]
            .copy_from_slice(&packed[i * (vdim + dx) + vdim..(i + 1) * (vdim + dx)]);
    }

    // Divergence diagnostic: report the worst offender.
    let mut worst = (0usize, 0.0f64);
    for i in 0..n {
        let s: f64 = out.vel[i * vdim..(i + 1) * vdim].iter().map(|x| x * x).sum();
        if !s.is_finite() || s > worst.1 {
            worst = (i, s);
            if !s.is_finite() {
                break;
            }
        }
    }
    let max_speed = worst.1.sqrt();
    if !max_speed.is_finite() || max_speed > 1e6 * params.a.max(1.0) {
        return Err(ParticleError::Diverged { index: worst.0, speed: max_speed });
    }

    out.time = state.time + dt;
    out.step_count = state.step_count + 1;
    Ok(out)
}

/// Macroscopic observables of one snapshot.
#[derive(Debug, Clone)]
pub struct ObservableRecord {
    pub time: f64,
    /// Polar order parameter `|sum v| / sum |v|` in `[0, 1]`.
    pub order_parameter: f64,
    pub mean_speed: f64,
    pub cells_per_side: usize,
    /// Number density per cell (counting; `sum rho * cell_volume = N`).
    pub binned_density: Vec<f64>,
    /// Mean velocity per cell; `None` for empty cells.
    pub binned_velocity: Vec<Option<[f64; 3]>>,
}

pub fn observables(state: &ParticleState, cells_per_side: usize) -> ObservableRecord {
    let n = state.n();
    let (dx, vdim) = (state.dx, state.vdim);
    let m = cells_per_side.max(1);
    let nc = m.pow(dx as u32);
    let cell_volume = (state.box_len / m as f64).powi(dx as i32);

    let mut vsum = [0.0f64; 3];
    let mut speed_sum = 0.0;
    let mut counts = vec![0usize; nc];
    let mut vcell = vec![[0.0f64; 3]; nc];
    for i in 0..n {
        let v = &state.vel[i * vdim..(i + 1) * vdim];
        for k in 0..vdim {
            vsum[k] += v[k];
        }
        speed_sum += v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let cell_of = |x: f64| -> usize {
            (((x / state.box_len) * m as f64).floor() as usize).min(m - 1)
        };
        let cx = cell_of(state.pos[i * dx]);
        let cell = if dx == 1 { cx } else { cell_of(state.pos[i * dx + 1]) * m + cx };
        counts[cell] += 1;
        for k in 0..vdim {
            vcell[cell][k] += v[k];
        }
    }
    let vnorm = vsum.iter().map(|x| x * x).sum::<f64>().sqrt();
    let order_parameter = if speed_sum > 0.0 { vnorm / speed_sum } else { 0.0 };
    let binned_density = counts.iter().map(|&c| c as f64 / cell_volume).collect();
    let binned_velocity = counts
        .iter()
        .zip(&vcell)
        .map(|(&c, v)| {
            (c > 0).then(|| {
                let mut u = *v;
                for x in &mut u {
                    *x /= c as f64;
                }
                u
            })
        })
        .collect();
    ObservableRecord {
        time: state.time,
        order_parameter,
        mean_speed: speed_sum / n as f64,
        cells_per_side: m,
        binned_density,
        binned_velocity,
    }
}

/// Cloud-in-cell deposition of density and mean velocity (quasi-1D);
/// lower-noise than counting for the cross-level comparisons.
pub fn deposit_cic(state: &ParticleState, cells: usize) -> (Vec<f64>, Vec<Option<[f64; 3]>>) {
    assert_eq!(state.dx, 1, "CIC deposition is quasi-1D");
    let m = cells;
    let h = state.box_len / m as f64;
    let vdim = state.vdim;
    let mut mass = vec![0.0f64; m];
    let mut mom = vec![[0.0f64; 3]; m];
    for i in 0..state.n() {
        let xi = state.pos[i] / h - 0.5;
        let j = xi.floor();
        let w = xi - j;
        let j0 = (j.rem_euclid(m as f64)) as usize % m;
        let j1 = (j0 + 1) % m;
        mass[j0] += 1.0 - w;
        mass[j1] += w;
        for k in 0..vdim {
            let v = state.vel[i * vdim + k];
            mom[j0][k] += (1.0 - w) * v;
            mom[j1][k] += w * v;
        }
    }
    let rho: Vec<f64> = mass.iter().map(|&c| c / h).collect();
    let u = mass
        .iter()
        .zip(&mom)
        .map(|(&c, p)| {
            (c > 1e-12).then(|| {
                let mut v = *p;
                for x in &mut v {
                    *x /= c;
                }
                v
            })
        })
        .collect();
    (rho, u)
}
