//! `swarm-hierarchy` command-line interface: run any level of the model
//! hierarchy, verify the closure identities, or drive the validation
//! scenarios. See README for the config-file schema.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use std::io::Write;
use std::path::{Path, PathBuf};

use swarm_hierarchy::closure;
use swarm_hierarchy::coeffs::{DerivedCoefficients, ModelParams};
use swarm_hierarchy::config::Config;
use swarm_hierarchy::exec;
use swarm_hierarchy::grid::SpatialGrid;
use swarm_hierarchy::harness::{
    self, bump, cross_validate_particles_euler, diffusive_limit_study, limit_study_alpha,
    phase_sweep, report::emit_outputs, soh_limit_study, AlphaStudyConfig, CrossValidateConfig,
    PhaseSweepConfig, TauStudyConfig,
};
use swarm_hierarchy::hydro::{cfl_dt, euler_step, ns_step, FluidState};
use swarm_hierarchy::kinetic::{
    DistributionFunction, HomogeneousSolver, TimeScheme, VelocityGrid,
};
use swarm_hierarchy::particles::{self, observables, ParticleState};
use swarm_hierarchy::soh::{
    diffusion_step, soh_step, DiffusionScheme, DiffusionState, SohCoeffs, SohState,
};

#[derive(Parser)]
#[command(
    name = "swarm-hierarchy",
    version,
    about = "Self-propelled Cucker-Smale swarm hierarchy: particles, kinetic, hydrodynamics, limits"
)]
struct Cli {
    /// key=value config file (see README for the schema).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: $SWARM_HIERARCHY_OUT or ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base RNG seed.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Rayon thread count (0 = library default). Requires the `parallel`
    /// feature.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Force the sequential execution path (results are bit-identical to the
    /// parallel path either way).
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum KineticIc {
    Maxwellian,
    Bimaxwellian,
    UniformBox,
}

#[derive(Clone, Copy, ValueEnum)]
enum FluidIc {
    Uniform,
    DensityPulse,
    Shear,
    Riemann,
}

#[derive(Clone, Copy, ValueEnum)]
enum SohIc {
    DensityPulse,
    OmegaPulse,
    Combined,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    DiffusiveLimit,
    SohLimit,
    AlphaSplitting,
    ParticlesEuler,
    PhaseSweep,
    All,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the full derived-coefficient table as CSV.
    Coeffs {
        /// Use a free alpha instead of alpha = eps * lambda.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Run the N-agent stochastic simulation.
    Particles {
        #[arg(long, default_value_t = 1024)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, default_value_t = 10)]
        output_interval: usize,
        /// Also dump per-cell moments on an m-cell grid.
        #[arg(long)]
        moments_cells: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        box_len: f64,
    },
    /// Spatially homogeneous kinetic solver.
    KineticHom {
        #[arg(long, default_value_t = 64)]
        grid_n: usize,
        #[arg(long, default_value_t = 4.0)]
        v_max: f64,
        #[arg(long, default_value_t = 1)]
        vdim: usize,
        #[arg(long, value_enum, default_value_t = KineticIc::Maxwellian)]
        ic: KineticIc,
        #[arg(long, default_value_t = 2.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Enable the self-propulsion term with this scale separation.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        explicit: bool,
        #[arg(long, default_value_t = 20)]
        output_interval: usize,
    },
    /// Verify the Chapman-Enskog closure identities; nonzero exit on failure.
    VerifyClosure {
        #[arg(long, default_value_t = 12)]
        nq: usize,
    },
    /// Compressible Euler with self-propulsion.
    Euler(FluidArgs),
    /// Navier-Stokes correction system.
    Ns(FluidArgs),
    /// Self-Organized Hydrodynamics (low-noise limit model).
    Soh {
        #[arg(long, default_value_t = 256)]
        cells: usize,
        #[arg(long, default_value_t = 1.0)]
        length: f64,
        #[arg(long, value_enum, default_value_t = SohIc::Combined)]
        ic: SohIc,
        #[arg(long, default_value_t = 0.4)]
        t_end: f64,
        #[arg(long, default_value_t = 0.1)]
        snapshot_interval: f64,
        /// Explicit coefficient triple; otherwise derived from the model
        /// parameters (with --alpha if given).
        #[arg(long)]
        c1: Option<f64>,
        #[arg(long)]
        c2: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Density diffusion (high-noise limit model).
    Diffusion {
        #[arg(long, default_value_t = 256)]
        cells: usize,
        #[arg(long, default_value_t = 1.0)]
        length: f64,
        #[arg(long, default_value_t = 0.02)]
        t_end: f64,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        implicit: bool,
        #[arg(long, default_value_t = 0.005)]
        snapshot_interval: f64,
        /// Override the diffusion coefficient (default: D_diff from params).
        #[arg(long)]
        d_diff: Option<f64>,
    },
    /// Particle phase-transition sweep over the noise intensity.
    Sweep,
    /// Run a named validation scenario; nonzero exit on criterion failure.
    Validate {
        #[arg(long, value_enum, default_value_t = Scenario::All)]
        scenario: Scenario,
    },
}

#[derive(clap::Args)]
struct FluidArgs {
    #[arg(long, default_value_t = 256)]
    cells: usize,
    #[arg(long, default_value_t = 1.0)]
    length: f64,
    #[arg(long, value_enum, default_value_t = FluidIc::DensityPulse)]
    ic: FluidIc,
    #[arg(long, default_value_t = 0.5)]
    t_end: f64,
    /// Fixed dt; omitted = automatic CFL.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    snapshot_interval: f64,
    /// Use a free alpha (eps follows as kappa_alpha * tau).
    #[arg(long)]
    alpha: Option<f64>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if cli.threads > 0 {
        exec::set_threads(cli.threads);
    }
    if cli.deterministic {
        exec::set_parallel(false);
    }
    let config = match &cli.config {
        Some(path) => Config::load(path).context("loading config")?,
        None => Config::default(),
    };
    let out_dir = cli
        .out
        .clone()
        .or_else(|| std::env::var_os("SWARM_HIERARCHY_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    match &cli.cmd {
        Cmd::Coeffs { alpha } => cmd_coeffs(&config, *alpha),
        Cmd::Particles { n, steps, dt, output_interval, moments_cells, box_len } => cmd_particles(
            &config,
            &out_dir,
            cli.seed,
            *n,
            *steps,
            *dt,
            *output_interval,
            *moments_cells,
            *box_len,
        ),
        Cmd::KineticHom {
            grid_n,
            v_max,
            vdim,
            ic,
            t_end,
            dt,
            eps,
            explicit,
            output_interval,
        } => cmd_kinetic(
            &config,
            &out_dir,
            *grid_n,
            *v_max,
            *vdim,
            *ic,
            *t_end,
            *dt,
            *eps,
            *explicit,
            *output_interval,
        ),
        Cmd::VerifyClosure { nq } => cmd_verify_closure(&config, *nq),
        Cmd::Euler(args) => cmd_fluid(&config, &out_dir, args, false),
        Cmd::Ns(args) => cmd_fluid(&config, &out_dir, args, true),
        Cmd::Soh { cells, length, ic, t_end, snapshot_interval, c1, c2, delta, alpha } => cmd_soh(
            &config,
            &out_dir,
            *cells,
            *length,
            *ic,
            *t_end,
            *snapshot_interval,
            *c1,
            *c2,
            *delta,
            *alpha,
        ),
        Cmd::Diffusion { cells, length, t_end, dt, implicit, snapshot_interval, d_diff } => {
            cmd_diffusion(
                &config,
                &out_dir,
                *cells,
                *length,
                *t_end,
                *dt,
                *implicit,
                *snapshot_interval,
                *d_diff,
            )
        }
        Cmd::Sweep => {
            let cfg = PhaseSweepConfig::from_config(&config)?;
            let report = phase_sweep(&cfg)?;
            finish_report(&report, &out_dir)
        }
        Cmd::Validate { scenario } => cmd_validate(&config, &out_dir, *scenario),
    }
}

fn model_params(config: &Config) -> Result<ModelParams> {
    if config.get("model", "a").is_some() {
        Ok(ModelParams::from_config(config)?)
    } else {
        Ok(ModelParams::new(1.0, 1.0, 1.0, 0.2, 0.5, 0.0, 2)?)
    }
}

fn cmd_coeffs(config: &Config, alpha: Option<f64>) -> Result<()> {
    let params = model_params(config)?;
    let coeffs = match alpha {
        Some(a) => DerivedCoefficients::derive_with_alpha(params, a)?,
        None => DerivedCoefficients::derive(params)?,
    };
    println!("name,value,regime_valid");
    for (name, value, valid) in coeffs.table() {
        match value {
            Some(v) => println!("{name},{v:.16e},{valid}"),
            None => println!("{name},,false"),
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_particles(
    config: &Config,
    out_dir: &Path,
    seed: u64,
    n: usize,
    steps: usize,
    dt: f64,
    output_interval: usize,
    moments_cells: Option<usize>,
    box_len: f64,
) -> Result<()> {
    let params = model_params(config)?;
    let temp = params.temp();
    let mut state = ParticleState::random(n, box_len, 2, 2, &[0.0, 0.0], temp, seed)?;
    std::fs::create_dir_all(out_dir)?;
    let mut series = std::fs::File::create(out_dir.join("particles_series.csv"))?;
    writeln!(series, "time,phi,mean_speed")?;
    let mut moments = match moments_cells {
        Some(m) => {
            let f = std::fs::File::create(out_dir.join("particles_moments.csv"))?;
            Some((m, f))
        }
        None => None,
    };
    if let Some((m, f)) = &mut moments {
        writeln!(f, "time,cell,rho,u_x,u_y")?;
        dump_moments(&state, *m, f)?;
    }
    for step_idx in 0..steps {
        state = particles::step(&state, &params, dt)?;
        if (step_idx + 1) % output_interval == 0 {
            let rec = observables(&state, 1);
            writeln!(series, "{},{},{}", rec.time, rec.order_parameter, rec.mean_speed)?;
            if let Some((m, f)) = &mut moments {
                dump_moments(&state, *m, f)?;
            }
        }
    }
    println!("wrote {}", out_dir.join("particles_series.csv").display());
    Ok(())
}

fn dump_moments(state: &ParticleState, m: usize, f: &mut std::fs::File) -> Result<()> {
    let rec = observables(state, m);
    for (cell, (rho, u)) in rec
        .binned_density
        .iter()
        .zip(&rec.binned_velocity)
        .enumerate()
    {
        match u {
            Some(u) => writeln!(f, "{},{cell},{rho},{},{}", rec.time, u[0], u[1])?,
            None => writeln!(f, "{},{cell},{rho},,", rec.time)?,
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_kinetic(
    config: &Config,
    out_dir: &Path,
    grid_n: usize,
    v_max: f64,
    vdim: usize,
    ic: KineticIc,
    t_end: f64,
    dt: f64,
    eps: Option<f64>,
    explicit: bool,
    output_interval: usize,
) -> Result<()> {
    let params = model_params(config)?;
    let grid = VelocityGrid::new(v_max, grid_n, vdim)?;
    let temp = params.temp();
    let mut f = match ic {
        KineticIc::Maxwellian => DistributionFunction::maxwellian(grid, 1.0, &[0.3, 0.0], temp),
        KineticIc::Bimaxwellian => {
            let a = DistributionFunction::maxwellian(grid, 0.6, &[0.5, 0.0], temp);
            let b = DistributionFunction::maxwellian(grid, 0.4, &[-0.5, 0.0], temp);
            DistributionFunction::new(
                grid,
                a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect(),
            )
        }
        KineticIc::UniformBox => DistributionFunction::uniform_box(grid, 1.0, -1.0, 1.0),
    };
    let scheme = if explicit { TimeScheme::Explicit } else { TimeScheme::SemiImplicit };
    let solver = match eps {
        Some(e) => HomogeneousSolver::with_propulsion(params, e, scheme),
        None => HomogeneousSolver::relaxation(params, scheme),
    };
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("kinetic_series.csv");
    let mut out = std::fs::File::create(&path)?;
    writeln!(out, "time,mass,momentum_x,momentum_y,mean_speed,free_energy")?;
    let mut t = 0.0;
    let mut step_idx = 0usize;
    let mut emit = |f: &DistributionFunction, t: f64| -> Result<()> {
        let mass = f.mass();
        let mom = f.momentum();
        let u = f.mean_velocity()?;
        let speed = (u[0] * u[0] + u[1] * u[1]).sqrt();
        let h = f.free_energy(&params)?;
        writeln!(out, "{t},{mass},{},{},{speed},{h}", mom[0], mom[1])?;
        Ok(())
    };
    emit(&f, 0.0)?;
    while t < t_end - 1e-14 {
        let step_dt = dt.min(t_end - t);
        solver.step(&mut f, step_dt)?;
        t += step_dt;
        step_idx += 1;
        if step_idx % output_interval == 0 {
            emit(&f, t)?;
        }
    }
    emit(&f, t)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_verify_closure(config: &Config, nq: usize) -> Result<()> {
    let params = model_params(config)?;
    let set = closure::ClosureFunctionSet::from_params(&params);
    println!("identity,residual,tolerance,pass");
    let mut all_ok = true;
    let mut emit = |name: &str, residual: f64, tol: f64| {
        let ok = residual.abs() <= tol;
        all_ok &= ok;
        println!("{name},{residual:.3e},{tol:.1e},{ok}");
    };
    let solv = closure::check_solvability(&set, nq.max(8));
    for (name, r) in &solv.entries {
        emit(&format!("solvability_{name}"), *r, 1e-12);
    }
    let grid = VelocityGrid::new(
        6.0 * params.temp().sqrt(),
        32,
        params.dim.min(2),
    )?;
    let pinv = closure::check_pseudo_inverse(&set, params.diff, &grid);
    for (name, r) in &pinv.entries {
        emit(name, *r, 1e-12);
    }
    let u = [0.31, -0.17, 0.0];
    let grad_u = vec![
        vec![0.4, -0.2, 0.0],
        vec![0.1, 0.3, 0.0],
        vec![0.0, 0.0, 0.0],
    ];
    let b1b3 = closure::check_b1_b3(&params, 1.2, &u, &grad_u, nq);
    emit("b1_b3_max_rel_error", b1b3.max_rel_error, 1e-8);
    if all_ok {
        Ok(())
    } else {
        bail!("closure verification failed");
    }
}

fn fluid_ic(args: &FluidArgs, grid: SpatialGrid, coeffs: &DerivedCoefficients) -> FluidState {
    let length = args.length;
    let u_base = coeffs.comfort_speed.unwrap_or(0.3);
    match args.ic {
        FluidIc::Uniform => FluidState::uniform(grid, 2, 1.0, &[u_base, 0.0]),
        FluidIc::DensityPulse => FluidState::from_profiles(
            grid,
            2,
            |x, _| 1.0 + 0.2 * bump(x, 0.5 * length, 0.08 * length, length),
            |_, _| [0.0, 0.0, 0.0],
        ),
        FluidIc::Shear => FluidState::from_profiles(
            grid,
            2,
            |_, _| 1.0,
            |x, _| [0.0, 0.05 * (2.0 * std::f64::consts::PI * x / length).sin(), 0.0],
        ),
        FluidIc::Riemann => FluidState::from_profiles(
            grid,
            2,
            |x, _| if x < 0.5 * length { 1.5 } else { 0.8 },
            |_, _| [0.0, 0.0, 0.0],
        ),
    }
}

fn write_fluid_snapshot(state: &FluidState, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "x,rho,u_x,u_y")?;
    for idx in 0..state.grid.cells() {
        let x = state.grid.x(idx % state.grid.nx);
        let u = state.velocity(idx);
        writeln!(f, "{x},{},{},{}", state.rho[idx], u[0], u[1])?;
    }
    Ok(())
}

fn cmd_fluid(config: &Config, out_dir: &Path, args: &FluidArgs, ns: bool) -> Result<()> {
    let params = model_params(config)?;
    let coeffs = match args.alpha {
        Some(a) => DerivedCoefficients::derive_with_alpha(params, a)?,
        None => DerivedCoefficients::derive(params)?,
    };
    let grid = SpatialGrid::line(args.cells, args.length)?;
    let mut state = fluid_ic(args, grid, &coeffs);
    std::fs::create_dir_all(out_dir)?;
    let prefix = if ns { "ns" } else { "euler" };
    let mut snap_idx = 0usize;
    let mut next_snap = 0.0;
    while state.time < args.t_end * (1.0 - 1e-12) {
        if state.time >= next_snap {
            write_fluid_snapshot(
                &state,
                &out_dir.join(format!("{prefix}_{snap_idx:04}.csv")),
            )?;
            snap_idx += 1;
            next_snap += args.snapshot_interval;
        }
        let dt = args
            .dt
            .unwrap_or_else(|| cfl_dt(&state, &coeffs, ns, 0.4))
            .min(args.t_end - state.time);
        state = if ns {
            ns_step(&state, &coeffs, dt)?
        } else {
            euler_step(&state, &coeffs, dt)?
        };
    }
    write_fluid_snapshot(&state, &out_dir.join(format!("{prefix}_{snap_idx:04}.csv")))?;
    println!("wrote {} snapshots to {}", snap_idx + 1, out_dir.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_soh(
    config: &Config,
    out_dir: &Path,
    cells: usize,
    length: f64,
    ic: SohIc,
    t_end: f64,
    snapshot_interval: f64,
    c1: Option<f64>,
    c2: Option<f64>,
    delta: Option<f64>,
    alpha: Option<f64>,
) -> Result<()> {
    let params = model_params(config)?;
    let coeffs = match (c1, c2, delta) {
        (Some(c1), Some(c2), Some(delta)) => SohCoeffs { c1, c2, delta },
        _ => {
            let derived = match alpha {
                Some(a) => DerivedCoefficients::derive_with_alpha(params, a)?,
                None => DerivedCoefficients::derive(params)?,
            };
            match alpha {
                Some(_) => SohCoeffs::from_alpha(&derived)?,
                None => SohCoeffs::from_comfort_speed(&derived)?,
            }
        }
    };
    let grid = SpatialGrid::line(cells, length)?;
    let mut state = match ic {
        SohIc::DensityPulse => SohState::from_profiles(
            grid,
            coeffs,
            |x, _| 1.0 + 0.15 * bump(x, 0.3 * length, 0.07 * length, length),
            |_, _| 0.0,
        ),
        SohIc::OmegaPulse => SohState::from_profiles(
            grid,
            coeffs,
            |_, _| 1.0,
            |x, _| 0.2 * bump(x, 0.3 * length, 0.07 * length, length),
        ),
        SohIc::Combined => SohState::from_profiles(
            grid,
            coeffs,
            |x, _| 1.0 + 0.15 * bump(x, 0.3 * length, 0.07 * length, length),
            |x, _| 0.2 * bump(x, 0.6 * length, 0.07 * length, length),
        ),
    };
    std::fs::create_dir_all(out_dir)?;
    let mut snap_idx = 0usize;
    let mut next_snap = 0.0;
    let write_snap = |state: &SohState, idx: usize| -> Result<()> {
        let mut f = std::fs::File::create(out_dir.join(format!("soh_{idx:04}.csv")))?;
        writeln!(f, "x,rho,omega_x,omega_y")?;
        for i in 0..state.grid.cells() {
            writeln!(
                f,
                "{},{},{},{}",
                state.grid.x(i),
                state.rho[i],
                state.omega[i * 2],
                state.omega[i * 2 + 1]
            )?;
        }
        Ok(())
    };
    let dt_base = 0.4 * grid.spacing() / (coeffs.c1.abs() + coeffs.c2.abs() + coeffs.delta.abs() + 1e-9);
    while state.time < t_end * (1.0 - 1e-12) {
        if state.time >= next_snap {
            write_snap(&state, snap_idx)?;
            snap_idx += 1;
            next_snap += snapshot_interval;
        }
        let dt = dt_base.min(t_end - state.time);
        state = soh_step(&state, dt, true)?;
    }
    write_snap(&state, snap_idx)?;
    println!("wrote {} snapshots to {}", snap_idx + 1, out_dir.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_diffusion(
    config: &Config,
    out_dir: &Path,
    cells: usize,
    length: f64,
    t_end: f64,
    dt: Option<f64>,
    implicit: bool,
    snapshot_interval: f64,
    d_diff: Option<f64>,
) -> Result<()> {
    let params = model_params(config)?;
    let d_diff = match d_diff {
        Some(d) => d,
        None => {
            let coeffs = DerivedCoefficients::derive(params)?;
            coeffs.d_diff.context(
                "T <= T_c: the diffusion model needs T > T_c (or pass --d-diff explicitly)",
            )?
        }
    };
    let grid = SpatialGrid::line(cells, length)?;
    let rho: Vec<f64> = (0..cells)
        .map(|i| 1.0 + 0.5 * bump(grid.x(i), 0.5 * length, 0.08 * length, length))
        .collect();
    let mut state = DiffusionState::new(grid, rho, d_diff);
    let scheme = if implicit { DiffusionScheme::Trapezoidal } else { DiffusionScheme::Explicit };
    let h = grid.spacing();
    let dt = dt.unwrap_or(0.2 * h * h / d_diff);
    std::fs::create_dir_all(out_dir)?;
    let mut snap_idx = 0usize;
    let mut next_snap = 0.0;
    let write_snap = |state: &DiffusionState, idx: usize| -> Result<()> {
        let mut f = std::fs::File::create(out_dir.join(format!("diffusion_{idx:04}.csv")))?;
        writeln!(f, "x,rho,u_x")?;
        let u = state.velocity();
        for i in 0..state.grid.cells() {
            writeln!(f, "{},{},{}", state.grid.x(i), state.rho[i], u[i])?;
        }
        Ok(())
    };
    while state.time < t_end * (1.0 - 1e-12) {
        if state.time >= next_snap {
            write_snap(&state, snap_idx)?;
            snap_idx += 1;
            next_snap += snapshot_interval;
        }
        state = diffusion_step(&state, dt.min(t_end - state.time), scheme)?;
    }
    write_snap(&state, snap_idx)?;
    println!("wrote {} snapshots to {}", snap_idx + 1, out_dir.display());
    Ok(())
}

fn finish_report(report: &harness::report::RunReport, out_dir: &Path) -> Result<()> {
    let paths = emit_outputs(report, out_dir)?;
    for p in &paths {
        println!("wrote {}", p.display());
    }
    if report.passed() {
        println!("{}: all criteria passed", report.scenario);
        Ok(())
    } else {
        let failure = report.first_failure().unwrap();
        bail!(
            "{}: criterion `{}` failed (value {:.4e}, threshold {:.4e})",
            report.scenario,
            failure.name,
            failure.value,
            failure.threshold
        );
    }
}

fn cmd_validate(config: &Config, out_dir: &Path, scenario: Scenario) -> Result<()> {
    let mut failures = Vec::new();
    let mut run = |name: &str, report: Result<harness::report::RunReport, harness::HarnessError>| -> Result<()> {
        let report = report.with_context(|| format!("running scenario {name}"))?;
        let paths = emit_outputs(&report, out_dir)?;
        for p in &paths {
            println!("wrote {}", p.display());
        }
        if report.passed() {
            println!("{name}: PASS");
        } else {
            let f = report.first_failure().unwrap();
            println!("{name}: FAIL ({} = {:.4e}, threshold {:.4e})", f.name, f.value, f.threshold);
            failures.push(format!("{name}:{}", f.name));
        }
        Ok(())
    };
    match scenario {
        Scenario::DiffusiveLimit => run(
            "diffusive-limit",
            diffusive_limit_study(&TauStudyConfig::from_config(
                config,
                "diffusive_limit",
                TauStudyConfig::diffusive_defaults(),
            )?),
        )?,
        Scenario::SohLimit => run(
            "soh-limit",
            soh_limit_study(&TauStudyConfig::from_config(
                config,
                "soh_limit",
                TauStudyConfig::soh_defaults(),
            )?),
        )?,
        Scenario::AlphaSplitting => {
            run("alpha-splitting", limit_study_alpha(&AlphaStudyConfig::from_config(config)?))?
        }
        Scenario::ParticlesEuler => run(
            "particles-euler",
            cross_validate_particles_euler(&CrossValidateConfig::from_config(config)?),
        )?,
        Scenario::PhaseSweep => {
            run("phase-sweep", phase_sweep(&PhaseSweepConfig::from_config(config)?))?
        }
        Scenario::All => {
            run(
                "diffusive-limit",
                diffusive_limit_study(&TauStudyConfig::from_config(
                    config,
                    "diffusive_limit",
                    TauStudyConfig::diffusive_defaults(),
                )?),
            )?;
            run(
                "soh-limit",
                soh_limit_study(&TauStudyConfig::from_config(
                    config,
                    "soh_limit",
                    TauStudyConfig::soh_defaults(),
                )?),
            )?;
            run("alpha-splitting", limit_study_alpha(&AlphaStudyConfig::from_config(config)?))?;
            run(
                "particles-euler",
                cross_validate_particles_euler(&CrossValidateConfig::from_config(config)?),
            )?;
            run("phase-sweep", phase_sweep(&PhaseSweepConfig::from_config(config)?))?;
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        bail!("failed criteria: {}", failures.join(", "));
    }
}
