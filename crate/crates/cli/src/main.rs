//! Command-line front end: identification demos, controller tuning, single
//! scenario runs and the full comparison studies, all driven from one
//! parameter file.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use macromicro::config::{Config, HingeVariant};
use macromicro::control::{ArchitectureKind, ClosedLoop, ControllerSet, Setpoints};
use macromicro::error::{Error, Result};
use macromicro::experiments::{
    bandwidth_table, collision_table, emit_report, run_bandwidth, run_collision,
    run_force_trajectory, trajectory_table, tune_lf, ComparisonTable, ExperimentKind,
    ExperimentSpec, ReportInputs, TunedGains, LF_OVERSHOOT_TARGET,
};
use macromicro::lti::{tf_to_ss, TransferFunction};
use macromicro::plant::{Axis, AxisPlant};
use macromicro::sim::{extract_metrics, simulate, MetricThresholds, SimConfig};
use macromicro::synth::{crossover_search, crossover_search_rb, SynthesisResult, WeightSpec};
use macromicro::sysid::{
    estimate_frf, fit_second_order, gen_sweep, simulate_response, FrfConfig, SweepSpec,
};

#[derive(Parser)]
#[command(name = "macromicro", version, about = "Macro-micro force control: tuning and simulation studies")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Parameter file (TOML); built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory all artifacts are written into.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Axis to operate on.
    #[arg(long, global = true, value_enum, default_value_t = AxisArg::X)]
    axis: AxisArg,
    /// Measurement-noise seed; overrides the configured one.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Mount the stiff hinge variant instead of the soft one.
    #[arg(long, global = true)]
    stiff_hinge: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Excite both velocity stages, estimate their frequency responses and
    /// refit the models against the known parameters.
    Identify {
        /// Output noise standard deviation, as a fraction of the excitation
        /// amplitude.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Tune the proposed and robot-only controllers; writes gains.toml.
    Synthesize,
    /// Tune the leader-follower baseline; merges into gains.toml.
    TuneLf,
    /// Run one force-step scenario with tuned gains and write the trace.
    Simulate {
        /// Architecture to close the loop with.
        #[arg(long, value_enum, default_value_t = ArchArg::Proposed)]
        arch: ArchArg,
        /// Step target force, N.
        #[arg(long, default_value_t = 20.0)]
        force: f64,
        /// Initial standoff from the wall, mm.
        #[arg(long, default_value_t = 0.0)]
        x_dist: f64,
        /// Simulated span, s.
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
        /// Gains file [default: <out>/gains.toml].
        #[arg(long, value_name = "PATH")]
        gains: Option<PathBuf>,
    },
    /// Run one comparison study (or all of them) across the architectures.
    Experiment {
        #[arg(value_enum)]
        kind: KindArg,
        /// Gains file [default: <out>/gains.toml]; tuned on the fly when
        /// neither exists.
        #[arg(long, value_name = "PATH")]
        gains: Option<PathBuf>,
        /// Blend time of the trajectory study, s.
        #[arg(long, default_value_t = 0.2)]
        blend: f64,
        /// Noisy repetitions per architecture.
        #[arg(long, default_value_t = 1)]
        repetitions: usize,
    },
    /// Merge the stored per-study tables into one comparison file.
    Report,
}

#[derive(ValueEnum, Clone, Copy)]
enum AxisArg {
    X,
    Y,
    Z,
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Axis {
        match a {
            AxisArg::X => Axis::X,
            AxisArg::Y => Axis::Y,
            AxisArg::Z => Axis::Z,
        }
    }
}

#[derive(ValueEnum, Clone, Copy)]
enum ArchArg {
    Proposed,
    Lf,
    Rb,
}

impl From<ArchArg> for ArchitectureKind {
    fn from(a: ArchArg) -> ArchitectureKind {
        match a {
            ArchArg::Proposed => ArchitectureKind::Proposed,
            ArchArg::Lf => ArchitectureKind::LeaderFollower,
            ArchArg::Rb => ArchitectureKind::RobotOnly,
        }
    }
}

#[derive(ValueEnum, Clone, Copy)]
enum KindArg {
    Bandwidth,
    CollisionInside,
    CollisionOutside,
    ForceTrajectory,
    All,
}

impl KindArg {
    fn kinds(self) -> Vec<ExperimentKind> {
        match self {
            KindArg::Bandwidth => vec![ExperimentKind::Bandwidth],
            KindArg::CollisionInside => vec![ExperimentKind::CollisionInside],
            KindArg::CollisionOutside => vec![ExperimentKind::CollisionOutside],
            KindArg::ForceTrajectory => vec![ExperimentKind::ForceTrajectory],
            KindArg::All => vec![
                ExperimentKind::Bandwidth,
                ExperimentKind::CollisionInside,
                ExperimentKind::CollisionOutside,
                ExperimentKind::ForceTrajectory,
            ],
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 1 for bad input (flags, files, parameters), 2 for numerical trouble.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::SimulationDiverged { .. }
        | Error::SynthesisFailed(_)
        | Error::LfTuningFailed(_)
        | Error::IdentificationFailed(_)
        | Error::UnstableSystem { .. }
        | Error::NoCutoff { .. }
        | Error::EvaluationAtPole { .. }
        | Error::SingularDiscretization
        | Error::AlgebraicLoop => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let config = match &g.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let hinge = if g.stiff_hinge { HingeVariant::High } else { HingeVariant::Low };
    let plant = config.axis_plant(g.axis.into(), hinge)?;
    std::fs::create_dir_all(&g.out)?;

    match cli.command {
        Command::Identify { noise } => identify(&cli.global, &config, &plant, noise),
        Command::Synthesize => synthesize(&cli.global, &config, &plant),
        Command::TuneLf => tune_lf_cmd(&cli.global, &plant),
        Command::Simulate { arch, force, x_dist, duration, gains } => {
            simulate_cmd(&cli.global, &config, &plant, arch.into(), force, x_dist, duration, gains)
        }
        Command::Experiment { kind, gains, blend, repetitions } => {
            experiment(&cli.global, &config, &plant, kind, gains, blend, repetitions)
        }
        Command::Report => report(&cli.global),
    }
}

/// On-disk gains bundle; parts appear as the tuning commands run.
#[derive(Debug, Default, Serialize, Deserialize)]
struct GainsFile {
    proposed: Option<SynthesisResult>,
    rb: Option<SynthesisResult>,
    lf: Option<ControllerSet>,
}

impl GainsFile {
    fn path(global: &GlobalArgs, explicit: &Option<PathBuf>) -> PathBuf {
        explicit.clone().unwrap_or_else(|| global.out.join("gains.toml"))
    }

    fn load_or_default(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Ok(GainsFile::default());
        }
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn save(&self, path: &Path) -> Result<()> {
        let text =
            toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    fn into_tuned(self, path: &Path) -> Result<TunedGains> {
        match (self.proposed, self.rb, self.lf) {
            (Some(proposed), Some(rb), Some(lf)) => Ok(TunedGains { proposed, rb, lf }),
            _ => Err(Error::InvalidParameter(format!(
                "{} is incomplete; run `synthesize` and `tune-lf` first",
                path.display()
            ))),
        }
    }
}

fn sim_config(config: &Config, seed: Option<u64>) -> SimConfig {
    let s = &config.simulation;
    SimConfig {
        ts: s.sample_time_s,
        duration: 0.0, // scenario runners fill this in
        x_dist: 0.0,
        noise_std: s.noise_std_n,
        seed: seed.unwrap_or(s.seed),
        v_limit_macro: s.macro_v_limit_mm_s * 1e-3,
        rom_clamp: s.rom_clamp,
    }
}

fn identify(global: &GlobalArgs, config: &Config, plant: &AxisPlant, noise: f64) -> Result<()> {
    if !(0.0..1.0).contains(&noise) {
        return Err(Error::InvalidParameter(
            "noise fraction must be in [0, 1)".into(),
        ));
    }
    let dir = global.out.join("identify");
    std::fs::create_dir_all(&dir)?;
    let ts = config.simulation.sample_time_s;
    let mut rng = ChaCha8Rng::seed_from_u64(global.seed.unwrap_or(config.simulation.seed));

    struct StageCase {
        name: &'static str,
        gain: f64,
        zeta: f64,
        omega_c: f64,
        band_hz: (f64, f64),
    }
    let cases = [
        StageCase {
            name: "macro",
            gain: plant.macro_stage.gain,
            zeta: plant.macro_stage.zeta,
            omega_c: plant.macro_stage.omega_c,
            band_hz: (0.05, 20.0),
        },
        StageCase {
            name: "micro",
            gain: plant.micro_active.gain,
            zeta: plant.micro_active.zeta,
            omega_c: plant.micro_active.omega_c,
            band_hz: (0.2, 100.0),
        },
    ];

    for case in cases {
        let tf = TransferFunction::new(
            vec![case.gain * case.omega_c * case.omega_c],
            vec![1.0, 2.0 * case.zeta * case.omega_c, case.omega_c * case.omega_c],
        )?;
        let sys = tf_to_ss(&tf)?;
        let sweep = SweepSpec {
            f_start: case.band_hz.0,
            f_end: case.band_hz.1,
            amplitude: 1.0,
            offset: 0.0,
            duration: 60.0,
            sample_rate: 1.0 / ts,
        };
        let excitation = gen_sweep(&sweep)?;
        let mut record = simulate_response(&sys, &excitation)?;
        if noise > 0.0 {
            let dist = Normal::new(0.0, noise * sweep.amplitude)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            for y in &mut record.y {
                *y += dist.sample(&mut rng);
            }
        }

        // Stay inside the swept band: the sweep spends no energy at its
        // own endpoints.
        let (grid_lo, grid_hi) = (case.band_hz.0 * 1.25, case.band_hz.1 * 0.8);
        let grid: Vec<f64> = (0..60)
            .map(|i| {
                let f = i as f64 / 59.0;
                grid_lo * (grid_hi / grid_lo).powf(f)
            })
            .collect();
        let frf = estimate_frf(&record, &grid, &FrfConfig::default())?;
        // The carrier is critically damped by construction; fitting with the
        // constraint mirrors how its model is parameterized.
        let constrain = (case.zeta - 1.0).abs() < 1e-9;
        let fit = fit_second_order(&frf, constrain, Some(&record))?;

        std::fs::write(dir.join(format!("sweep_{}.csv", case.name)), record.to_csv())?;
        let mut frf_csv = String::from("freq_hz,real,imag\n");
        for (f, v) in grid.iter().zip(frf.values.iter()) {
            let h = v[(0, 0)];
            frf_csv.push_str(&format!("{f:.6},{:.9e},{:.9e}\n", h.re, h.im));
        }
        std::fs::write(dir.join(format!("frf_{}.csv", case.name)), frf_csv)?;

        let k = fit.params.get("K").copied().unwrap_or(f64::NAN);
        let zeta = fit.params.get("zeta").copied().unwrap_or(f64::NAN);
        let f_c = fit.params.get("omega_c").copied().unwrap_or(f64::NAN)
            / (2.0 * std::f64::consts::PI);
        println!(
            "{:>5}: gain {:.4} (true {:.4})  zeta {:.3} (true {:.3})  cutoff {:.3} Hz (true {:.3})  fit {:.1}%",
            case.name,
            k,
            case.gain,
            zeta,
            case.zeta,
            f_c,
            case.omega_c / (2.0 * std::f64::consts::PI),
            fit.fit_percent,
        );
    }
    println!("records in {}", dir.display());
    Ok(())
}

fn synthesize(global: &GlobalArgs, config: &Config, plant: &AxisPlant) -> Result<()> {
    let weights = WeightSpec::from_config(&config.weights);
    println!("searching the crossover; this takes a minute or so");
    let proposed = crossover_search(plant, &weights)?;
    println!(
        "proposed: crossover {:.2} Hz, norm {:.4}, c_FM {:.1}, c_Fmu {:.1}, k_x {:.4}, c_x {:.5}",
        proposed.omega_co_f_final / (2.0 * std::f64::consts::PI),
        proposed.achieved_norm,
        proposed.gains.c_ctrl_f_m,
        proposed.gains.c_ctrl_f_mu,
        proposed.gains.k_ctrl_x,
        proposed.gains.c_ctrl_x,
    );
    let rb = crossover_search_rb(plant, &weights)?;
    println!(
        "robot-only: crossover {:.2} Hz, norm {:.4}, c_FM {:.1}",
        rb.omega_co_f_final / (2.0 * std::f64::consts::PI),
        rb.achieved_norm,
        rb.gains.c_ctrl_f_m,
    );

    let path = GainsFile::path(global, &None);
    let mut file = GainsFile::load_or_default(&path)?;
    file.proposed = Some(proposed);
    file.rb = Some(rb);
    file.save(&path)?;
    println!("gains written to {}", path.display());
    Ok(())
}

fn tune_lf_cmd(global: &GlobalArgs, plant: &AxisPlant) -> Result<()> {
    let lf = tune_lf(plant, LF_OVERSHOOT_TARGET)?;
    println!(
        "leader-follower: c_Fmu {:.1}, k_x {:.3}, c_x {:.4}",
        lf.c_ctrl_f_mu, lf.k_ctrl_x, lf.c_ctrl_x,
    );
    let path = GainsFile::path(global, &None);
    let mut file = GainsFile::load_or_default(&path)?;
    file.lf = Some(lf);
    file.save(&path)?;
    println!("gains written to {}", path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simulate_cmd(
    global: &GlobalArgs,
    config: &Config,
    plant: &AxisPlant,
    arch: ArchitectureKind,
    force: f64,
    x_dist_mm: f64,
    duration: f64,
    gains_path: Option<PathBuf>,
) -> Result<()> {
    let path = GainsFile::path(global, &gains_path);
    let tuned = GainsFile::load_or_default(&path)?.into_tuned(&path)?;
    let cl = ClosedLoop {
        plant: plant.clone(),
        kind: arch,
        gains: tuned.for_kind(arch),
        setpoints: Setpoints { f_des: force, x_tilde_des: 0.0 },
    };
    let cfg = SimConfig {
        duration,
        x_dist: x_dist_mm * 1e-3,
        ..sim_config(config, global.seed)
    };
    let trace = simulate(&cl, &cfg, |_| force, |_| 0.0)?;
    let thresholds = MetricThresholds { rom: plant.mech.rom, ..MetricThresholds::default() };
    let m = extract_metrics(&trace, force, &thresholds);

    let out = global.out.join(format!("trace_{}.csv", arch.label()));
    std::fs::write(&out, trace.to_csv())?;
    let fmt_t = |v: Option<f64>| match v {
        Some(t) => format!("{t:.3} s"),
        None => "not reached".into(),
    };
    println!("final force   {:.3} N", trace.f_act.last().copied().unwrap_or(f64::NAN));
    println!("contact at    {}", fmt_t(m.t_contact));
    println!("force settled {}", fmt_t(m.t_force_reached));
    if arch != ArchitectureKind::RobotOnly {
        println!("recentered at {}", fmt_t(m.t_pos_reached));
    }
    println!("force RMSE    {:.3} N, overshoot {:.2}%", m.rmse_force, 100.0 * m.overshoot);
    println!("trace written to {}", out.display());
    Ok(())
}

fn experiment(
    global: &GlobalArgs,
    config: &Config,
    plant: &AxisPlant,
    kind: KindArg,
    gains_path: Option<PathBuf>,
    blend: f64,
    repetitions: usize,
) -> Result<()> {
    let path = GainsFile::path(global, &gains_path);
    let mut file = GainsFile::load_or_default(&path)?;
    if file.proposed.is_none() || file.rb.is_none() || file.lf.is_none() {
        println!("no complete gains file at {}; tuning first", path.display());
        let weights = WeightSpec::from_config(&config.weights);
        file.proposed = Some(crossover_search(plant, &weights)?);
        file.rb = Some(crossover_search_rb(plant, &weights)?);
        file.lf = Some(tune_lf(plant, LF_OVERSHOOT_TARGET)?);
        file.save(&path)?;
        println!("gains written to {}", path.display());
    }
    let tuned = file.into_tuned(&path)?;
    let sim = sim_config(config, global.seed);

    let mut merged = ComparisonTable::default();
    for k in kind.kinds() {
        let mut spec = ExperimentSpec::new(k);
        spec.axis = global.axis.into();
        spec.repetitions = repetitions;
        spec.blend_duration = blend;

        let dir = global.out.join(k.label());
        let table = match k {
            ExperimentKind::Bandwidth => {
                let runs = run_bandwidth(plant, &tuned, &spec, &sim)?;
                for r in &runs {
                    println!(
                        "bandwidth {:>8}: cutoff {:.3} Hz (model fit {:.1}%)",
                        r.architecture.label(),
                        r.cutoff_hz,
                        r.fit.fit_percent,
                    );
                }
                let table = bandwidth_table(&runs);
                emit_report(
                    &dir,
                    &ReportInputs { table: Some(&table), bandwidth: &runs, ..Default::default() },
                )?;
                table
            }
            ExperimentKind::CollisionInside | ExperimentKind::CollisionOutside => {
                let runs = run_collision(plant, &tuned, &spec, &sim)?;
                for r in runs.iter().filter(|r| r.repetition == 0) {
                    let m = &r.metrics;
                    println!(
                        "{} {:>8}: contact {}, force {}, rmse {:.3} N",
                        k.label(),
                        r.architecture.label(),
                        m.t_contact.map_or("—".into(), |t| format!("{t:.3} s")),
                        m.t_force_reached.map_or("—".into(), |t| format!("{t:.3} s")),
                        m.rmse_force,
                    );
                }
                let table = collision_table(k, &runs);
                let inputs = if k == ExperimentKind::CollisionInside {
                    ReportInputs { table: Some(&table), collisions_inside: &runs, ..Default::default() }
                } else {
                    ReportInputs { table: Some(&table), collisions_outside: &runs, ..Default::default() }
                };
                emit_report(&dir, &inputs)?;
                table
            }
            ExperimentKind::ForceTrajectory => {
                let runs = run_force_trajectory(plant, &tuned, &spec, &sim)?;
                for r in runs.iter().filter(|r| r.repetition == 0) {
                    println!(
                        "trajectory {:>8}: max err {:.3} N, rmse {:.3} N",
                        r.architecture.label(),
                        r.max_force_err,
                        r.rmse_force,
                    );
                }
                let table = trajectory_table(&runs);
                emit_report(
                    &dir,
                    &ReportInputs { table: Some(&table), trajectories: &runs, ..Default::default() },
                )?;
                table
            }
        };
        let toml_text = toml::to_string_pretty(&table)
            .map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(dir.join("table.toml"), toml_text)?;
        println!("artifacts in {}", dir.display());
        merged.merge(table);
    }

    if kind.kinds().len() > 1 {
        let merged_path = global.out.join("comparison.csv");
        std::fs::write(&merged_path, merged.to_csv())?;
        println!("merged table written to {}", merged_path.display());
    }
    Ok(())
}

fn report(global: &GlobalArgs) -> Result<()> {
    let mut merged = ComparisonTable::default();
    let mut found = 0;
    for kind in [
        ExperimentKind::Bandwidth,
        ExperimentKind::CollisionInside,
        ExperimentKind::CollisionOutside,
        ExperimentKind::ForceTrajectory,
    ] {
        let path = global.out.join(kind.label()).join("table.toml");
        if !path.exists() {
            continue;
        }
        let text = std::fs::read_to_string(&path)?;
        let table: ComparisonTable =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        merged.merge(table);
        found += 1;
    }
    if found == 0 {
        return Err(Error::InvalidParameter(format!(
            "no study tables under {}; run `experiment` first",
            global.out.display()
        )));
    }
    let path = global.out.join("comparison.csv");
    std::fs::write(&path, merged.to_csv())?;
    println!("{} studies merged into {}", found, path.display());
    Ok(())
}
