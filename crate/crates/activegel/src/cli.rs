//! Command-line surface: thin delegation onto the library with
//! deterministic file outputs and a manifest per run.  Exit codes:
//! 0 success, 1 error, 2 hypothesis failure.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bifurcation::{
    self, find_bifurcation_radius, mass_vs_velocity, tw_expand_with, tw_fields_extrapolated,
    ClosureKind,
};
use crate::config::{InitKind, SimConfig};
use crate::geometry::{BoundaryShape, ModelParams, PolarField};
use crate::grid::{AngularGrid, RadialGrid};
use crate::presets;
use crate::report::{self, Manifest};
use crate::simulator::{self, init_state, RunConfig, SimGrids, Simulator};
use crate::stability::{classify, full_spectrum, radial_steady_state};
use crate::verify;

#[derive(Parser)]
#[command(
    name = "activegel",
    version,
    about = "Free-boundary active-gel toolkit: steady states, spectra, traveling waves, simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file (flat key-path text).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Output format for field/shape artifacts.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Independent-sample parallelism for sweeps (reserved; samples are
    /// cheap enough to run serially at desk scale).
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Restrict `verify` to the fast tier.
    #[arg(long, global = true, default_value_t = false)]
    quick: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    p_h: Option<f64>,
    #[arg(long)]
    k_e: Option<f64>,
    #[arg(long, short = 'R')]
    radius: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Radial steady state and its stability classification.
    Steady(ParamArgs),
    /// Union spectrum of the linearized operator, mode by mode.
    Spectrum {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 6)]
        n_max: usize,
        #[arg(long, default_value_t = 128)]
        n_r: usize,
    },
    /// Bifurcation radius from F(R) with the dual-criterion cross-check.
    Bifurcate {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        r_lo: Option<f64>,
        #[arg(long)]
        r_hi: Option<f64>,
    },
    /// Traveling-wave expansion fields at the preset (or configured)
    /// velocities.
    Tw {
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, value_delimiter = ',')]
        velocities: Vec<f64>,
    },
    /// Mass-velocity diagram along the wave branch (both closures).
    Massvel {
        #[arg(long)]
        preset: Option<String>,
    },
    /// Nonlinear free-boundary simulation from a config file.
    Simulate,
    /// Run the verification suite and write a summary table.
    Verify,
}

fn load_config(path: &Option<PathBuf>) -> anyhow::Result<SimConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            Ok(SimConfig::parse(&text)?)
        }
        None => Ok(SimConfig::default()),
    }
}

fn params_from(cfg: &SimConfig, args: &ParamArgs) -> (ModelParams, f64) {
    let mut p = cfg.params;
    if let Some(z) = args.zeta {
        p.zeta = z;
    }
    if let Some(g) = args.gamma {
        p.gamma = g;
    }
    if let Some(ph) = args.p_h {
        p.p_h = ph;
    }
    if let Some(ke) = args.k_e {
        p.k_e = ke;
    }
    (p, args.radius.unwrap_or(cfg.radius))
}

/// Runs the CLI; returns the process exit code.
pub fn main_with(cli: Cli) -> anyhow::Result<i32> {
    let cfg = load_config(&cli.config)?;
    let out = cli.out.clone();
    match &cli.command {
        Command::Steady(args) => {
            let (params, radius) = params_from(&cfg, args);
            let report = classify(radius, &params)?;
            let steady = radial_steady_state(radius, &params)?;
            let payload = serde_json::json!({
                "steady": steady,
                "classification": report.classification,
                "phi1_derivative": report.phi1_derivative,
                "hypotheses": report.hypotheses,
                "residual": steady.residual(),
            });
            let text = serde_json::to_string_pretty(&payload)?;
            println!("{text}");
            write_with_manifest(&out, &cfg, "steady", &[("steady.json", "json", text)])?;
            if !report.all_hypotheses_pass() {
                let failed: Vec<&str> = report
                    .hypotheses
                    .iter()
                    .filter(|h| !h.pass)
                    .map(|h| h.name)
                    .collect();
                eprintln!("hypothesis failure: {}", failed.join(", "));
                return Ok(2);
            }
            Ok(0)
        }
        Command::Spectrum { params, n_max, n_r } => {
            let (p, radius) = params_from(&cfg, params);
            let steady = radial_steady_state(radius, &p)?;
            let grid = RadialGrid::new(*n_r, radius)?;
            let spectrum = full_spectrum(&steady, *n_max, &grid)?;
            let csv = spectrum.to_csv();
            let summary = serde_json::json!({
                "zero_multiplicity": spectrum.zero_multiplicity,
                "zero_tol": spectrum.zero_tol,
                "max_nonzero_re": spectrum.max_nonzero_re(),
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
            write_with_manifest(
                &out,
                &cfg,
                "spectrum",
                &[
                    ("spectrum.csv", "csv", csv),
                    ("spectrum.json", "json", serde_json::to_string_pretty(&summary)?),
                ],
            )?;
            Ok(0)
        }
        Command::Bifurcate { params, r_lo, r_hi } => {
            let (p, radius) = params_from(&cfg, params);
            let lo = r_lo.unwrap_or(0.5 * radius);
            let hi = r_hi.unwrap_or(2.0 * radius);
            let bp = find_bifurcation_radius(&p, lo, hi)?;
            let phi1_root = crate::stability::critical_radius_phi1(&p, lo, hi)?;
            let payload = serde_json::json!({
                "r0": bp.r0,
                "f_prime": bp.f_prime,
                "degenerate_transversality": bp.degenerate_transversality,
                "phi1_criterion_root": phi1_root,
                "dual_criterion_gap": (bp.r0 - phi1_root).abs(),
            });
            let text = serde_json::to_string_pretty(&payload)?;
            println!("{text}");
            write_with_manifest(&out, &cfg, "bifurcate", &[("bifurcation.json", "json", text)])?;
            Ok(0)
        }
        Command::Tw { preset, velocities } => {
            let preset = presets::by_name(preset.as_deref().unwrap_or("fig1"))?;
            let vels = if velocities.is_empty() { preset.velocities.clone() } else { velocities.clone() };
            let tw = tw_expand_with(preset.r0, &preset.params, 512, preset.closure)?;
            let grid = RadialGrid::new(64, preset.r0)?;
            let ang = AngularGrid::new(128)?;
            let mut files = Vec::new();
            for &v in &vels {
                let (shape, m) = tw_fields_extrapolated(&tw, v, &grid, &ang)?;
                let tag = format!("{}", (v * 1000.0).round() as i64);
                match cli.format {
                    Format::Csv => {
                        files.push((
                            format!("tw_v{tag}_field.csv"),
                            "csv".to_string(),
                            m.to_csv(&grid, &ang),
                        ));
                        files.push((
                            format!("tw_v{tag}_shape.json"),
                            "json".to_string(),
                            shape.to_json(),
                        ));
                    }
                    Format::Json => {
                        files.push((
                            format!("tw_v{tag}_shape.json"),
                            "json".to_string(),
                            shape.to_json(),
                        ));
                    }
                    Format::Svg => {
                        let svg = report::svg_shape_field(
                            &shape,
                            &m,
                            &grid,
                            &ang,
                            &format!("{} V={v}", preset.name),
                        )?;
                        files.push((format!("tw_v{tag}.svg"), "svg".to_string(), svg));
                    }
                }
            }
            let file_refs: Vec<(&str, &str, String)> = files
                .iter()
                .map(|(n, k, c)| (n.as_str(), k.as_str(), c.clone()))
                .collect();
            write_with_manifest(&out, &cfg, "tw", &file_refs)?;
            println!("wrote {} files to {}", files.len(), out.display());
            Ok(0)
        }
        Command::Massvel { preset } => {
            let preset = presets::by_name(preset.as_deref().unwrap_or("fig2"))?;
            let mut files = Vec::new();
            for (closure, label) in [
                (ClosureKind::MassConsistency, "massclosure"),
                (ClosureKind::SolvabilityV3, "solvability"),
            ] {
                let tw = tw_expand_with(preset.r0, &preset.params, 512, closure)?;
                let vmax = tw.valid_v;
                let vs: Vec<f64> = (0..=24).map(|i| vmax * i as f64 / 24.0).collect();
                let curve = mass_vs_velocity(&tw, &vs)?;
                files.push((format!("massvel_{label}.csv"), "csv".to_string(), curve.to_csv()));
            }
            let file_refs: Vec<(&str, &str, String)> = files
                .iter()
                .map(|(n, k, c)| (n.as_str(), k.as_str(), c.clone()))
                .collect();
            write_with_manifest(&out, &cfg, "massvel", &file_refs)?;
            println!("wrote {} curves to {}", files.len(), out.display());
            Ok(0)
        }
        Command::Simulate => {
            let code = cmd_simulate(&cfg, &out)?;
            Ok(code)
        }
        Command::Verify => {
            let results = if cli.quick { verify::run_quick() } else { verify::run_all() };
            let mut all_pass = true;
            let mut table = String::new();
            for r in &results {
                let line = r.line();
                println!("{line}");
                table.push_str(&line);
                table.push('\n');
                all_pass &= r.passed;
            }
            report::write_file(&out, "verify.txt", &table)?;
            let json = serde_json::to_string_pretty(&results)?;
            report::write_file(&out, "verify.json", &json)?;
            Ok(if all_pass { 0 } else { 1 })
        }
    }
}

fn cmd_simulate(cfg: &SimConfig, out: &Path) -> anyhow::Result<i32> {
    let grids = SimGrids::new(cfg.n_r, cfg.n_phi, cfg.radius)?;
    let steady = radial_steady_state(cfg.radius, &cfg.params)?;
    let (shape, m) = match cfg.init_kind {
        InitKind::Steady => (
            BoundaryShape::circle(cfg.radius),
            PolarField::constant(cfg.n_r, cfg.n_phi, steady.m0),
        ),
        InitKind::Perturbed => {
            let mut coeffs = vec![0.0; cfg.mode + 1];
            coeffs[cfg.mode] = cfg.amplitude;
            let shape = BoundaryShape {
                base_radius: cfg.radius,
                cosine_coefficients: coeffs,
                center_x: 0.0,
            };
            let mode = cfg.mode;
            let amp = cfg.amplitude;
            let radius = cfg.radius;
            let m0 = steady.m0;
            let m = PolarField::from_fn(&grids.radial, &grids.angular, |r, phi| {
                let s = r / radius;
                m0 * (1.0 + amp * s * s * (3.0 - 2.0 * s) * (mode as f64 * phi).cos())
            });
            (shape, m)
        }
        InitKind::TwSeed => {
            let (params_pin, r0) = presets::pinned_params(
                steady.m0.min(0.99 * cfg.params.zeta),
                cfg.params.zeta,
                cfg.params.gamma,
                cfg.params.k_e,
            )?;
            let _ = params_pin;
            let tw = tw_expand_with(r0, &cfg.params, 384, ClosureKind::MassConsistency)
                .or_else(|_| {
                    bifurcation::tw_expand_with(
                        r0,
                        &cfg.params,
                        384,
                        ClosureKind::SolvabilityV3,
                    )
                })?;
            let grids_tw = SimGrids::new(cfg.n_r, cfg.n_phi, r0)?;
            let (shape, m) =
                tw_fields_extrapolated(&tw, cfg.velocity, &grids_tw.radial, &grids_tw.angular)?;
            (shape, m)
        }
    };
    // the TW seed re-bases the grids on its own radius
    let base_radius = shape.base_radius;
    let grids = SimGrids::new(cfg.n_r, cfg.n_phi, base_radius)?;
    let (state, smoothed) = init_state(&shape, &m, &cfg.params, &grids)?;
    let mut sim = Simulator::new(state, grids)?;
    let run_cfg = RunConfig {
        dt: cfg.dt,
        t_end: cfg.t_end,
        sample_every: cfg.sample_every,
        tol_converge: cfg.tol_converge,
        blowup_tol: cfg.blowup_tol,
        m_ref: steady.m0,
    };
    let traj = simulator::run(&mut sim, &run_cfg);
    let outcome = format!("{:?}", traj.outcome);
    let mut manifest = Manifest::new("simulate", &cfg.config_hash());
    report::write_file(out, "trajectory.csv", &traj.to_csv())?;
    manifest.push("trajectory.csv", "csv");
    let final_field = sim.state.myosin.to_csv(&sim.grids.radial, &sim.grids.angular);
    report::write_file(out, "final_myosin.csv", &final_field)?;
    manifest.push("final_myosin.csv", "csv");
    report::write_file(out, "final_shape.json", &sim.state.shape.to_json())?;
    manifest.push("final_shape.json", "json");
    let summary = serde_json::json!({
        "outcome": outcome,
        "smoothed_init": smoothed,
        "final_time": sim.state.time,
        "final_mass": sim.total_mass(),
        "samples": traj.times.len(),
    });
    report::write_file(out, "summary.json", &serde_json::to_string_pretty(&summary)?)?;
    manifest.push("summary.json", "json");
    manifest.write(out)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    let failed = matches!(traj.outcome, simulator::RunOutcome::Failed(_));
    Ok(if failed { 1 } else { 0 })
}

fn write_with_manifest(
    out: &Path,
    cfg: &SimConfig,
    command: &str,
    files: &[(&str, &str, String)],
) -> anyhow::Result<()> {
    let mut manifest = Manifest::new(command, &cfg.config_hash());
    for (name, kind, contents) in files {
        report::write_file(out, name, contents)?;
        manifest.push(name, kind);
    }
    manifest.write(out)?;
    Ok(())
}
