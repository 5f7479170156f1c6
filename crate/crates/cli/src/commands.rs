use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pfloc_core::sim::{default_ap_positions, load_scenario, run_trial_detailed, DEFAULT_GRID_SPACING};
use pfloc_core::{
    generate_synthetic_map, grid_posterior, load_map, posterior_mean, run_batch, save_map, BatchSummary, Point2,
    RadioModel, ScenarioConfig,
};

use crate::export;
use crate::svg::{self, PlotData};

/// WiFi RSS particle-filter localization experiments.
#[derive(Debug, Parser)]
#[command(name = "pfloc", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a fingerprint map on a regular landmark grid.
    GenMap(GenMapArgs),
    /// Run repeated stationary-robot trials and write per-trial results.
    Run(RunArgs),
    /// Compute the grid Bayes posterior for one noiseless observation.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Area {
    pub length: f64,
    pub width: f64,
}

impl FromStr for Area {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (l, w) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected LxW, got `{s}`"))?;
        let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("bad area `{s}`: {e}"));
        Ok(Area {
            length: parse(l)?,
            width: parse(w)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XY(pub Point2);

impl FromStr for XY {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (x, y) = s.split_once(',').ok_or_else(|| format!("expected X,Y, got `{s}`"))?;
        let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("bad coordinate in `{s}`: {e}"));
        let p = Point2::new(parse(x)?, parse(y)?);
        if !p.is_finite() {
            return Err(format!("coordinates must be finite, got `{s}`"));
        }
        Ok(XY(p))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApList(pub Vec<Point2>);

impl FromStr for ApList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let aps = s
            .split(';')
            .filter(|part| !part.trim().is_empty())
            .map(|part| part.parse::<XY>().map(|xy| xy.0))
            .collect::<Result<Vec<_>, _>>()?;
        if aps.is_empty() {
            return Err("at least one access point is required".into());
        }
        Ok(ApList(aps))
    }
}

#[derive(Debug, Clone, Args, Default)]
pub struct RadioArgs {
    /// Access point positions as "x,y;x,y;...". Defaults to the four corners
    /// plus the center of the area.
    #[arg(long)]
    pub aps: Option<ApList>,
    /// Reference power at d0, dBm [default: -40]
    #[arg(long, allow_hyphen_values = true)]
    pub p0: Option<f64>,
    /// Path-loss exponent [default: 2.2]
    #[arg(long)]
    pub exponent: Option<f64>,
    /// Reference distance, meters [default: 1]
    #[arg(long)]
    pub d0: Option<f64>,
}

impl RadioArgs {
    fn is_set(&self) -> bool {
        self.aps.is_some() || self.p0.is_some() || self.exponent.is_some() || self.d0.is_some()
    }

    fn apply(&self, base: RadioModel) -> RadioModel {
        RadioModel {
            p0: self.p0.unwrap_or(base.p0),
            d0: self.d0.unwrap_or(base.d0),
            path_loss_exponent: self.exponent.unwrap_or(base.path_loss_exponent),
            ..base
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenMapArgs {
    /// Area as LENGTHxWIDTH in meters.
    #[arg(long, default_value = "10x10")]
    pub area: Area,
    /// Landmark grid spacing, meters.
    #[arg(long, default_value_t = DEFAULT_GRID_SPACING)]
    pub spacing: f64,
    #[command(flatten)]
    pub radio: RadioArgs,
    /// Accepted for a uniform flag set; stored fingerprints are noiseless, so
    /// the map does not depend on it.
    #[arg(long, env = "PFLOC_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output map JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Scenario JSON used as the base configuration; other flags override it.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Fingerprint map JSON. Defaults to the built-in 10x10 m synthetic map.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// True robot position as X,Y [default: 2.4,3.6]
    #[arg(long)]
    pub robot: Option<XY>,
    /// Number of particles [default: 1000]
    #[arg(long)]
    pub particles: Option<usize>,
    /// Filter steps per trial [default: 50]
    #[arg(long)]
    pub iters: Option<usize>,
    /// Number of trials [default: 10]
    #[arg(long)]
    pub trials: Option<usize>,
    /// Likelihood sigma, dBm [default: 4]
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Uniform position jitter half-width, meters [default: 0.05]
    #[arg(long)]
    pub jitter: Option<f64>,
    /// Resample when ESS <= N_p * fraction [default: 0.5]
    #[arg(long)]
    pub resample_fraction: Option<f64>,
    /// Observation noise sigma, dBm [default: 0]
    #[arg(long)]
    pub noise: Option<f64>,
    /// Base seed; trial i uses seed + i [default: 0]
    #[arg(long, env = "PFLOC_SEED")]
    pub seed: Option<u64>,
    /// Draw one observation per trial and reuse it every step.
    #[arg(long)]
    pub fixed_observation: bool,
    #[command(flatten)]
    pub radio: RadioArgs,
    /// Results CSV. With --table1, one file per particle count is written
    /// next to it with an `_np<N>` suffix.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional SVG scatter plot of the first trial's final particles and
    /// every trial's estimate.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Run N_p = 300 and N_p = 1000 batches and print them side by side.
    #[arg(long)]
    pub table1: bool,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    /// Fingerprint map JSON. Defaults to the built-in 10x10 m synthetic map.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// True robot position as X,Y.
    #[arg(long, default_value = "2.4,3.6")]
    pub robot: XY,
    /// Likelihood sigma, dBm.
    #[arg(long, default_value_t = 4.0)]
    pub sigma: f64,
    /// Grid cell size, meters.
    #[arg(long, default_value_t = 0.1)]
    pub cell: f64,
    #[command(flatten)]
    pub radio: RadioArgs,
    /// Posterior CSV.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenMap(args) => cmd_gen_map(&args),
        Command::Run(args) => cmd_run(&args),
        Command::Oracle(args) => cmd_oracle(&args),
    }
}

pub fn cmd_gen_map(args: &GenMapArgs) -> Result<()> {
    let radio = args.radio.apply(RadioModel::default());
    let aps = match &args.radio.aps {
        Some(a) => a.0.clone(),
        None => default_ap_positions(args.area.length, args.area.width),
    };
    let map = generate_synthetic_map(args.area.length, args.area.width, &aps, args.spacing, &radio)?;
    save_map(&map, &args.out)?;
    println!(
        "wrote {} landmarks x {} access points to {}",
        map.landmarks().len(),
        map.ap_count(),
        args.out.display()
    );
    Ok(())
}

/// Resolves the flags of `run` into a scenario: scenario file (or the
/// built-in default), then map, radio and filter overrides.
pub fn resolve_scenario(args: &RunArgs) -> Result<ScenarioConfig> {
    let mut s = match &args.scenario {
        Some(path) => load_scenario(path)?,
        None => ScenarioConfig::default_with_particles(pfloc_core::FilterConfig::default().n_particles),
    };
    s.radio = args.radio.apply(s.radio);
    if let Some(aps) = &args.radio.aps {
        s.ap_positions = aps.0.clone();
    }
    if let Some(path) = &args.map {
        s.map = load_map(path).with_context(|| format!("loading map {}", path.display()))?;
        if args.radio.aps.is_none() && args.scenario.is_none() {
            s.ap_positions = default_ap_positions(s.map.area_length(), s.map.area_width());
        }
    } else if args.scenario.is_none() && args.radio.is_set() {
        s.map = generate_synthetic_map(
            s.map.area_length(),
            s.map.area_width(),
            &s.ap_positions,
            DEFAULT_GRID_SPACING,
            &s.radio,
        )?;
    }
    if let Some(XY(p)) = args.robot {
        s.robot_position = p;
    }
    if let Some(n) = args.particles {
        s.filter.n_particles = n;
    }
    if let Some(i) = args.iters {
        s.iterations = i;
    }
    if let Some(t) = args.trials {
        s.trials = t;
    }
    if let Some(v) = args.sigma {
        s.filter.sigma = v;
    }
    if let Some(v) = args.jitter {
        s.filter.jitter = v;
    }
    if let Some(v) = args.resample_fraction {
        s.filter.resample_fraction = v;
    }
    if let Some(v) = args.noise {
        s.observation_noise_sigma = v;
    }
    if let Some(v) = args.seed {
        s.filter.seed = v;
    }
    if args.fixed_observation {
        s.fixed_observation = true;
    }
    s.validate()?;
    Ok(s)
}

pub fn summary_line(summary: &BatchSummary) -> String {
    format!(
        "mean_error_m={:.4} min={:.4} max={:.4} trials={} failures={}",
        summary.mean_error_m,
        summary.min_error_m,
        summary.max_error_m,
        summary.results.len() + summary.failures.len(),
        summary.failures.len()
    )
}

fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    write(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}{suffix}"),
    };
    path.with_file_name(name)
}

fn execute(scenario: &ScenarioConfig, out: &Path, plot: Option<&Path>) -> Result<BatchSummary> {
    let summary = run_batch(scenario)?;
    for f in &summary.failures {
        eprintln!("warning: {f}");
    }
    write_file(out, |w| export::write_results(w, &summary))?;
    if let Some(plot_path) = plot {
        let first = run_trial_detailed(scenario, 0, scenario.trial_seed(0))
            .map_err(|f| anyhow::anyhow!("plot trial: {f}"))?;
        let particles: Vec<Point2> = first.particles.positions().collect();
        let estimates: Vec<Point2> = summary.results.iter().map(|r| r.estimate).collect();
        let title = format!(
            "N_p={} iterations={} mean error {:.4} m",
            scenario.filter.n_particles, scenario.iterations, summary.mean_error_m
        );
        let svg = svg::render(&PlotData {
            map: &scenario.map,
            particles: &particles,
            truth: scenario.robot_position,
            estimates: &estimates,
            title: &title,
        });
        fs::write(plot_path, svg).with_context(|| format!("writing {}", plot_path.display()))?;
    }
    Ok(summary)
}

fn fmt_row(r: Option<&pfloc_core::TrialResult>) -> String {
    match r {
        Some(r) => format!("({:.4}, {:.4})  {:>7.4}", r.estimate.x, r.estimate.y, r.error_m),
        None => format!("{:<18}  {:>7}", "failed", "-"),
    }
}

pub fn cmd_run(args: &RunArgs) -> Result<()> {
    let scenario = resolve_scenario(args)?;
    if !args.table1 {
        let summary = execute(&scenario, &args.out, args.plot.as_deref())?;
        println!("{}", summary_line(&summary));
        return Ok(());
    }

    let mut columns = Vec::new();
    for n in [300usize, 1000] {
        let mut s = scenario.clone();
        s.filter.n_particles = n;
        let suffix = format!("_np{n}");
        let out = with_suffix(&args.out, &suffix);
        let plot = args.plot.as_deref().map(|p| with_suffix(p, &suffix));
        let summary = execute(&s, &out, plot.as_deref())?;
        columns.push((n, summary));
    }
    println!("{:<6}{:<28}{:<28}", "N_p", columns[0].0, columns[1].0);
    println!("{:<6}{:<28}{:<28}", "trial", "estimated position  error", "estimated position  error");
    for t in 0..scenario.trials {
        let cell = |c: &BatchSummary| fmt_row(c.results.iter().find(|r| r.trial_index == t));
        println!("{:<6}{:<28}{:<28}", t + 1, cell(&columns[0].1), cell(&columns[1].1));
    }
    println!(
        "{:<6}{:<28}{:<28}",
        "mean",
        format!("{:>27.4}", columns[0].1.mean_error_m),
        format!("{:>27.4}", columns[1].1.mean_error_m)
    );
    for (n, summary) in &columns {
        println!("np={n} {}", summary_line(summary));
    }
    Ok(())
}

pub fn cmd_oracle(args: &OracleArgs) -> Result<()> {
    let mut radio = args.radio.apply(RadioModel::default());
    radio.shadowing_sigma = 0.0;
    let (map, aps) = match &args.map {
        Some(path) => {
            let map = load_map(path).with_context(|| format!("loading map {}", path.display()))?;
            let aps = match &args.radio.aps {
                Some(a) => a.0.clone(),
                None => default_ap_positions(map.area_length(), map.area_width()),
            };
            (map, aps)
        }
        None => {
            let aps = match &args.radio.aps {
                Some(a) => a.0.clone(),
                None => default_ap_positions(10.0, 10.0),
            };
            (generate_synthetic_map(10.0, 10.0, &aps, DEFAULT_GRID_SPACING, &radio)?, aps)
        }
    };
    if aps.len() != map.ap_count() {
        bail!(
            "{} AP positions but the map has {} access points; pass --aps",
            aps.len(),
            map.ap_count()
        );
    }
    let observed = radio.fingerprint(&aps, args.robot.0);
    let g = grid_posterior(&map, &observed, args.sigma, args.cell)?;
    write_file(&args.out, |w| export::write_posterior(w, &g))?;
    let m = posterior_mean(&g);
    println!("posterior_mean_x_m={:.4} posterior_mean_y_m={:.4} cells={}", m.x, m.y, g.nx * g.ny);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flag_values() {
        assert_eq!("10x7.5".parse::<Area>().unwrap(), Area { length: 10.0, width: 7.5 });
        assert!("10by7".parse::<Area>().is_err());
        assert_eq!("2.4,3.6".parse::<XY>().unwrap().0, Point2::new(2.4, 3.6));
        assert!("2.4".parse::<XY>().is_err());
        assert!("nan,1".parse::<XY>().is_err());
        let aps = "0,0;10,0; 5,5;".parse::<ApList>().unwrap();
        assert_eq!(aps.0.len(), 3);
        assert!("".parse::<ApList>().is_err());
    }

    #[test]
    fn suffix_keeps_extension() {
        assert_eq!(with_suffix(Path::new("out/r.csv"), "_np300"), PathBuf::from("out/r_np300.csv"));
        assert_eq!(with_suffix(Path::new("r"), "_x"), PathBuf::from("r_x"));
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn default_resolution_matches_builtin_scenario() {
        let cli = Cli::try_parse_from(["pfloc", "run", "--out", "x.csv"]).unwrap();
        let Command::Run(args) = cli.command else { panic!() };
        let s = resolve_scenario(&args).unwrap();
        let d = ScenarioConfig::default_with_particles(1000);
        assert_eq!(s.map, d.map);
        assert_eq!(s.filter.n_particles, 1000);
        assert_eq!(s.robot_position, Point2::new(2.4, 3.6));
    }
}
