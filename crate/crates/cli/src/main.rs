//! `evgrid`: simulate, fuse, score and export evidential grid maps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use evgrid::calibration::{
    credibility_sweep, format_b, Frame, SweepSpec, SweepTable, DEFAULT_STEP,
};
use evgrid::grid::{self, CellMask, GridMap, LayerCatalog};
use evgrid::metrics::{eiou, eiou_csv, grid_entropy, EiouReport, EntropyReport, FovSector};
use evgrid::scenario::{render_reference, render_sensor, ScenarioSpec, SensorKind, SensorModel};
use evgrid::{CombinationRule, FusionConfig, HypothesisSet};

#[derive(Parser)]
#[command(
    name = "evgrid",
    version,
    about = "Evidential fusion of multi-layer grid maps"
)]
struct Cli {
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a reference or sensor map from a scenario.
    Simulate(SimulateArgs),
    /// Combine two maps cell by cell.
    Fuse(FuseArgs),
    /// Score maps.
    #[command(subcommand)]
    Metrics(MetricsCommand),
    /// Evaluate the ER rule over a lattice of sensor credibilities.
    Sweep(SweepArgs),
    /// Write a map as CSV or PGM images.
    Export(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Sensor {
    Reference,
    Lidar,
    Stereo,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_enum)]
    sensor: Sensor,
    /// Sensor model JSON; required for lidar and stereo.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Dempster,
    Yager,
    Er,
}

impl From<Rule> for CombinationRule {
    fn from(r: Rule) -> Self {
        match r {
            Rule::Dempster => Self::Dempster,
            Rule::Yager => Self::Yager,
            Rule::Er => Self::ErAdaptive,
        }
    }
}

#[derive(Args)]
struct FuseArgs {
    #[arg(long, value_enum)]
    rule: Rule,
    #[arg(long, default_value_t = 1.0)]
    b_first: f64,
    #[arg(long, default_value_t = 1.0)]
    b_second: f64,
    #[arg(long)]
    first: PathBuf,
    #[arg(long)]
    second: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum Format {
    #[default]
    Table,
    Csv,
    Json,
}

#[derive(Subcommand)]
enum MetricsCommand {
    /// Evidential IoU of an estimate against a reference.
    Eiou {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        est: PathBuf,
        /// Comma-joined names, e.g. `c,cy,p,om,nm`; `omega` is the whole
        /// frame. Repeat for several hypotheses.
        #[arg(long, required = true)]
        hypothesis: Vec<String>,
        #[arg(long)]
        fov: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Mean Deng nonspecificity, discord and entropy.
    Entropy {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        fov: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
    /// Directory with one subdirectory per frame holding `first.evgm`,
    /// `second.evgm` and `reference.evgm`.
    #[arg(long)]
    frames: PathBuf,
    #[arg(long, default_value = "c,cy,p,om,nm")]
    hypothesis: String,
    /// Also write the table as CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    Csv,
    Pgm,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    grid: PathBuf,
    #[arg(long, value_enum)]
    format: ExportFormat,
    #[arg(long)]
    out: PathBuf,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load(path: &Path) -> Result<GridMap> {
    grid::load(path).with_context(|| format!("loading {}", path.display()))
}

fn save(g: &GridMap, path: &Path) -> Result<()> {
    grid::save(g, path).with_context(|| format!("writing {}", path.display()))
}

fn load_fov(path: Option<&Path>, g: &GridMap) -> Result<Option<CellMask>> {
    let Some(path) = path else { return Ok(None) };
    let sector: FovSector = serde_json::from_str(&read_text(path)?)
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(Some(sector.mask(g.geometry())?))
}

fn hypothesis(g: &GridMap, text: &str) -> Result<HypothesisSet> {
    g.fod()
        .parse_set(text)
        .with_context(|| format!("hypothesis `{text}`"))
}

fn simulate(args: &SimulateArgs) -> Result<String> {
    let spec = ScenarioSpec::from_json(&read_text(&args.scenario)?)
        .with_context(|| format!("scenario {}", args.scenario.display()))?;
    let map = match args.sensor {
        Sensor::Reference => render_reference(&spec)?,
        Sensor::Lidar | Sensor::Stereo => {
            let Some(path) = &args.model else {
                bail!("--model is required for --sensor lidar and --sensor stereo");
            };
            let model = SensorModel::from_json(&read_text(path)?)
                .with_context(|| format!("model {}", path.display()))?;
            let wanted = match args.sensor {
                Sensor::Lidar => SensorKind::LidarLike,
                _ => SensorKind::StereoLike,
            };
            if model.kind != wanted {
                bail!(
                    "model {} describes a {:?} sensor",
                    path.display(),
                    model.kind
                );
            }
            render_sensor(&spec, &model)?
        }
    };
    save(&map, &args.out)?;
    Ok(format!("wrote {}\n", args.out.display()))
}

fn fuse(args: &FuseArgs) -> Result<String> {
    let first = load(&args.first)?;
    let second = load(&args.second)?;
    let catalog = LayerCatalog::combined(first.catalog(), second.catalog());
    let config = FusionConfig::new(args.rule.into(), catalog)
        .with_credibility(args.b_first, args.b_second)?;
    let fused = evgrid::fuse_grids(&first, &second, &config)?;
    save(&fused, &args.out)?;
    Ok(format!("wrote {}\n", args.out.display()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |v| format!("{v:.6}"))
}

fn eiou_output(reports: &[EiouReport], format: Format) -> String {
    match format {
        Format::Csv => eiou_csv(reports),
        Format::Json => serde_json::to_string_pretty(reports).expect("reports serialize") + "\n",
        Format::Table => {
            let width = reports
                .iter()
                .map(|r| r.hypothesis.len())
                .max()
                .unwrap_or(0)
                .max(10);
            let mut out = format!(
                "{:<width$}  {:>10}  {:>10}  {:>10}  {:>10}\n",
                "hypothesis", "eTP", "eFP", "eFN", "eIoU"
            );
            for r in reports {
                let _ = writeln!(
                    out,
                    "{:<width$}  {:>10.6}  {:>10.6}  {:>10.6}  {:>10}",
                    r.hypothesis,
                    r.etp,
                    r.efp,
                    r.efn,
                    fmt_opt(r.eiou)
                );
            }
            out
        }
    }
}

fn entropy_output(r: &EntropyReport, format: Format) -> String {
    match format {
        Format::Csv => format!("{}\n{}\n", EntropyReport::CSV_HEADER, r.csv_row()),
        Format::Json => serde_json::to_string_pretty(r).expect("report serializes") + "\n",
        Format::Table => format!(
            "cells           {}\nnonspecificity  {:.6}\ndiscord         {:.6}\nentropy         {:.6}\n",
            r.cells, r.nonspecificity, r.discord, r.entropy
        ),
    }
}

fn metrics(cmd: &MetricsCommand) -> Result<String> {
    match cmd {
        MetricsCommand::Eiou {
            reference,
            est,
            hypothesis: sets,
            fov,
            format,
        } => {
            let r = load(reference)?;
            let e = load(est)?;
            let mask = load_fov(fov.as_deref(), &r)?;
            let reports = sets
                .iter()
                .map(|h| Ok(eiou(&r, &e, hypothesis(&r, h)?, mask.as_ref())?))
                .collect::<Result<Vec<_>>>()?;
            Ok(eiou_output(&reports, *format))
        }
        MetricsCommand::Entropy {
            grid: path,
            fov,
            format,
        } => {
            let g = load(path)?;
            let mask = load_fov(fov.as_deref(), &g)?;
            Ok(entropy_output(&grid_entropy(&g, mask.as_ref())?, *format))
        }
    }
}

fn load_frames(dir: &Path) -> Result<Vec<Frame>> {
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    if subdirs.is_empty() {
        bail!("{} contains no frame directories", dir.display());
    }
    subdirs
        .iter()
        .map(|d| {
            Ok(Frame {
                first: load(&d.join("first.evgm"))?,
                second: load(&d.join("second.evgm"))?,
                reference: load(&d.join("reference.evgm"))?,
            })
        })
        .collect()
}

fn sweep_table(t: &SweepTable) -> String {
    let mut out = format!(
        "eIoU({}) by b_first (rows) and b_second (columns)\n",
        t.hypothesis
    );
    let _ = write!(out, "{:>8}", "");
    for b in &t.b_values {
        let _ = write!(out, " {:>9}", format_b(*b));
    }
    out.push('\n');
    for (b, row) in t.b_values.iter().zip(&t.eiou) {
        let _ = write!(out, "{:>8}", format_b(*b));
        for v in row {
            let _ = write!(
                out,
                " {:>9}",
                v.map_or_else(|| "-".into(), |v| format!("{v:.6}"))
            );
        }
        out.push('\n');
    }
    match &t.best {
        Some(b) => {
            let _ = writeln!(
                out,
                "best: b_first {} b_second {} eIoU {:.6}",
                format_b(b.b_first),
                format_b(b.b_second),
                b.eiou
            );
        }
        None => out.push_str("best: undefined\n"),
    }
    let _ = writeln!(out, "dempster: {}", fmt_opt(t.dempster));
    out
}

fn sweep(args: &SweepArgs) -> Result<String> {
    let frames = load_frames(&args.frames)?;
    let target = hypothesis(&frames[0].reference, &args.hypothesis)?;
    let spec = SweepSpec::new(frames)
        .with_step(args.step)
        .with_target(target);
    let table = credibility_sweep(&spec)?;
    if let Some(out) = &args.out {
        fs::write(out, table.to_csv()).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(match args.format {
        Format::Table => sweep_table(&table),
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json() + "\n",
    })
}

fn export(args: &ExportArgs) -> Result<String> {
    let g = load(&args.grid)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let paths = match args.format {
        ExportFormat::Csv => vec![grid::export_csv(&g, &args.out)?],
        ExportFormat::Pgm => grid::export_pgm(&g, &args.out, None)?,
    };
    Ok(paths
        .iter()
        .map(|p| format!("wrote {}\n", p.display()))
        .collect())
}

fn run(cli: &Cli) -> Result<String> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .context("configuring worker threads")?;
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fuse(a) => fuse(a),
        Command::Metrics(m) => metrics(m),
        Command::Sweep(a) => sweep(a),
        Command::Export(a) => export(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
