use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hodograph_cli::acceptance;
use hodograph_cli::config::{Format, MapSource, Ray, Regime, RunConfig, SideChoice, WindowConfig};
use hodograph_cli::{run, CliError, Command};

/// Hodograph-method analysis of vorticity blowups for the homogeneous Euler equation.
///
/// Exit codes: 0 ok, 1 runtime error, 2 configuration error, 3 empty result,
/// 4 no blowup, 5 failed --check assertions.
#[derive(Parser)]
#[command(name = "hodograph", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    global: Global,
}

#[derive(Args)]
struct Global {
    /// Map: NAME[:key=value,...] or a .json definition [default: cubic].
    /// Names: zero, linear(beta, dim), isotropic(dim), jordan(c, a, b), rotational(alpha),
    /// harmonic(W = expression or preset quadratic|cubic|expcos), cubic, gaussian(branch), analytic2d(F)
    #[arg(long, global = true)]
    map: Option<String>,
    /// JSON run configuration; flags override its fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: .]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads [default: available cores]
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Run the reference assertions for this map; exit 5 on violation
    #[arg(long, global = true)]
    check: bool,
    /// Seed for random point sampling [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Samples per axis, e.g. 400x400 or 200 [default depends on subcommand]
    #[arg(long, global = true)]
    grid: Option<String>,
    /// Box per axis as lo:hi,lo:hi [default: the map's own box; field uses -2:2]
    #[arg(long = "box", global = true, allow_hyphen_values = true)]
    bounds: Option<String>,
    /// Point u (or x for field) as comma-separated coordinates; repeatable
    #[arg(long = "point", global = true, allow_hyphen_values = true)]
    points: Vec<String>,
    /// Comma-separated times (vorticity snapshots, field grids) [field default: 0]
    #[arg(long, global = true, allow_hyphen_values = true)]
    times: Option<String>,
    /// Time series range lo:hi [default: 0:10]
    #[arg(long, global = true, allow_hyphen_values = true)]
    t_range: Option<String>,
    /// Time series samples [default: 201]
    #[arg(long, global = true)]
    t_steps: Option<usize>,
    /// Relative tolerance for the Δ = 0 label [default: 1e-10]
    #[arg(long, global = true)]
    tol_disc: Option<f64>,
    /// Approach regime for exponent fits [default: temporal]
    #[arg(long, global = true, value_enum)]
    regime: Option<Regime>,
    /// Spatial ray [default: singular]
    #[arg(long, global = true, value_enum)]
    ray: Option<Ray>,
    /// Fit window min:max:n (relative for temporal, absolute for spatial)
    #[arg(long, global = true)]
    window: Option<String>,
    /// Approach side for temporal and Laurent fits [default: every clean side]
    #[arg(long, global = true, value_enum)]
    side: Option<SideChoice>,
    /// Number of random blowup points [exponent: 20 temporal, 10 spatial; frame: 10]
    #[arg(long, global = true)]
    random: Option<usize>,
    /// Number of double-root locus points for temporal fits
    #[arg(long, global = true)]
    locus: Option<usize>,
    /// Scan for second-level (cusp) candidates
    #[arg(long, global = true)]
    scan: bool,
    /// Fit a Laurent expansion (at the first point, else at the catastrophe)
    #[arg(long, global = true)]
    laurent: bool,
    /// Solve every field cell from a cold start
    #[arg(long, global = true)]
    no_continuation: bool,
    /// Field output format [default: csv]
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Add a finite-difference curl column to 2D field output
    #[arg(long, global = true)]
    fd_curl: bool,
    /// Catastrophe grid samples per axis [default: 200 in 2D, 50 in 3D]
    #[arg(long, global = true)]
    search_grid: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Blowup times over a u-grid, domain labels and the double-root locus
    Surface,
    /// Earliest positive blowup time (gradient catastrophe)
    Catastrophe,
    /// Vorticity time series, snapshots and Laurent fits
    Vorticity,
    /// Temporal or spatial blowup exponents
    Exponent,
    /// Velocity field on an x-grid at given times
    Field,
    /// Adapted frames at blowup points
    Frame,
    /// Run the acceptance criteria and print one line per criterion
    Acceptance {
        /// Run only these criteria (1-8), comma-separated
        #[arg(long)]
        only: Option<String>,
    },
}

fn floats(s: &str, sep: char, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(sep)
        .map(|p| p.trim().parse::<f64>().map_err(|_| CliError::Config(format!("{what}: `{p}` is not a number"))))
        .collect()
}

fn pair(s: &str, what: &str) -> Result<[f64; 2], CliError> {
    match floats(s, ':', what)?.as_slice() {
        [a, b] => Ok([*a, *b]),
        _ => Err(CliError::Config(format!("{what}: expected lo:hi, got `{s}`"))),
    }
}

fn build_config(g: &Global) -> Result<RunConfig, CliError> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = &g.map {
        cfg.map = Some(MapSource::Short(m.clone()));
    }
    cfg.out = g.out.clone().or(cfg.out);
    cfg.workers = g.workers.or(cfg.workers);
    cfg.check |= g.check;
    cfg.seed = g.seed.or(cfg.seed);
    if let Some(s) = &g.grid {
        let counts = s
            .split('x')
            .map(|p| p.trim().parse::<usize>().map_err(|_| CliError::Config(format!("grid: `{p}` is not a count"))))
            .collect::<Result<_, _>>()?;
        cfg.grid = Some(counts);
    }
    if let Some(s) = &g.bounds {
        cfg.bounds = Some(s.split(',').map(|p| pair(p, "box")).collect::<Result<_, _>>()?);
    }
    if !g.points.is_empty() {
        cfg.points = g.points.iter().map(|p| floats(p, ',', "point")).collect::<Result<_, _>>()?;
    }
    if let Some(s) = &g.times {
        cfg.times = floats(s, ',', "times")?;
    }
    if let Some(s) = &g.t_range {
        cfg.t_range = Some(pair(s, "t-range")?);
    }
    cfg.t_steps = g.t_steps.or(cfg.t_steps);
    cfg.tol_disc = g.tol_disc.or(cfg.tol_disc);
    cfg.regime = g.regime.unwrap_or(cfg.regime);
    cfg.ray = g.ray.unwrap_or(cfg.ray);
    if g.window.is_some() || g.side.is_some() {
        let mut w = cfg.window.take().unwrap_or_default();
        if let Some(s) = &g.window {
            let parts: Vec<&str> = s.split(':').collect();
            if parts.len() != 3 {
                return Err(CliError::Config(format!("window: expected min:max:n, got `{s}`")));
            }
            let bad = || CliError::Config(format!("window: cannot parse `{s}`"));
            w.min = Some(parts[0].parse().map_err(|_| bad())?);
            w.max = Some(parts[1].parse().map_err(|_| bad())?);
            w.n = Some(parts[2].parse().map_err(|_| bad())?);
        }
        w.side = g.side.or(w.side);
        cfg.window = Some(WindowConfig { ..w });
    }
    cfg.random = g.random.or(cfg.random);
    cfg.locus = g.locus.or(cfg.locus);
    cfg.scan |= g.scan;
    cfg.laurent |= g.laurent;
    if g.no_continuation {
        cfg.continuation = Some(false);
    }
    cfg.format = g.format.unwrap_or(cfg.format);
    cfg.fd_curl |= g.fd_curl;
    cfg.search_grid = g.search_grid.or(cfg.search_grid);
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = build_config(&cli.global)?;
    if let Some(n) = cfg.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let cmd = match &cli.command {
        Cmd::Surface => Command::Surface,
        Cmd::Catastrophe => Command::Catastrophe,
        Cmd::Vorticity => Command::Vorticity,
        Cmd::Exponent => Command::Exponent,
        Cmd::Field => Command::Field,
        Cmd::Frame => Command::Frame,
        Cmd::Acceptance { only } => {
            let ids: Vec<u32> = match only {
                Some(s) => s
                    .split(',')
                    .map(|p| match p.trim().parse() {
                        Ok(id @ 1..=8) => Ok(id),
                        _ => Err(CliError::Config(format!("criterion `{p}` is not in 1-8"))),
                    })
                    .collect::<Result<_, _>>()?,
                None => (1..=8).collect(),
            };
            let mut failed = Vec::new();
            for id in ids {
                let c = acceptance::run_criterion(id, cfg.seed());
                println!("{}", c.line());
                if !c.passed {
                    failed.push(format!("criterion {id}"));
                }
            }
            return if failed.is_empty() { Ok(()) } else { Err(CliError::Check(failed)) };
        }
    };
    let report = run(cmd, &cfg)?;
    if let Some(s) = &report.summary {
        println!("{}", serde_json::to_string_pretty(s).expect("plain data serializes"));
    }
    for c in &report.checks {
        eprintln!("check {}: {} ({})", if c.passed { "ok" } else { "FAILED" }, c.name, c.detail);
    }
    for f in &report.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hodograph: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
