use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use owc::channel::build_channel;
use owc::config::{load_config, RunConfig};
use owc::geometry::{default_scene, Vec3};
use owc::output::{channel_csv, sweep_csv, sweep_svg, trials_csv, RunManifest};
use owc::ratesplit::Scheme;
use owc::scenario::{place_users, sweep_users, sweep_waist, trial_seed, SweepResult};

const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "owc", version, about = "RS / HRS rate simulator for VCSEL optical wireless downlinks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the channel matrix of one user placement.
    Channel(ChannelArgs),
    /// Evaluate the configured number of users.
    Run(RunArgs),
    /// Sweep the number of users.
    SweepUsers(SweepUsersArgs),
    /// Sweep the VCSEL beam waist (gaussian-beam model only).
    SweepWaist(SweepWaistArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SchemeChoice {
    Rs,
    Hrs,
    Both,
}

#[derive(Args)]
struct Common {
    /// TOML config, or a manifest.json from a previous run.
    #[arg(long, env = "OWC_CONFIG")]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, env = "OWC_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "OWC_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ScenarioFlags {
    #[command(flatten)]
    common: Common,
    #[arg(long, env = "OWC_TRIALS")]
    trials: Option<usize>,
    #[arg(long, value_enum, env = "OWC_SCHEME")]
    scheme: Option<SchemeChoice>,
    /// HRS group counts, comma separated.
    #[arg(long, value_delimiter = ',', env = "OWC_GROUPS")]
    groups: Option<Vec<usize>>,
    /// Also write per-trial values.
    #[arg(long, env = "OWC_KEEP_TRIALS")]
    keep_trials: bool,
    #[arg(long, env = "OWC_NO_PLOT")]
    no_plot: bool,
    /// Worker threads (results do not depend on this).
    #[arg(long, env = "OWC_WORKERS")]
    workers: Option<usize>,
}

#[derive(Args)]
struct ChannelArgs {
    #[command(flatten)]
    common: Common,
    /// CSV of user positions with header `x_m,y_m`; otherwise users are placed from the seed.
    #[arg(long)]
    users_file: Option<PathBuf>,
    /// Number of users to place when no users file is given.
    #[arg(long)]
    users: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    flags: ScenarioFlags,
    #[arg(long, env = "OWC_USERS")]
    users: Option<usize>,
}

#[derive(Args)]
struct SweepUsersArgs {
    #[command(flatten)]
    flags: ScenarioFlags,
    /// User counts, comma separated and ascending.
    #[arg(long, value_delimiter = ',')]
    users: Option<Vec<usize>>,
}

#[derive(Args)]
struct SweepWaistArgs {
    #[command(flatten)]
    flags: ScenarioFlags,
    /// Beam waists in micrometers, comma separated and ascending.
    #[arg(long, value_delimiter = ',')]
    waists_um: Option<Vec<f64>>,
    #[arg(long, env = "OWC_USERS")]
    users: Option<usize>,
}

fn base_config(common: &Common) -> anyhow::Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.scenario.master_seed = seed;
    }
    Ok(config)
}

fn scenario_config(flags: &ScenarioFlags, users: Option<usize>) -> anyhow::Result<RunConfig> {
    let mut config = base_config(&flags.common)?;
    let s = &mut config.scenario;
    if let Some(k) = users {
        s.users = k;
    }
    if let Some(t) = flags.trials {
        s.trials = t;
    }
    if flags.workers.is_some() {
        s.workers = flags.workers;
    }
    s.keep_trials |= flags.keep_trials;
    let groups: Vec<usize> = match &flags.groups {
        Some(g) => g.clone(),
        None => s.schemes.iter().filter_map(|x| x.groups()).collect(),
    };
    let groups = if groups.is_empty() { vec![5, 10] } else { groups };
    let want_rs = match flags.scheme {
        Some(c) => c != SchemeChoice::Hrs,
        None => s.schemes.contains(&Scheme::Rs),
    };
    let want_hrs = match flags.scheme {
        Some(c) => c != SchemeChoice::Rs,
        None => flags.groups.is_some() || s.schemes.iter().any(|x| x.groups().is_some()),
    };
    s.schemes = want_rs.then_some(Scheme::Rs).into_iter().collect();
    if want_hrs {
        s.schemes.extend(groups.iter().map(|g| Scheme::Hrs { groups: *g }));
    }
    config.validate()?;
    Ok(config)
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn prepare_out_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn write_manifest(dir: &Path, command: &str, config: &RunConfig, mut outputs: Vec<PathBuf>, result: Option<&SweepResult>) -> anyhow::Result<()> {
    let path = dir.join("manifest.json");
    outputs.push(path.clone());
    let manifest = RunManifest {
        tool: "owc".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        config: config.clone(),
        master_seed: config.scenario.master_seed,
        timestamp_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        outputs,
        skipped: result.map(|r| r.skipped.clone()).unwrap_or_default(),
    };
    write_file(&path, &manifest.to_json())
}

fn emit_sweep(flags: &ScenarioFlags, command: &str, config: &RunConfig, result: &SweepResult) -> anyhow::Result<()> {
    let dir = &flags.common.out_dir;
    prepare_out_dir(dir)?;
    let mut outputs = Vec::new();
    let csv = dir.join(format!("{command}.csv"));
    write_file(&csv, &sweep_csv(result))?;
    outputs.push(csv);
    if config.scenario.keep_trials {
        let p = dir.join(format!("{command}_trials.csv"));
        write_file(&p, &trials_csv(result))?;
        outputs.push(p);
    }
    if !flags.no_plot {
        let p = dir.join(format!("{command}.svg"));
        write_file(&p, &sweep_svg(result))?;
        outputs.push(p);
    }
    for s in &result.skipped {
        eprintln!("skipped {} at {} = {}: {}", s.scheme, result.parameter.label(), s.param, s.reason);
    }
    write_manifest(dir, command, config, outputs, Some(result))?;
    println!("wrote {}", dir.join(format!("{command}.csv")).display());
    Ok(())
}

fn read_users(path: &Path, z: f64) -> anyhow::Result<Vec<Vec3>> {
    #[derive(serde::Deserialize)]
    struct Row {
        x_m: f64,
        y_m: f64,
    }
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let users = reader
        .deserialize::<Row>()
        .map(|r| r.map(|r| Vec3::new(r.x_m, r.y_m, z)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| owc::Error::Config(format!("{}: {e}", path.display())))?;
    if users.is_empty() {
        return Err(owc::Error::Config(format!("{}: no users listed", path.display())).into());
    }
    Ok(users)
}

fn cmd_channel(args: &ChannelArgs) -> anyhow::Result<()> {
    let mut config = base_config(&args.common)?;
    if let Some(k) = args.users {
        config.scenario.users = k;
    }
    config.validate()?;
    let s = &config.scenario;
    let scene = default_scene(&s.scene)?;
    let users = match &args.users_file {
        Some(path) => read_users(path, scene.room.rx_plane_height_m)?,
        None => place_users(&scene.room, s.users, &s.placement, trial_seed(s.master_seed, 0))?,
    };
    let channel = build_channel(&scene, &users, &s.gain_model, s.branch_policy)?;
    let dir = &args.common.out_dir;
    prepare_out_dir(dir)?;
    let path = dir.join("channel.csv");
    write_file(&path, &channel_csv(&channel))?;
    write_manifest(dir, "channel", &config, vec![path.clone()], None)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_run(args: &RunArgs) -> anyhow::Result<()> {
    let config = scenario_config(&args.flags, args.users)?;
    let result = sweep_users(&config.scenario, &[config.scenario.users])?;
    emit_sweep(&args.flags, "run", &config, &result)
}

fn cmd_sweep_users(args: &SweepUsersArgs) -> anyhow::Result<()> {
    let mut config = scenario_config(&args.flags, None)?;
    if let Some(u) = &args.users {
        config.sweep_users = u.clone();
    }
    config.validate()?;
    let result = sweep_users(&config.scenario, &config.sweep_users)?;
    emit_sweep(&args.flags, "sweep_users", &config, &result)
}

fn cmd_sweep_waist(args: &SweepWaistArgs) -> anyhow::Result<()> {
    let mut config = scenario_config(&args.flags, args.users)?;
    if let Some(w) = &args.waists_um {
        config.sweep_waist_m = w.iter().map(|x| x / 1e6).collect();
    }
    config.validate()?;
    let result = sweep_waist(&config.scenario, &config.sweep_waist_m)?;
    emit_sweep(&args.flags, "sweep_waist", &config, &result)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<owc::Error>() {
        Some(owc::Error::Validation { .. } | owc::Error::Config(_)) => EXIT_VALIDATION,
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Channel(a) => cmd_channel(a),
        Command::Run(a) => cmd_run(a),
        Command::SweepUsers(a) => cmd_sweep_users(a),
        Command::SweepWaist(a) => cmd_sweep_waist(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
