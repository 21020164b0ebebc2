//! `pruw`: simulate private read-update-write rounds, emit leakage curves
//! and cost reports.
//!
//! Exit status: 0 verified, 1 verification mismatch, 2 configuration error.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pruw_core::client::LocalUpdate;
use pruw_core::cost::measure_round;
use pruw_core::leakage::{
    brute_force_mi_exact, entropy_hat_exact, entropy_tilde_exact, leakage_curve, leakage_csv,
    MiMode, PatternDistribution,
};
use pruw_core::perm::NoiseMode;
use pruw_core::sim::{transcript_dump, World};
use pruw_core::{CaseId, SchemeParams, DEFAULT_MODULUS};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

#[derive(Parser)]
#[command(name = "pruw", version, about = "Private read-update-write simulator")]
struct Cli {
    /// Optional key=value config file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verified multi-round simulation and write transcript + costs.
    Simulate(SimulateArgs),
    /// Emit the leakage curve as CSV.
    Leakage(LeakageArgs),
    /// Emit the measured-vs-formula cost report as JSON.
    Costs(CostArgs),
}

#[derive(Args)]
struct SchemeArgs {
    #[arg(long)]
    case: Option<u8>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long = "P")]
    p: Option<usize>,
    #[arg(long = "B")]
    b: Option<usize>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long = "r-prime")]
    r_prime: Option<f64>,
    #[arg(long)]
    q: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    users: Option<usize>,
    /// Output directory for transcript.txt and costs.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LeakageArgs {
    #[arg(long = "P")]
    p: Option<usize>,
    #[arg(long = "Pr")]
    pr: Option<usize>,
    /// Comma-separated segment counts.
    #[arg(long = "B")]
    b: Option<String>,
    /// Cross-check closed forms against brute-force mutual information.
    #[arg(long)]
    oracle: bool,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CostArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    /// Output JSON path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

struct ConfigFile(BTreeMap<String, String>);

impl ConfigFile {
    fn load(path: Option<&PathBuf>) -> Result<Self, String> {
        let mut map = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| format!("config line {}: expected key=value", lineno + 1))?;
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(Self(map))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, String>
    where
        T::Err: std::fmt::Display,
    {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| format!("config key {key}: {e}")),
        }
    }
}

/// Flag, then config file, then default.
fn resolve<T: std::str::FromStr + Copy>(
    flag: Option<T>,
    file: &ConfigFile,
    key: &str,
    default: T,
) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    Ok(flag.or(file.get(key)?).unwrap_or(default))
}

struct ResolvedScheme {
    params: SchemeParams,
    r: f64,
    r_prime: f64,
    seed: u64,
}

fn resolve_scheme(args: &SchemeArgs, file: &ConfigFile) -> Result<ResolvedScheme, String> {
    let case = CaseId::from_u8(resolve(args.case, file, "case", 1)?).map_err(|e| e.to_string())?;
    let n = resolve(args.n, file, "N", case.min_n())?;
    let p = resolve(args.p, file, "P", 12)?;
    let b = resolve(args.b, file, "B", 3)?;
    let r = resolve(args.r, file, "r", 0.25)?;
    let r_prime = resolve(args.r_prime, file, "r_prime", r)?;
    let q = resolve(args.q, file, "q", DEFAULT_MODULUS)?;
    let seed = resolve(args.seed, file, "seed", 0)?;
    let params =
        SchemeParams::from_rates(case, n, p, b, r, r_prime, q).map_err(|e| e.to_string())?;
    Ok(ResolvedScheme { params, r, r_prime, seed })
}

fn scheme_header(s: &ResolvedScheme) -> String {
    let p = &s.params;
    format!(
        "case={} N={} P={} B={} r={} r_prime={} Pr={} Pr_prime={} ell={} q={} seed={}",
        p.case.as_u8(),
        p.n_databases,
        p.p_subpackets,
        p.b_segments,
        s.r,
        s.r_prime,
        p.pr,
        p.pr_prime,
        p.ell,
        p.q,
        s.seed,
    )
}

fn cmd_simulate(args: &SimulateArgs, file: &ConfigFile) -> Result<ExitCode, String> {
    let scheme = resolve_scheme(&args.scheme, file)?;
    let rounds = resolve(args.rounds, file, "rounds", 1)?;
    let users = resolve(args.users, file, "users", 1)?;
    let header = format!("{} rounds={rounds} users={users}", scheme_header(&scheme));
    println!("# {header}");

    let mut world = World::init(scheme.params, scheme.seed, NoiseMode::Random)
        .map_err(|e| e.to_string())?;
    let mut rng = ChaCha12Rng::seed_from_u64(scheme.seed.wrapping_add(1));
    let mut transcripts = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let updates: Vec<LocalUpdate> =
            (0..users).map(|_| world.random_update(&mut rng)).collect();
        transcripts.push(world.run_round(&updates).map_err(|e| e.to_string())?);
    }
    let report = world.verify().map_err(|e| e.to_string())?;

    let cost = match transcripts.last() {
        Some(t) => Some(measure_round(&t.tally, &scheme.params).map_err(|e| e.to_string())?),
        None => None,
    };
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
        let mut dump = format!("# {header}\n");
        dump.push_str(&transcript_dump(&transcripts));
        std::fs::write(dir.join("transcript.txt"), dump).map_err(|e| e.to_string())?;
        if let Some(cost) = &cost {
            let json = cost.to_json(&scheme.params);
            std::fs::write(
                dir.join("costs.json"),
                serde_json::to_string_pretty(&json).unwrap(),
            )
            .map_err(|e| e.to_string())?;
        }
    }
    if report.ok() {
        println!("verify: ok ({} subpackets, {} rounds)", scheme.params.p_subpackets, rounds);
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("verify: {} mismatching subpackets: {:?}", report.mismatches.len(), report.mismatches);
        Ok(ExitCode::from(1))
    }
}

fn cmd_leakage(args: &LeakageArgs, file: &ConfigFile) -> Result<ExitCode, String> {
    let p = resolve(args.p, file, "P", 12)?;
    let pr = resolve(args.pr, file, "Pr", 3)?;
    let b_arg = match &args.b {
        Some(s) => s.clone(),
        None => file.get::<String>("B")?.unwrap_or_else(|| "1,2,3,4,6".into()),
    };
    let b_list: Vec<usize> = b_arg
        .split(',')
        .map(|s| s.trim().parse().map_err(|e| format!("bad B entry {s:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let oracle = args.oracle || file.get::<bool>("oracle")?.unwrap_or(false);
    let header = format!("P={p} Pr={pr} B={} oracle={oracle}", b_arg);
    println!("# {header}");

    let rows = leakage_curve(p, pr, &b_list).map_err(|e| e.to_string())?;
    if oracle {
        for &b in &b_list {
            let dist = PatternDistribution::uniform(p, b, pr).map_err(|e| e.to_string())?;
            let within = brute_force_mi_exact(&dist, MiMode::WithinOnly)
                .map_err(|e| e.to_string())?;
            if !within.sub(&entropy_hat_exact(&dist).map_err(|e| e.to_string())?).is_zero() {
                eprintln!("oracle mismatch: single-stage leakage at B={b}");
                return Ok(ExitCode::from(1));
            }
            let both = brute_force_mi_exact(&dist, MiMode::WithinInter)
                .map_err(|e| e.to_string())?;
            if !both.sub(&entropy_tilde_exact(&dist).map_err(|e| e.to_string())?).is_zero() {
                eprintln!("oracle mismatch: two-stage leakage at B={b}");
                return Ok(ExitCode::from(1));
            }
        }
        println!("# oracle: closed forms confirmed on {} segment counts", b_list.len());
    }
    let csv = format!("# {header}\n{}", leakage_csv(&rows));
    match &args.out {
        Some(path) => std::fs::write(path, csv).map_err(|e| e.to_string())?,
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_costs(args: &CostArgs, file: &ConfigFile) -> Result<ExitCode, String> {
    let scheme = resolve_scheme(&args.scheme, file)?;
    println!("# {}", scheme_header(&scheme));
    let mut world = World::init(scheme.params, scheme.seed, NoiseMode::Random)
        .map_err(|e| e.to_string())?;
    let mut rng = ChaCha12Rng::seed_from_u64(scheme.seed.wrapping_add(1));
    let updates = vec![world.random_update(&mut rng)];
    let t = world.run_round(&updates).map_err(|e| e.to_string())?;
    let report = measure_round(&t.tally, &scheme.params).map_err(|e| e.to_string())?;
    let json = serde_json::to_string_pretty(&report.to_json(&scheme.params)).unwrap();
    match &args.out {
        Some(path) => std::fs::write(path, json).map_err(|e| e.to_string())?,
        None => println!("{json}"),
    }
    if report.read_matches && report.write_matches {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("cost mismatch: measured costs differ from closed forms");
        Ok(ExitCode::from(1))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = match ConfigFile::load(cli.config.as_ref()) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::Simulate(args) => cmd_simulate(args, &file),
        Command::Leakage(args) => cmd_leakage(args, &file),
        Command::Costs(args) => cmd_costs(args, &file),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
