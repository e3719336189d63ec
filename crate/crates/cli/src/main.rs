use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wbs_cli::{load_config, run_scenario, run_suite, CliError, Phases, RunManifest, Status};
use wbs_core::extraction::{pointwise_grid_check, LemmaConstants};

#[derive(Parser)]
#[command(name = "wbs", version, about = "Cesàro subsequences and convex integral checks on quadrature grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Builds the inequality constants and checks the (a,b) grid.
    #[command(name = "verify-lemma1")]
    VerifyLemma1 {
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        p: Vec<f64>,
        /// Half width T of the square [-T,T]^2.
        #[arg(long, default_value_t = 10.0)]
        range: f64,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        /// Also print the constants as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Every phase of one scenario.
    Run(ConfigArgs),
    /// Extraction, growth bound and Cesàro analytics with the trace CSV.
    Extract(ConfigArgs),
    /// Probe plus the liminf verification selected in the config.
    Liminf(ConfigArgs),
    /// Weak or weak* probe only.
    Probe(ConfigArgs),
    /// All bundled scenarios.
    Suite {
        #[arg(long, default_value = "wbs-suite-out")]
        out: PathBuf,
    },
}

fn print_manifest(m: &RunManifest) {
    println!("{} [{}]", m.name, status_word(m.status));
    for p in &m.phases {
        println!("  {:<10} {:<7} {}", p.phase, status_word(p.status), p.detail);
    }
}

fn status_word(s: Status) -> &'static str {
    match s {
        Status::Pass => "pass",
        Status::Fail => "FAIL",
        Status::Skipped => "skipped",
    }
}

fn run_config(args: &ConfigArgs, phases: Phases) -> Result<bool, CliError> {
    let cfg = load_config(&args.config)?;
    let out = args.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let m = run_scenario(&cfg, &out, phases)?;
    print_manifest(&m);
    Ok(m.passed())
}

fn verify_lemma(ps: &[f64], range: f64, step: f64, json: bool) -> Result<bool, CliError> {
    let mut ok = true;
    for &p in ps {
        let c = LemmaConstants::new(p)?;
        let g = pointwise_grid_check(&c, range, step)?;
        let holds = g.worst_margin >= -1e-9;
        ok &= holds;
        println!(
            "p={p} E_p={} A={} B={} worst_margin={:e} at (a,b)=({}, {}) over {} points [{}]",
            c.e_p,
            c.a,
            c.b,
            g.worst_margin,
            g.worst_a,
            g.worst_b,
            g.points,
            if holds { "pass" } else { "FAIL" }
        );
        if json {
            println!("{}", serde_json::to_string(&c).expect("constants serialize"));
        }
    }
    Ok(ok)
}

fn suite(out: &Path) -> Result<bool, CliError> {
    let manifests = run_suite(out)?;
    for m in &manifests {
        print_manifest(m);
    }
    let failed = manifests.iter().filter(|m| !m.passed()).count();
    println!("suite: {} scenarios, {failed} failed", manifests.len());
    Ok(failed == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::VerifyLemma1 { p, range, step, json } => verify_lemma(p, *range, *step, *json),
        Command::Run(a) => run_config(a, Phases::ALL),
        Command::Extract(a) => run_config(a, Phases::EXTRACT),
        Command::Liminf(a) => run_config(a, Phases::LIMINF),
        Command::Probe(a) => run_config(a, Phases::PROBE),
        Command::Suite { out } => suite(out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("wbs: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
