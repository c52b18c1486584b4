//! Command-line front end: parses flags, runs an experiment, writes CSV.
//!
//! Exit codes: 0 on success, 2 for invalid arguments, 3 when a numerical
//! tolerance is not met.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::experiments::{
    frontier, linspace, mc_sample_tables, nonviolation_scan, psi2_scan, psi2_scenario, tmss_scan,
    StateKind,
};
use crate::fock::{tmss_tail_weight, DEFAULT_CUTOFF};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

const TAIL_WARN: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "hybrid-bell", version, about = "CHSH statistics for counting/homodyne Bell tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Write CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Read defaults from a key=value file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ZGrid {
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    z_min: f64,
    #[arg(long, default_value_t = 4.0, allow_negative_numbers = true)]
    z_max: f64,
    #[arg(long, default_value_t = 400)]
    z_steps: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StateArg {
    SinglePhotonPath,
    Cat,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// CHSH of the lossy two-photon state against the binning half-width.
    Psi2Scan {
        #[command(flatten)]
        z: ZGrid,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        t: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        eta: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Minimal detector efficiency against line transmission.
    Frontier {
        #[arg(long, default_value_t = 0.84, allow_negative_numbers = true)]
        t_min: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        t_max: f64,
        #[arg(long, default_value_t = 33)]
        t_steps: usize,
        #[command(flatten)]
        common: Common,
    },
    /// CHSH of the two-mode squeezed vacuum over a (lambda, z) grid.
    TmssScan {
        #[arg(long, default_value_t = 0.80, allow_negative_numbers = true)]
        lambda_min: f64,
        #[arg(long, default_value_t = 0.86, allow_negative_numbers = true)]
        lambda_max: f64,
        #[arg(long, default_value_t = 20)]
        lambda_steps: usize,
        #[command(flatten)]
        z: ZGrid,
        #[arg(long, default_value_t = DEFAULT_CUTOFF)]
        cutoff: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Largest CHSH value found for a state family.
    StatesScan {
        #[arg(long, value_enum)]
        state: StateArg,
        #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
        alpha_min: f64,
        #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
        alpha_max: f64,
        #[arg(long, default_value_t = 4)]
        alpha_steps: usize,
        #[command(flatten)]
        z: ZGrid,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo estimate of CHSH for the lossy two-photon state.
    Mc {
        #[arg(long, default_value_t = 0.83, allow_negative_numbers = true)]
        z: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        t: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        eta: f64,
        #[arg(long, default_value_t = 1_000_000)]
        shots: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Psi2Scan { common, .. }
            | Command::Frontier { common, .. }
            | Command::TmssScan { common, .. }
            | Command::StatesScan { common, .. }
            | Command::Mc { common, .. } => common,
        }
    }
}

/// Formats a float with 12 significant digits, trimming trailing zeros.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let fixed = format!("{v:.decimals$}");
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) => Failure::Usage(e.to_string()),
            Error::Numerical { .. } => Failure::Numerical(e.to_string()),
        }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), Failure> {
    if cond {
        Ok(())
    } else {
        Err(Failure::Usage(msg()))
    }
}

fn check_grid(name: &str, lo: f64, hi: f64, steps: usize) -> Result<(), Failure> {
    check(steps >= 1, || format!("--{name}-steps must be at least 1"))?;
    check(lo.is_finite() && hi.is_finite() && lo <= hi, || {
        format!("--{name}-min must not exceed --{name}-max")
    })
}

fn check_z(z: &ZGrid) -> Result<(), Failure> {
    check_grid("z", z.z_min, z.z_max, z.z_steps)?;
    check(z.z_min > 0.0, || format!("--z-min must be positive, got {}", z.z_min))
}

fn check_unit(name: &str, v: f64) -> Result<(), Failure> {
    check((0.0..=1.0).contains(&v), || format!("--{name} must lie in [0, 1], got {v}"))
}

/// Flag names and values in a canonical order, for the header comment.
fn canonical_flags(cmd: &Command) -> (&'static str, Vec<(&'static str, String)>) {
    let f = fmt_num;
    let z = |z: &ZGrid| {
        vec![
            ("z-max", f(z.z_max)),
            ("z-min", f(z.z_min)),
            ("z-steps", z.z_steps.to_string()),
        ]
    };
    let (name, mut flags) = match cmd {
        Command::Psi2Scan { z: zg, t, eta, .. } => {
            let mut v = vec![("eta", f(*eta)), ("t", f(*t))];
            v.extend(z(zg));
            ("psi2-scan", v)
        }
        Command::Frontier { t_min, t_max, t_steps, .. } => (
            "frontier",
            vec![("t-max", f(*t_max)), ("t-min", f(*t_min)), ("t-steps", t_steps.to_string())],
        ),
        Command::TmssScan {
            lambda_min,
            lambda_max,
            lambda_steps,
            z: zg,
            cutoff,
            ..
        } => {
            let mut v = vec![
                ("cutoff", cutoff.to_string()),
                ("lambda-max", f(*lambda_max)),
                ("lambda-min", f(*lambda_min)),
                ("lambda-steps", lambda_steps.to_string()),
            ];
            v.extend(z(zg));
            ("tmss-scan", v)
        }
        Command::StatesScan {
            state,
            alpha_min,
            alpha_max,
            alpha_steps,
            z: zg,
            ..
        } => {
            let mut v = vec![
                ("alpha-max", f(*alpha_max)),
                ("alpha-min", f(*alpha_min)),
                ("alpha-steps", alpha_steps.to_string()),
                ("state", state_kind(*state).to_string()),
            ];
            v.extend(z(zg));
            ("states-scan", v)
        }
        Command::Mc { z, t, eta, shots, seed, .. } => (
            "mc",
            vec![
                ("eta", f(*eta)),
                ("seed", seed.to_string()),
                ("shots", shots.to_string()),
                ("t", f(*t)),
                ("z", f(*z)),
            ],
        ),
    };
    flags.sort_by_key(|(k, _)| *k);
    (name, flags)
}

fn state_kind(s: StateArg) -> StateKind {
    match s {
        StateArg::SinglePhotonPath => StateKind::SinglePhotonPath,
        StateArg::Cat => StateKind::Cat,
    }
}

fn header(cmd: &Command) -> String {
    let (name, flags) = canonical_flags(cmd);
    let mut line = format!("# hybrid-bell {} {name}", env!("CARGO_PKG_VERSION"));
    for (k, v) in flags {
        let _ = write!(line, " --{k} {v}");
    }
    line.push('\n');
    line
}

fn execute(cmd: &Command, err: &mut dyn Write) -> Result<String, Failure> {
    let mut out = header(cmd);
    match cmd {
        Command::Psi2Scan { z, t, eta, .. } => {
            check_z(z)?;
            check_unit("t", *t)?;
            check_unit("eta", *eta)?;
            let pts = psi2_scan(&linspace(z.z_min, z.z_max, z.z_steps), *t, *eta)?;
            out.push_str("z,S,minus_position\n");
            for p in pts {
                let zv = p.param("z").expect("scan point carries z");
                let _ = writeln!(out, "{},{},{}", fmt_num(zv), fmt_num(p.s), p.arrangement);
            }
        }
        Command::Frontier { t_min, t_max, t_steps, .. } => {
            check_grid("t", *t_min, *t_max, *t_steps)?;
            check(*t_min > 0.0 && *t_max <= 1.0, || {
                "transmissions must lie in (0, 1]".to_string()
            })?;
            let pts = frontier(&linspace(*t_min, *t_max, *t_steps))?;
            for p in pts.iter().filter(|p| !p.feasible) {
                let _ = writeln!(err, "note: t = {} admits no violation for any efficiency", fmt_num(p.t));
            }
            out.push_str("t,eta_min,z_opt\n");
            for p in pts {
                let _ = writeln!(out, "{},{},{}", fmt_num(p.t), fmt_num(p.eta_min), fmt_num(p.z_opt));
            }
        }
        Command::TmssScan {
            lambda_min,
            lambda_max,
            lambda_steps,
            z,
            cutoff,
            ..
        } => {
            check_grid("lambda", *lambda_min, *lambda_max, *lambda_steps)?;
            check(*lambda_min >= 0.0 && *lambda_max < 1.0, || {
                "lambda must lie in [0, 1)".to_string()
            })?;
            check_z(z)?;
            let tail = tmss_tail_weight(*lambda_max, *cutoff);
            if tail > TAIL_WARN {
                let _ = writeln!(
                    err,
                    "warning: cutoff {cutoff} drops weight {tail:e} of the squeezed state at lambda {}",
                    fmt_num(*lambda_max)
                );
            }
            let pts = tmss_scan(
                &linspace(*lambda_min, *lambda_max, *lambda_steps),
                &linspace(z.z_min, z.z_max, z.z_steps),
                *cutoff,
            )?;
            out.push_str("# counters ideal (eta=1), lossless lines, Alice {X,N}, Bob {P,N}\n");
            out.push_str("lambda,z,S,minus_position\n");
            for p in pts {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    fmt_num(p.param("lambda").expect("lambda")),
                    fmt_num(p.param("z").expect("z")),
                    fmt_num(p.s),
                    p.arrangement
                );
            }
        }
        Command::StatesScan {
            state,
            alpha_min,
            alpha_max,
            alpha_steps,
            z,
            ..
        } => {
            check_z(z)?;
            let kind = state_kind(*state);
            let alphas = match kind {
                StateKind::Cat => {
                    check_grid("alpha", *alpha_min, *alpha_max, *alpha_steps)?;
                    check(*alpha_min > 0.0, || "--alpha-min must be positive".to_string())?;
                    linspace(*alpha_min, *alpha_max, *alpha_steps)
                }
                StateKind::SinglePhotonPath => Vec::new(),
            };
            let r = nonviolation_scan(kind, &alphas, &linspace(z.z_min, z.z_max, z.z_steps))?;
            out.push_str("state,param,z,S_max\n");
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.kind,
                r.param.map(fmt_num).unwrap_or_default(),
                fmt_num(r.z),
                fmt_num(r.s_max)
            );
        }
        Command::Mc { z, t, eta, shots, seed, .. } => {
            check(*z > 0.0, || format!("--z must be positive, got {z}"))?;
            check_unit("t", *t)?;
            check_unit("eta", *eta)?;
            check(*shots >= 4, || format!("--shots must be at least 4, got {shots}"))?;
            let est = mc_sample_tables(&psi2_scenario(*t, *eta, *z)?, *shots, *seed)?;
            if !est.valid {
                return Err(Failure::Numerical(
                    "a setting pair received no shots; increase --shots".into(),
                ));
            }
            out.push_str("shots,seed,S_hat,std_err\n");
            let _ = writeln!(
                out,
                "{},{},{},{}",
                est.shots,
                est.seed,
                fmt_num(est.s_hat),
                fmt_num(est.std_err)
            );
        }
    }
    Ok(out)
}

fn flag_present(args: &[String], key: &str) -> bool {
    let long = format!("--{key}");
    let eq = format!("--{key}=");
    args.iter().any(|a| *a == long || a.starts_with(&eq))
}

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

/// Splices `key=value` lines from a config file in as flags, after the
/// subcommand and ahead of the user's own flags, skipping any key already
/// given on the command line.
fn merge_config(args: Vec<String>) -> Result<Vec<String>, Failure> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| Failure::Usage(format!("cannot read config {path}: {e}")))?;
    let mut extra = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Failure::Usage(format!(
                "{path}:{}: expected key=value",
                lineno + 1
            )));
        };
        let key = key.trim();
        if key == "config" || flag_present(&args, key) {
            continue;
        }
        extra.push(format!("--{key}"));
        extra.push(value.trim().to_string());
    }
    let split = args.len().min(2);
    let mut merged = args[..split].to_vec();
    merged.extend(extra);
    merged.extend_from_slice(&args[split..]);
    Ok(merged)
}

/// Runs the CLI with explicit output streams; returns the exit code.
pub fn run_with<I, S>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = argv.into_iter().map(Into::into).collect();
    let args = match merge_config(args) {
        Ok(a) => a,
        Err(Failure::Usage(m)) | Err(Failure::Numerical(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(rendered.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = stderr.write_all(rendered.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };

    let csv = match execute(&cli.command, stderr) {
        Ok(csv) => csv,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            return EXIT_USAGE;
        }
        Err(Failure::Numerical(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            return EXIT_NUMERICAL;
        }
    };
    let written = match &cli.command.common().out {
        Some(path) => fs::write(path, csv.as_bytes()),
        None => stdout.write_all(csv.as_bytes()),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: cannot write output: {e}");
        return EXIT_USAGE;
    }
    EXIT_OK
}

/// Runs the CLI against the process's standard streams.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with(
            std::iter::once("hybrid-bell").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(2.25), "2.25");
        assert_eq!(fmt_num(-0.5), "-0.5");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(2.0 / 3.0 * 100.0), "66.6666666667");
        assert_eq!(fmt_num(123456789012345.0), "1.23456789012e14");
        assert_eq!(fmt_num(1.5e-7), "1.5e-7");
        assert_eq!(fmt_num(0.000123), "0.000123");
        assert_eq!(fmt_num(f64::INFINITY), "inf");
        assert_eq!(fmt_num(f64::NAN), "nan");
        assert_eq!(fmt_num(9.9999999999999e-1), "1");
    }

    #[test]
    fn psi2_scan_output() {
        let (code, out, _) = run_capture(&[
            "psi2-scan", "--z-min", "0.1", "--z-max", "2.0", "--z-steps", "20", "--t", "1", "--eta", "1",
        ]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(
            lines[0],
            "# hybrid-bell 0.1.0 psi2-scan --eta 1 --t 1 --z-max 2 --z-min 0.1 --z-steps 20"
        );
        assert_eq!(lines[1], "z,S,minus_position");
        assert_eq!(lines.len(), 22);
        assert!(lines[2].starts_with("0.1,"));
    }

    #[test]
    fn invalid_arguments_exit_2() {
        let (code, out, err) = run_capture(&["psi2-scan", "--z-min", "-1"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(out.is_empty());
        assert!(err.contains("z-min"));
        assert_eq!(run_capture(&["psi2-scan", "--bogus", "1"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["nope"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["mc", "--shots", "3"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["tmss-scan", "--lambda-max", "1"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["frontier", "--t-min", "0"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["psi2-scan", "--eta", "1.5"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["states-scan"]).0, EXIT_USAGE);
    }

    #[test]
    fn help_goes_to_stdout() {
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("psi2-scan"));
    }

    #[test]
    fn config_file_supplies_defaults() {
        let dir = std::env::temp_dir().join(format!("hybrid-bell-cfg-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let cfg = dir.join("run.cfg");
        fs::write(&cfg, "# scan\nz-min = 0.5\nz-max=1.0\nz-steps=3\nt=0.9\n").unwrap();
        let cfg_s = cfg.to_str().unwrap();
        let (code, out, _) = run_capture(&["psi2-scan", "--config", cfg_s, "--t", "1"]);
        assert_eq!(code, 0, "{out}");
        assert!(out.starts_with(
            "# hybrid-bell 0.1.0 psi2-scan --eta 1 --t 1 --z-max 1 --z-min 0.5 --z-steps 3\n"
        ));
        fs::write(&cfg, "z-min\n").unwrap();
        assert_eq!(run_capture(&["psi2-scan", "--config", cfg_s]).0, EXIT_USAGE);
        fs::write(&cfg, "no-such-flag=1\n").unwrap();
        assert_eq!(run_capture(&["psi2-scan", "--config", cfg_s]).0, EXIT_USAGE);
        assert_eq!(
            run_capture(&["psi2-scan", "--config", "/nonexistent/x.cfg"]).0,
            EXIT_USAGE
        );
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn states_scan_single_row() {
        let (code, out, _) = run_capture(&[
            "states-scan", "--state", "single-photon-path", "--z-steps", "10",
        ]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[1], "state,param,z,S_max");
        assert!(lines[2].starts_with("single-photon-path,,"));
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn mc_row() {
        let (code, out, _) = run_capture(&["mc", "--shots", "10000", "--seed", "5"]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[1], "shots,seed,S_hat,std_err");
        assert!(lines[2].starts_with("10000,5,"));
    }
}
