//! Command-line front end.
//!
//! Every run is described by a [`RunConfig`]. Flags and `--config` files
//! produce the same config; it is validated, defaults are filled in, and the
//! resolved form is embedded in the JSON report. Reports carry no timings or
//! paths, so identical configs give byte-identical output.
//!
//! Exit codes: 0 success or pass, 1 failed check or runtime error,
//! 2 inconclusive search, 64 invalid invocation or config.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::algebra::OrthogonalComplexStructure;
use crate::fibers::{FiberCurve, TraceConfig};
use crate::linking::{default_values, hopf_invariant, HopfConfig};
use crate::lipschitz::lipschitz_report;
use crate::manifolds::Space;
use crate::maps::MapDescriptor;
use crate::verify::{self, VerificationReport};
use crate::{Error, Result};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    HopfInvariant,
    Lipschitz,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    GreatCircles,
    Parallel,
    Torus,
    KeyLemma,
    LemmaF,
    TheoremC,
    TheoremD,
    SasakiLengths,
}

impl Check {
    fn uses_map(self) -> bool {
        matches!(
            self,
            Check::GreatCircles | Check::Parallel | Check::Torus | Check::TheoremC
        )
    }

    fn uses_trace(self) -> bool {
        matches!(self, Check::GreatCircles | Check::Parallel | Check::Torus)
    }

    fn uses_tol(self) -> bool {
        self.uses_trace() || self == Check::KeyLemma
    }

    fn default_samples(self) -> usize {
        match self {
            Check::GreatCircles => 20,
            Check::Parallel => 10,
            Check::Torus => 5,
            Check::KeyLemma => 20,
            Check::LemmaF | Check::TheoremC | Check::TheoremD => 1000,
            Check::SasakiLengths => 4096,
        }
    }
}

/// A complete, reproducible description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: CommandKind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    /// The two regular values of a Hopf invariant run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<[Vec<f64>; 2]>,
    /// Output directory; not part of the embedded config.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: CommandKind, seed: u64) -> Self {
        RunConfig {
            command,
            seed,
            map: None,
            check: None,
            samples: None,
            tol: None,
            step: None,
            values: None,
            out: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Validate and fill in every default.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = self.clone();
        let reject = |present: bool, field: &str| -> Result<()> {
            if present {
                let what = match (c.command, c.check) {
                    (CommandKind::Verify, Some(k)) => format!("verify {}", kebab(&k)),
                    (k, _) => kebab(&k),
                };
                return Err(Error::Config(format!("`{field}` is not used by {what}")));
            }
            Ok(())
        };
        match c.command {
            CommandKind::HopfInvariant => {
                reject(c.check.is_some(), "check")?;
                reject(c.samples.is_some(), "samples")?;
                reject(c.tol.is_some(), "tol")?;
                let map = c.map.get_or_insert_with(MapDescriptor::hopf).clone();
                c.step.get_or_insert(TraceConfig::default().step);
                let m = map.build()?;
                let radius = match (m.domain(), m.codomain()) {
                    (Space::Sphere { dim: 3, .. }, Space::Sphere { dim: 2, radius }) => *radius,
                    _ => return Err(Error::Config(format!("hopf-invariant needs a map S³ → S², got {map}"))),
                };
                c.values.get_or_insert_with(|| default_values(radius));
            }
            CommandKind::Lipschitz => {
                reject(c.check.is_some(), "check")?;
                reject(c.tol.is_some(), "tol")?;
                reject(c.step.is_some(), "step")?;
                reject(c.values.is_some(), "values")?;
                c.map.get_or_insert_with(MapDescriptor::hopf);
                c.samples.get_or_insert(10_000);
            }
            CommandKind::Verify => {
                let check = c
                    .check
                    .ok_or_else(|| Error::Config("verify needs a check name".into()))?;
                reject(c.values.is_some(), "values")?;
                reject(c.map.is_some() && !check.uses_map(), "map")?;
                reject(c.step.is_some() && !check.uses_trace(), "step")?;
                reject(c.tol.is_some() && !check.uses_tol(), "tol")?;
                if check.uses_trace() {
                    c.map.get_or_insert_with(MapDescriptor::hopf);
                    c.step.get_or_insert(TraceConfig::default().step);
                }
                if check == Check::TheoremC {
                    c.map.get_or_insert(MapDescriptor::builtin("hopf-vf")?);
                }
                if check.uses_tol() {
                    c.tol.get_or_insert(1e-6);
                }
                c.samples.get_or_insert(check.default_samples());
            }
        }
        if let Some(m) = &c.map {
            m.build()?;
        }
        if c.samples == Some(0) {
            return Err(Error::Config("`samples` must be positive".into()));
        }
        if let Some(t) = c.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config("`tol` must be positive".into()));
            }
        }
        if let Some(h) = c.step {
            if !(h > 0.0 && h < 0.5) {
                return Err(Error::Config("`step` must lie in (0, 0.5)".into()));
            }
        }
        Ok(c)
    }
}

fn kebab<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Result of a run: the JSON report, extra files, and the exit code.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: String,
    pub files: Vec<(String, String)>,
    pub exit_code: i32,
}

fn trace_config(c: &RunConfig) -> TraceConfig {
    TraceConfig {
        step: c.step.unwrap_or(TraceConfig::default().step),
        seed: c.seed,
        ..TraceConfig::default()
    }
}

fn render(config: &RunConfig, body: serde_json::Value) -> String {
    let doc = json!({ "config": config, "report": body });
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

fn curve_csv(c: &FiberCurve) -> Result<String> {
    let mut buf = Vec::new();
    c.write_csv(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

/// Execute a config. Runtime errors are returned; check failures are not.
pub fn execute(config: &RunConfig) -> Result<Outcome> {
    let c = config.resolve()?;
    let map = c.map.as_ref().map(MapDescriptor::build).transpose()?;
    match c.command {
        CommandKind::HopfInvariant => {
            let m = map.expect("resolved");
            let cfg = HopfConfig {
                trace: trace_config(&c),
                ..HopfConfig::default()
            };
            let [y1, y2] = c.values.clone().expect("resolved");
            let h = hopf_invariant(&m, &y1, &y2, &cfg)?;
            let mut files = Vec::new();
            for (tag, fibers) in ["a", "b"].iter().zip(&h.fibers) {
                for (k, f) in fibers.iter().enumerate() {
                    files.push((format!("fiber_{tag}_{k}.csv"), curve_csv(f)?));
                }
            }
            let mut body = serde_json::to_value(&h)?;
            body["fiber_files"] = json!(files.iter().map(|(n, _)| n).collect::<Vec<_>>());
            Ok(Outcome {
                report: render(&c, body),
                files,
                exit_code: EXIT_PASS,
            })
        }
        CommandKind::Lipschitz => {
            let r = lipschitz_report(&map.expect("resolved"), c.samples.expect("resolved"), c.seed)?;
            Ok(Outcome {
                report: render(&c, serde_json::to_value(&r)?),
                files: Vec::new(),
                exit_code: EXIT_PASS,
            })
        }
        CommandKind::Verify => {
            let rep = run_check(&c, map.as_ref())?;
            let exit_code = if rep.pass {
                EXIT_PASS
            } else if rep.inconclusive {
                EXIT_INCONCLUSIVE
            } else {
                EXIT_FAIL
            };
            Ok(Outcome {
                report: render(&c, serde_json::to_value(&rep)?),
                files: Vec::new(),
                exit_code,
            })
        }
    }
}

fn run_check(c: &RunConfig, map: Option<&crate::maps::Map>) -> Result<VerificationReport> {
    let check = c.check.expect("resolved");
    let samples = c.samples.expect("resolved");
    let trace = trace_config(c);
    let rep = match check {
        Check::GreatCircles => {
            let m = map.expect("resolved");
            let values = verify::sample_values(m, samples, c.seed)?;
            verify::verify_great_circle_fibers(m, &values, c.tol.expect("resolved"), &trace)?
        }
        Check::Parallel => {
            let m = map.expect("resolved");
            let values = verify::sample_values(m, 2 * samples, c.seed)?;
            let pairs: Vec<_> = values.chunks(2).map(|p| (p[0].clone(), p[1].clone())).collect();
            verify::verify_parallel_fibers(m, &pairs, c.tol.expect("resolved"), &trace)?
        }
        Check::Torus => {
            let m = map.expect("resolved");
            let values = verify::sample_values(m, samples + 1, c.seed)?;
            verify::verify_torus(m, &values[0], &values[1..], c.tol.expect("resolved"), &trace)?
        }
        Check::KeyLemma => verify::verify_key_lemma(samples, c.seed, c.tol.expect("resolved"))?,
        Check::LemmaF => verify::lemma_f_checks(2, samples, c.seed)?,
        Check::TheoremC => {
            let j = structure_of(c.map.as_ref().expect("resolved"))?;
            verify::theorem_c_checks(&j, samples, c.seed)?
        }
        Check::TheoremD => verify::theorem_d_checks_with(c.seed, samples, &crate::manifolds::HodgeStar::standard())?,
        Check::SasakiLengths => verify::sasaki_lengths_check(samples)?,
    };
    Ok(rep.seed(c.seed))
}

fn structure_of(m: &MapDescriptor) -> Result<OrthogonalComplexStructure> {
    match m {
        MapDescriptor::HopfVectorField { structure } => structure.resolve(),
        _ => Err(Error::Config("theorem-c needs a hopf_vector_field map".into())),
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hopfmin",
    version,
    about = "Hopf fibrations, Hopf invariants and Lipschitz constants"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Hopf invariant of a map S³ → S² as the linking number of two fibers.
    HopfInvariant {
        #[command(flatten)]
        common: Common,
        /// Continuation step length.
        #[arg(long)]
        step: Option<f64>,
    },
    /// Lower and upper estimates of the Lipschitz constant.
    Lipschitz {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Run a named geometric check.
    Verify {
        /// Check name (alternatively `--check`).
        #[arg(value_enum)]
        name: Option<Check>,
        #[arg(long, value_enum, conflicts_with = "name")]
        check: Option<Check>,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
    },
    /// Run a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Map descriptor as JSON, or a builtin name such as `hopf`, `power(2)`.
    #[arg(long)]
    map: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for report.json and any curve files.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_map(s: &str) -> Result<MapDescriptor> {
    if s.trim_start().starts_with('{') {
        MapDescriptor::from_json(s)
    } else {
        MapDescriptor::builtin(s)
    }
}

fn base(kind: CommandKind, common: Common) -> Result<RunConfig> {
    let mut c = RunConfig::new(kind, common.seed);
    c.map = common.map.as_deref().map(parse_map).transpose()?;
    c.out = common.out;
    Ok(c)
}

fn config_from(cmd: Cmd) -> Result<RunConfig> {
    Ok(match cmd {
        Cmd::HopfInvariant { common, step } => {
            let mut c = base(CommandKind::HopfInvariant, common)?;
            c.step = step;
            c
        }
        Cmd::Lipschitz { common, samples } => {
            let mut c = base(CommandKind::Lipschitz, common)?;
            c.samples = samples;
            c
        }
        Cmd::Verify {
            name,
            check,
            common,
            samples,
            tol,
            step,
        } => {
            let mut c = base(CommandKind::Verify, common)?;
            c.check = name.or(check);
            c.samples = samples;
            c.tol = tol;
            c.step = step;
            c
        }
        Cmd::Run { config, out } => {
            let text = fs::read_to_string(&config)?;
            let mut c = RunConfig::from_json(&text)?;
            if out.is_some() {
                c.out = out;
            }
            c
        }
    })
}

fn write_outputs(dir: &Path, outcome: &Outcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), &outcome.report)?;
    for (name, body) in &outcome.files {
        fs::write(dir.join(name), body)?;
    }
    Ok(())
}

fn exit_for(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => EXIT_USAGE,
        _ => EXIT_FAIL,
    }
}

/// Parse arguments, run, print the report, and return the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let config = match config_from(cli.command) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return exit_for(&e);
        }
    };
    match execute(&config) {
        Ok(outcome) => {
            if let Some(dir) = &config.out {
                if let Err(e) = write_outputs(dir, &outcome) {
                    let _ = writeln!(stderr, "error: {e}");
                    return EXIT_FAIL;
                }
            }
            let _ = stdout.write_all(outcome.report.as_bytes());
            outcome.exit_code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_for(&e)
        }
    }
}
