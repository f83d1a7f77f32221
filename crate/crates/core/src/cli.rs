//! Command-line driver.
//!
//! A run is described by a JSON config (optional) plus flag overrides; flags
//! win. Relative input paths resolve against the config file's directory.
//! Every artifact carries the config hash and seed. The hash covers the
//! effective config (without the output directory) and the SHA-256 of each
//! input file, so identical inputs give identical artifacts wherever they
//! are written. The run timestamp goes only to the sidecar `run.log`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adapter::{migration_tensor, write_migrations_csv, BaselCorporate, Portfolio};
use crate::analytics::{asymptotic_moments, AsymptoticMoments, MomentSchedule};
use crate::calibration::{calibrate_all, read_scenarios_file, CalibrationReport, HistoricalSeries, TransitionStudy};
use crate::error::{Error, ErrorKind, Result};
use crate::gdp_stats::{asymptotic_rates, fan_chart, settled_horizon, write_fan_csv, AsymptoticRates};
use crate::netzero::{report as netzero_report, NetZeroReport};
use crate::params::{reduce, ParamsDocument, Provenance, ReducedParams};
use crate::simulator::{summary_rows, write_raw, write_summary_csv, SimConfig, SimMode, Simulator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Calibrate,
    Analyze,
    Simulate,
    Netzero,
    Migrate,
    Pipeline,
}

#[derive(Debug, Parser)]
#[command(name = "cerm", version, about = "Climate-extended credit risk model: calibration, analytics, simulation and migration conditioning")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Top-level random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Last horizon (years) for schedules, fan charts, simulations and migrations.
    #[arg(long)]
    pub horizon: Option<u32>,
    /// Number of Monte Carlo paths.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Command to run.
    #[arg(long, value_enum)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<PathBuf>,
    /// Parameter document used when no calibration inputs are given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub portfolio: Option<PathBuf>,
    /// Long-format per-period micro-correlations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub micro: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSettings {
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_mode")]
    pub mode: SimMode,
    /// Also write `paths.bin` with every simulated path.
    #[serde(default)]
    pub raw_dump: bool,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            paths: default_paths(),
            mode: default_mode(),
            raw_dump: false,
        }
    }
}

fn default_paths() -> usize {
    10_000
}

fn default_mode() -> SimMode {
    SimMode::Centered
}

fn default_horizon() -> u32 {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon: u32,
    #[serde(default)]
    pub inputs: Inputs,
    #[serde(default)]
    pub simulation: SimulationSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            out: None,
            seed: 0,
            horizon: default_horizon(),
            inputs: Inputs::default(),
            simulation: SimulationSettings::default(),
        }
    }
}

/// Fully resolved run: paths are absolute or relative to the working
/// directory, all flags applied.
#[derive(Debug, Clone)]
pub struct Run {
    pub command: Command,
    pub out: PathBuf,
    /// Config as hashed (paths as written, no output directory).
    pub config: RunConfig,
    pub inputs: Inputs,
    pub config_hash: String,
    /// Worker threads from `CERM_THREADS`; `None` lets rayon decide.
    pub threads: Option<usize>,
}

fn resolve(base: &Path, p: &Option<PathBuf>) -> Option<PathBuf> {
    p.as_ref().map(|p| if p.is_absolute() { p.clone() } else { base.join(p) })
}

impl Run {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let (mut config, base) = match &cli.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                let cfg: RunConfig = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (cfg, base)
            }
            None => (RunConfig::default(), PathBuf::new()),
        };
        if let Some(c) = cli.command {
            config.command = Some(c);
        }
        if let Some(s) = cli.seed {
            config.seed = s;
        }
        if let Some(h) = cli.horizon {
            config.horizon = h;
        }
        if let Some(p) = cli.paths {
            config.simulation.paths = p;
        }
        let command = config
            .command
            .ok_or_else(|| Error::Config("no command given (use --command or the config's `command`)".into()))?;
        if config.horizon < 1 {
            return Err(Error::Config("horizon must be ≥ 1".into()));
        }
        if config.simulation.paths < 1 {
            return Err(Error::Config("paths must be ≥ 1".into()));
        }
        let out = match (&cli.out, &config.out) {
            (Some(o), _) => o.clone(),
            (None, Some(o)) => resolve(&base, &Some(o.clone())).unwrap(),
            (None, None) => PathBuf::from("out"),
        };
        let i = &config.inputs;
        let inputs = Inputs {
            history: resolve(&base, &i.history),
            scenarios: resolve(&base, &i.scenarios),
            study: resolve(&base, &i.study),
            params: resolve(&base, &i.params),
            portfolio: resolve(&base, &i.portfolio),
            micro: resolve(&base, &i.micro),
        };
        let threads = threads_from_env()?;
        let mut hashed = config.clone();
        hashed.out = None;
        let config_hash = config_hash(&hashed, &inputs)?;
        Ok(Self {
            command,
            out,
            config: hashed,
            inputs,
            config_hash,
            threads,
        })
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            config_hash: self.config_hash.clone(),
            seed: self.config.seed,
        }
    }

    fn csv_comments(&self) -> Vec<String> {
        vec![format!("config_hash={} seed={}", self.config_hash, self.config.seed)]
    }
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("CERM_THREADS") {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("CERM_THREADS must be a non-negative integer, got `{v}`")))?;
            Ok(if n == 0 { None } else { Some(n) })
        }
        Err(_) => Ok(None),
    }
}

/// SHA-256 over the effective config and the bytes of every input file.
fn config_hash(config: &RunConfig, inputs: &Inputs) -> Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(config).expect("config serializes"));
    let files = [
        ("history", &inputs.history),
        ("scenarios", &inputs.scenarios),
        ("study", &inputs.study),
        ("params", &inputs.params),
        ("portfolio", &inputs.portfolio),
        ("micro", &inputs.micro),
    ];
    for (label, path) in files {
        if let Some(p) = path {
            let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
            h.update(label.as_bytes());
            h.update(Sha256::digest(&bytes));
        }
    }
    Ok(hex::encode(h.finalize()))
}

/// Seed of a subsystem: the first eight bytes of `SHA-256(seed_le ‖ label)`.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

#[derive(Serialize)]
struct WithProvenance<'a, T: Serialize> {
    #[serde(flatten)]
    body: &'a T,
    provenance: Provenance,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticsArtifact {
    pub reduced: ReducedParams,
    pub moments: AsymptoticMoments,
    pub gdp: AsymptoticRates,
    /// First horizon where `|q|^t < 1e-12`.
    pub settled_horizon: u32,
}

/// Files written by a run, in order.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<PathBuf>,
    pub notes: Vec<String>,
}

struct Writer<'a> {
    run: &'a Run,
    artifacts: Artifacts,
}

impl Writer<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.run.out.join(name)
    }

    fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        self.artifacts.files.push(p);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<()> {
        let doc = WithProvenance {
            body,
            provenance: self.run.provenance(),
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("artifact serializes");
        text.push('\n');
        self.bytes(name, text.as_bytes())
    }

    fn csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>, &[String]) -> std::io::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        let p = self.path(name);
        write(&mut buf, &self.run.csv_comments()).map_err(|e| Error::io(&p, e))?;
        self.bytes(name, &buf)
    }
}

/// Parameters either calibrated in this run or read from `inputs.params`.
fn obtain_params(run: &Run, w: &mut Writer, calibrate: bool) -> Result<ParamsDocument> {
    let i = &run.inputs;
    let have_calibration_inputs = i.history.is_some() || i.scenarios.is_some() || i.study.is_some();
    if calibrate || (have_calibration_inputs && i.params.is_none()) {
        let (Some(h), Some(s), Some(st)) = (&i.history, &i.scenarios, &i.study) else {
            return Err(Error::Config(
                "calibration needs inputs.history, inputs.scenarios and inputs.study".into(),
            ));
        };
        let series = HistoricalSeries::read(h)?;
        let scenarios = read_scenarios_file(s)?;
        let study = TransitionStudy::read(st)?;
        let cal = calibrate_all(&series, &study, &scenarios)?;
        let mut doc = ParamsDocument::new(cal.params, cal.history);
        doc.provenance = Some(run.provenance());
        let mut text = doc.to_json_pretty();
        text.push('\n');
        w.bytes("params.json", text.as_bytes())?;
        w.json::<CalibrationReport>("calibration_report.json", &cal.report)?;
        return Ok(doc);
    }
    match &i.params {
        Some(p) => ParamsDocument::read(p),
        None => Err(Error::Config(
            "no parameters: give inputs.params or the calibration inputs".into(),
        )),
    }
}

fn analyze(run: &Run, w: &mut Writer, doc: &ParamsDocument) -> Result<()> {
    let rp = reduce(&doc.params())?;
    let schedule = MomentSchedule::compute(&rp, run.config.horizon)?;
    w.csv("moments.csv", |buf, c| schedule.write_csv(buf, c))?;
    let artifact = AsymptoticsArtifact {
        reduced: rp,
        moments: asymptotic_moments(&rp)?,
        gdp: asymptotic_rates(&rp, &doc.history)?,
        settled_horizon: settled_horizon(&rp),
    };
    w.json("asymptotics.json", &artifact)?;
    let fan = fan_chart(&rp, &doc.history, run.config.horizon)?;
    w.csv("gdp_fan.csv", |buf, c| write_fan_csv(&fan, buf, c))
}

fn simulate(run: &Run, w: &mut Writer, doc: &ParamsDocument) -> Result<()> {
    let s = &run.config.simulation;
    let mut cfg = SimConfig::new(
        s.paths,
        run.config.horizon,
        derive_seed(run.config.seed, "simulate"),
        s.mode,
    );
    cfg.store_paths = s.raw_dump;
    cfg.threads = run.threads;
    let sim = match s.mode {
        SimMode::Centered => Simulator::centered(&reduce(&doc.params())?, cfg)?,
        SimMode::Full => Simulator::full(&doc.params(), &doc.history, cfg)?,
    };
    let ens = sim.run()?;
    let rows = summary_rows(&ens)?;
    w.csv("ensemble_summary.csv", |buf, c| write_summary_csv(&rows, buf, c))?;
    if s.raw_dump {
        let mut buf = Vec::new();
        write_raw(&ens, &mut buf)?;
        w.bytes("paths.bin", &buf)?;
    }
    Ok(())
}

fn netzero(w: &mut Writer, doc: &ParamsDocument) -> Result<()> {
    let rp = reduce(&doc.params())?;
    let report: NetZeroReport = netzero_report(&rp)?;
    w.json("netzero.json", &report)
}

fn migrate(run: &Run, w: &mut Writer, doc: &ParamsDocument) -> Result<()> {
    let Some(path) = &run.inputs.portfolio else {
        return Err(Error::Config("migrate needs inputs.portfolio".into()));
    };
    let mut portfolio = Portfolio::read(path)?;
    if let Some(m) = &run.inputs.micro {
        let file = fs::File::open(m).map_err(|e| Error::io(m, e))?;
        portfolio.apply_micro_periods(file)?;
    }
    if portfolio.micro_defaulted {
        w.artifacts
            .notes
            .push("portfolio has no micro-correlation columns; using (1, 1, 1) for every rating".into());
    }
    let rp = reduce(&doc.params())?;
    let schedule = MomentSchedule::compute(&rp, run.config.horizon)?;
    let records = migration_tensor(&portfolio, &schedule, run.config.horizon, &BaselCorporate)?;
    w.csv("migrations.csv", |buf, c| write_migrations_csv(&records, buf, c))
}

/// Executes a resolved run and writes its artifacts and `run.log`.
pub fn execute(run: &Run) -> Result<Artifacts> {
    fs::create_dir_all(&run.out).map_err(|e| Error::io(&run.out, e))?;
    let mut w = Writer {
        run,
        artifacts: Artifacts::default(),
    };
    match run.command {
        Command::Calibrate => {
            obtain_params(run, &mut w, true)?;
        }
        Command::Analyze => {
            let doc = obtain_params(run, &mut w, false)?;
            analyze(run, &mut w, &doc)?;
        }
        Command::Simulate => {
            let doc = obtain_params(run, &mut w, false)?;
            simulate(run, &mut w, &doc)?;
        }
        Command::Netzero => {
            let doc = obtain_params(run, &mut w, false)?;
            netzero(&mut w, &doc)?;
        }
        Command::Migrate => {
            let doc = obtain_params(run, &mut w, false)?;
            migrate(run, &mut w, &doc)?;
        }
        Command::Pipeline => {
            let doc = obtain_params(run, &mut w, false)?;
            analyze(run, &mut w, &doc)?;
            simulate(run, &mut w, &doc)?;
            netzero(&mut w, &doc)?;
            if run.inputs.portfolio.is_some() {
                migrate(run, &mut w, &doc)?;
            } else {
                w.artifacts
                    .notes
                    .push("no portfolio given; migration step skipped".into());
            }
        }
    }
    let artifacts = w.artifacts;
    write_log(run, &artifacts)?;
    Ok(artifacts)
}

fn write_log(run: &Run, artifacts: &Artifacts) -> Result<()> {
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut log = BTreeMap::new();
    log.insert("finished_unix_seconds", serde_json::json!(stamp));
    log.insert("command", serde_json::json!(run.command));
    log.insert("config", serde_json::to_value(&run.config).expect("config serializes"));
    log.insert("config_hash", serde_json::json!(run.config_hash));
    log.insert("seed", serde_json::json!(run.config.seed));
    log.insert(
        "artifacts",
        serde_json::json!(artifacts
            .files
            .iter()
            .map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default())
            .collect::<Vec<_>>()),
    );
    log.insert("notes", serde_json::json!(artifacts.notes));
    let p = run.out.join("run.log");
    let mut text = serde_json::to_string_pretty(&log).expect("log serializes");
    text.push('\n');
    fs::write(&p, text).map_err(|e| Error::io(&p, e))
}

/// Exit status for an error: 2 configuration, 3 data, 4 model domain.
pub fn exit_code(err: &Error) -> i32 {
    match err.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Domain => 4,
    }
}

/// Parses arguments, runs, reports errors on stderr and returns the exit
/// status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = Run::from_cli(&cli).and_then(|run| execute(&run).map(|a| (run, a)));
    match outcome {
        Ok((_, artifacts)) => {
            for note in &artifacts.notes {
                eprintln!("note: {note}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
