//! Run configuration, command dispatch and output writers.
//!
//! Configurations are TOML (or JSON when the file ends in `.json`):
//!
//! ```toml
//! [problem]
//! U11 = 1.0
//! U22 = 1.0
//! U12 = 1.5
//! fixed_n = { n1 = 1.0, n2 = 1.0 }
//! v1 = { family = "square_well", params = { a = 0.0, b = 1.0 } }
//! v2 = { family = "square_well", params = { a = 0.0, b = 1.0 } }
//! ```

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::groundstate::{self, search_window, SolveOptions, SolveReport, SweepParam, SweepTable, SCHEMA};
use crate::numeric::levelset::LevelOptions;
use crate::numeric::Interval;
use crate::oracle::{self, DescentOptions, Grid};
use crate::potential::PotentialSpec;
use crate::profiles::{fmt17, DensityProfile, Landscape, Species};
use crate::scaling::{from_reduced, to_reduced, Ensemble, RawParams, ReducedParams};
use crate::settings::Tolerances;
use crate::stability::{assemble_hessian, nonmax_exclusion, ExclusionReport, HessianReport};
use crate::walls::{skeletons_for, Skeleton, WallConfig, WallSolver};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumbersBlock {
    pub n1: f64,
    pub n2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuBlock {
    pub mu1: f64,
    pub mu2: f64,
}

/// A potential as written in a configuration file. `tabulated` also
/// accepts `params = { path = "v.csv" }`, a two-column `x,V` file resolved
/// relative to the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialInput {
    pub family: String,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_hint: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    #[serde(rename = "U11")]
    pub u11: f64,
    #[serde(rename = "U22")]
    pub u22: f64,
    #[serde(rename = "U12")]
    pub u12: f64,
    #[serde(default)]
    pub proportional: bool,
    #[serde(default)]
    pub fixed_n: Option<NumbersBlock>,
    #[serde(default)]
    pub fixed_mu: Option<MuBlock>,
    pub v1: PotentialInput,
    /// Defaults to `v1` for proportional problems.
    #[serde(default)]
    pub v2: Option<PotentialInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverBlock {
    pub tol_root: f64,
    pub tol_stat: f64,
    pub tol_norm: f64,
    pub tol_energy: f64,
    pub tol_oracle: f64,
    pub max_walls: Option<usize>,
    pub window: Option<[f64; 2]>,
    pub oracle: bool,
    pub oracle_points: usize,
    pub oracle_random_starts: usize,
    pub level_cells: usize,
    pub workers: Option<usize>,
    pub seed: u64,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let t = Tolerances::default();
        let o = SolveOptions::default();
        Self {
            tol_root: t.tol_root,
            tol_stat: t.tol_stat,
            tol_norm: t.tol_norm,
            tol_energy: t.tol_energy,
            tol_oracle: t.tol_oracle,
            max_walls: None,
            window: None,
            oracle: true,
            oracle_points: o.oracle_points,
            oracle_random_starts: o.oracle_random_starts,
            level_cells: LevelOptions::default().cells,
            workers: None,
            seed: o.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: PathBuf,
    /// Points per profile piece in density CSVs, and total points in plot data.
    pub samples: usize,
    pub report: String,
    pub profile: String,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("."),
            samples: 2001,
            report: "report.json".into(),
            profile: "profile.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub param: SweepParam,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub start: Option<f64>,
    #[serde(default)]
    pub stop: Option<f64>,
    #[serde(default)]
    pub steps: Option<usize>,
}

impl SweepBlock {
    pub fn grid(&self) -> Result<Vec<f64>> {
        match (&self.values, self.start, self.stop, self.steps) {
            (Some(v), None, None, None) if !v.is_empty() => Ok(v.clone()),
            (None, Some(a), Some(b), Some(n)) if n >= 2 && a.is_finite() && b.is_finite() => {
                Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
            }
            (None, Some(a), Some(_), Some(1)) => Ok(vec![a]),
            _ => Err(Error::Config(
                "sweep: give either a nonempty `values` list or all of `start`, `stop`, `steps`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallsBlock {
    /// Initial or exact wall positions, increasing.
    pub walls: Vec<f64>,
    /// Species of the leftmost interval, 1 or 2.
    pub leading: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
    #[serde(default)]
    pub stability: Option<WallsBlock>,
    /// Hex SHA-256 of the configuration text.
    #[serde(skip)]
    pub hash: String,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Parses configuration text; `json` selects the JSON syntax.
pub fn parse_config_str(text: &str, json: bool) -> Result<RunConfig> {
    let mut cfg: RunConfig = if json {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?
    } else {
        toml::from_str(text).map_err(|e| Error::Config(describe_toml_error(text, &e)))?
    };
    cfg.hash = sha256_hex(text.as_bytes());
    cfg.validate()?;
    Ok(cfg)
}

fn describe_toml_error(text: &str, e: &toml::de::Error) -> String {
    let msg = e.message().trim();
    match e.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!("line {line}: {msg}")
        }
        None => msg.to_string(),
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let mut cfg = parse_config_str(&text, json).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(cfg)
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        let p = &self.problem;
        if p.fixed_n.is_some() == p.fixed_mu.is_some() {
            return Err(Error::Config(
                "exactly one ensemble must be given: `fixed_n` or `fixed_mu`".into(),
            ));
        }
        for (name, u) in [("U11", p.u11), ("U22", p.u22), ("U12", p.u12)] {
            if !(u > 0.0 && u.is_finite()) {
                return Err(Error::Validation(format!("{name} must be positive and finite, got {u}")));
            }
        }
        if p.v2.is_none() && !p.proportional {
            return Err(Error::Config("`v2` is required unless `proportional = true`".into()));
        }
        self.tolerances().validate()?;
        let s = &self.solver;
        if s.oracle_points < 2 || s.level_cells == 0 || self.output.samples < 2 {
            return Err(Error::Config("oracle_points and samples must be >= 2, level_cells >= 1".into()));
        }
        if s.workers == Some(0) {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        if let Some(w) = s.window {
            window_of(w)?;
        }
        if let Some(b) = &self.stability {
            if !matches!(b.leading, 1 | 2) {
                return Err(Error::Config(format!("stability.leading must be 1 or 2, got {}", b.leading)));
            }
        }
        Ok(())
    }

    pub fn tolerances(&self) -> Tolerances {
        let s = &self.solver;
        Tolerances {
            tol_root: s.tol_root,
            tol_stat: s.tol_stat,
            tol_norm: s.tol_norm,
            tol_energy: s.tol_energy,
            tol_oracle: s.tol_oracle,
        }
    }

    pub fn ensemble(&self) -> Ensemble {
        match (self.problem.fixed_n, self.problem.fixed_mu) {
            (Some(NumbersBlock { n1, n2 }), _) => Ensemble::FixedN { n1, n2 },
            (_, Some(MuBlock { mu1, mu2 })) => Ensemble::FixedMu { mu1, mu2 },
            (None, None) => unreachable!("validated"),
        }
    }

    pub fn solve_options(&self) -> Result<SolveOptions> {
        let s = &self.solver;
        Ok(SolveOptions {
            tol: self.tolerances(),
            max_walls: s.max_walls,
            window: s.window.map(window_of).transpose()?,
            level: LevelOptions {
                cells: s.level_cells,
                tol_root: s.tol_root,
                ..LevelOptions::default()
            },
            oracle_check: s.oracle,
            oracle_points: s.oracle_points,
            oracle_random_starts: s.oracle_random_starts,
            seed: s.seed,
        })
    }

    /// The problem in laboratory units.
    pub fn raw_params(&self) -> Result<RawParams> {
        let p = &self.problem;
        let v1 = build_potential(&p.v1, &self.base_dir).map_err(|e| context("problem.v1", e))?;
        let v2 = match &p.v2 {
            Some(v) => build_potential(v, &self.base_dir).map_err(|e| context("problem.v2", e))?,
            None => v1.clone(),
        };
        let raw = RawParams {
            u11: p.u11,
            u22: p.u22,
            u12: p.u12,
            ensemble: self.ensemble(),
            v1,
            v2,
            proportional: p.proportional,
        };
        raw.validate()?;
        Ok(raw)
    }
}

fn context(what: &str, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("{what}: {m}")),
        Error::Validation(m) => Error::Validation(format!("{what}: {m}")),
        other => other,
    }
}

fn window_of(w: [f64; 2]) -> Result<Interval> {
    if !(w[0].is_finite() && w[1].is_finite() && w[0] < w[1]) {
        return Err(Error::Config(format!("window must be an increasing pair, got {w:?}")));
    }
    Ok(Interval { lo: w[0], hi: w[1] })
}

/// Reads a two-column `x,V` CSV; a non-numeric first line is a header.
pub fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let (mut x, mut v) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match cols.as_slice() {
            [a, b] => a.parse::<f64>().ok().zip(b.parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some((a, b)) => {
                x.push(a);
                v.push(b);
            }
            None if i == 0 => {}
            None => {
                return Err(Error::Config(format!("{}: line {}: expected `x,V`", path.display(), i + 1)));
            }
        }
    }
    Ok((x, v))
}

pub fn build_potential(input: &PotentialInput, base: &Path) -> Result<PotentialSpec> {
    let path = match (&input.params, input.family.as_str()) {
        (serde_json::Value::Object(m), "tabulated") if m.contains_key("path") => {
            if m.len() != 1 {
                return Err(Error::Config("tabulated `path` cannot be combined with other params".into()));
            }
            match &m["path"] {
                serde_json::Value::String(s) => Some(base.join(s)),
                _ => return Err(Error::Config("tabulated `path` must be a string".into())),
            }
        }
        _ => None,
    };
    let mut spec = match path {
        Some(p) => {
            let (x, v) = read_table(&p)?;
            PotentialSpec::tabulated(x, v)?
        }
        None => {
            let tagged = serde_json::json!({ "family": input.family, "params": input.params });
            let spec: PotentialSpec =
                serde_json::from_value(tagged).map_err(|e| Error::Config(e.to_string()))?;
            spec.finalize()?
        }
    };
    if let Some(s) = input.scale {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Validation(format!("scale must be positive, got {s}")));
        }
        spec.scale = s;
    }
    if let Some(h) = input.domain_hint {
        spec.domain_hint = Some(window_of(h)?);
    }
    Ok(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Enumerate,
    Stability,
    Sweep,
    Oracle,
    PlotData,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Enumerate => "enumerate",
            Command::Stability => "stability",
            Command::Sweep => "sweep",
            Command::Oracle => "oracle",
            Command::PlotData => "plot-data",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Ok,
    Failure,
    Validation,
    NoConvergence,
    OracleDisagreement,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Ok => 0,
            ExitStatus::Failure => 1,
            ExitStatus::Validation => 2,
            ExitStatus::NoConvergence => 3,
            ExitStatus::OracleDisagreement => 4,
        }
    }

    pub fn of_error(e: &Error) -> Self {
        match e {
            Error::NoConvergence { .. } => ExitStatus::NoConvergence,
            Error::Io(_) | Error::Quadrature(_) | Error::Resolution { .. } => ExitStatus::Failure,
            _ => ExitStatus::Validation,
        }
    }
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(d) = &self.out {
            cfg.output.dir = d.clone();
        }
        if let Some(n) = self.samples {
            if n < 2 {
                return Err(Error::Config("--samples must be >= 2".into()));
            }
            cfg.output.samples = n;
        }
        if let Some(s) = self.seed {
            cfg.solver.seed = s;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: ExitStatus,
    pub artifacts: Vec<PathBuf>,
    /// Human-readable summary for the terminal.
    pub summary: String,
}

/// Sizes the global worker pool: `requested`, capped by `TFPS_WORKERS`.
pub fn configure_workers(requested: Option<usize>) -> Result<usize> {
    let cap = match std::env::var("TFPS_WORKERS") {
        Ok(s) => Some(
            s.trim()
                .parse::<usize>()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| Error::Config(format!("TFPS_WORKERS must be a positive integer, got {s:?}")))?,
        ),
        Err(_) => None,
    };
    let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let n = requested.unwrap_or(available).min(cap.unwrap_or(usize::MAX)).max(1);
    // A pool built earlier in the process stays in place.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(n)
}

struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let file = fs::File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush()?;
        self.written.push(path.clone());
        Ok(path)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(w)?;
            Ok(())
        })
    }
}

/// Runs `command` and writes its artifacts to the output directory.
pub fn run(command: Command, cfg: &RunConfig) -> Result<RunOutcome> {
    let raw = cfg.raw_params()?;
    let reduced = to_reduced(&raw)?;
    let opts = cfg.solve_options()?;
    let mut out = Outputs::new(&cfg.output.dir)?;
    let (status, summary) = match command {
        Command::Solve => run_solve(cfg, &raw, &reduced, &opts, &mut out)?,
        Command::Enumerate => run_enumerate(&reduced, &opts, &mut out)?,
        Command::Stability => run_stability(cfg, &reduced, &opts, &mut out)?,
        Command::Sweep => run_sweep(cfg, &reduced, &opts, &mut out)?,
        Command::Oracle => run_oracle(cfg, &raw, &reduced, &opts, &mut out)?,
        Command::PlotData => run_plot_data(cfg, &raw, &reduced, &opts, &mut out)?,
    };
    Ok(RunOutcome {
        status,
        artifacts: out.written,
        summary,
    })
}

/// Chemical potentials, particle numbers and the ensemble back in raw units.
/// Energies are unit-invariant; Hessian and exclusion data stay reduced.
pub fn report_to_raw(report: &mut SolveReport, raw: &RawParams, config_hash: &str) {
    let s = [raw.u11.sqrt(), raw.u22.sqrt()];
    for c in &mut report.candidates {
        c.mu = [c.mu[0] * s[0], c.mu[1] * s[1]];
        c.numbers = [c.numbers[0] / s[0], c.numbers[1] / s[1]];
    }
    report.ensemble = raw.ensemble;
    report.provenance.config_hash = Some(config_hash.to_string());
    if s != [1.0, 1.0] {
        report
            .notes
            .push("chemical potentials and particle numbers are in raw units; hessian and exclusion entries in reduced units".into());
    }
}

fn write_profile(out: &mut Outputs, name: &str, p: &DensityProfile, raw: &RawParams, samples: usize) -> Result<PathBuf> {
    let p = from_reduced(p, raw)?;
    out.write(name, |w| p.write_csv(w, samples))
}

fn run_solve(
    cfg: &RunConfig,
    raw: &RawParams,
    p: &ReducedParams,
    opts: &SolveOptions,
    out: &mut Outputs,
) -> Result<(ExitStatus, String)> {
    let sol = groundstate::solve_ground_state(p, opts)?;
    let mut report = sol.report.clone();
    report_to_raw(&mut report, raw, &cfg.hash);
    out.json(&cfg.output.report, &report)?;
    if let Some(prof) = sol.ground_profile() {
        write_profile(out, &cfg.output.profile, prof, raw, cfg.output.samples)?;
    }
    let mut summary = format!("regime: {:?}\n", report.regime);
    match &report.ground_state {
        Some(g) => {
            let _ = writeln!(summary, "ground state energy: {}", fmt17(g.energy));
            for c in report.ground_candidates() {
                let _ = writeln!(summary, "  candidate {} ({:?}, {} walls) {:?}", c.id, c.kind, c.walls.len(), c.walls);
            }
        }
        None => summary.push_str("no ground state found\n"),
    }
    for n in &report.notes {
        let _ = writeln!(summary, "note: {n}");
    }
    let status = if report.oracle_disagrees() {
        ExitStatus::OracleDisagreement
    } else if report.convergence_failures > 0 {
        ExitStatus::NoConvergence
    } else {
        ExitStatus::Ok
    };
    Ok((status, summary))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopologyEntry {
    pub walls: usize,
    pub leading: Species,
    pub labels: Vec<i8>,
    pub is_maximal: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopologyList {
    pub schema: u32,
    pub window: Interval,
    /// Largest number of isolated solutions of `V1 − V2 = const`.
    pub max_roots: usize,
    pub phi_constant: bool,
    pub topologies: Vec<TopologyEntry>,
}

pub fn enumerate(p: &ReducedParams, opts: &SolveOptions) -> Result<TopologyList> {
    let window = match opts.window {
        Some(w) => w,
        None => search_window(p, &opts.level)?,
    };
    let land = Landscape::new(p.v1.clone(), p.v2.clone(), window, opts.level)?;
    let solver = WallSolver::new(&land, p.alpha, opts.tol)?;
    let b = solver.bound();
    let topologies = skeletons_for(b, opts.max_walls.unwrap_or(usize::MAX))
        .into_iter()
        .map(|sk| TopologyEntry {
            walls: sk.n,
            leading: sk.leading,
            labels: sk.labels.clone(),
            is_maximal: sk.is_maximal,
        })
        .collect();
    Ok(TopologyList {
        schema: SCHEMA,
        window,
        max_roots: b.max_roots,
        phi_constant: b.constant,
        topologies,
    })
}

fn run_enumerate(p: &ReducedParams, opts: &SolveOptions, out: &mut Outputs) -> Result<(ExitStatus, String)> {
    let list = enumerate(p, opts)?;
    out.json("topologies.json", &list)?;
    let mut s = format!("wall bound {} on [{}, {}]\n", list.max_roots, list.window.lo, list.window.hi);
    for t in &list.topologies {
        let _ = writeln!(
            s,
            "  {} walls, species {} leading{}",
            t.walls,
            t.leading.idx() + 1,
            if t.is_maximal { " (maximal)" } else { "" }
        );
    }
    Ok((ExitStatus::Ok, s))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityOutput {
    pub schema: u32,
    pub requested_walls: Vec<f64>,
    pub leading: Species,
    /// Stationary walls the request converged to.
    pub walls: Vec<f64>,
    pub mu: [f64; 2],
    pub numbers: [f64; 2],
    pub internal_energy: f64,
    pub grand_canonical_energy: f64,
    pub stationarity_error: f64,
    pub hessian: HessianReport,
    pub exclusion: Option<ExclusionReport>,
    pub config_hash: String,
}

/// Stationary configuration nearest to `walls` with the given topology.
pub fn stationary_near(solver: &WallSolver, p: &ReducedParams, walls: &[f64], leading: Species) -> Result<WallConfig> {
    let sk = Skeleton::new(walls.len(), leading, walls.len() == solver.bound().max_roots && walls.len() > 0);
    match p.ensemble {
        Ensemble::FixedN { n1, n2 } => solver.solve_fixed_n(&sk, [n1, n2], walls),
        Ensemble::FixedMu { mu1, mu2 } => {
            let dist = |c: &WallConfig| c.walls.iter().zip(walls).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            solver
                .solve_fixed_mu(&sk, [mu1, mu2])?
                .into_iter()
                .min_by(|a, b| dist(a).total_cmp(&dist(b)))
                .ok_or_else(|| Error::InfeasibleTopology("no stationary configuration with this topology".into()))
        }
    }
}

fn run_stability(cfg: &RunConfig, p: &ReducedParams, opts: &SolveOptions, out: &mut Outputs) -> Result<(ExitStatus, String)> {
    let block = cfg
        .stability
        .as_ref()
        .ok_or_else(|| Error::Config("the stability command needs a [stability] block with `walls` and `leading`".into()))?;
    let leading = if block.leading == 1 { Species::One } else { Species::Two };
    let window = match opts.window {
        Some(w) => w,
        None => search_window(p, &opts.level)?,
    };
    let land = Landscape::new(p.v1.clone(), p.v2.clone(), window, opts.level)?;
    let solver = WallSolver::new(&land, p.alpha, opts.tol)?;
    let c = stationary_near(&solver, p, &block.walls, leading)?;
    let kind = p.ensemble.kind();
    let hessian = assemble_hessian(&c, kind, &opts.tol)?;
    let exclusion = (c.n() > 0).then(|| nonmax_exclusion(&c, &land, p.beta, kind));
    let report = StabilityOutput {
        schema: SCHEMA,
        requested_walls: block.walls.clone(),
        leading,
        walls: c.walls.clone(),
        mu: c.mu,
        numbers: c.numbers,
        internal_energy: c.internal_energy(),
        grand_canonical_energy: c.grand_canonical_energy(),
        stationarity_error: c.stationarity_error(),
        hessian,
        exclusion,
        config_hash: cfg.hash.clone(),
    };
    out.json("stability.json", &report)?;
    let s = format!(
        "walls {:?}\npositive definite: {}\nthermodynamic limit stable: {}\nexcluded: {}\n",
        report.walls,
        report.hessian.positive_definite,
        report.hessian.thermo_limit.stable,
        report.exclusion.as_ref().is_some_and(|e| e.excluded)
    );
    Ok((ExitStatus::Ok, s))
}

/// Sweep table as CSV `value,e_mixed,e_separated,verdict,forbidden,ground_walls,error`.
pub fn write_sweep_csv<W: Write + ?Sized>(t: &SweepTable, w: &mut W) -> Result<()> {
    writeln!(w, "value,e_mixed,e_separated,verdict,forbidden,ground_walls,error")?;
    let num = |x: Option<f64>| x.map(fmt17).unwrap_or_default();
    for r in &t.rows {
        let verdict = r
            .verdict
            .map(|v| format!("{v:?}").to_lowercase())
            .unwrap_or_default();
        let err = r.error.as_deref().unwrap_or("").replace(['"', ','], ";");
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            fmt17(r.value),
            num(r.e_mixed),
            num(r.e_separated),
            verdict,
            r.forbidden,
            r.ground_walls.map(|n| n.to_string()).unwrap_or_default(),
            err
        )?;
    }
    Ok(())
}

fn run_sweep(cfg: &RunConfig, p: &ReducedParams, opts: &SolveOptions, out: &mut Outputs) -> Result<(ExitStatus, String)> {
    let block = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("the sweep command needs a [sweep] block".into()))?;
    let grid = block.grid()?;
    let table = groundstate::sweep(p, block.param, &grid, opts)?;
    out.write("sweep.csv", |w| write_sweep_csv(&table, w))?;
    out.json("sweep.json", &table)?;
    let mut s = format!("{} points\n", table.rows.len());
    for c in &table.crossings {
        let _ = writeln!(s, "crossing at {}", fmt17(*c));
    }
    let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        let _ = writeln!(s, "{failed} points failed");
    }
    let status = if table
        .rows
        .iter()
        .any(|r| r.error.as_deref().is_some_and(|e| e.starts_with("no convergence")))
    {
        ExitStatus::NoConvergence
    } else {
        ExitStatus::Ok
    };
    Ok((status, s))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleOutput {
    pub schema: u32,
    pub method: String,
    pub points: usize,
    pub window: Interval,
    pub seed: u64,
    pub restarts: usize,
    pub energy: f64,
    pub numbers: [f64; 2],
    /// Chemical potentials (given at fixed μ, read off the gradient at fixed N).
    pub mu: [f64; 2],
    pub mu_spread: Option<[f64; 2]>,
    pub iterations: Option<usize>,
    pub converged: bool,
    pub tied_points: usize,
    pub config_hash: String,
}

fn run_oracle(
    cfg: &RunConfig,
    raw: &RawParams,
    p: &ReducedParams,
    opts: &SolveOptions,
    out: &mut Outputs,
) -> Result<(ExitStatus, String)> {
    let window = match opts.window {
        Some(w) => w,
        None => search_window(p, &opts.level)?,
    };
    // The oracle works with the raw interaction matrix directly.
    let grid = Grid::uniform(window, opts.oracle_points, &raw.v1, &raw.v2)?;
    let q = raw.form();
    let (dens, report) = match raw.ensemble {
        Ensemble::FixedMu { mu1, mu2 } => {
            let r = oracle::pointwise_minimize(&grid, [mu1, mu2], q);
            let numbers = r.densities.numbers(&grid);
            let rep = OracleOutput {
                schema: SCHEMA,
                method: "pointwise".into(),
                points: grid.len(),
                window,
                seed: opts.seed,
                restarts: 0,
                energy: r.energy,
                numbers,
                mu: [mu1, mu2],
                mu_spread: None,
                iterations: None,
                converged: true,
                tied_points: r.ties.len(),
                config_hash: cfg.hash.clone(),
            };
            (r.densities, rep)
        }
        Ensemble::FixedN { n1, n2 } => {
            let d = DescentOptions {
                random_starts: opts.oracle_random_starts,
                seed: opts.seed,
                ..DescentOptions::default()
            };
            let r = oracle::oracle_fixed_n(&grid, [n1, n2], q, &d);
            let rep = OracleOutput {
                schema: SCHEMA,
                method: "projected_descent".into(),
                points: grid.len(),
                window,
                seed: opts.seed,
                restarts: opts.oracle_random_starts + 2,
                energy: r.energy,
                numbers: [n1, n2],
                mu: r.mu,
                mu_spread: Some(r.mu_spread),
                iterations: Some(r.iterations),
                converged: r.converged,
                tied_points: 0,
                config_hash: cfg.hash.clone(),
            };
            (r.densities, rep)
        }
    };
    out.json("oracle.json", &report)?;
    out.write("oracle.csv", |w| dens.write_csv(&grid, w))?;
    let s = format!(
        "{} on {} points: energy {}, converged {}\n",
        report.method,
        report.points,
        fmt17(report.energy),
        report.converged
    );
    let status = if report.converged { ExitStatus::Ok } else { ExitStatus::NoConvergence };
    Ok((status, s))
}

/// Columnar `x,V,rho1,rho2` on `samples` uniform points of `window`
/// (species-1 potential in the `V` column).
pub fn write_plot_data<W: Write + ?Sized>(p: &DensityProfile, window: Interval, samples: usize, w: &mut W) -> Result<()> {
    writeln!(w, "x,V,rho1,rho2")?;
    let n = samples.max(2);
    for i in 0..n {
        let x = if i + 1 == n {
            window.hi
        } else {
            window.lo + window.len() * i as f64 / (n - 1) as f64
        };
        let (r1, r2) = p.density(x);
        writeln!(w, "{},{},{},{}", fmt17(x), fmt17(p.potential(0).evaluate(x)), fmt17(r1), fmt17(r2))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlotEntry {
    pub file: String,
    pub candidate: usize,
    pub walls: Vec<f64>,
    pub leading: Option<Species>,
    pub is_maximal: bool,
    pub stable: bool,
    pub excluded: bool,
    pub ground_state: bool,
    pub energy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlotIndex {
    pub schema: u32,
    pub window: Interval,
    pub columns: [String; 4],
    pub files: Vec<PlotEntry>,
    pub config_hash: String,
}

fn run_plot_data(
    cfg: &RunConfig,
    raw: &RawParams,
    p: &ReducedParams,
    opts: &SolveOptions,
    out: &mut Outputs,
) -> Result<(ExitStatus, String)> {
    let opts = SolveOptions {
        oracle_check: false,
        ..*opts
    };
    let sol = groundstate::solve_ground_state(p, &opts)?;
    let window = sol.report.provenance.window;
    let ground: Vec<usize> = sol.report.ground_state.as_ref().map(|g| g.ids.clone()).unwrap_or_default();
    let mut files = Vec::new();
    for (c, prof) in sol.report.candidates.iter().zip(&sol.profiles) {
        let name = match c.leading {
            Some(l) => format!("candidate_{:02}_{}walls_lead{}.csv", c.id, c.walls.len(), l.idx() + 1),
            None => format!("candidate_{:02}_mixed.csv", c.id),
        };
        let prof = from_reduced(prof, raw)?;
        out.write(&name, |w| write_plot_data(&prof, window, cfg.output.samples, w))?;
        files.push(PlotEntry {
            file: name,
            candidate: c.id,
            walls: c.walls.clone(),
            leading: c.leading,
            is_maximal: c.is_maximal,
            stable: c.stable,
            excluded: c.exclusion.as_ref().is_some_and(|e| e.excluded),
            ground_state: ground.contains(&c.id),
            energy: c.energy,
        });
    }
    if let Some(&g) = ground.first() {
        let prof = from_reduced(&sol.profiles[g], raw)?;
        out.write("ground_state.csv", |w| write_plot_data(&prof, window, cfg.output.samples, w))?;
    }
    let index = PlotIndex {
        schema: SCHEMA,
        window,
        columns: ["x".into(), "V".into(), "rho1".into(), "rho2".into()],
        files,
        config_hash: cfg.hash.clone(),
    };
    out.json("plot_index.json", &index)?;
    Ok((ExitStatus::Ok, format!("{} plot files\n", index.files.len() + usize::from(!ground.is_empty()))))
}
