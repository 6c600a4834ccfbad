//! Command pipelines behind the CLI.
//!
//! Each command writes its CSV plus a `record.txt` of `key = value` lines
//! (inputs, results and diagnostics). Wall time lives only in the record so
//! the CSVs stay byte-identical between runs.

use crate::basestate::{solve_base_state, BaseState, SuspensionParams};
use crate::cache::Cache;
use crate::config::{CaseConfig, KEYS};
use crate::error::Error;
use crate::output::{self, fmt_f64};
use crate::perturb::AngularQuadrature;
use crate::radiative::{solve_basic_radiation, BasicRadiation};
use crate::stability::{CriticalMode, NeutralBranch, StabilityProblem};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Radiation,
    BaseState,
    NeutralCurve,
    Critical,
    Table,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Radiation => "radiation",
            Command::BaseState => "base-state",
            Command::NeutralCurve => "neutral-curve",
            Command::Critical => "critical",
            Command::Table => "table",
        }
    }
}

/// Pipeline step a failure is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Radiation,
    BaseState,
    Setup,
    NeutralCurve,
    Critical,
    Output,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Radiation => "radiation",
            Stage::BaseState => "base-state",
            Stage::Setup => "perturbation setup",
            Stage::NeutralCurve => "neutral-curve",
            Stage::Critical => "critical",
            Stage::Output => "output",
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("stage `{}` failed: {source}", stage.as_str())]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, StageError>;
}

impl<T> AtStage<T> for crate::Result<T> {
    fn at(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

/// Outcome of a command that ran to completion; `failures` lists table
/// cases that could not be solved (their rows are flagged in the CSV).
#[derive(Debug, Default)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub failures: Vec<String>,
}

pub struct Runner {
    pub out: PathBuf,
    pub cache: Cache,
}

impl Runner {
    pub fn new(out: impl Into<PathBuf>, use_cache: bool) -> Self {
        let out = out.into();
        let cache = if use_cache { Cache::new(out.join("cache")) } else { Cache::disabled() };
        Self { out, cache }
    }

    pub fn run(&self, cmd: Command, cfg: &CaseConfig) -> Result<RunOutcome, StageError> {
        std::fs::create_dir_all(&self.out).map_err(Error::from).at(Stage::Output)?;
        match cmd {
            Command::Radiation => self.radiation(cfg),
            Command::BaseState => self.base_state(cfg),
            Command::NeutralCurve => self.solve_case(cfg, &self.out, false).map(|(o, _)| o),
            Command::Critical => self.solve_case(cfg, &self.out, true).map(|(o, _)| o),
            Command::Table => self.table(cfg),
        }
    }

    fn basic_radiation(&self, cfg: &CaseConfig) -> Result<BasicRadiation, StageError> {
        let rp = cfg.params.radiation_params().at(Stage::Radiation)?;
        self.cache
            .radiation(&rp, cfg.n_tau, || solve_basic_radiation(&rp, cfg.n_tau))
            .at(Stage::Radiation)
    }

    fn equilibrium(&self, cfg: &CaseConfig) -> Result<(BasicRadiation, BaseState), StageError> {
        let rad = self.basic_radiation(cfg)?;
        let bs = self
            .cache
            .base_state(&cfg.params, cfg.n_tau, cfg.n_z, || solve_base_state(&cfg.params, &rad, cfg.n_z))
            .at(Stage::BaseState)?;
        Ok((rad, bs))
    }

    fn radiation(&self, cfg: &CaseConfig) -> Result<RunOutcome, StageError> {
        let t0 = Instant::now();
        let rad = self.basic_radiation(cfg)?;
        let csv = self.out.join("radiation.csv");
        output::write_csv_file(&csv, &output::RADIATION_HEADER, &output::radiation_rows(&rad)).at(Stage::Output)?;
        let mut rec = Record::new(Command::Radiation, cfg);
        rec.put("radiation_residual", fmt_f64(rad.residual));
        rec.put("radiation_iterations", rad.iterations);
        rec.put("wall_time_s", t0.elapsed().as_secs_f64());
        let record = rec.write(&self.out)?;
        Ok(RunOutcome {
            files: vec![csv, record],
            failures: Vec::new(),
        })
    }

    fn base_state(&self, cfg: &CaseConfig) -> Result<RunOutcome, StageError> {
        let t0 = Instant::now();
        let (rad, bs) = self.equilibrium(cfg)?;
        let csv = self.out.join("base_state.csv");
        output::write_csv_file(&csv, &output::BASE_STATE_HEADER, &output::base_state_rows(&bs)).at(Stage::Output)?;
        let mut rec = Record::new(Command::BaseState, cfg);
        rec.put("radiation_residual", fmt_f64(rad.residual));
        rec.put("total_cells", fmt_f64(bs.total_cells()));
        rec.put("wall_time_s", t0.elapsed().as_secs_f64());
        let record = rec.write(&self.out)?;
        Ok(RunOutcome {
            files: vec![csv, record],
            failures: Vec::new(),
        })
    }

    /// Neutral curve and, when `critical` is set, the critical mode for one
    /// case, written under `dir`.
    fn solve_case(
        &self,
        cfg: &CaseConfig,
        dir: &Path,
        critical: bool,
    ) -> Result<(RunOutcome, Option<CriticalMode>), StageError> {
        let t0 = Instant::now();
        std::fs::create_dir_all(dir).map_err(Error::from).at(Stage::Output)?;
        let (rad, bs) = self.equilibrium(cfg)?;
        let quad = AngularQuadrature::new(cfg.n_polar, cfg.n_azimuth).at(Stage::Setup)?;
        let problem = StabilityProblem::new(&bs, &quad).at(Stage::Setup)?;
        let sc = cfg.params.sc;
        let branches = problem
            .trace_neutral_curve(cfg.k_min, cfg.k_max, cfg.n_k, sc)
            .at(Stage::NeutralCurve)?;
        let csv = dir.join("branches.csv");
        output::write_csv_file(&csv, &output::BRANCH_HEADER, &output::branch_rows(&branches)).at(Stage::Output)?;
        let mut files = vec![csv];

        let mut rec = Record::new(if critical { Command::Critical } else { Command::NeutralCurve }, cfg);
        rec.put("radiation_residual", fmt_f64(rad.residual));
        branch_diagnostics(&mut rec, &branches);

        let cm = if critical {
            match problem.critical_mode(&branches, sc) {
                Ok(cm) => Some(cm),
                Err(e) => {
                    rec.put("status", format!("failed: {}", Stage::Critical.as_str()));
                    rec.write(dir)?;
                    return Err(StageError {
                        stage: Stage::Critical,
                        source: e,
                    });
                }
            }
        } else {
            None
        };
        if let Some(cm) = &cm {
            let csv = dir.join("critical.csv");
            output::write_csv_file(&csv, &output::SUMMARY_HEADER, &[output::summary_row(&cfg.params, cm)])
                .at(Stage::Output)?;
            files.push(csv);
            critical_fields(&mut rec, cm);
        }
        rec.put("status", "ok");
        rec.put("wall_time_s", t0.elapsed().as_secs_f64());
        files.push(rec.write(dir)?);
        Ok((
            RunOutcome {
                files,
                failures: Vec::new(),
            },
            cm,
        ))
    }

    fn table(&self, base: &CaseConfig) -> Result<RunOutcome, StageError> {
        let cases = table_cases(base);
        let results = crate::par::map_slice(&cases, |(i, cfg)| {
            let dir = self.out.join(format!("case-{i:02}"));
            self.solve_case(cfg, &dir, true)
        });
        let mut rows = Vec::with_capacity(cases.len());
        let mut outcome = RunOutcome::default();
        for ((i, cfg), res) in cases.iter().zip(results) {
            match res {
                Ok((o, Some(cm))) => {
                    rows.push(output::summary_row(&cfg.params, &cm));
                    outcome.files.extend(o.files);
                }
                Ok((_, None)) => unreachable!("table cases always request the critical mode"),
                Err(e) => {
                    log::error!("table case {i:02}: {e}");
                    rows.push(output::failed_summary_row(&cfg.params, e.stage.as_str()));
                    outcome.failures.push(format!("case-{i:02}: {e}"));
                }
            }
        }
        let csv = self.out.join("table.csv");
        output::write_csv_file(&csv, &output::SUMMARY_HEADER, &rows).at(Stage::Output)?;
        outcome.files.insert(0, csv);
        Ok(outcome)
    }
}

/// Tabulated parameter grid ordered by `Vc`, then `tauH`, then `theta_i`,
/// then `A1`. Numerical settings and remaining physics come from `base`.
pub fn table_cases(base: &CaseConfig) -> Vec<(usize, CaseConfig)> {
    let mut out = Vec::new();
    for vc in [10.0, 15.0, 20.0] {
        for (tau_h, b) in [(0.5, 0.26), (1.0, 0.48)] {
            for theta in [0.0, 40.0, 80.0] {
                for a1 in [0.0, 0.4, 0.8] {
                    let mut cfg = base.clone();
                    cfg.params = SuspensionParams {
                        vc,
                        tau_h,
                        b,
                        theta_i_deg: theta,
                        a1,
                        ..base.params
                    };
                    out.push((out.len(), cfg));
                }
            }
        }
    }
    out
}

fn branch_diagnostics(rec: &mut Record, branches: &[NeutralBranch]) {
    for b in branches {
        let kind = b.kind.as_str();
        rec.put(&format!("{kind}_points"), b.points.len());
        rec.put(&format!("{kind}_failures"), b.failures.len());
        if let Some(kb) = b.k_b {
            rec.put(&format!("{kind}_k_b"), fmt_f64(kb));
        }
    }
}

fn critical_fields(rec: &mut Record, cm: &CriticalMode) {
    rec.put("k_c", fmt_f64(cm.k_c));
    rec.put("lambda_c", fmt_f64(cm.lambda_c));
    rec.put("R_c", fmt_f64(cm.r_c));
    rec.put("Im_gamma", fmt_f64(cm.sigma_c));
    rec.put("overstable", cm.overstable);
    rec.put("mode_number", cm.mode_number);
}

/// Machine-readable `key = value` result record.
struct Record {
    text: String,
}

impl Record {
    fn new(cmd: Command, cfg: &CaseConfig) -> Self {
        let mut rec = Record { text: String::new() };
        rec.put("command", cmd.as_str());
        rec.put("version", env!("CARGO_PKG_VERSION"));
        for key in KEYS {
            rec.put(key, cfg.value_of(key).unwrap_or_default());
        }
        rec
    }

    fn put(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.text, "{key} = {value}");
    }

    fn write(&self, dir: &Path) -> Result<PathBuf, StageError> {
        let path = dir.join("record.txt");
        std::fs::write(&path, &self.text).map_err(Error::from).at(Stage::Output)?;
        Ok(path)
    }
}
