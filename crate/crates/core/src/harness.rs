//! Batch experiments behind the `scpir` command line: repeated sessions,
//! `t` sweeps, audits and formula evaluation. Everything returns plain data
//! so the binary only parses flags and writes files.

use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audit::{
    audit_exhaustive, audit_statistical, default_threshold, trial_seed, AuditConfig, AuditMode,
    Mutant, PlacementKind, PrivacyVerdict, DEFAULT_TRIALS,
};
use crate::engine::{Engine, EngineChoice};
use crate::error::{Error, Result};
use crate::model::Library;
use crate::placement::{canonical_placement, validate_placement, PlacementSpec, ValidationReport};
use crate::rational::{self, Rational};
use crate::session::{
    baseline_message_length, capacity_general_t, min_message_length, min_message_length_general,
    run_session, RateReport, StartPolicy, TranscriptDump,
};

/// Exit status contract of the command line.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "N")]
    pub database_count: usize,
    #[serde(rename = "K")]
    pub message_count: usize,
    #[serde(default, with = "rational::serde_str_opt", skip_serializing_if = "Option::is_none")]
    pub mu: Option<Rational>,
    #[serde(default, with = "rational::serde_str_opt", skip_serializing_if = "Option::is_none")]
    pub t: Option<Rational>,
    #[serde(default)]
    pub placement: PlacementKind,
    #[serde(default)]
    pub engine: EngineChoice,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub trials: u64,
    /// Fixed desired message; `None` draws it uniformly per trial.
    #[serde(default)]
    pub theta: Option<usize>,
    /// Message length; defaults to the smallest the placement supports.
    #[serde(default, rename = "L", skip_serializing_if = "Option::is_none")]
    pub message_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

fn one() -> u64 {
    1
}

impl ExperimentConfig {
    pub fn new(database_count: usize, message_count: usize) -> Self {
        Self {
            database_count,
            message_count,
            mu: None,
            t: None,
            placement: PlacementKind::Auto,
            engine: EngineChoice::Auto,
            seed: 0,
            trials: 1,
            theta: None,
            message_len: None,
            workers: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// `t`, either given or computed as `mu * N`. Exactly one must be set.
    pub fn replication(&self) -> Result<Rational> {
        let n = rational::int(self.database_count as i128);
        let t = match (self.mu, self.t) {
            (Some(mu), None) => mu * n,
            (None, Some(t)) => t,
            (Some(_), Some(_)) => return Err(Error::InvalidParameter("give either mu or t, not both".into())),
            (None, None) => return Err(Error::InvalidParameter("one of mu or t is required".into())),
        };
        if self.database_count == 0 || self.message_count == 0 {
            return Err(Error::InvalidParameter("N and K must be positive".into()));
        }
        if t < Rational::one() || t > n {
            return Err(Error::InvalidParameter(format!(
                "t = {} outside [1, N]",
                rational::format(&t)
            )));
        }
        Ok(t)
    }

    pub fn check(&self) -> Result<()> {
        self.replication()?;
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if let Some(theta) = self.theta {
            if theta == 0 || theta > self.message_count {
                return Err(Error::InvalidParameter(format!(
                    "theta = {theta} outside [1..{}]",
                    self.message_count
                )));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidParameter("workers must be at least 1".into()));
        }
        Ok(())
    }
}

fn with_workers<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map(|pool| pool.install(job))
            .map_err(|e| Error::Internal(e.to_string())),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub engine: Engine,
    pub placement: PlacementSpec,
    pub validation: ValidationReport,
    pub rate: RateReport,
    pub trials: u64,
    pub decoded_ok: u64,
    pub at_capacity: u64,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub transcripts: Vec<TranscriptDump>,
    pub exit_code: i32,
}

/// Runs `trials` sessions over one library. Trial `i` uses the session seed
/// `trial_seed(seed, 0, i)`; uniform desired messages come from a ChaCha8
/// stream seeded with `seed` (stream 1).
pub fn cmd_run(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.check()?;
    let t = config.replication()?;
    let n = config.database_count;
    let k = config.message_count;
    let placement = config.placement.build(n, t)?;
    let engine = config.engine.resolve(&placement);
    let message_len = match config.message_len {
        Some(l) => l,
        None => min_message_length_general(&placement, k, engine)? as usize,
    };
    let mu = t / rational::int(n as i128);
    let validation = validate_placement(&placement, mu, k, message_len, Some(engine));
    if !validation.runnable() {
        let details: Vec<String> = validation.violations.iter().map(|v| v.detail.clone()).collect();
        return Err(Error::InvalidPlacement(details.join("; ")));
    }
    let library = Library::random(k, message_len, config.seed)?;

    let thetas: Vec<usize> = match config.theta {
        Some(theta) => vec![theta; config.trials as usize],
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(1);
            (0..config.trials).map(|_| rng.random_range(1..=k)).collect()
        }
    };

    let results = with_workers(config.workers, || {
        thetas
            .par_iter()
            .enumerate()
            .map(|(i, &theta)| {
                run_session(&library, &placement, EngineChoice::from(engine), theta, trial_seed(config.seed, 0, i as u64))
            })
            .collect::<Vec<_>>()
    })?;

    let capacity = capacity_general_t(t, k)?;
    let mut transcripts = Vec::new();
    let mut failures = Vec::new();
    let mut rate = None;
    let mut at_capacity = 0;
    for (i, result) in results.into_iter().enumerate() {
        match result {
            Ok(session) => {
                let report = session.rate_report()?;
                if report.achieves_capacity {
                    at_capacity += 1;
                }
                if rate.is_none() {
                    rate = Some(report);
                }
                transcripts.push(session.dump());
            }
            Err(e) => failures.push(format!("trial {i}: {e}")),
        }
    }
    let decoded_ok = transcripts.len() as u64;
    let rate = rate.unwrap_or(RateReport {
        measured_rate: Rational::new(0, 1),
        capacity,
        achieves_capacity: false,
        message_length_used: message_len as u64,
        baseline_length: None,
        downloads: 0,
    });
    let all_decoded = failures.is_empty();
    let rate_ok = !validation.capacity_sufficient || at_capacity == config.trials;
    let exit_code = if all_decoded && rate_ok { EXIT_OK } else { EXIT_FAILED };
    Ok(RunOutcome {
        report: RunReport {
            config: config.clone(),
            engine,
            placement,
            validation,
            rate,
            trials: config.trials,
            decoded_ok,
            at_capacity,
            failures,
        },
        transcripts,
        exit_code,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SweepRow {
    #[serde(with = "rational::serde_str")]
    pub t: Rational,
    #[serde(rename = "K")]
    pub message_count: usize,
    #[serde(rename = "N")]
    pub database_count: usize,
    #[serde(with = "rational::serde_str")]
    pub rate: Rational,
    #[serde(with = "rational::serde_str")]
    pub capacity: Rational,
    #[serde(rename = "L")]
    pub message_len: u64,
    #[serde(rename = "L_baseline")]
    pub baseline_len: Option<u64>,
    #[serde(rename = "D")]
    pub downloads: u64,
    #[serde(with = "rational::serde_str_opt")]
    pub length_ratio: Option<Rational>,
}

pub const SWEEP_CSV_HEADER: &str = "t_num,t_den,K,N,rate_p,rate_q,capacity_p,capacity_q,L,L_baseline,D,length_ratio_p,length_ratio_q,rate_f64,capacity_f64";

impl SweepRow {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.t.numer(),
            self.t.denom(),
            self.message_count,
            self.database_count,
            self.rate.numer(),
            self.rate.denom(),
            self.capacity.numer(),
            self.capacity.denom(),
            self.message_len,
            opt(self.baseline_len.map(|v| v.to_string())),
            self.downloads,
            opt(self.length_ratio.map(|r| r.numer().to_string())),
            opt(self.length_ratio.map(|r| r.denom().to_string())),
            rational::to_f64(&self.rate),
            rational::to_f64(&self.capacity),
        )
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    out
}

/// One session per `t` on the canonical placement, at the smallest message
/// length it supports.
pub fn cmd_sweep(n: usize, message_count: usize, grid: &[Rational], seed: u64) -> Result<Vec<SweepRow>> {
    grid.iter()
        .map(|&t| {
            let placement = canonical_placement(n, t)?;
            let engine = EngineChoice::Auto.resolve(&placement);
            let message_len = min_message_length_general(&placement, message_count, engine)?;
            let library = Library::random(message_count, message_len as usize, seed)?;
            let session = run_session(&library, &placement, EngineChoice::Auto, 1, seed)?;
            let capacity = capacity_general_t(t, message_count)?;
            let baseline = rational::to_usize(&t)
                .map(|ti| baseline_message_length(n, ti, message_count))
                .transpose()?;
            Ok(SweepRow {
                t,
                message_count,
                database_count: n,
                rate: session.measured_rate(),
                capacity,
                message_len,
                baseline_len: baseline,
                downloads: session.downloads,
                length_ratio: baseline.map(|b| Rational::new(message_len as i128, b as i128)),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditRequest {
    pub audit: AuditConfig,
    pub mode: AuditMode,
    pub trials: u64,
    pub threshold: Rational,
    pub seed: u64,
}

impl AuditRequest {
    pub fn new(audit: AuditConfig, mode: AuditMode) -> Self {
        Self {
            audit,
            mode,
            trials: DEFAULT_TRIALS,
            threshold: default_threshold(),
            seed: 0,
        }
    }
}

/// Verdict and exit code (0 iff passed).
pub fn cmd_audit(request: &AuditRequest) -> Result<(PrivacyVerdict, i32)> {
    let verdict = match request.mode {
        AuditMode::Exhaustive => audit_exhaustive(&request.audit)?,
        AuditMode::Statistical => {
            audit_statistical(&request.audit, request.trials, request.threshold, request.seed)?
        }
    };
    let code = if verdict.passed { EXIT_OK } else { EXIT_FAILED };
    Ok((verdict, code))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PlacementSummary {
    pub placement: PlacementSpec,
    pub engine: Engine,
    #[serde(rename = "L")]
    pub message_len: u64,
    pub validation: ValidationReport,
}

pub fn cmd_placement(
    placement: PlacementSpec,
    message_count: usize,
    engine: EngineChoice,
    message_len: Option<u64>,
) -> Result<PlacementSummary> {
    let engine = engine.resolve(&placement);
    let message_len = match message_len {
        Some(l) => l,
        None => min_message_length_general(&placement, message_count, engine)?,
    };
    let mu = placement.t / rational::int(placement.database_count as i128);
    let validation = validate_placement(&placement, mu, message_count, message_len as usize, Some(engine));
    Ok(PlacementSummary {
        placement,
        engine,
        message_len,
        validation,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CapacitySummary {
    #[serde(rename = "N")]
    pub database_count: usize,
    #[serde(rename = "K")]
    pub message_count: usize,
    #[serde(with = "rational::serde_str")]
    pub t: Rational,
    #[serde(with = "rational::serde_str")]
    pub capacity: Rational,
    pub min_message_length: u64,
    pub baseline_message_length: Option<u64>,
}

pub fn cmd_capacity(n: usize, message_count: usize, t: Rational) -> Result<CapacitySummary> {
    if t > rational::int(n as i128) {
        return Err(Error::InvalidParameter("t must not exceed N".into()));
    }
    let capacity = capacity_general_t(t, message_count)?;
    let ti = rational::to_usize(&t);
    Ok(CapacitySummary {
        database_count: n,
        message_count,
        t,
        capacity,
        min_message_length: match ti {
            Some(ti) => min_message_length(n, ti, message_count)?,
            None => {
                let spec = canonical_placement(n, t)?;
                min_message_length_general(&spec, message_count, Engine::B)?
            }
        },
        baseline_message_length: ti
            .map(|ti| baseline_message_length(n, ti, message_count))
            .transpose()?,
    })
}

/// Start policy used by audits requested from the command line.
pub fn parse_start_policy(text: &str) -> Result<StartPolicy> {
    match text {
        "anchor" => Ok(StartPolicy::Anchor),
        "uniform" => Ok(StartPolicy::Uniform),
        _ => Err(Error::Parse(format!("unknown start policy {text:?} (anchor|uniform)"))),
    }
}

pub fn parse_mutant(text: &str) -> Result<Mutant> {
    text.parse()
}
