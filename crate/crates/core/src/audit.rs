//! Privacy auditing: is each database's view independent of the desired
//! message?
//!
//! A database's view is the multiset of queries it receives, with concrete
//! (permuted) bit indices. Answers are a function of the view and the stored
//! data, so they carry nothing extra.
//!
//! * [`audit_exhaustive`] enumerates every permutation tuple (and start
//!   database, when randomized) of every group, builds the exact view
//!   distribution at each database for each desired message, and reports the
//!   largest total-variation distance as an exact rational.
//! * [`audit_statistical`] samples sessions and compares, per database, the
//!   empirical distribution of addend features `(group, message set, message,
//!   bit index)`. This is a marginal of the view, so a leak in it is a leak
//!   in the view.
//!
//! [`Mutant`] variants deliberately break the planner so that the auditor's
//! ability to fail a leaky scheme can itself be tested.

use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;

use itertools::Itertools;
use num_traits::Zero;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::engine::{plan_group, Engine, EngineChoice, EngineRandomness, GroupSpec, Query};
use crate::error::{Error, Result};
use crate::model::{submessage_lengths, BitAddress};
use crate::placement::{
    canonical_placement, cyclic_placement, mixed_placement, partition_placement,
    validate_placement, PlacementSpec,
};
use crate::rational::{self, Rational};
use crate::session::{group_rng, min_message_length_general, SessionTranscript, StartPolicy};

pub const DEFAULT_TRIALS: u64 = 10_000;
pub const DEFAULT_BUDGET: u128 = 1_000_000;

pub fn default_threshold() -> Rational {
    Rational::new(1, 20)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementKind {
    Partition,
    Cyclic,
    Mixed,
    /// Partition when `t | N`, cyclic for other integer `t`, mixed otherwise.
    #[default]
    Auto,
}

impl PlacementKind {
    pub fn build(self, n: usize, t: Rational) -> Result<PlacementSpec> {
        let integral = || {
            rational::to_usize(&t).ok_or_else(|| {
                Error::InvalidParameter(format!("{self:?} placement needs integer t"))
            })
        };
        match self {
            PlacementKind::Partition => partition_placement(n, integral()?),
            PlacementKind::Cyclic => cyclic_placement(n, integral()?),
            PlacementKind::Mixed => mixed_placement(n, t),
            PlacementKind::Auto => canonical_placement(n, t),
        }
    }
}

impl FromStr for PlacementKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "partition" => Ok(Self::Partition),
            "cyclic" => Ok(Self::Cyclic),
            "mixed" => Ok(Self::Mixed),
            "auto" => Ok(Self::Auto),
            _ => Err(Error::Parse(format!(
                "unknown placement {s:?} (expected partition|cyclic|mixed|auto)"
            ))),
        }
    }
}

/// Deliberately broken planners.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mutant {
    #[default]
    None,
    /// Bit indices are sent unpermuted.
    NoPermutation,
    /// Every database is additionally asked for a singleton of the desired
    /// message, so the per-database query types favour it.
    AsymmetricTypes,
    /// Sums that do not involve the desired message are dropped.
    SkipUndesired,
    /// Only the desired bits are requested, round-robin over the group.
    DesiredOnly,
}

impl FromStr for Mutant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "no-permutation" => Ok(Self::NoPermutation),
            "asymmetric-types" => Ok(Self::AsymmetricTypes),
            "skip-undesired" => Ok(Self::SkipUndesired),
            "desired-only" => Ok(Self::DesiredOnly),
            _ => Err(Error::Parse(format!("unknown mutant {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditConfig {
    pub database_count: usize,
    pub message_count: usize,
    pub t: Rational,
    pub placement: PlacementKind,
    pub engine: EngineChoice,
    pub mutant: Mutant,
    pub start: StartPolicy,
    /// Largest randomness space or view support the exhaustive mode accepts.
    pub budget: u128,
}

impl AuditConfig {
    pub fn new(database_count: usize, message_count: usize, t: Rational) -> Self {
        Self {
            database_count,
            message_count,
            t,
            placement: PlacementKind::Auto,
            engine: EngineChoice::Auto,
            mutant: Mutant::None,
            start: StartPolicy::Uniform,
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn placement(mut self, kind: PlacementKind) -> Self {
        self.placement = kind;
        self
    }

    pub fn engine(mut self, engine: EngineChoice) -> Self {
        self.engine = engine;
        self
    }

    pub fn mutant(mut self, mutant: Mutant) -> Self {
        self.mutant = mutant;
        self
    }

    pub fn start(mut self, start: StartPolicy) -> Self {
        self.start = start;
        self
    }

    /// Placement, resolved engine and per-group sub-message lengths at the
    /// smallest message length the engine supports.
    fn setup(&self) -> Result<Setup> {
        if self.message_count == 0 {
            return Err(Error::InvalidParameter("K must be positive".into()));
        }
        let placement = self.placement.build(self.database_count, self.t)?;
        let engine = self.engine.resolve(&placement);
        let message_len = min_message_length_general(&placement, self.message_count, engine)? as usize;
        let mu = self.t / rational::int(self.database_count as i128);
        let report = validate_placement(&placement, mu, self.message_count, message_len, Some(engine));
        if !report.runnable() {
            return Err(Error::InvalidPlacement(format!("{:?}", report.violations)));
        }
        let lengths = submessage_lengths(&placement.alpha, message_len)?;
        Ok(Setup {
            placement,
            engine,
            lengths,
        })
    }
}

struct Setup {
    placement: PlacementSpec,
    engine: Engine,
    lengths: Vec<usize>,
}

impl Setup {
    fn group_spec(&self, f: usize, message_count: usize) -> GroupSpec {
        GroupSpec {
            group: f,
            databases: self.placement.groups[f - 1].clone(),
            message_count,
            submessage_len: self.lengths[f - 1],
        }
    }
}

/// Plans one group and applies `mutant`. `NoPermutation` must already be
/// reflected in `rnd` (identity permutations).
pub fn mutated_group_queries(
    engine: Engine,
    spec: &GroupSpec,
    desired: usize,
    rnd: &EngineRandomness,
    mutant: Mutant,
) -> Result<Vec<Query>> {
    let desired_bit = |pos: usize| {
        BitAddress::new(desired, spec.group, rnd.permutations[desired - 1][pos] + 1)
    };
    if mutant == Mutant::DesiredOnly {
        return Ok((0..spec.submessage_len)
            .map(|pos| {
                let db = spec.databases[pos % spec.databases.len()];
                Query::new(db, vec![desired_bit(pos)])
            })
            .collect());
    }
    let plan = plan_group(engine, spec, desired, rnd)?;
    let mut queries = plan.queries;
    match mutant {
        Mutant::AsymmetricTypes => {
            for &db in &spec.databases {
                queries.push(Query::new(db, vec![desired_bit(0)]));
            }
        }
        Mutant::SkipUndesired => queries.retain(|q| q.touches(desired)),
        _ => {}
    }
    Ok(queries)
}

/// Total-variation distance, either exact or estimated from samples.
#[derive(Clone, Debug, PartialEq)]
pub enum TvValue {
    Exact(Rational),
    Estimate(f64),
}

impl TvValue {
    pub fn as_f64(&self) -> f64 {
        match self {
            TvValue::Exact(r) => rational::to_f64(r),
            TvValue::Estimate(v) => *v,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            TvValue::Exact(r) => r.is_zero(),
            TvValue::Estimate(v) => *v == 0.0,
        }
    }
}

impl Serialize for TvValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TvValue::Exact(r) => s.serialize_str(&rational::format(r)),
            TvValue::Estimate(v) => s.serialize_f64(*v),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditMode {
    Exhaustive,
    Statistical,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatabaseTv {
    pub database: usize,
    pub max_tv: TvValue,
    /// Desired-message pair attaining `max_tv`.
    pub worst_pair: Option<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrivacyVerdict {
    pub mode: AuditMode,
    pub passed: bool,
    pub max_tv: TvValue,
    /// Sessions sampled per desired message (statistical mode), or the number
    /// of enumerated randomness outcomes (exhaustive mode).
    pub trials: u128,
    #[serde(serialize_with = "serialize_opt_rational")]
    pub threshold: Option<Rational>,
    pub per_database: Vec<DatabaseTv>,
}

fn serialize_opt_rational<S: Serializer>(
    value: &Option<Rational>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    rational::serde_str_opt::serialize(value, s)
}

impl PrivacyVerdict {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serializes")
    }
}

/// Counts over a finite outcome space with a shared total.
type Histogram<K> = BTreeMap<K, u128>;

/// `1/2 * sum |p - q|` for two histograms, exactly.
pub fn tv_exact<K: Ord>(p: &Histogram<K>, p_total: u128, q: &Histogram<K>, q_total: u128) -> Rational {
    let mut numer: u128 = 0;
    for key in p.keys().chain(q.keys().filter(|k| !p.contains_key(k))) {
        let a = p.get(key).copied().unwrap_or(0) * q_total;
        let b = q.get(key).copied().unwrap_or(0) * p_total;
        numer += a.abs_diff(b);
    }
    let denom = 2 * p_total * q_total;
    Rational::new(numer as i128, denom as i128)
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// Every K-tuple of permutations of `0..len`.
fn permutation_tuples(message_count: usize, len: usize) -> Vec<Vec<Vec<usize>>> {
    (0..message_count)
        .map(|_| (0..len).permutations(len).collect::<Vec<_>>())
        .multi_cartesian_product()
        .collect()
}

type View = Vec<Query>;

/// Exact audit by full enumeration of the planner's randomness.
pub fn audit_exhaustive(config: &AuditConfig) -> Result<PrivacyVerdict> {
    let setup = config.setup()?;
    let k = config.message_count;
    let n_db = config.database_count;
    let permute = config.mutant != Mutant::NoPermutation;

    // size of each group's randomness space
    let spaces: Vec<u128> = (1..=setup.placement.group_count)
        .map(|f| {
            let len = setup.lengths[f - 1];
            let perms = if permute { factorial(len).pow(k as u32) } else { 1 };
            let starts = match (setup.engine, config.start) {
                (Engine::B, StartPolicy::Uniform) => setup.placement.groups[f - 1].len() as u128,
                _ => 1,
            };
            perms * starts
        })
        .collect();
    let required: u128 = spaces.iter().sum::<u128>() * k as u128;
    if required > config.budget {
        return Err(Error::BudgetExceeded {
            required,
            budget: config.budget,
        });
    }

    // per group, per desired message: database -> view histogram
    let mut group_views: Vec<Vec<HashMap<usize, Histogram<View>>>> = Vec::new();
    for f in 1..=setup.placement.group_count {
        let spec = setup.group_spec(f, k);
        let n = spec.databases.len();
        let tuples = if permute {
            permutation_tuples(k, spec.submessage_len)
        } else {
            vec![vec![(0..spec.submessage_len).collect(); k]]
        };
        let starts: Vec<usize> = match (setup.engine, config.start) {
            (Engine::B, StartPolicy::Uniform) => (0..n).collect(),
            _ => vec![n - 1],
        };
        let per_theta = (1..=k)
            .map(|theta| {
                let mut views: HashMap<usize, Histogram<View>> = HashMap::new();
                for perms in &tuples {
                    for &start in &starts {
                        let rnd = EngineRandomness {
                            permutations: perms.clone(),
                            start,
                        };
                        let queries = mutated_group_queries(setup.engine, &spec, theta, &rnd, config.mutant)?;
                        for &db in &spec.databases {
                            let view: View = queries.iter().filter(|q| q.database == db).cloned().sorted().collect();
                            *views.entry(db).or_default().entry(view).or_default() += 1;
                        }
                    }
                }
                Ok(views)
            })
            .collect::<Result<Vec<_>>>()?;
        group_views.push(per_theta);
    }

    let mut per_database = Vec::with_capacity(n_db);
    for db in 1..=n_db {
        let groups = setup.placement.groups_of(db);
        let combined: Vec<(Histogram<View>, u128)> = (0..k)
            .map(|theta| {
                let mut joint: Histogram<View> = BTreeMap::from([(Vec::new(), 1u128)]);
                let mut total: u128 = 1;
                for &f in &groups {
                    let part = &group_views[f - 1][theta][&db];
                    total *= spaces[f - 1];
                    let support = joint.len() as u128 * part.len() as u128;
                    if support > config.budget {
                        return Err(Error::BudgetExceeded {
                            required: support,
                            budget: config.budget,
                        });
                    }
                    let mut next: Histogram<View> = BTreeMap::new();
                    for (left, a) in &joint {
                        for (right, b) in part {
                            let mut view: View = left.iter().chain(right).cloned().collect();
                            view.sort();
                            *next.entry(view).or_default() += a * b;
                        }
                    }
                    joint = next;
                }
                Ok((joint, total))
            })
            .collect::<Result<_>>()?;

        let mut worst = (Rational::zero(), None);
        for (a, b) in (0..k).tuple_combinations() {
            let tv = tv_exact(&combined[a].0, combined[a].1, &combined[b].0, combined[b].1);
            if tv > worst.0 || worst.1.is_none() {
                worst = (tv, Some((a + 1, b + 1)));
            }
        }
        per_database.push(DatabaseTv {
            database: db,
            max_tv: TvValue::Exact(worst.0),
            worst_pair: worst.1,
        });
    }

    let max_tv = per_database
        .iter()
        .filter_map(|d| match &d.max_tv {
            TvValue::Exact(r) => Some(*r),
            TvValue::Estimate(_) => None,
        })
        .max()
        .unwrap_or_else(Rational::zero);
    Ok(PrivacyVerdict {
        mode: AuditMode::Exhaustive,
        passed: max_tv.is_zero(),
        max_tv: TvValue::Exact(max_tv),
        trials: spaces.iter().product(),
        threshold: None,
        per_database,
    })
}

/// `(group, message set, message, bit index)` of one addend.
type Feature = (usize, Vec<usize>, usize, usize);

/// Per-database feature histograms with their totals.
#[derive(Clone, Debug, Default)]
struct FeatureCounts {
    by_database: BTreeMap<usize, (Histogram<Feature>, u128)>,
}

impl FeatureCounts {
    fn add_queries<'a>(&mut self, queries: impl IntoIterator<Item = &'a Query>) {
        for q in queries {
            let messages = q.messages();
            let (hist, total) = self.by_database.entry(q.database).or_default();
            for a in &q.addends {
                *hist.entry((a.group, messages.clone(), a.message, a.bit)).or_default() += 1;
                *total += 1;
            }
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (db, (hist, total)) in other.by_database {
            let (mine, my_total) = self.by_database.entry(db).or_default();
            for (key, count) in hist {
                *mine.entry(key).or_default() += count;
            }
            *my_total += total;
        }
        self
    }
}

/// Seed of trial `trial` for desired message `theta`: the ChaCha8 stream
/// `theta` of `base`, at word offset `2 * trial`.
pub fn trial_seed(base: u64, theta: usize, trial: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(theta as u64);
    rng.set_word_pos(2 * trial as u128);
    rng.next_u64()
}

fn sample_trial(
    setup: &Setup,
    message_count: usize,
    theta: usize,
    seed: u64,
    start: StartPolicy,
    mutant: Mutant,
) -> Result<Vec<Query>> {
    let mut out = Vec::new();
    for f in 1..=setup.placement.group_count {
        let spec = setup.group_spec(f, message_count);
        let n = spec.databases.len();
        let mut rng = group_rng(seed, f);
        let mut rnd = if mutant == Mutant::NoPermutation {
            EngineRandomness::identity(message_count, spec.submessage_len, n - 1)
        } else {
            EngineRandomness::sample(message_count, spec.submessage_len, n - 1, &mut rng)
        };
        if start == StartPolicy::Uniform {
            rnd.start = rng.random_range(0..n);
        }
        out.extend(mutated_group_queries(setup.engine, &spec, theta, &rnd, mutant)?);
    }
    Ok(out)
}

fn verdict_from_counts(
    per_theta: &[FeatureCounts],
    database_count: usize,
    trials: u128,
    threshold: Rational,
) -> PrivacyVerdict {
    let empty = (Histogram::<Feature>::new(), 0u128);
    let per_database: Vec<DatabaseTv> = (1..=database_count)
        .map(|db| {
            let mut worst: (Rational, Option<(usize, usize)>) = (Rational::zero(), None);
            for (a, b) in (0..per_theta.len()).tuple_combinations() {
                let (ha, ta) = per_theta[a].by_database.get(&db).unwrap_or(&empty);
                let (hb, tb) = per_theta[b].by_database.get(&db).unwrap_or(&empty);
                let tv = match (*ta, *tb) {
                    (0, 0) => Rational::zero(),
                    (0, _) | (_, 0) => Rational::from_integer(1),
                    _ => tv_exact(ha, *ta, hb, *tb),
                };
                if tv > worst.0 || worst.1.is_none() {
                    worst = (tv, Some((a + 1, b + 1)));
                }
            }
            DatabaseTv {
                database: db,
                max_tv: TvValue::Estimate(rational::to_f64(&worst.0)),
                worst_pair: worst.1,
            }
        })
        .collect();
    let max_tv = per_database
        .iter()
        .map(|d| d.max_tv.as_f64())
        .fold(0.0f64, f64::max);
    PrivacyVerdict {
        mode: AuditMode::Statistical,
        passed: max_tv <= rational::to_f64(&threshold),
        max_tv: TvValue::Estimate(max_tv),
        trials,
        threshold: Some(threshold),
        per_database,
    }
}

/// Monte-Carlo audit: `trials` sessions per desired message, seeds derived
/// from `seed` via [`trial_seed`].
pub fn audit_statistical(
    config: &AuditConfig,
    trials: u64,
    threshold: Rational,
    seed: u64,
) -> Result<PrivacyVerdict> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let setup = config.setup()?;
    let k = config.message_count;
    let per_theta = (1..=k)
        .map(|theta| {
            (0..trials)
                .into_par_iter()
                .map(|trial| {
                    let queries = sample_trial(
                        &setup,
                        k,
                        theta,
                        trial_seed(seed, theta, trial),
                        config.start,
                        config.mutant,
                    )?;
                    let mut counts = FeatureCounts::default();
                    counts.add_queries(&queries);
                    Ok(counts)
                })
                .try_reduce(FeatureCounts::default, |a, b| Ok(a.merge(b)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(verdict_from_counts(&per_theta, config.database_count, trials as u128, threshold))
}

/// Statistical audit over already-recorded sessions, grouped by their
/// desired message. Transcripts are only read.
pub fn audit_transcripts(
    transcripts: &[SessionTranscript],
    threshold: Rational,
) -> Result<PrivacyVerdict> {
    let first = transcripts
        .first()
        .ok_or_else(|| Error::InvalidParameter("no transcripts to audit".into()))?;
    let k = first.message_count;
    let n = first.placement.database_count;
    let mut per_theta = vec![FeatureCounts::default(); k];
    let mut sessions = vec![0u128; k];
    for t in transcripts {
        if t.message_count != k || t.placement != first.placement {
            return Err(Error::InvalidParameter("transcripts come from different setups".into()));
        }
        per_theta[t.desired_message - 1].add_queries(t.groups.iter().flat_map(|g| &g.plan.queries));
        sessions[t.desired_message - 1] += 1;
    }
    let observed: Vec<FeatureCounts> = per_theta
        .into_iter()
        .zip(&sessions)
        .filter(|(_, &s)| s > 0)
        .map(|(c, _)| c)
        .collect();
    let min_sessions = sessions.iter().copied().filter(|&s| s > 0).min().unwrap_or(0);
    Ok(verdict_from_counts(&observed, n, min_sessions, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};

    fn single_group(n: usize, k: usize) -> AuditConfig {
        AuditConfig::new(n, k, int(n as i128))
            .placement(PlacementKind::Partition)
            .engine(EngineChoice::B)
    }

    #[test]
    fn engine_b_two_databases_is_private() {
        let v = audit_exhaustive(&single_group(2, 2)).unwrap();
        assert!(v.passed, "{v:?}");
        assert_eq!(v.trials, 4 * 2);
        assert_eq!(v.max_tv, TvValue::Exact(Rational::zero()));
    }

    #[test]
    fn engine_b_three_databases_is_private() {
        let v = audit_exhaustive(&single_group(3, 2).start(StartPolicy::Anchor)).unwrap();
        assert!(v.passed, "{v:?}");
        assert_eq!(v.trials, 36);
    }

    #[test]
    fn desired_only_leaks_completely() {
        let v = audit_exhaustive(&single_group(2, 2).mutant(Mutant::DesiredOnly)).unwrap();
        assert!(!v.passed);
        assert_eq!(v.max_tv, TvValue::Exact(int(1)));
    }

    #[test]
    fn mutants_fail_exhaustively() {
        for mutant in [Mutant::NoPermutation, Mutant::AsymmetricTypes, Mutant::SkipUndesired] {
            let v = audit_exhaustive(&single_group(3, 2).mutant(mutant)).unwrap();
            assert!(!v.passed, "{mutant:?} passed");
        }
    }

    #[test]
    fn single_message_has_nothing_to_hide() {
        let v = audit_exhaustive(&single_group(2, 1).mutant(Mutant::DesiredOnly)).unwrap();
        assert!(v.passed);
        let v = audit_statistical(&AuditConfig::new(3, 1, frac(3, 2)), 1000, default_threshold(), 1).unwrap();
        assert!(v.passed);
        assert_eq!(v.max_tv, TvValue::Estimate(0.0));
    }

    #[test]
    fn budget_is_enforced() {
        let mut cfg = AuditConfig::new(4, 3, int(2)).engine(EngineChoice::A);
        cfg.budget = 1000;
        assert!(matches!(audit_exhaustive(&cfg), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn tv_of_disjoint_and_equal_histograms() {
        let p: Histogram<u8> = BTreeMap::from([(0, 2), (1, 2)]);
        let q: Histogram<u8> = BTreeMap::from([(2, 1)]);
        assert_eq!(tv_exact(&p, 4, &q, 1), int(1));
        assert_eq!(tv_exact(&p, 4, &p, 4), int(0));
        let r: Histogram<u8> = BTreeMap::from([(0, 3), (1, 1)]);
        assert_eq!(tv_exact(&p, 4, &r, 4), frac(1, 4));
    }

    #[test]
    fn statistical_is_deterministic() {
        let cfg = AuditConfig::new(4, 2, int(2));
        let a = audit_statistical(&cfg, 1000, default_threshold(), 5).unwrap();
        let b = audit_statistical(&cfg, 1000, default_threshold(), 5).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn verdict_json_shape() {
        let v = audit_exhaustive(&single_group(2, 2)).unwrap();
        let json: serde_json::Value = serde_json::from_str(&v.to_json()).unwrap();
        assert_eq!(json["mode"], "exhaustive");
        assert_eq!(json["max_tv"], "0/1");
        assert_eq!(json["passed"], true);
        assert_eq!(json["per_database"].as_array().unwrap().len(), 2);
    }
}
