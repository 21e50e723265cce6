//! Full storage-constrained retrievals: one FS-PIR run per sub-message group,
//! glued together, plus the closed-form rates and message lengths they are
//! checked against.

use num_integer::binomial;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::engine::{
    answer_query, decode_group, format_answer, plan_group, Engine, EngineChoice, EngineRandomness,
    GroupQueryPlan, GroupSpec,
};
use crate::error::{Error, Result};
use crate::model::{submessage_lengths, DatabaseStore, Library};
use crate::placement::{min_length_for_units, validate_placement, PlacementSpec};
use crate::rational::{self, Rational};

/// How the start database of each engine-B group is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum StartPolicy {
    /// The group's anchor (last database of its window).
    #[default]
    Anchor,
    /// Uniform over the group, drawn from the group's randomness stream.
    Uniform,
}

/// Randomness stream for group `f` of a session seeded with `seed`.
pub fn group_rng(seed: u64, group: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(group as u64);
    rng
}

/// Plans every group's queries without touching any data. Fails if the
/// placement cannot carry `K` messages of `L` bits with `engine`.
pub fn plan_session(
    placement: &PlacementSpec,
    message_count: usize,
    message_len: usize,
    engine: Engine,
    desired: usize,
    seed: u64,
    start_policy: StartPolicy,
) -> Result<Vec<GroupQueryPlan>> {
    if desired == 0 || desired > message_count {
        return Err(Error::InvalidParameter(format!(
            "theta = {desired} outside [1..{message_count}]"
        )));
    }
    let mu = placement.t / rational::int(placement.database_count as i128);
    let report = validate_placement(placement, mu, message_count, message_len, Some(engine));
    if !report.runnable() {
        let details: Vec<String> = report.violations.iter().map(|v| v.detail.clone()).collect();
        return Err(Error::InvalidPlacement(details.join("; ")));
    }
    let lengths = submessage_lengths(&placement.alpha, message_len)?;
    (1..=placement.group_count)
        .into_par_iter()
        .map(|f| {
            let databases = placement.groups[f - 1].clone();
            let mut rng = group_rng(seed, f);
            let anchor = databases.len() - 1;
            let mut rnd = EngineRandomness::sample(message_count, lengths[f - 1], anchor, &mut rng);
            if start_policy == StartPolicy::Uniform {
                rnd.start = rng.random_range(0..databases.len());
            }
            let spec = GroupSpec {
                group: f,
                databases,
                message_count,
                submessage_len: lengths[f - 1],
            };
            plan_group(engine, &spec, desired, &rnd)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupTranscript {
    pub plan: GroupQueryPlan,
    pub answers: Vec<bool>,
    pub decoded: BitString,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionTranscript {
    pub desired_message: usize,
    pub placement: PlacementSpec,
    pub engine: Engine,
    pub message_count: usize,
    pub message_len: usize,
    pub seed: u64,
    pub groups: Vec<GroupTranscript>,
    /// Total downloaded bits `D`.
    pub downloads: u64,
    pub decoded: BitString,
}

impl SessionTranscript {
    pub fn measured_rate(&self) -> Rational {
        Rational::new(self.message_len as i128, self.downloads as i128)
    }

    /// `R_f = |W_{k,f}| / D_f` for each group.
    pub fn group_rates(&self) -> Vec<Rational> {
        self.groups
            .iter()
            .map(|g| Rational::new(g.plan.submessage_len as i128, g.plan.download_cost() as i128))
            .collect()
    }

    pub fn queries_per_database(&self) -> Vec<usize> {
        let mut counts = vec![0; self.placement.database_count];
        for g in &self.groups {
            for q in &g.plan.queries {
                counts[q.database - 1] += 1;
            }
        }
        counts
    }

    pub fn rate_report(&self) -> Result<RateReport> {
        let capacity = capacity_general_t(self.placement.t, self.message_count)?;
        let measured = self.measured_rate();
        let baseline = rational::to_usize(&self.placement.t)
            .map(|t| baseline_message_length(self.placement.database_count, t, self.message_count))
            .transpose()?;
        Ok(RateReport {
            achieves_capacity: measured == capacity,
            measured_rate: measured,
            capacity,
            message_length_used: self.message_len as u64,
            baseline_length: baseline,
            downloads: self.downloads,
        })
    }

    pub fn dump(&self) -> TranscriptDump {
        TranscriptDump {
            theta: self.desired_message,
            engine: self.engine,
            seed: self.seed,
            k: self.message_count,
            l: self.message_len as u64,
            d: self.downloads,
            rate: self.measured_rate(),
            placement: self.placement.clone(),
            groups: self
                .groups
                .iter()
                .map(|g| GroupDump {
                    group: g.plan.group,
                    databases: g.plan.group_databases.clone(),
                    start: g.plan.start_database,
                    queries: g.plan.queries.iter().map(|q| q.to_wire()).collect(),
                    answers: g.answers.iter().map(|&b| format_answer(b).to_string()).collect(),
                })
                .collect(),
        }
    }
}

/// JSON form of a transcript.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptDump {
    pub theta: usize,
    pub engine: Engine,
    pub seed: u64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "L")]
    pub l: u64,
    #[serde(rename = "D")]
    pub d: u64,
    #[serde(with = "rational::serde_str")]
    pub rate: Rational,
    pub placement: PlacementSpec,
    pub groups: Vec<GroupDump>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupDump {
    pub group: usize,
    pub databases: Vec<usize>,
    pub start: Option<usize>,
    pub queries: Vec<String>,
    pub answers: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateReport {
    #[serde(with = "rational::serde_str")]
    pub measured_rate: Rational,
    #[serde(with = "rational::serde_str")]
    pub capacity: Rational,
    pub achieves_capacity: bool,
    pub message_length_used: u64,
    pub baseline_length: Option<u64>,
    pub downloads: u64,
}

/// Privately retrieves message `desired` (1-based). Each group is planned
/// with its own randomness stream, answered by the databases that store it,
/// and decoded; the sub-messages are concatenated in group order.
pub fn run_session(
    library: &Library,
    placement: &PlacementSpec,
    engine: EngineChoice,
    desired: usize,
    seed: u64,
) -> Result<SessionTranscript> {
    let engine = engine.resolve(placement);
    let k = library.message_count();
    let l = library.message_len();
    let plans = plan_session(placement, k, l, engine, desired, seed, StartPolicy::Anchor)?;
    let stores = DatabaseStore::build_all(library, placement)?;

    let groups: Vec<GroupTranscript> = plans
        .into_par_iter()
        .map(|plan| {
            let answers = plan
                .queries
                .iter()
                .map(|q| answer_query(&stores[q.database - 1], q))
                .collect::<Result<Vec<bool>>>()?;
            let decoded = decode_group(&plan, &answers)?;
            Ok(GroupTranscript {
                plan,
                answers,
                decoded,
            })
        })
        .collect::<Result<_>>()?;

    let downloads = groups.iter().map(|g| g.plan.download_cost() as u64).sum();
    let decoded = BitString::concat(groups.iter().map(|g| &g.decoded));
    if &decoded != library.message(desired) {
        return Err(Error::Internal(format!(
            "decoded message {desired} differs from the library"
        )));
    }
    Ok(SessionTranscript {
        desired_message: desired,
        placement: placement.clone(),
        engine,
        message_count: k,
        message_len: l,
        seed,
        groups,
        downloads,
        decoded,
    })
}

/// `(alpha_1/R_1 + ... + alpha_F/R_F)^-1`.
pub fn composed_rate(alpha: &[Rational], group_rates: &[Rational]) -> Result<Rational> {
    if alpha.len() != group_rates.len() || alpha.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "{} weights for {} rates",
            alpha.len(),
            group_rates.len()
        )));
    }
    if rational::sum(alpha) != Rational::one() {
        return Err(Error::InvalidParameter("weights must sum to 1".into()));
    }
    if let Some(bad) = group_rates.iter().find(|r| **r <= Rational::zero() || **r > Rational::one()) {
        return Err(Error::InvalidParameter(format!(
            "group rate {} outside (0, 1]",
            rational::format(bad)
        )));
    }
    let inverse = alpha
        .iter()
        .zip(group_rates)
        .fold(Rational::zero(), |acc, (a, r)| acc + a / r);
    Ok(inverse.recip())
}

/// `1 + 1/x + ... + 1/x^(K-1)`: the inverse full-storage capacity on `x`
/// databases.
pub fn inverse_fs_rate(x: Rational, message_count: usize) -> Rational {
    let step = x.recip();
    let mut term = Rational::one();
    let mut total = Rational::zero();
    for _ in 0..message_count {
        total += term;
        term *= step;
    }
    total
}

pub fn capacity_integer_t(t: usize, message_count: usize) -> Result<Rational> {
    if t == 0 || message_count == 0 {
        return Err(Error::InvalidParameter("t and K must be positive".into()));
    }
    Ok(inverse_fs_rate(rational::int(t as i128), message_count).recip())
}

/// Integer `t` uses the closed form; otherwise the inverse rate is the linear
/// interpolation between `floor(t)` and `ceil(t)`.
pub fn capacity_general_t(t: Rational, message_count: usize) -> Result<Rational> {
    if t < Rational::one() || message_count == 0 {
        return Err(Error::InvalidParameter(format!(
            "need t >= 1 and K >= 1 (t={}, K={message_count})",
            rational::format(&t)
        )));
    }
    if t.is_integer() {
        return Ok(inverse_fs_rate(t, message_count).recip());
    }
    let (lo, hi) = (t.floor(), t.ceil());
    let inverse = (hi - t) * inverse_fs_rate(lo, message_count)
        + (t - lo) * inverse_fs_rate(hi, message_count);
    Ok(inverse.recip())
}

/// `N * t^(K-1)`.
pub fn min_message_length(n: usize, t: usize, message_count: usize) -> Result<u64> {
    if t == 0 || t > n || message_count == 0 {
        return Err(Error::InvalidParameter(format!("need 1 <= t <= N and K >= 1 (N={n}, t={t})")));
    }
    (t as u64)
        .checked_pow(message_count as u32 - 1)
        .and_then(|p| p.checked_mul(n as u64))
        .ok_or_else(|| Error::InvalidParameter("message length overflows u64".into()))
}

/// Smallest `L` such that every `alpha_f * L` is a positive multiple of the
/// engine's sub-packetization for `|N_f|`.
pub fn min_message_length_general(
    placement: &PlacementSpec,
    message_count: usize,
    engine: Engine,
) -> Result<u64> {
    if message_count == 0 {
        return Err(Error::InvalidParameter("K must be positive".into()));
    }
    if placement.groups.iter().any(Vec::is_empty) {
        return Err(Error::InvalidPlacement("empty group".into()));
    }
    min_length_for_units(placement, |f| {
        engine.subpacketization(placement.groups[f].len(), message_count)
    })
    .map(|l| l as u64)
}

/// `C(N, t) * t^K`.
pub fn baseline_message_length(n: usize, t: usize, message_count: usize) -> Result<u64> {
    if t == 0 || t > n {
        return Err(Error::InvalidParameter(format!("need 1 <= t <= N (N={n}, t={t})")));
    }
    let choose = binomial(n as u128, t as u128);
    (t as u128)
        .checked_pow(message_count as u32)
        .and_then(|p| p.checked_mul(choose))
        .and_then(|v| u64::try_from(v).ok())
        .ok_or_else(|| Error::InvalidParameter("baseline length overflows u64".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::placement::{cyclic_placement, mixed_placement, partition_placement};
    use crate::rational::{frac, int};

    #[test]
    fn partition_four_databases_three_messages() {
        let lib = Library::random(3, 16, 1).unwrap();
        let placement = partition_placement(4, 2).unwrap();
        let s = run_session(&lib, &placement, EngineChoice::A, 1, 42).unwrap();
        assert_eq!(s.downloads, 28);
        assert_eq!(&s.decoded, lib.message(1));
        assert_eq!(s.measured_rate(), frac(4, 7));
        let report = s.rate_report().unwrap();
        assert!(report.achieves_capacity);
        assert_eq!(report.baseline_length, Some(48));
    }

    #[test]
    fn cyclic_five_databases_two_messages() {
        let lib = Library::random(2, 15, 2).unwrap();
        let placement = cyclic_placement(5, 3).unwrap();
        let s = run_session(&lib, &placement, EngineChoice::B, 1, 7).unwrap();
        assert_eq!(s.downloads, 20);
        assert_eq!(s.measured_rate(), frac(3, 4));
        assert_eq!(s.queries_per_database(), vec![4; 5]);
    }

    #[test]
    fn single_database_single_message() {
        let lib = Library::random(1, 5, 3).unwrap();
        let placement = partition_placement(1, 1).unwrap();
        let s = run_session(&lib, &placement, EngineChoice::Auto, 1, 0).unwrap();
        assert_eq!(s.downloads, 5);
        assert_eq!(s.measured_rate(), int(1));
    }

    #[test]
    fn invalid_placement_rejected_before_queries() {
        let lib = Library::random(3, 12, 3).unwrap();
        let placement = partition_placement(4, 2).unwrap();
        assert!(matches!(
            run_session(&lib, &placement, EngineChoice::A, 1, 0),
            Err(Error::InvalidPlacement(_))
        ));
        let lib = Library::random(3, 16, 3).unwrap();
        assert!(matches!(
            run_session(&lib, &placement, EngineChoice::A, 4, 0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn composed_rate_examples() {
        assert_eq!(composed_rate(&[frac(1, 2); 2], &[frac(4, 7); 2]).unwrap(), frac(4, 7));
        assert_eq!(
            composed_rate(&[frac(1, 2); 2], &[frac(2, 3), frac(3, 4)]).unwrap(),
            frac(12, 17)
        );
        assert_eq!(composed_rate(&[int(1)], &[frac(5, 9)]).unwrap(), frac(5, 9));
        assert!(composed_rate(&[int(1)], &[int(0)]).is_err());
    }

    #[test]
    fn capacities() {
        assert_eq!(capacity_integer_t(2, 3).unwrap(), frac(4, 7));
        assert_eq!(capacity_integer_t(3, 2).unwrap(), frac(3, 4));
        assert_eq!(capacity_integer_t(1, 4).unwrap(), frac(1, 4));
        assert_eq!(capacity_general_t(frac(5, 2), 2).unwrap(), frac(12, 17));
        assert_eq!(capacity_general_t(int(3), 2).unwrap(), frac(3, 4));
        assert_eq!(capacity_general_t(frac(3, 2), 1).unwrap(), int(1));
        assert!(capacity_general_t(frac(1, 2), 2).is_err());
    }

    #[test]
    fn message_lengths() {
        assert_eq!(min_message_length(4, 2, 3).unwrap(), 16);
        assert_eq!(min_message_length(5, 3, 2).unwrap(), 15);
        assert_eq!(min_message_length(7, 1, 4).unwrap(), 7);
        assert_eq!(baseline_message_length(4, 2, 3).unwrap(), 48);
        assert_eq!(baseline_message_length(5, 3, 2).unwrap(), 90);
        assert_eq!(baseline_message_length(3, 3, 4).unwrap(), 81);

        let p = partition_placement(4, 2).unwrap();
        assert_eq!(min_message_length_general(&p, 3, Engine::A).unwrap(), 16);
        let c = cyclic_placement(5, 3).unwrap();
        assert_eq!(min_message_length_general(&c, 2, Engine::B).unwrap(), 15);
        let m = mixed_placement(5, frac(5, 2)).unwrap();
        assert_eq!(min_message_length_general(&m, 1, Engine::B).unwrap(), 10);
        assert_eq!(min_message_length_general(&m, 2, Engine::B).unwrap(), 60);
    }

    #[test]
    fn mixed_session_meets_interpolated_capacity() {
        let placement = mixed_placement(5, frac(5, 2)).unwrap();
        let lib = Library::random(2, 60, 9).unwrap();
        let s = run_session(&lib, &placement, EngineChoice::Auto, 2, 3).unwrap();
        assert_eq!(s.engine, Engine::B);
        assert_eq!(s.measured_rate(), frac(12, 17));
        assert_eq!(s.downloads, 85);
    }

    #[test]
    fn transcript_dump_shape() {
        let lib = Library::random(2, 15, 2).unwrap();
        let s = run_session(&lib, &cyclic_placement(5, 3).unwrap(), EngineChoice::B, 2, 1).unwrap();
        let json = serde_json::to_value(s.dump()).unwrap();
        assert_eq!(json["D"], 20);
        assert_eq!(json["rate"], "3/4");
        assert_eq!(json["theta"], 2);
        assert_eq!(json["groups"][0]["start"], 1);
        assert!(json["groups"][0]["queries"][0].as_str().unwrap().starts_with("db=1 sum="));
    }
}
