//! Full-storage PIR inside one group of databases that all hold the same
//! sub-message set.
//!
//! Both engines share one planner. They differ only in the *schedule*
//! `c[d][r]`: how many `r`-sums over each `r`-subset of messages database `d`
//! is asked for. Given the schedule, the planner proceeds round by round:
//!
//! * a subset without the desired message gets `c[d][r]` sums of fresh bits;
//! * a subset `S` containing the desired message gets one sum per undesired
//!   `(r-1)`-sum over `S \ {desired}` issued to any *other* database in the
//!   previous round, each combined with a fresh desired bit.
//!
//! Type symmetry requires both counts to agree, i.e.
//! `c[d][r] = sum_{d' != d} c[d'][r-1]`.
//!
//! * Engine A (sub-packetization `n^K`): `c[d][r] = (n-1)^(r-1)` everywhere.
//! * Engine B (sub-packetization `n^(K-1)`): the start database gets the
//!   singletons (`c[s][1] = 1`, others 0) and the recurrence
//!   `c[d][r] = (n-1)^(r-2) - c[d][r-1]` fills in the rest.
//!
//! Every bit index sent to a database passes through an independent uniform
//! permutation per message, so what a database observes does not depend on
//! which message is wanted.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::model::{BitAddress, DatabaseStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Engine {
    /// Sub-packetization `n^K`; every database runs the same schedule.
    A,
    /// Sub-packetization `n^(K-1)`; one start database opens the rounds.
    B,
}

impl Engine {
    /// Bits per sub-message one engine run retrieves from a group of `n`.
    pub fn subpacketization(self, n: usize, message_count: usize) -> usize {
        match self {
            Engine::A => n.pow(message_count as u32),
            Engine::B => n.pow(message_count as u32 - 1),
        }
    }

    /// Schedule `c[d][r-1]`: r-sums per r-subset asked of database `d`.
    pub fn schedule(self, n: usize, message_count: usize, start: usize) -> Vec<Vec<usize>> {
        let k = message_count;
        match self {
            Engine::A => (0..n)
                .map(|_| (1..=k).map(|r| (n - 1).pow(r as u32 - 1)).collect())
                .collect(),
            Engine::B => (0..n)
                .map(|d| {
                    let mut row = Vec::with_capacity(k);
                    row.push(usize::from(d == start));
                    for r in 2..=k {
                        let prev = row[r - 2];
                        row.push((n - 1).pow(r as u32 - 2) - prev);
                    }
                    row
                })
                .collect(),
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::A => "a",
            Engine::B => "b",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineChoice {
    A,
    B,
    #[default]
    Auto,
}

impl EngineChoice {
    /// Auto picks engine A for disjoint partitions and engine B otherwise.
    pub fn resolve(self, placement: &crate::placement::PlacementSpec) -> Engine {
        match self {
            EngineChoice::A => Engine::A,
            EngineChoice::B => Engine::B,
            EngineChoice::Auto if placement.is_partition() => Engine::A,
            EngineChoice::Auto => Engine::B,
        }
    }
}

impl From<Engine> for EngineChoice {
    fn from(engine: Engine) -> Self {
        match engine {
            Engine::A => EngineChoice::A,
            Engine::B => EngineChoice::B,
        }
    }
}

impl FromStr for EngineChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(EngineChoice::A),
            "b" => Ok(EngineChoice::B),
            "auto" => Ok(EngineChoice::Auto),
            _ => Err(Error::Parse(format!("unknown engine {s:?} (expected a|b|auto)"))),
        }
    }
}

/// Group download cost: `(n^K - 1)/(n - 1)` bits for engine B, `n` times that
/// for engine A; with `n = 1` both are `K`.
pub fn group_download_cost(n: usize, message_count: usize, engine: Engine) -> u64 {
    let n = n as u64;
    let per_round: u64 = (0..message_count as u32).map(|i| n.pow(i)).sum();
    match engine {
        Engine::A => n * per_round,
        Engine::B => per_round,
    }
}

/// One XOR-sum request sent to one database.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Query {
    pub database: usize,
    /// Sorted, at most one bit per message.
    pub addends: Vec<BitAddress>,
}

impl Query {
    pub fn new(database: usize, mut addends: Vec<BitAddress>) -> Self {
        addends.sort();
        Self { database, addends }
    }

    pub fn order(&self) -> usize {
        self.addends.len()
    }

    /// Messages touched by the sum, ascending.
    pub fn messages(&self) -> Vec<usize> {
        self.addends.iter().map(|a| a.message).collect()
    }

    pub fn touches(&self, message: usize) -> bool {
        self.addends.iter().any(|a| a.message == message)
    }

    /// `db=<n> sum=<k:f:j>[+<k:f:j>...]`
    pub fn to_wire(&self) -> String {
        format!("db={} sum={}", self.database, self.addends.iter().join("+"))
    }

    pub fn from_wire(line: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad query line {line:?}"));
        let (db, sum) = line.trim().split_once(' ').ok_or_else(bad)?;
        let db = db.strip_prefix("db=").ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let sum = sum.trim().strip_prefix("sum=").ok_or_else(bad)?;
        let addends = sum.split('+').map(str::parse).collect::<Result<Vec<BitAddress>>>()?;
        if addends.is_empty() {
            return Err(bad());
        }
        Ok(Query::new(db, addends))
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_wire())
    }
}

/// Per-run randomness: one permutation of sub-message bit positions per
/// message (`permutations[k-1][pos]` is the 0-based bit index), and the
/// position within the group of the start database.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EngineRandomness {
    pub permutations: Vec<Vec<usize>>,
    pub start: usize,
}

impl EngineRandomness {
    pub fn identity(message_count: usize, submessage_len: usize, start: usize) -> Self {
        Self {
            permutations: vec![(0..submessage_len).collect(); message_count],
            start,
        }
    }

    /// Fresh uniform permutations (Fisher-Yates over `rng`); `start` is kept
    /// as given.
    pub fn sample<R: Rng + ?Sized>(
        message_count: usize,
        submessage_len: usize,
        start: usize,
        rng: &mut R,
    ) -> Self {
        let permutations = (0..message_count)
            .map(|_| {
                let mut p: Vec<usize> = (0..submessage_len).collect();
                p.shuffle(rng);
                p
            })
            .collect();
        Self {
            permutations,
            start,
        }
    }

    pub fn is_valid(&self, message_count: usize, submessage_len: usize) -> bool {
        self.permutations.len() == message_count
            && self.permutations.iter().all(|p| {
                let mut seen = vec![false; submessage_len];
                p.len() == submessage_len
                    && p.iter().all(|&i| i < submessage_len && !std::mem::replace(&mut seen[i], true))
            })
    }
}

/// The databases of one group and the shape of what they hold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupSpec {
    /// Sub-message group index `f`, 1-based.
    pub group: usize,
    /// `N_f` in order; positions into this list are "group positions".
    pub databases: Vec<usize>,
    pub message_count: usize,
    /// `|W_{k,f}|` in bits.
    pub submessage_len: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupQueryPlan {
    pub group: usize,
    pub group_databases: Vec<usize>,
    pub desired_message: usize,
    pub engine: Engine,
    pub start_database: Option<usize>,
    pub submessage_len: usize,
    pub queries: Vec<Query>,
    /// `side_info_links[i] = Some(j)`: query `i` cancels against query `j`.
    pub side_info_links: Vec<Option<usize>>,
}

impl GroupQueryPlan {
    pub fn queries_at(&self, database: usize) -> impl Iterator<Item = &Query> + '_ {
        self.queries.iter().filter(move |q| q.database == database)
    }

    pub fn download_cost(&self) -> usize {
        self.queries.len()
    }
}

pub fn plan_engine_a(
    spec: &GroupSpec,
    desired: usize,
    rnd: &EngineRandomness,
) -> Result<GroupQueryPlan> {
    plan_with_schedule(Engine::A, spec, desired, rnd, None)
}

/// `start` is a database index (an element of `spec.databases`).
pub fn plan_engine_b(
    spec: &GroupSpec,
    desired: usize,
    rnd: &EngineRandomness,
    start: usize,
) -> Result<GroupQueryPlan> {
    let pos = spec
        .databases
        .iter()
        .position(|&d| d == start)
        .ok_or_else(|| {
            Error::InvalidParameter(format!("start database {start} is not in group {}", spec.group))
        })?;
    plan_with_schedule(Engine::B, spec, desired, rnd, Some(pos))
}

/// Engine B starts at `rnd.start`.
pub fn plan_group(
    engine: Engine,
    spec: &GroupSpec,
    desired: usize,
    rnd: &EngineRandomness,
) -> Result<GroupQueryPlan> {
    match engine {
        Engine::A => plan_with_schedule(Engine::A, spec, desired, rnd, None),
        Engine::B => plan_with_schedule(Engine::B, spec, desired, rnd, Some(rnd.start)),
    }
}

fn plan_with_schedule(
    engine: Engine,
    spec: &GroupSpec,
    desired: usize,
    rnd: &EngineRandomness,
    start: Option<usize>,
) -> Result<GroupQueryPlan> {
    let n = spec.databases.len();
    let k = spec.message_count;
    if n == 0 || k == 0 {
        return Err(Error::InvalidParameter("group size and K must be positive".into()));
    }
    if desired == 0 || desired > k {
        return Err(Error::InvalidParameter(format!("desired message {desired} outside [1..{k}]")));
    }
    let unit = engine.subpacketization(n, k);
    if spec.submessage_len == 0 || !spec.submessage_len.is_multiple_of(unit) {
        return Err(Error::Subpacketization {
            len: spec.submessage_len,
            required: unit,
        });
    }
    if !rnd.is_valid(k, spec.submessage_len) {
        return Err(Error::InvalidParameter(
            "randomness does not hold one permutation per message of the sub-message length".into(),
        ));
    }
    let start_pos = start.unwrap_or(0);
    if start_pos >= n {
        return Err(Error::InvalidParameter(format!("start position {start_pos} outside group")));
    }

    let schedule = engine.schedule(n, k, start_pos);
    let f = spec.group;
    let address = |message: usize, pos: usize| {
        BitAddress::new(message, f, rnd.permutations[message - 1][pos] + 1)
    };

    let mut queries: Vec<Query> = Vec::new();
    let mut links: Vec<Option<usize>> = Vec::new();
    let mut next_desired = 0usize;
    let mut next_fresh = vec![0usize; k];

    for _ in 0..spec.submessage_len / unit {
        // undesired sums of the previous round: group position -> subset -> query ids
        let mut previous: Vec<BTreeMap<Vec<usize>, Vec<usize>>> = vec![BTreeMap::new(); n];
        for r in 1..=k {
            let mut current: Vec<BTreeMap<Vec<usize>, Vec<usize>>> = vec![BTreeMap::new(); n];
            for d in 0..n {
                let db = spec.databases[d];
                let count = schedule[d][r - 1];
                for subset in (1..=k).combinations(r) {
                    if !subset.contains(&desired) {
                        for _ in 0..count {
                            let addends = subset
                                .iter()
                                .map(|&m| {
                                    let pos = next_fresh[m - 1];
                                    next_fresh[m - 1] += 1;
                                    address(m, pos)
                                })
                                .collect();
                            current[d].entry(subset.clone()).or_default().push(queries.len());
                            queries.push(Query::new(db, addends));
                            links.push(None);
                        }
                    } else if r == 1 {
                        for _ in 0..count {
                            queries.push(Query::new(db, vec![address(desired, next_desired)]));
                            links.push(None);
                            next_desired += 1;
                        }
                    } else {
                        let undesired: Vec<usize> =
                            subset.iter().copied().filter(|&m| m != desired).collect();
                        let sources: Vec<usize> = (1..n)
                            .map(|offset| (d + offset) % n)
                            .flat_map(|other| previous[other].get(&undesired).into_iter().flatten())
                            .copied()
                            .collect();
                        debug_assert_eq!(sources.len(), count);
                        for src in sources {
                            let mut addends = queries[src].addends.clone();
                            addends.push(address(desired, next_desired));
                            next_desired += 1;
                            queries.push(Query::new(db, addends));
                            links.push(Some(src));
                        }
                    }
                }
            }
            previous = current;
        }
    }

    if next_desired != spec.submessage_len
        || next_fresh.iter().any(|&used| used > spec.submessage_len)
    {
        return Err(Error::Internal(format!(
            "planner consumed {next_desired} desired bits of {} (fresh use {next_fresh:?})",
            spec.submessage_len
        )));
    }

    Ok(GroupQueryPlan {
        group: f,
        group_databases: spec.databases.clone(),
        desired_message: desired,
        engine,
        start_database: start.map(|p| spec.databases[p]),
        submessage_len: spec.submessage_len,
        queries,
        side_info_links: links,
    })
}

/// XOR of the addressed bits held by `store`.
pub fn answer_query(store: &DatabaseStore, query: &Query) -> Result<bool> {
    query.addends.iter().try_fold(false, |acc, a| {
        store
            .get(a)
            .map(|bit| acc ^ bit)
            .ok_or_else(|| Error::PrivacyBreakingQuery {
                database: store.database(),
                address: a.to_string(),
            })
    })
}

/// Recovers `W_{desired, f}` from the answers, cancelling each mixed sum
/// against its linked side-information answer.
pub fn decode_group(plan: &GroupQueryPlan, answers: &[bool]) -> Result<BitString> {
    if answers.len() != plan.queries.len() {
        return Err(Error::DecodeFailure(format!(
            "{} answers for {} queries",
            answers.len(),
            plan.queries.len()
        )));
    }
    let mut recovered: Vec<Option<bool>> = vec![None; plan.submessage_len];
    for (i, query) in plan.queries.iter().enumerate() {
        let mut wanted = query.addends.iter().filter(|a| a.message == plan.desired_message);
        let Some(target) = wanted.next() else {
            continue;
        };
        if wanted.next().is_some() {
            return Err(Error::DecodeFailure(format!("query {i} mixes two desired bits")));
        }
        if target.group != plan.group || target.bit == 0 || target.bit > plan.submessage_len {
            return Err(Error::DecodeFailure(format!("query {i} addresses {target} outside the group")));
        }
        let value = if query.order() == 1 {
            answers[i]
        } else {
            let link = plan.side_info_links.get(i).copied().flatten().ok_or_else(|| {
                Error::DecodeFailure(format!("query {i} has interference but no side information"))
            })?;
            let rest: Vec<&BitAddress> = query.addends.iter().filter(|a| *a != target).collect();
            let side = &plan.queries.get(link).filter(|_| link < i).ok_or_else(|| {
                Error::DecodeFailure(format!("query {i} links forward to {link}"))
            })?;
            if side.addends.iter().collect::<Vec<_>>() != rest {
                return Err(Error::DecodeFailure(format!(
                    "query {i} interference does not match side information {link}"
                )));
            }
            answers[i] ^ answers[link]
        };
        recovered[target.bit - 1] = Some(value);
    }
    let bits = recovered
        .iter()
        .enumerate()
        .map(|(j, b)| {
            b.ok_or_else(|| Error::DecodeFailure(format!("bit {} never recovered", j + 1)))
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(BitString::from_bools(&bits))
}

pub fn format_answer(bit: bool) -> &'static str {
    if bit {
        "1"
    } else {
        "0"
    }
}
