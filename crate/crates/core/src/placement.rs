//! Storage placements: which databases hold which sub-message group, and
//! with what weight.
//!
//! Three constructors are provided:
//!
//! * [`partition_placement`] splits the databases into `N/t` disjoint blocks.
//! * [`cyclic_placement`] stores group `f` on the `t` consecutive databases
//!   ending at `f` (wrapping around), so every database holds `t` groups.
//! * [`mixed_placement`] handles non-integer `t` by pairing, for each anchor,
//!   a window of `floor(t)` databases with one of `ceil(t)` databases and
//!   weighting them so every database carries exactly `t/N` of the library.
//!
//! [`validate_placement`] reports storage-bound, weight and divisibility
//! problems and whether the placement meets the capacity conditions.

use std::collections::BTreeSet;

use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::rational::{self, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementSpec {
    #[serde(rename = "N")]
    pub database_count: usize,
    #[serde(rename = "F")]
    pub group_count: usize,
    #[serde(with = "rational::serde_str")]
    pub t: Rational,
    #[serde(with = "rational::serde_str_vec")]
    pub alpha: Vec<Rational>,
    /// `groups[f-1]` is `N_f`, in window order (the last entry is the anchor).
    pub groups: Vec<Vec<usize>>,
}

impl PlacementSpec {
    /// Builds a placement from explicit weights and database sets. Only
    /// structural checks happen here; use [`validate_placement`] for the rest.
    pub fn new(
        database_count: usize,
        t: Rational,
        alpha: Vec<Rational>,
        groups: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let spec = Self {
            database_count,
            group_count: alpha.len(),
            t,
            alpha,
            groups,
        };
        spec.check_structure()?;
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.check_structure()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("placement serializes")
    }

    pub fn check_structure(&self) -> Result<()> {
        if self.database_count == 0 {
            return Err(Error::InvalidPlacement("N must be positive".into()));
        }
        if self.alpha.len() != self.group_count || self.groups.len() != self.group_count {
            return Err(Error::InvalidPlacement(format!(
                "F = {} but {} weights and {} groups given",
                self.group_count,
                self.alpha.len(),
                self.groups.len()
            )));
        }
        for (f, members) in self.groups.iter().enumerate() {
            let unique: BTreeSet<_> = members.iter().collect();
            if unique.len() != members.len() {
                return Err(Error::InvalidPlacement(format!("N_{} repeats a database", f + 1)));
            }
            if let Some(bad) = members.iter().find(|&&n| n == 0 || n > self.database_count) {
                return Err(Error::InvalidPlacement(format!(
                    "N_{} names database {bad} outside [1..{}]",
                    f + 1,
                    self.database_count
                )));
            }
        }
        Ok(())
    }

    /// Total weight stored by each database (index `n - 1`).
    pub fn per_database_load(&self) -> Vec<Rational> {
        let mut load = vec![Rational::zero(); self.database_count];
        for (a, members) in self.alpha.iter().zip(&self.groups) {
            for &n in members {
                load[n - 1] += a;
            }
        }
        load
    }

    /// Groups stored at database `n`, 1-based.
    pub fn groups_of(&self, database: usize) -> Vec<usize> {
        self.groups
            .iter()
            .enumerate()
            .filter(|(_, m)| m.contains(&database))
            .map(|(f, _)| f + 1)
            .collect()
    }

    /// True when the groups are equal-size, pairwise disjoint and cover
    /// every database.
    pub fn is_partition(&self) -> bool {
        let Some(size) = self.groups.first().map(Vec::len) else {
            return false;
        };
        let mut seen = BTreeSet::new();
        for members in &self.groups {
            if members.len() != size {
                return false;
            }
            for &n in members {
                if !seen.insert(n) {
                    return false;
                }
            }
        }
        seen.len() == self.database_count
    }

    /// Database that opens the query process for group `f` (its anchor).
    pub fn start_database(&self, group: usize) -> usize {
        *self.groups[group - 1].last().expect("non-empty group")
    }
}

/// `a (+)_N b = ((a + b - 1) mod N) + 1`, for any integer `a`.
pub fn cyclic_add(a: i64, b: usize, n: usize) -> usize {
    ((a + b as i64 - 1).rem_euclid(n as i64) + 1) as usize
}

/// `[-(size-1):0] (+)_N anchor`, listed in increasing offset order.
pub fn cyclic_window(anchor: usize, size: usize, n: usize) -> Vec<usize> {
    (-(size as i64 - 1)..=0).map(|a| cyclic_add(a, anchor, n)).collect()
}

pub fn partition_placement(n: usize, t: usize) -> Result<PlacementSpec> {
    if n == 0 || t == 0 || t > n {
        return Err(Error::InvalidParameter(format!("need 1 <= t <= N (N={n}, t={t})")));
    }
    if !n.is_multiple_of(t) {
        return Err(Error::NotDivisible { n, t });
    }
    let f = n / t;
    let groups = (0..f).map(|g| (g * t + 1..=(g + 1) * t).collect()).collect();
    PlacementSpec::new(
        n,
        rational::int(t as i128),
        vec![rational::frac(t as i128, n as i128); f],
        groups,
    )
}

pub fn cyclic_placement(n: usize, t: usize) -> Result<PlacementSpec> {
    if n == 0 || t == 0 || t > n {
        return Err(Error::InvalidParameter(format!("need 1 <= t <= N (N={n}, t={t})")));
    }
    let groups = (1..=n).map(|f| cyclic_window(f, t, n)).collect();
    PlacementSpec::new(
        n,
        rational::int(t as i128),
        vec![rational::frac(1, n as i128); n],
        groups,
    )
}

pub fn mixed_placement(n: usize, t: Rational) -> Result<PlacementSpec> {
    if n == 0 || t < Rational::one() || t > rational::int(n as i128) {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= t <= N (N={n}, t={})",
            rational::format(&t)
        )));
    }
    if t.is_integer() {
        return Err(Error::InvalidParameter(
            "mixed placement is for non-integer t; use partition or cyclic".into(),
        ));
    }
    let lo = t.floor();
    let hi = t.ceil();
    let lo_size = rational::to_usize(&lo).expect("floor of t in [1, N]");
    let hi_size = lo_size + 1;
    let n_r = rational::int(n as i128);
    let lo_weight = (hi - t) / n_r;
    let hi_weight = (t - lo) / n_r;

    let mut alpha = Vec::with_capacity(2 * n);
    let mut groups = Vec::with_capacity(2 * n);
    for anchor in 1..=n {
        alpha.push(lo_weight);
        groups.push(cyclic_window(anchor, lo_size, n));
        alpha.push(hi_weight);
        groups.push(cyclic_window(anchor, hi_size, n));
    }
    PlacementSpec::new(n, t, alpha, groups)
}

/// Picks the construction matching `t`: partition when `t | N`, cyclic for
/// other integer `t`, mixed otherwise.
pub fn canonical_placement(n: usize, t: Rational) -> Result<PlacementSpec> {
    match rational::to_usize(&t) {
        Some(ti) if ti >= 1 && ti <= n && n.is_multiple_of(ti) => partition_placement(n, ti),
        Some(ti) => cyclic_placement(n, ti),
        None => mixed_placement(n, t),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    AlphaSum,
    StorageBound,
    GroupNonempty,
    AlphaPositive,
    LengthIntegral,
    Subpacketization,
    TMismatch,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub capacity_sufficient: bool,
    pub violations: Vec<Violation>,
    #[serde(with = "rational::serde_str_vec")]
    pub per_database_load: Vec<Rational>,
}

impl ValidationReport {
    pub fn has(&self, rule: Rule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    /// Valid and free of every length, divisibility and consistency problem,
    /// i.e. a session may be run on it.
    pub fn runnable(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a placement against storage fraction `mu`, `K` messages of `L`
/// bits and, when given, the sub-packetization of `engine`.
pub fn validate_placement(
    spec: &PlacementSpec,
    mu: Rational,
    message_count: usize,
    message_len: usize,
    engine: Option<Engine>,
) -> ValidationReport {
    let mut violations = Vec::new();
    let mut flag = |rule, detail: String| violations.push(Violation { rule, detail });

    let total = rational::sum(&spec.alpha);
    if total != Rational::one() {
        flag(Rule::AlphaSum, format!("sum of alpha is {}", rational::format(&total)));
    }

    for (f, members) in spec.groups.iter().enumerate() {
        if members.is_empty() {
            flag(Rule::GroupNonempty, format!("N_{} is empty", f + 1));
        }
    }

    let load = spec.per_database_load();
    for (n, l) in load.iter().enumerate() {
        if *l > mu {
            flag(
                Rule::StorageBound,
                format!(
                    "database {} stores {} of the library, above mu = {}",
                    n + 1,
                    rational::format(l),
                    rational::format(&mu)
                ),
            );
        }
    }

    let l_r = rational::int(message_len as i128);
    for (f, a) in spec.alpha.iter().enumerate() {
        if *a <= Rational::zero() {
            flag(Rule::AlphaPositive, format!("alpha_{} = {}", f + 1, rational::format(a)));
            continue;
        }
        let bits = a * l_r;
        let Some(len) = rational::to_usize(&bits).filter(|&b| b > 0) else {
            flag(
                Rule::LengthIntegral,
                format!("alpha_{} * L = {} is not a positive integer", f + 1, rational::format(&bits)),
            );
            continue;
        };
        if let Some(engine) = engine {
            let group_size = spec.groups[f].len();
            if group_size == 0 {
                continue;
            }
            let required = engine.subpacketization(group_size, message_count);
            if len % required != 0 {
                flag(
                    Rule::Subpacketization,
                    format!(
                        "|W_k,{}| = {len} bits is not a multiple of {required} (engine {engine:?}, |N_f| = {group_size})",
                        f + 1
                    ),
                );
            }
        }
    }

    let t = mu * rational::int(spec.database_count as i128);
    if t != spec.t {
        flag(
            Rule::TMismatch,
            format!(
                "placement declares t = {} but mu * N = {}",
                rational::format(&spec.t),
                rational::format(&t)
            ),
        );
    }

    let valid = !violations
        .iter()
        .any(|v| matches!(v.rule, Rule::AlphaSum | Rule::StorageBound | Rule::GroupNonempty));

    ValidationReport {
        valid,
        capacity_sufficient: capacity_condition_holds(spec, t),
        violations,
        per_database_load: load,
    }
}

/// Sufficient capacity conditions: every `|N_f| = t` for integer `t`;
/// otherwise every `|N_f|` is `floor(t)` or `ceil(t)` with class weights
/// `ceil(t) - t` and `t - floor(t)` respectively.
pub fn capacity_condition_holds(spec: &PlacementSpec, t: Rational) -> bool {
    if t.is_integer() {
        let size = t.to_integer();
        return spec.groups.iter().all(|g| g.len() as i128 == size);
    }
    let (lo, hi) = (t.floor().to_integer(), t.ceil().to_integer());
    let (lo_w, hi_w) = size_class_weights(spec, lo as usize, hi as usize);
    let sizes_ok = spec
        .groups
        .iter()
        .all(|g| g.len() as i128 == lo || g.len() as i128 == hi);
    sizes_ok && lo_w == t.ceil() - t && hi_w == t - t.floor()
}

/// Total weight of the groups of size `lo` and of size `hi`.
pub fn size_class_weights(spec: &PlacementSpec, lo: usize, hi: usize) -> (Rational, Rational) {
    let weight_of = |size: usize| {
        spec.alpha
            .iter()
            .zip(&spec.groups)
            .filter(|(_, g)| g.len() == size)
            .fold(Rational::zero(), |acc, (a, _)| acc + a)
    };
    (weight_of(lo), weight_of(hi))
}

/// Smallest `L` making every `alpha_f * L` a positive multiple of `unit(f)`.
pub(crate) fn min_length_for_units(spec: &PlacementSpec, unit: impl Fn(usize) -> usize) -> Result<usize> {
    let mut l: i128 = 1;
    for (f, a) in spec.alpha.iter().enumerate() {
        if *a <= Rational::zero() {
            return Err(Error::InvalidPlacement(format!("alpha_{} is not positive", f + 1)));
        }
        // alpha = p/q: alpha*L multiple of u  <=>  L multiple of q*u/gcd(p, u)
        let u = unit(f) as i128;
        let step = a.denom() * u / a.numer().gcd(&u);
        l = l.lcm(&step);
    }
    usize::try_from(l).map_err(|_| Error::InvalidParameter("message length overflows".into()))
}
