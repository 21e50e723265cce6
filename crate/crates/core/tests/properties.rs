use std::collections::{BTreeMap, BTreeSet};

use num_integer::binomial;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scpir::engine::{answer_query, decode_group, plan_group, EngineRandomness, GroupSpec};
use scpir::model::{split_message, submessage_lengths, submessage_offsets, BitAddress, DatabaseStore};
use scpir::placement::{
    canonical_placement, cyclic_placement, mixed_placement, partition_placement, validate_placement,
};
use scpir::rational::{self, Rational};
use scpir::session::{
    baseline_message_length, capacity_general_t, composed_rate, min_message_length,
    min_message_length_general,
};
use scpir::{run_session, Engine, EngineChoice, Library, PlacementSpec};

fn half(h: usize) -> Rational {
    Rational::new(h as i128, 2)
}

fn engine_of(b: bool) -> Engine {
    if b {
        Engine::B
    } else {
        Engine::A
    }
}

/// `N` and a `t` in `{1, 3/2, ..., N}`.
fn n_and_t(max_n: usize) -> impl Strategy<Value = (usize, Rational)> {
    (1..=max_n).prop_flat_map(|n| (Just(n), (2..=2 * n).prop_map(half)))
}

fn single_group(n: usize, k: usize, len: usize) -> GroupSpec {
    GroupSpec {
        group: 1,
        databases: (1..=n).collect(),
        message_count: k,
        submessage_len: len,
    }
}

#[derive(Debug)]
struct GroupCase {
    engine: Engine,
    n: usize,
    k: usize,
    reps: usize,
    desired: usize,
    start: usize,
    seed: u64,
}

fn group_case() -> impl Strategy<Value = GroupCase> {
    (1usize..=4, 1usize..=4, any::<bool>(), 1usize..=2, any::<u64>())
        .prop_flat_map(|(n, k, b, reps, seed)| {
            (1..=k, 0..n).prop_map(move |(desired, start)| GroupCase {
                engine: engine_of(b),
                n,
                k,
                reps,
                desired,
                start,
                seed,
            })
        })
}

impl GroupCase {
    fn len(&self) -> usize {
        self.reps * self.engine.subpacketization(self.n, self.k)
    }

    fn plan(&self) -> scpir::GroupQueryPlan {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let rnd = EngineRandomness::sample(self.k, self.len(), self.start, &mut rng);
        plan_group(self.engine, &single_group(self.n, self.k, self.len()), self.desired, &rnd)
            .unwrap()
    }
}

fn min_len(spec: &PlacementSpec, k: usize, engine: Engine) -> usize {
    min_message_length_general(spec, k, engine).unwrap() as usize
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_then_concat_restores_message((n, t) in n_and_t(8), seed: u64, reps in 1usize..=3) {
        let spec = canonical_placement(n, t).unwrap();
        let len = reps * min_len(&spec, 2, Engine::B);
        let lib = Library::random(1, len, seed).unwrap();
        let parts = split_message(lib.message(1), &spec.alpha).unwrap();
        prop_assert_eq!(parts.len(), spec.group_count);
        prop_assert_eq!(&scpir::BitString::concat(&parts), lib.message(1));
    }

    #[test]
    fn bit_addresses_cover_each_message_once((n, t) in n_and_t(10), k in 1usize..=3) {
        let spec = canonical_placement(n, t).unwrap();
        let len = min_len(&spec, k, Engine::B);
        let lengths = submessage_lengths(&spec.alpha, len).unwrap();
        let offsets = submessage_offsets(&lengths);
        let mut seen = vec![false; len];
        for (f, &l) in lengths.iter().enumerate() {
            for j in 1..=l {
                let pos = BitAddress::new(1, f + 1, j).message_position(&offsets);
                prop_assert!(!seen[pos]);
                seen[pos] = true;
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn stores_respect_storage_bound((n, t) in n_and_t(8), k in 1usize..=3, seed: u64) {
        let spec = canonical_placement(n, t).unwrap();
        let len = min_len(&spec, k, Engine::B);
        let lib = Library::random(k, len, seed).unwrap();
        let mu = t / rational::int(n as i128);
        let cap = mu * rational::int((k * len) as i128);
        for store in DatabaseStore::build_all(&lib, &spec).unwrap() {
            let stored = rational::int(store.stored_bits() as i128);
            prop_assert!(stored <= cap);
            // every canonical construction fills each database exactly
            prop_assert_eq!(stored, cap);
            for (addr, bit) in store.iter() {
                let offsets = submessage_offsets(&submessage_lengths(&spec.alpha, len).unwrap());
                prop_assert_eq!(lib.message(addr.message).get(addr.message_position(&offsets)), bit);
            }
        }
    }

    #[test]
    fn partition_properties(n in 1usize..=12, t in 1usize..=12) {
        prop_assume!(t <= n && n % t == 0);
        let spec = partition_placement(n, t).unwrap();
        prop_assert!(spec.is_partition());
        prop_assert_eq!(spec.group_count, n / t);
        for db in 1..=n {
            prop_assert_eq!(spec.groups_of(db).len(), 1);
        }
        for a in &spec.alpha {
            prop_assert_eq!(*a, Rational::new(t as i128, n as i128));
        }
        let r = validate_placement(&spec, Rational::new(t as i128, n as i128), 2, n * t, Some(Engine::A));
        prop_assert!(r.runnable(), "{:?}", r.violations);
        prop_assert!(r.capacity_sufficient);
    }

    #[test]
    fn cyclic_properties(n in 1usize..=12, t in 1usize..=12) {
        prop_assume!(t <= n);
        let spec = cyclic_placement(n, t).unwrap();
        prop_assert_eq!(spec.group_count, n);
        for (f, g) in spec.groups.iter().enumerate() {
            prop_assert_eq!(g.len(), t);
            prop_assert_eq!(*g.last().unwrap(), f + 1);
            prop_assert_eq!(g.iter().collect::<BTreeSet<_>>().len(), t);
        }
        for db in 1..=n {
            prop_assert_eq!(spec.groups_of(db).len(), t);
        }
        let load = spec.per_database_load();
        prop_assert!(load.iter().all(|&l| l == Rational::new(t as i128, n as i128)));
    }

    #[test]
    fn mixed_properties(n in 2usize..=12, h in 3usize..=23) {
        prop_assume!(h % 2 == 1 && h < 2 * n);
        let t = half(h);
        let spec = mixed_placement(n, t).unwrap();
        prop_assert_eq!(spec.group_count, 2 * n);
        prop_assert_eq!(rational::sum(&spec.alpha), Rational::from_integer(1));
        let load = spec.per_database_load();
        prop_assert!(load.iter().all(|&l| l == t / rational::int(n as i128)));
        let lo = h / 2;
        let mut by_size: BTreeMap<usize, Rational> = BTreeMap::new();
        for (g, a) in spec.groups.iter().zip(&spec.alpha) {
            prop_assert!(g.len() == lo || g.len() == lo + 1);
            *by_size.entry(g.len()).or_default() += a;
        }
        prop_assert_eq!(by_size[&lo], t.ceil() - t);
        prop_assert_eq!(by_size[&(lo + 1)], t - t.floor());
    }

    #[test]
    fn per_order_counts_follow_schedule(case in group_case()) {
        let plan = case.plan();
        let schedule = case.engine.schedule(case.n, case.k, case.start);
        for d in 0..case.n {
            let mut per_order = vec![0usize; case.k];
            for q in plan.queries_at(d + 1) {
                per_order[q.order() - 1] += 1;
            }
            for r in 1..=case.k {
                let expected = binomial(case.k, r) * schedule[d][r - 1] * case.reps;
                prop_assert_eq!(per_order[r - 1], expected, "db {} order {}", d + 1, r);
            }
        }
        let cost = scpir::engine::group_download_cost(case.n, case.k, case.engine) as usize;
        prop_assert_eq!(plan.queries.len(), cost * case.reps);
    }

    #[test]
    fn group_decodes_desired_submessage(case in group_case(), lib_seed: u64) {
        let len = case.len();
        let plan = case.plan();
        let lib = Library::random(case.k, len, lib_seed).unwrap();
        let spec = PlacementSpec::new(
            case.n,
            rational::int(case.n as i128),
            vec![Rational::from_integer(1)],
            vec![(1..=case.n).collect()],
        ).unwrap();
        let stores = DatabaseStore::build_all(&lib, &spec).unwrap();
        let answers: Vec<bool> = plan
            .queries
            .iter()
            .map(|q| answer_query(&stores[q.database - 1], q).unwrap())
            .collect();
        let decoded = decode_group(&plan, &answers).unwrap();
        prop_assert_eq!(&decoded, lib.message(case.desired));
    }

    #[test]
    fn side_information_comes_from_other_databases(case in group_case()) {
        let plan = case.plan();
        for (i, link) in plan.side_info_links.iter().enumerate() {
            let q = &plan.queries[i];
            match link {
                None => prop_assert!(q.order() == 1 || !q.touches(case.desired)),
                Some(src) => {
                    let s = &plan.queries[*src];
                    prop_assert_ne!(s.database, q.database);
                    prop_assert!(!s.touches(case.desired));
                    let rest: Vec<BitAddress> =
                        q.addends.iter().copied().filter(|a| a.message != case.desired).collect();
                    prop_assert_eq!(&rest, &s.addends);
                    prop_assert_eq!(q.order(), s.order() + 1);
                }
            }
        }
    }

    #[test]
    fn every_message_set_is_asked_equally(case in group_case()) {
        let plan = case.plan();
        for d in 1..=case.n {
            let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
            for q in plan.queries_at(d) {
                *counts.entry(q.messages()).or_default() += 1;
            }
            for r in 1..=case.k {
                let per_set: BTreeSet<usize> = itertools::Itertools::combinations(1..=case.k, r)
                    .map(|s| counts.get(&s).copied().unwrap_or(0))
                    .collect();
                prop_assert_eq!(per_set.len(), 1, "db {} order {}: {:?}", d, r, counts);
            }
        }
    }

    #[test]
    fn no_bit_repeats_within_a_database(case in group_case()) {
        let plan = case.plan();
        for d in 1..=case.n {
            let mut seen = BTreeSet::new();
            for q in plan.queries_at(d) {
                for a in &q.addends {
                    prop_assert!(seen.insert(*a), "bit {} asked twice at db {}", a, d);
                }
            }
        }
        let desired: Vec<BitAddress> = plan
            .queries
            .iter()
            .flat_map(|q| q.addends.iter().copied())
            .filter(|a| a.message == case.desired)
            .collect();
        prop_assert_eq!(desired.len(), case.len());
        prop_assert_eq!(desired.iter().collect::<BTreeSet<_>>().len(), case.len());
    }

    #[test]
    fn rate_matches_composition((n, t) in n_and_t(6), k in 1usize..=3, seed: u64, theta_pick: usize) {
        let spec = canonical_placement(n, t).unwrap();
        let engine = EngineChoice::Auto.resolve(&spec);
        let len = min_len(&spec, k, engine);
        let lib = Library::random(k, len, seed).unwrap();
        let theta = theta_pick % k + 1;
        let tr = run_session(&lib, &spec, EngineChoice::Auto, theta, seed).unwrap();
        prop_assert_eq!(&tr.decoded, lib.message(theta));
        let measured = Rational::new(len as i128, tr.downloads as i128);
        prop_assert_eq!(measured, composed_rate(&spec.alpha, &tr.group_rates()).unwrap());
        prop_assert_eq!(measured, capacity_general_t(t, k).unwrap());
    }

    #[test]
    fn capacity_grows_with_storage_and_shrinks_with_messages(h in 2usize..=20, k in 2usize..=5) {
        let t = half(h);
        let next = half(h + 1);
        prop_assert!(capacity_general_t(t, k).unwrap() < capacity_general_t(next, k).unwrap());
        if h > 2 {
            prop_assert!(capacity_general_t(t, k + 1).unwrap() < capacity_general_t(t, k).unwrap());
        }
    }

    #[test]
    fn minimum_length_never_exceeds_baseline(n in 1usize..=12, t in 1usize..=12, k in 1usize..=4) {
        prop_assume!(t <= n);
        let min = min_message_length(n, t, k).unwrap();
        let base = baseline_message_length(n, t, k).unwrap();
        prop_assert!(min <= base);
        let spec = canonical_placement(n, rational::int(t as i128)).unwrap();
        let engine = EngineChoice::Auto.resolve(&spec);
        prop_assert_eq!(min_message_length_general(&spec, k, engine).unwrap(), min);
    }

    #[test]
    fn library_roundtrip(k in 1usize..=5, len in 1usize..=200, seed: u64) {
        let lib = Library::random(k, len, seed).unwrap();
        let mut buf = Vec::new();
        lib.write_to(&mut buf).unwrap();
        prop_assert_eq!(&buf, &lib.to_bytes());
        let back = Library::read_from(buf.as_slice()).unwrap();
        prop_assert_eq!(back, lib);
    }
}

#[test]
fn corrupted_library_is_rejected() {
    let lib = Library::random(2, 13, 7).unwrap();
    let mut bytes = lib.to_bytes();
    bytes[0] ^= 1;
    assert!(Library::from_bytes(&bytes).is_err());
    let bytes = lib.to_bytes();
    assert!(Library::from_bytes(&bytes[..bytes.len() - 1]).is_err());
}
