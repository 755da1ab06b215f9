use std::collections::{BTreeMap, BTreeSet};

use chrono::{Days, NaiveDate};
use proptest::prelude::*;
use tenure_core::ingest::{
    build_spells, default_observation_end, filter_genuine, parse_transactions, segment_periods, write_transactions,
    DeedKind, GenuineFilterPolicy, Neighborhood, ParseOptions, PeriodSegmentation, TransactionRecord, EARLIEST_SALE,
};

fn record(parcel: usize, day: u64, deed: u8, builder: bool, price: u32) -> TransactionRecord {
    TransactionRecord {
        parcel_id: format!("P{parcel:04}"),
        neighborhood: Neighborhood::ALL[parcel % 8],
        sale_date: EARLIEST_SALE + Days::new(day),
        price: f64::from(price),
        deed_kind: [
            DeedKind::Warranty,
            DeedKind::Quitclaim,
            DeedKind::Trustee,
            DeedKind::Other,
        ][deed as usize],
        seller_is_builder: builder,
        appraisal: None,
        sqft: Some(1800.0),
    }
}

// Up to 6 parcels, each with 1..6 sales on distinct days before 2025-01-31.
fn records() -> impl Strategy<Value = Vec<TransactionRecord>> {
    let last_day = (default_observation_end() - EARLIEST_SALE).num_days() as u64;
    prop::collection::vec(
        prop::collection::btree_set(0..=last_day, 1..6).prop_flat_map(|days| {
            let n = days.len();
            (
                Just(days),
                prop::collection::vec((0u8..4, any::<bool>(), 0u32..900_000), n),
            )
        }),
        1..6,
    )
    .prop_map(|parcels| {
        parcels
            .into_iter()
            .enumerate()
            .flat_map(|(p, (days, attrs))| {
                days.into_iter()
                    .zip(attrs)
                    .map(move |(d, (deed, b, price))| record(p, d, deed, b, price))
            })
            .collect()
    })
}

fn sales_by_parcel(recs: &[TransactionRecord]) -> BTreeMap<String, Vec<NaiveDate>> {
    let mut m: BTreeMap<String, Vec<NaiveDate>> = BTreeMap::new();
    for r in recs {
        m.entry(r.parcel_id.clone()).or_default().push(r.sale_date);
    }
    m
}

proptest! {
    #[test]
    fn spells_partition_each_parcel_history(recs in records()) {
        let end = default_observation_end();
        let spells = build_spells(&recs, end);
        for (parcel, mut dates) in sales_by_parcel(&recs) {
            dates.sort();
            let mine: Vec<_> = spells.iter().filter(|s| s.parcel_id == parcel).collect();
            prop_assert_eq!(mine.len(), dates.len());
            prop_assert_eq!(mine.iter().filter(|s| s.censored).count(), 1);
            let closed: i64 = mine.iter().filter(|s| !s.censored).map(|s| i64::from(s.duration_days)).sum();
            prop_assert_eq!(closed, (dates[dates.len() - 1] - dates[0]).num_days());
        }
    }

    #[test]
    fn genuine_filter_is_idempotent(recs in records()) {
        let policy = GenuineFilterPolicy::default();
        let once = filter_genuine(&build_spells(&recs, default_observation_end()), &policy);
        prop_assert_eq!(filter_genuine(&once, &policy), once);
    }

    #[test]
    fn segmentation_keeps_every_spell(recs in records()) {
        let spells = build_spells(&recs, default_observation_end());
        let seg = PeriodSegmentation::default();
        prop_assume!(spells.iter().map(|s| s.entry_date).min().unwrap() < seg.cutoff_date);
        let split = segment_periods(&spells, &seg).unwrap();
        let key = |s: &tenure_core::ingest::OwnershipSpell| (s.parcel_id.clone(), s.entry_date);
        let seen: BTreeSet<_> = split.pre.iter().chain(&split.post).map(key).collect();
        prop_assert_eq!(seen, spells.iter().map(key).collect::<BTreeSet<_>>());
        prop_assert!(split.pre.len() + split.post.len() >= spells.len());
        prop_assert!(split.pre.iter().all(|s| s.exit_date.is_none_or(|e| e <= seg.cutoff_date)));
    }

    #[test]
    fn transaction_table_round_trips(recs in records()) {
        let mut buf = Vec::new();
        write_transactions(&mut buf, &recs).unwrap();
        let back = parse_transactions(&buf[..], &ParseOptions::default()).unwrap();
        prop_assert!(back.errors.is_empty(), "{:?}", back.errors);
        prop_assert_eq!(back.records, recs);
    }
}
