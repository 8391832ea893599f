use std::collections::HashSet;

use lda_core::encode::{Encoding, FeatureEncoder, FeatureMatrix, FeatureSet, SourceFeature};
use lda_core::fairness::{disparities, group_rates, Group};
use lda_core::frontier::{tradeoff_frontier, FeatureConfig, TradeoffPoint};
use lda_core::ingest::{categorize_race, LoanOutcome, LoanRecord, RaceCategory};
use lda_core::models::cart::{self, TreeParams};
use lda_core::models::forest::{self, ForestParams, MaxFeatures};
use lda_core::models::knn::{self, KnnParams};
use lda_core::models::logistic::{self, LogisticParams};
use lda_core::models::naive_bayes::{self, NaiveBayesParams};
use lda_core::models::ModelFamily;
use lda_core::sim::{priority_order, rank_and_approve, Cents, LoanApplication};
use lda_core::split::sample_and_split;
use proptest::prelude::*;

fn race_oracle(race: i32, eth: i32) -> RaceCategory {
    let hispanic = [1, 11, 12, 13, 14];
    let non_hispanic = [2, 3, 4];
    if hispanic.contains(&eth) {
        RaceCategory::Hispanic
    } else if !non_hispanic.contains(&eth) {
        RaceCategory::NoneCategory
    } else if race == 2 || (21..=27).contains(&race) {
        RaceCategory::Asian
    } else if race == 3 {
        RaceCategory::Black
    } else if race == 5 {
        RaceCategory::White
    } else if [1, 4, 41, 42, 43, 44].contains(&race) {
        RaceCategory::OtherRace
    } else if race == 6 {
        RaceCategory::RaceNotReported
    } else {
        RaceCategory::NoneCategory
    }
}

fn outcome(denied: bool) -> LoanOutcome {
    if denied {
        LoanOutcome::Denied
    } else {
        LoanOutcome::Approved
    }
}

fn record(
    id: u64,
    nums: [f64; 4],
    cats: [usize; 3],
    race: RaceCategory,
    denied: bool,
) -> LoanRecord {
    let purposes = ["1", "2", "31", "32"];
    let sexes = ["Male", "Female", "Joint"];
    let types = ["1", "2", "3"];
    LoanRecord {
        id,
        income: nums[0],
        applicant_sex: sexes[cats[0] % 3].into(),
        race,
        occupancy_type: "1".into(),
        dwelling_category: "Single Family (1-4 Units):Site-Built".into(),
        loan_purpose: purposes[cats[1] % 4].into(),
        loan_type: types[cats[2] % 3].into(),
        loan_amount: nums[1],
        interest_rate: None,
        tract_population: nums[2],
        tract_minority_pct: nums[3],
        msa_median_income: 80_000.0,
        tract_to_msa_income_pct: 100.0,
        tract_owner_occupied: 900.0,
        tract_one_to_four_family: 1200.0,
        outcome: outcome(denied),
    }
}

fn race_strategy() -> impl Strategy<Value = RaceCategory> {
    prop::sample::select(RaceCategory::ALL.to_vec())
}

fn record_strategy() -> impl Strategy<Value = ([f64; 4], [usize; 3], RaceCategory, bool)> {
    (
        [
            1.0..500.0f64,
            10_000.0..900_000.0f64,
            100.0..9000.0f64,
            0.0..100.0f64,
        ],
        [0..3usize, 0..4usize, 0..3usize],
        race_strategy(),
        any::<bool>(),
    )
}

fn matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
    FeatureMatrix::from_rows(rows).unwrap()
}

/// Rows of `d` features in `[-3, 3]` with labels.
fn dataset(max_n: usize, max_d: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<bool>)> {
    (2..=max_n, 1..=max_d).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(prop::collection::vec(-3.0..3.0f64, d), n),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

/// `(truly denied, predicted denied, score, race)`.
type Row = (bool, bool, f64, RaceCategory);

fn both_classes(y: &[bool]) -> bool {
    y.iter().any(|&b| b) && y.iter().any(|&b| !b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn race_category_matches_rules(race in -5..60i32, eth in -5..20i32) {
        prop_assert_eq!(categorize_race(race, eth), race_oracle(race, eth));
    }

    #[test]
    fn one_hot_columns_decode_to_source_category(
        specs in prop::collection::vec(record_strategy(), 2..40)
    ) {
        let records: Vec<LoanRecord> = specs
            .iter()
            .enumerate()
            .map(|(i, (n, c, r, d))| record(i as u64, *n, *c, *r, *d))
            .collect();
        let enc = FeatureEncoder::fit(&records, &[], FeatureSet::ALL).unwrap();
        let x = enc.transform(&records);
        for (i, r) in records.iter().enumerate() {
            prop_assert_eq!(x.decode_category(i, SourceFeature::LoanPurpose), Some(r.loan_purpose.as_str()));
            prop_assert_eq!(x.decode_category(i, SourceFeature::ApplicantSex), Some(r.applicant_sex.as_str()));
            prop_assert_eq!(x.decode_category(i, SourceFeature::Race), Some(r.race.name()));
        }
        for (j, col) in x.columns().iter().enumerate() {
            if let Encoding::Standardized { scale, .. } = col.encoding {
                let v: Vec<f64> = (0..x.n_rows()).map(|i| x.get(i, j)).collect();
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                prop_assert!(mean.abs() < 1e-9);
                if scale != 1.0 {
                    let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / v.len() as f64;
                    prop_assert!((var - 1.0).abs() < 1e-9);
                }
            }
        }
        let blind = FeatureEncoder::fit(&records, &[], FeatureSet::DEMOGRAPHIC_BLIND).unwrap().transform(&records);
        prop_assert!(!blind.has_race_columns());
        prop_assert!(blind.columns().iter().all(|c| c.source != SourceFeature::ApplicantSex
            && c.source != SourceFeature::TractMinorityPct));
    }

    #[test]
    fn group_rates_match_counting(
        rows in prop::collection::vec((any::<bool>(), any::<bool>(), 0.0..1.0f64, race_strategy()), 0..60),
        target in prop::sample::select(vec![
            Group::Race(RaceCategory::White),
            Group::Race(RaceCategory::Black),
            Group::PeopleOfColor,
        ])
    ) {
        let labels: Vec<_> = rows.iter().map(|r| outcome(r.0)).collect();
        let preds: Vec<_> = rows.iter().map(|r| outcome(r.1)).collect();
        let scores: Vec<_> = rows.iter().map(|r| r.2).collect();
        let races: Vec<_> = rows.iter().map(|r| r.3).collect();
        let g = group_rates(&preds, &scores, &labels, &races, target).unwrap();

        let members: Vec<_> = rows.iter().filter(|r| target.contains(r.3)).collect();
        let count = |f: &dyn Fn(&&Row) -> bool| members.iter().filter(|r| f(r)).count();
        let tp = count(&|r| r.0 && r.1);
        let fp = count(&|r| !r.0 && r.1);
        let pos = count(&|r| r.0);
        let neg = count(&|r| !r.0);
        prop_assert_eq!(g.n, members.len());
        prop_assert_eq!(g.tpr, (pos > 0).then(|| tp as f64 / pos as f64));
        prop_assert_eq!(g.fpr, (neg > 0).then(|| fp as f64 / neg as f64));
        prop_assert_eq!(g.ppv, (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64));
        let mean_pos = members.iter().filter(|r| r.0).map(|r| r.2).sum::<f64>() / pos as f64;
        prop_assert_eq!(g.mean_score_pos, (pos > 0).then_some(mean_pos));
    }

    #[test]
    fn disparities_are_antisymmetric(
        rows in prop::collection::vec((any::<bool>(), any::<bool>(), 0.0..1.0f64, race_strategy()), 0..60)
    ) {
        let labels: Vec<_> = rows.iter().map(|r| outcome(r.0)).collect();
        let preds: Vec<_> = rows.iter().map(|r| outcome(r.1)).collect();
        let scores: Vec<_> = rows.iter().map(|r| r.2).collect();
        let races: Vec<_> = rows.iter().map(|r| r.3).collect();
        let w = group_rates(&preds, &scores, &labels, &races, Group::Race(RaceCategory::White)).unwrap();
        let b = group_rates(&preds, &scores, &labels, &races, Group::Race(RaceCategory::Black)).unwrap();
        let (ab, ba) = (disparities(&w, &b), disparities(&b, &w));
        for (x, y) in [(ab.eop, ba.eop), (ab.fperb, ba.fperb), (ab.ppp, ba.ppp), (ab.pcb, ba.pcb), (ab.ncb, ba.ncb)] {
            prop_assert_eq!(x.map(|v| -v), y);
        }
        prop_assert_eq!(ab.eo, ba.eo);
        if let Some(eo) = ab.eo {
            prop_assert!(eo >= 0.0);
        }
        let same = disparities(&w, &w);
        prop_assert!(same.eop.is_none_or(|v| v == 0.0));
    }

    #[test]
    fn simulator_invariants(
        apps in prop::collection::vec((1i64..500, 0.0..1.0f64, any::<bool>()), 0..12),
        caps in prop::collection::vec(1i64..3000, 1..5),
        rate in 0.0..0.2f64
    ) {
        let apps: Vec<LoanApplication> = apps
            .iter()
            .enumerate()
            .map(|(i, (a, p, b))| LoanApplication {
                id: i as u64,
                amount: Cents(a * 100),
                repay_prob: *p,
                group: if *b { RaceCategory::Black } else { RaceCategory::White },
            })
            .collect();
        let mut caps: Vec<i64> = caps.iter().map(|c| c * 100).collect();
        caps.sort_unstable();
        for cap in caps {
            let r = rank_and_approve(&apps, Cents(cap), rate).unwrap();
            let approved: HashSet<u64> = r.approved.iter().copied().collect();
            let total: i64 = apps.iter().filter(|a| approved.contains(&a.id)).map(|a| a.amount.0).sum();
            prop_assert!(total <= cap);
            prop_assert_eq!(Cents(total), r.total_amount_approved);
            prop_assert_eq!(r.approved.len() + r.denied.len(), apps.len());
            let ev: f64 = apps
                .iter()
                .filter(|a| approved.contains(&a.id))
                .map(|a| a.repay_prob * a.amount.units() * (1.0 + rate))
                .sum();
            prop_assert!((r.expected_value - ev).abs() <= 1e-9 * ev.abs().max(1.0));
            // Every skipped application was too large for what was left when reached.
            let mut remaining = cap;
            for i in priority_order(&apps) {
                let a = &apps[i];
                if approved.contains(&a.id) {
                    remaining -= a.amount.0;
                } else {
                    prop_assert!(a.amount.0 > remaining);
                }
            }
        }
    }

    #[test]
    fn uniform_amounts_denial_falls_with_cap(
        apps in prop::collection::vec((0.0..1.0f64, any::<bool>()), 0..12),
        caps in prop::collection::vec(1i64..15, 1..5)
    ) {
        let apps: Vec<LoanApplication> = apps
            .iter()
            .enumerate()
            .map(|(i, (p, b))| LoanApplication {
                id: i as u64,
                amount: Cents(100),
                repay_prob: *p,
                group: if *b { RaceCategory::Black } else { RaceCategory::White },
            })
            .collect();
        let mut caps: Vec<i64> = caps.iter().map(|c| c * 100).collect();
        caps.sort_unstable();
        let mut prev: Option<lda_core::sim::PortfolioResult> = None;
        for cap in caps {
            let r = rank_and_approve(&apps, Cents(cap), 0.0).unwrap();
            if let Some(p) = &prev {
                prop_assert!(p.approved.iter().all(|id| r.approved.contains(id)));
                for (g, rate) in r.group_denial_rates() {
                    prop_assert!(rate <= p.group_denial_rates()[&g]);
                }
            }
            prev = Some(r);
        }
    }

    #[test]
    fn uniform_amounts_approve_a_priority_prefix(
        probs in prop::collection::vec(0.0..1.0f64, 0..12),
        k in 0usize..14
    ) {
        let apps: Vec<LoanApplication> = probs
            .iter()
            .enumerate()
            .map(|(i, p)| LoanApplication { id: i as u64, amount: Cents(100), repay_prob: *p, group: RaceCategory::White })
            .collect();
        let r = rank_and_approve(&apps, Cents(100 * k as i64 + 50), 0.0).unwrap();
        let prefix: Vec<u64> = priority_order(&apps).into_iter().take(k).map(|i| apps[i].id).collect();
        prop_assert_eq!(r.approved, prefix);
    }

    #[test]
    fn frontier_equals_exhaustive_enumeration(
        pts in prop::collection::vec((0u8..8, 0u8..8), 1..20)
    ) {
        let points: Vec<TradeoffPoint> = pts
            .iter()
            .enumerate()
            .map(|(i, (ev, d))| TradeoffPoint {
                candidate: format!("c{i:02}"),
                family: ModelFamily::Logistic,
                feature_config: FeatureConfig::RaceAware,
                expected_value_millions: *ev as f64,
                black_denial_pct: Some(*d as f64 * 5.0),
                median_accuracy: 0.5,
            })
            .collect();
        let f = tradeoff_frontier(&points);
        let dominated = |p: &TradeoffPoint| points.iter().any(|q| {
            let (qd, pd) = (q.black_denial_pct.unwrap(), p.black_denial_pct.unwrap());
            q.expected_value_millions >= p.expected_value_millions && qd <= pd
                && (q.expected_value_millions > p.expected_value_millions || qd < pd)
        });
        let mut expected: Vec<&str> = points.iter().filter(|p| !dominated(p)).map(|p| p.candidate.as_str()).collect();
        let mut got: Vec<&str> = f.frontier.iter().map(|p| p.candidate.as_str()).collect();
        expected.sort_unstable();
        got.sort_unstable();
        prop_assert_eq!(got, expected);
        for d in &f.dominated {
            prop_assert!(!d.dominated_by.is_empty());
        }
        prop_assert!(f.frontier.windows(2).all(|w| w[0].black_denial_pct <= w[1].black_denial_pct));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn logistic_gradient_matches_finite_differences(
        (rows, y) in dataset(60, 6),
        params in prop::collection::vec(-1.0..1.0f64, 7)
    ) {
        let x = matrix(&rows);
        let p = &params[..x.n_cols() + 1];
        let g = logistic::gradient(p, &x, &y);
        let h = 1e-6;
        for j in 0..p.len() {
            let mut up = p.to_vec();
            let mut dn = p.to_vec();
            up[j] += h;
            dn[j] -= h;
            let fd = (logistic::log_likelihood(&up, &x, &y) - logistic::log_likelihood(&dn, &x, &y)) / (2.0 * h);
            prop_assert!((g[j] - fd).abs() <= 1e-5 * fd.abs().max(1.0), "coord {j}: {} vs {fd}", g[j]);
        }
    }

    #[test]
    fn naive_bayes_posteriors_sum_to_one(
        (rows, y) in dataset(40, 5),
        q in prop::collection::vec(-50.0..50.0f64, 5),
        ratio in prop::sample::select(vec![1e-9, 1e-3, 1.0])
    ) {
        prop_assume!(both_classes(&y));
        let x = matrix(&rows);
        let labels: Vec<_> = y.iter().map(|&b| outcome(b)).collect();
        let m = naive_bayes::fit(&x, &labels, &NaiveBayesParams { var_smoothing_ratio: ratio }).unwrap();
        let (a, d) = m.posteriors(&q[..x.n_cols()]);
        prop_assert!((a + d - 1.0).abs() <= 1e-9);
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn cart_splits_never_raise_weighted_gini(
        (rows, y) in dataset(80, 4),
        min_leaf in 1usize..4
    ) {
        prop_assume!(rows.len() >= min_leaf);
        let x = matrix(&rows);
        let labels: Vec<_> = y.iter().map(|&b| outcome(b)).collect();
        let t = cart::fit(&x, &labels, &TreeParams { max_depth: None, min_leaf }).unwrap();
        for node in &t.nodes {
            if let Some(s) = node.split {
                let (l, r) = (&t.nodes[s.left], &t.nodes[s.right]);
                prop_assert_eq!(l.n + r.n, node.n);
                prop_assert!(l.n >= min_leaf && r.n >= min_leaf);
                let weighted = (l.n as f64 * l.gini + r.n as f64 * r.gini) / node.n as f64;
                prop_assert!(weighted <= node.gini + 1e-12);
                prop_assert!((node.gini - cart::gini(node.n, node.n_denied)).abs() < 1e-15);
            }
        }
        for (i, row) in rows.iter().enumerate() {
            let s = t.score(row);
            prop_assert!((0.0..=1.0).contains(&s));
            // A fully grown tree separates rows that differ in any feature.
            if rows.iter().zip(&y).all(|(r, &yy)| r != row || yy == y[i]) && min_leaf == 1 {
                prop_assert_eq!(s, if y[i] { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn single_tree_forest_is_cart((rows, y) in dataset(60, 4), depth in 1usize..6) {
        let x = matrix(&rows);
        let labels: Vec<_> = y.iter().map(|&b| outcome(b)).collect();
        let tp = TreeParams { max_depth: Some(depth), min_leaf: 1 };
        let fp = ForestParams { n_trees: 1, max_depth: tp.max_depth, min_leaf: 1, max_features: MaxFeatures::All, bootstrap: false };
        let f = forest::fit(&x, &labels, &fp, 17).unwrap();
        let t = cart::fit(&x, &labels, &tp).unwrap();
        for row in &rows {
            prop_assert_eq!(f.score(row), t.score(row));
        }
    }

    #[test]
    fn knn_score_is_neighbor_denial_share(
        (rows, y) in dataset(40, 3),
        q in prop::collection::vec(-3.0..3.0f64, 3)
    ) {
        prop_assume!(rows.len() >= 5);
        let x = matrix(&rows);
        let labels: Vec<_> = y.iter().map(|&b| outcome(b)).collect();
        let m = knn::fit(&x, &labels, &KnnParams { k: 5 }).unwrap();
        let q = &q[..x.n_cols()];
        let mut order: Vec<(f64, usize)> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>(), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let share = order[..5].iter().filter(|(_, i)| y[*i]).count() as f64 / 5.0;
        prop_assert_eq!(m.score(q), share);
    }

    #[test]
    fn splits_partition_a_sample(n in 2usize..200, frac in 0.1..0.9f64, seed in any::<u64>()) {
        let records: Vec<LoanRecord> = (0..n as u64)
            .map(|i| record(i, [50.0, 1e5, 1e3, 10.0], [0, 0, 0], RaceCategory::White, i % 2 == 0))
            .collect();
        let size = n / 2 + 1;
        let s = sample_and_split(&records, size, frac, seed).unwrap();
        prop_assert_eq!(s.train.len() + s.test.len(), size);
        prop_assert_eq!(s.train.len(), (size as f64 * frac).round() as usize);
        let ids: HashSet<u64> = s.train.iter().chain(&s.test).map(|r| r.id).collect();
        prop_assert_eq!(ids.len(), size);
        prop_assert_eq!(s, sample_and_split(&records, size, frac, seed).unwrap());
    }
}

#[test]
fn converged_logistic_gradient_is_small() {
    let rows: Vec<Vec<f64>> = (0..120)
        .map(|i| {
            vec![
                ((i * 37) % 17) as f64 / 5.0 - 1.5,
                ((i * 11) % 13) as f64 / 4.0 - 1.5,
            ]
        })
        .collect();
    let y: Vec<bool> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| r[0] - 0.5 * r[1] + ((i * 7) % 5) as f64 * 0.4 - 0.8 > 0.0)
        .collect();
    let labels: Vec<_> = y.iter().map(|&b| outcome(b)).collect();
    let x = matrix(&rows);
    let m = logistic::fit(&x, &labels, &LogisticParams::default()).unwrap();
    assert!(m.converged);
    let mut p = m.weights.clone();
    p.push(m.intercept);
    let g = logistic::gradient(&p, &x, &y);
    assert!(g.iter().all(|v| v.abs() <= 1e-8), "{g:?}");
}
