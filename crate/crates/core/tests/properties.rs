mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rlvr_forge::dataset::{combine_augment, combine_replace, preprocess, PreprocessRules};
use rlvr_forge::rating::{bootstrap_ratings, bt_win_prob, fit_bt, schedule_battles, BattleRecord, Outcome, Side};
use rlvr_forge::synth::verify_candidate;
use rlvr_forge::{Dataset, Origin, PipelineConfig, RatingConfig, Sample, Verdict};
use serde_json::json;

fn text() -> impl Strategy<Value = String> {
    // includes quotes, backslashes, braces and non-ASCII
    proptest::string::string_regex(r#"[a-zA-Z0-9π][a-zA-Z0-9 ,.?\\{}"'\n°π√-]{0,40}"#).unwrap()
}

fn sample_strategy() -> impl Strategy<Value = Sample> {
    (text(), text(), text(), proptest::option::of(0u32..100)).prop_map(|(q, a, img, extra)| {
        let mut s = Sample::seed("x", img, q, a);
        if let Some(v) = extra {
            s.meta.insert("difficulty".into(), json!(v));
        }
        s
    })
}

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    proptest::collection::vec(sample_strategy(), 0..20).prop_map(|v| {
        let samples = v.into_iter().enumerate().map(|(i, s)| Sample { id: format!("id-{i}"), ..s }).collect();
        Dataset::new("d", samples).unwrap()
    })
}

fn battle(a: &str, b: &str, outcome: Outcome) -> BattleRecord {
    BattleRecord { item_a: a.into(), item_b: b.into(), outcome, presented_first: Side::A, judge_raw: String::new() }
}

proptest! {
    #[test]
    fn jsonl_round_trip(d in dataset_strategy()) {
        let text = d.to_jsonl();
        let back = Dataset::from_reader("d", text.as_bytes()).unwrap();
        prop_assert_eq!(back.samples(), d.samples());
    }

    #[test]
    fn preprocess_is_idempotent(d in dataset_strategy(), yes_no in proptest::collection::vec(any::<bool>(), 20)) {
        let samples: Vec<Sample> = d.samples().iter().zip(&yes_no).map(|(s, yn)| {
            let mut s = s.clone();
            if *yn { s.answer = "Yes".into(); }
            s
        }).collect();
        let d = Dataset::new("d", samples).unwrap();
        let (once, _) = preprocess(&d, PreprocessRules::default()).unwrap();
        let (twice, report) = preprocess(&once, PreprocessRules::default()).unwrap();
        prop_assert_eq!(once.samples(), twice.samples());
        prop_assert_eq!(report.removed_yes_no, 0);
        prop_assert_eq!(report.converted_mcq, 0);
    }

    #[test]
    fn combine_sizes(n in 0usize..40, picks in proptest::collection::btree_set(0usize..40, 0..40)) {
        let seed = Dataset::new("s", (0..n).map(|i| Sample::seed(format!("s{i}"), "i.png", format!("q{i}"), "1")).collect()).unwrap();
        let synth: Vec<Sample> = picks.iter().filter(|&&i| i < n).map(|i| Sample {
            id: format!("s{i}-synth"),
            origin: Origin::Synthesized,
            parent_id: Some(format!("s{i}")),
            ..Sample::seed("", "i.png", format!("hard q{i}"), "1")
        }).collect();
        let k = synth.len();
        let synth = Dataset::new("y", synth).unwrap();
        prop_assert_eq!(combine_augment(&seed, &synth).unwrap().len(), n + k);
        let rep = combine_replace(&seed, &synth).unwrap();
        prop_assert_eq!(rep.len(), n);
        let synthesized = rep.samples().iter().filter(|s| s.origin == Origin::Synthesized).count();
        prop_assert_eq!(synthesized, k);
    }

    #[test]
    fn verdict_invariant(c_ori in 0u32..=16, c_cand in 0u32..=16, t_min in 1u32..=8, delta in 1u32..=8) {
        let cfg = PipelineConfig { t_min, delta_hard: delta, ..PipelineConfig::default() };
        let v = verify_candidate(c_ori, c_cand, &cfg);
        if v == Verdict::Accepted {
            prop_assert!(t_min <= c_cand && c_cand + delta <= c_ori);
        } else {
            prop_assert!(c_cand < t_min || c_cand + delta > c_ori);
        }
    }

    #[test]
    fn win_prob_antisymmetric(x in -700.0f64..700.0, y in -700.0f64..700.0) {
        prop_assert_eq!(bt_win_prob(x, y) + bt_win_prob(y, x), 1.0);
        let p = bt_win_prob(x, y);
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn symmetric_wins_fit_is_centred(counts in proptest::collection::vec(1u32..4, 3)) {
        // every pair splits its battles evenly
        let items: Vec<String> = (0..4).map(|i| format!("i{i}")).collect();
        let mut b = Vec::new();
        for (k, (i, j)) in [(0, 1), (1, 2), (2, 3)].into_iter().enumerate() {
            for _ in 0..counts[k] {
                b.push(battle(&items[i], &items[j], Outcome::AWins));
                b.push(battle(&items[j], &items[i], Outcome::AWins));
            }
        }
        let fit = fit_bt(&b, &items, 1e-4).unwrap();
        let mean = fit.theta.values().sum::<f64>() / 4.0;
        prop_assert!(mean.abs() <= 1e-3);
    }

    #[test]
    fn penalized_fit_is_mean_zero(wins in proptest::collection::vec(0u32..5, 6)) {
        let items: Vec<String> = (0..3).map(|i| format!("i{i}")).collect();
        let pairs = [(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)];
        let mut b = Vec::new();
        for (k, (i, j)) in pairs.into_iter().enumerate() {
            for _ in 0..wins[k] {
                b.push(battle(&items[i], &items[j], Outcome::AWins));
            }
        }
        let linked = [(0, 1), (2, 3), (4, 5)].iter().filter(|(p, q)| wins[*p] + wins[*q] > 0).count();
        prop_assume!(linked >= 2);
        let fit = fit_bt(&b, &items, 1e-4).unwrap();
        prop_assert!(fit.theta.values().sum::<f64>().abs() < 1e-6);
    }

    #[test]
    fn dominance_orders_thetas(base in proptest::collection::vec(0u32..4, 3), extra in proptest::collection::vec(0u32..3, 3)) {
        // A and B face the same opponents; A wins at least as often against each
        let items: Vec<String> = ["A", "B", "o0", "o1", "o2"].iter().map(|s| s.to_string()).collect();
        let mut b = Vec::new();
        for k in 0..3 {
            let opp = &items[2 + k];
            let total = 4;
            let b_wins = base[k];
            let a_wins = (base[k] + extra[k]).min(total);
            for w in 0..total {
                b.push(battle("A", opp, if w < a_wins { Outcome::AWins } else { Outcome::BWins }));
                b.push(battle("B", opp, if w < b_wins { Outcome::AWins } else { Outcome::BWins }));
            }
        }
        let fit = fit_bt(&b, &items, 1e-4).unwrap();
        prop_assert!(fit.theta["A"] >= fit.theta["B"] - 1e-9);
    }

    #[test]
    fn schedule_shape(n in 2usize..30, k_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let items: Vec<String> = (0..n).map(|i| format!("i{i}")).collect();
        let k = ((n - 1) as f64 * k_frac).floor() as usize;
        let s = schedule_battles(&items, k, seed).unwrap();
        prop_assert_eq!(s.len(), n * k);
        let mut per: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for b in &s {
            prop_assert_ne!(&b.item_a, &b.item_b);
            prop_assert!(per.entry(&b.item_a).or_default().insert(&b.item_b));
        }
        prop_assert!(schedule_battles(&items, n, seed).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bootstrap_intervals_are_ordered(outcomes in proptest::collection::vec(0u8..3, 12..40), seed in any::<u64>()) {
        let items: Vec<String> = (0..4).map(|i| format!("i{i}")).collect();
        let mut b: Vec<BattleRecord> = (0..4).map(|i| battle(&items[i], &items[(i + 1) % 4], Outcome::Tie)).collect();
        for (k, o) in outcomes.iter().enumerate() {
            let outcome = [Outcome::AWins, Outcome::BWins, Outcome::Tie][*o as usize];
            b.push(battle(&items[k % 4], &items[(k / 4 + k + 1) % 4], outcome));
        }
        b.retain(|x| x.item_a != x.item_b);
        let cfg = RatingConfig { bootstrap_rounds: 30, ..RatingConfig::default() };
        let r = bootstrap_ratings(&b, &items, &cfg, seed).unwrap();
        for x in &r {
            prop_assert!(x.ci_low <= x.elo_median && x.elo_median <= x.ci_high);
            prop_assert_eq!(x.tier, rlvr_forge::rating::categorize(x.elo_median, &cfg));
        }
    }
}
