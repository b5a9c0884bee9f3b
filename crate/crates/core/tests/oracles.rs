mod common;

use std::collections::HashMap;
use std::sync::Arc;

use rlvr_forge::gateway::{mock_solve, VariantDifficulty};
use rlvr_forge::rating::{bootstrap_ratings, fit_bt, judge_all, schedule_battles, BattleRecord, Judgement, Outcome, RatingItem, Side};
use rlvr_forge::rollout::{extract_answer, pass_count};
use rlvr_forge::selector::select_seeds;
use rlvr_forge::{MatchPolicy, RatingConfig, Sample, SelectionConfig};

use common::{fixed_grid_oracle3, mock_corpus};

/// Stand-alone copy of the keyed stream: FNV-1a of the item, SplitMix64
/// finalizer, golden-ratio increments.
fn reference_draws(seed: u64, item: &str, index: u64, count: usize) -> Vec<u64> {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in item.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    let fin = |mut z: u64| {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    };
    let mut state = fin(fin(seed ^ h).wrapping_add(index));
    (0..count)
        .map(|_| {
            state = state.wrapping_add(0x9e3779b97f4a7c15);
            fin(state)
        })
        .collect()
}

#[test]
fn mock_solve_follows_reference_stream() {
    let s = Sample::seed("probe", "p.png", "What is 6 * 7?", "42");
    let mut solved = 0;
    for call in 0..16u64 {
        let draws = reference_draws(42, "probe", call, 2);
        let expect_solved = ((draws[0] >> 11) as f64 / (1u64 << 53) as f64) < 0.5;
        let expect_steps = 2 + (draws[1] % 4) as usize;
        let c = mock_solve(&s, 0.5, 42, call);
        let boxed = extract_answer(&c.text).unwrap().unwrap();
        assert_eq!(boxed == "42", expect_solved, "call {call}");
        assert_eq!(c.text.matches("Step ").count(), expect_steps, "call {call}");
        solved += usize::from(expect_solved);
    }
    assert!(solved > 0 && solved < 16);
}

#[test]
fn three_item_example_matches_fixed_grid() {
    // A>B 3 of 4, B>C 3 of 4, A>C 2 of 4
    let w = [[0.0, 3.0, 2.0], [1.0, 0.0, 3.0], [2.0, 1.0, 0.0]];
    let mut battles = Vec::new();
    let names = ["A", "B", "C"];
    for i in 0..3 {
        for j in 0..3 {
            for _ in 0..w[i][j] as usize {
                battles.push(BattleRecord {
                    item_a: names[i].into(),
                    item_b: names[j].into(),
                    outcome: Outcome::AWins,
                    presented_first: Side::A,
                    judge_raw: String::new(),
                });
            }
        }
    }
    let items: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let fit = fit_bt(&battles, &items, 1e-4).unwrap();
    let oracle = fixed_grid_oracle3(&w, 1e-4, 5.0, 0.005);
    for (i, n) in names.iter().enumerate() {
        assert!((fit.theta[*n] - oracle[i]).abs() <= 0.01, "{n}: {} vs {}", fit.theta[*n], oracle[i]);
    }
    assert!(fit.theta["A"] > fit.theta["B"] && fit.theta["B"] > fit.theta["C"]);
}

#[test]
fn selection_rate_matches_binomial_tail() {
    // P(Binomial(16, 0.7) >= 12), summed directly
    let p: f64 = 0.7;
    let choose = |n: u64, k: u64| (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
    let tail: f64 = (12..=16).map(|k| choose(16, k) * p.powi(k as i32) * (1.0 - p).powi(16 - k as i32)).sum();

    let n = 2000;
    let (data, world) = mock_corpus(n, |_| p, VariantDifficulty::Fixed { p: 0.0 });
    let solver = world.solver("t");
    let results: Vec<_> = data.samples().iter().map(|s| pass_count(s, &solver, 16, 5, &MatchPolicy::default()).unwrap()).collect();
    let selected = select_seeds(&results, &SelectionConfig::default()).unwrap().len() as f64;
    let expected = tail * n as f64;
    let sd = (n as f64 * tail * (1.0 - tail)).sqrt();
    assert!((selected - expected).abs() <= 3.0 * sd, "{selected} vs {expected} +- {}", 3.0 * sd);

    let mean = results.iter().map(|r| r.pass_count as f64).sum::<f64>() / n as f64;
    let se = (16.0 * p * (1.0 - p) / n as f64).sqrt();
    assert!((mean - 16.0 * p).abs() <= 3.0 * se);
}

fn simulated_ratings(k: usize, seed: u64) -> Vec<rlvr_forge::RatingResult> {
    let n = 20;
    let mut world = rlvr_forge::gateway::SimulatedWorld::default();
    let items: Vec<RatingItem> =
        (0..n).map(|i| RatingItem { id: format!("it{i}"), question: format!("P{i}"), image_ref: String::new() }).collect();
    for (i, it) in items.iter().enumerate() {
        world.add_question(it.question.clone(), "0", 0.5, 0.5 * (i as f64 - 9.5));
    }
    let world = Arc::new(world);
    let judge = world.battle_judge("j");
    let ids: Vec<String> = items.iter().map(|i| i.id.clone()).collect();
    let cfg = RatingConfig { k_opponents: k, bootstrap_rounds: 60, ..RatingConfig::default() };
    let schedule = schedule_battles(&ids, k, seed).unwrap();
    let battles: Vec<_> = judge_all(&judge, &schedule, &items, seed, 0)
        .unwrap()
        .into_iter()
        .filter_map(|j| if let Judgement::Decided(b) = j { Some(b) } else { None })
        .collect();
    bootstrap_ratings(&battles, &ids, &cfg, seed).unwrap()
}

#[test]
fn more_battles_narrow_intervals() {
    let width = |r: &[rlvr_forge::RatingResult]| r.iter().map(|x| x.ci_high - x.ci_low).sum::<f64>() / r.len() as f64;
    let seeds = 0..6u64;
    let narrow: f64 = seeds.clone().map(|s| width(&simulated_ratings(16, s))).sum();
    let wide: f64 = seeds.map(|s| width(&simulated_ratings(6, s))).sum();
    assert!(narrow < wide, "k=16 width {narrow} vs k=6 width {wide}");
}

#[test]
fn rating_is_deterministic() {
    let a = simulated_ratings(8, 3);
    let b = simulated_ratings(8, 3);
    assert_eq!(a, b);
    let by_id: HashMap<_, _> = a.iter().map(|r| (r.item_id.clone(), r.elo_median)).collect();
    assert!(by_id["it19"] > by_id["it0"]);
}
