//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use rlvr_forge::gateway::{SimulatedWorld, VariantDifficulty};
use rlvr_forge::keyed::KeyedRng;
use rlvr_forge::{Dataset, Sample};

/// `ln(1 / (1 + e^-x))`, evaluated on the side that cannot overflow.
pub fn ln_sigmoid(x: f64) -> f64 {
    if x > 0.0 {
        -(1.0 + (-x).exp()).ln()
    } else {
        x - (1.0 + x.exp()).ln()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Penalized log-likelihood for three items; `w[i][j]` is the number of wins
/// of `i` over `j` (ties already split).
pub fn penalized3(w: &[[f64; 3]; 3], t: [f64; 3], lambda: f64) -> f64 {
    let mut f = -lambda * (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]);
    for i in 0..3 {
        for j in 0..3 {
            if i != j && w[i][j] > 0.0 {
                f += w[i][j] * ln_sigmoid(t[i] - t[j]);
            }
        }
    }
    f
}

/// Grid search for the maximizer on the plane `sum(theta) = 0`, where the
/// penalized optimum lies. Starts on a 0.5 grid over `[-20, 20]^2` and
/// repeatedly shrinks the step tenfold around the incumbent; at each level
/// the window is re-centred until the best point is interior, so ridges not
/// aligned with the axes are followed.
pub fn grid_oracle3(w: &[[f64; 3]; 3], lambda: f64) -> [f64; 3] {
    let f = |x: f64, y: f64| penalized3(w, [x, y, -x - y], lambda);
    let (mut cx, mut cy) = (0.0, 0.0);
    let mut step = 0.5;
    let mut half_steps = 40i64;
    while step > 1e-7 {
        for _ in 0..10_000 {
            let mut best = (f64::NEG_INFINITY, 0i64, 0i64);
            for a in -half_steps..=half_steps {
                for b in -half_steps..=half_steps {
                    let v = f(cx + a as f64 * step, cy + b as f64 * step);
                    if v > best.0 {
                        best = (v, a, b);
                    }
                }
            }
            cx += best.1 as f64 * step;
            cy += best.2 as f64 * step;
            if best.1.abs() < half_steps && best.2.abs() < half_steps {
                break;
            }
        }
        step /= 10.0;
        half_steps = 10;
    }
    [cx, cy, -cx - cy]
}

/// Full grid over the mean-zero plane with a fixed step, restricted to the
/// cube `[-bound, bound]^3`.
pub fn fixed_grid_oracle3(w: &[[f64; 3]; 3], lambda: f64, bound: f64, step: f64) -> [f64; 3] {
    let n = (2.0 * bound / step).round() as i64;
    let mut best = (f64::NEG_INFINITY, [0.0; 3]);
    for a in 0..=n {
        let x = -bound + a as f64 * step;
        for b in 0..=n {
            let y = -bound + b as f64 * step;
            let z = -x - y;
            if z.abs() > bound + 1e-12 {
                continue;
            }
            let v = penalized3(w, [x, y, z], lambda);
            if v > best.0 {
                best = (v, [x, y, z]);
            }
        }
    }
    best.1
}

/// Average ranks (1-based), ties sharing the mean rank.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            out[idx[k]] = r;
        }
        i = j + 1;
    }
    out
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// `n` seed questions with solve probabilities from `p_of(i)`.
pub fn mock_corpus(n: usize, mut p_of: impl FnMut(usize) -> f64, variant: VariantDifficulty) -> (Dataset, Arc<SimulatedWorld>) {
    let mut world = SimulatedWorld::default();
    world.variant = variant;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let s = Sample::seed(format!("q{i:04}"), format!("img/{i:04}.png"), format!("Question {i}: what is the measure of angle {i}?"), format!("{}", 10 + i));
        world.add_question(s.question.clone(), s.answer.clone(), p_of(i), 0.0);
        samples.push(s);
    }
    (Dataset::new("mock", samples).expect("unique ids"), Arc::new(world))
}

/// Uniform draws in `[0, 1)` from the crate's keyed stream, for corpus setup.
pub fn uniform(seed: u64, tag: &str, i: usize) -> f64 {
    KeyedRng::new(seed, tag, i as u64).next_f64()
}
