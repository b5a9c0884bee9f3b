use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};

use super::{bt_win_prob, log_sigmoid, BattleRecord, Outcome, RatingError};

const MAX_ITER: usize = 200;
const GRAD_TOL: f64 = 1e-8;
/// Above this many items the Newton system is solved iteratively.
const DENSE_MAX: usize = 1000;

/// Aggregated comparisons between items `i < j`: `w_ij` wins of `i` over
/// `j` and `w_ji` the reverse, ties counted half to each side.
#[derive(Debug, Clone, Copy)]
struct Pair {
    i: usize,
    j: usize,
    w_ij: f64,
    w_ji: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BtFit {
    pub theta: BTreeMap<String, f64>,
    pub iterations: usize,
    pub grad_norm: f64,
}

fn index_items(items: &[String]) -> HashMap<&str, usize> {
    items.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()
}

/// A battle with items replaced by their positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct IndexedBattle {
    pub a: usize,
    pub b: usize,
    pub outcome: Outcome,
}

pub(crate) fn index_battles(battles: &[BattleRecord], items: &[String]) -> Result<Vec<IndexedBattle>, RatingError> {
    let index = index_items(items);
    battles
        .iter()
        .map(|b| {
            let a = *index.get(b.item_a.as_str()).ok_or_else(|| RatingError::UnknownItem(b.item_a.clone()))?;
            let c = *index.get(b.item_b.as_str()).ok_or_else(|| RatingError::UnknownItem(b.item_b.clone()))?;
            if a == c {
                return Err(RatingError::SelfBattle(b.item_a.clone()));
            }
            Ok(IndexedBattle { a, b: c, outcome: b.outcome })
        })
        .collect()
}

fn aggregate<'a>(battles: impl IntoIterator<Item = &'a IndexedBattle>) -> Vec<Pair> {
    let mut pairs: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for b in battles {
        let (wa, wc) = match b.outcome {
            Outcome::AWins => (1.0, 0.0),
            Outcome::BWins => (0.0, 1.0),
            Outcome::Tie => (0.5, 0.5),
        };
        let (key, w) = if b.a < b.b { ((b.a, b.b), (wa, wc)) } else { ((b.b, b.a), (wc, wa)) };
        let e = pairs.entry(key).or_default();
        e.0 += w.0;
        e.1 += w.1;
    }
    pairs.into_iter().map(|((i, j), (w_ij, w_ji))| Pair { i, j, w_ij, w_ji }).collect()
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Connected components of the comparison graph, each sorted, ordered by
/// their first member's position in `items`.
pub fn components(items: &[String], battles: &[BattleRecord]) -> Result<Vec<Vec<String>>, RatingError> {
    let indexed = index_battles(battles, items)?;
    Ok(component_roots(items.len(), &aggregate(&indexed))
        .into_iter()
        .map(|members| members.into_iter().map(|i| items[i].clone()).collect())
        .collect())
}

fn component_roots(n: usize, pairs: &[Pair]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    for p in pairs {
        let (a, b) = (find(&mut parent, p.i), find(&mut parent, p.j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    groups.into_values().collect()
}

fn objective(theta: &[f64], pairs: &[Pair], lambda: f64) -> f64 {
    let mut f = -lambda * theta.iter().map(|t| t * t).sum::<f64>();
    for p in pairs {
        let d = theta[p.i] - theta[p.j];
        f += p.w_ij * log_sigmoid(d) + p.w_ji * log_sigmoid(-d);
    }
    f
}

/// Penalized log-likelihood of `theta` (keyed by item) on `battles`.
pub fn log_likelihood(theta: &BTreeMap<String, f64>, battles: &[BattleRecord], lambda: f64) -> Result<f64, RatingError> {
    let items: Vec<String> = theta.keys().cloned().collect();
    let pairs = aggregate(&index_battles(battles, &items)?);
    let t: Vec<f64> = theta.values().copied().collect();
    Ok(objective(&t, &pairs, lambda))
}

/// Gradient of the objective and the per-pair Hessian weights.
fn gradient(theta: &[f64], pairs: &[Pair], lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let mut g: Vec<f64> = theta.iter().map(|t| -2.0 * lambda * t).collect();
    let mut curv = Vec::with_capacity(pairs.len());
    for p in pairs {
        let s = bt_win_prob(theta[p.i], theta[p.j]);
        let n = p.w_ij + p.w_ji;
        let r = p.w_ij - n * s;
        g[p.i] += r;
        g[p.j] -= r;
        curv.push(n * s * (1.0 - s));
    }
    (g, curv)
}

fn solve_dense(n: usize, pairs: &[Pair], curv: &[f64], lambda: f64, g: &[f64]) -> Option<Vec<f64>> {
    let mut h = DMatrix::<f64>::from_diagonal_element(n, n, 2.0 * lambda);
    for (p, c) in pairs.iter().zip(curv) {
        h[(p.i, p.i)] += c;
        h[(p.j, p.j)] += c;
        h[(p.i, p.j)] -= c;
        h[(p.j, p.i)] -= c;
    }
    let chol = h.cholesky()?;
    Some(chol.solve(&DVector::from_column_slice(g)).as_slice().to_vec())
}

/// Jacobi-preconditioned conjugate gradients on the sparse Hessian.
fn solve_cg(n: usize, pairs: &[Pair], curv: &[f64], lambda: f64, g: &[f64]) -> Vec<f64> {
    let mut diag = vec![2.0 * lambda; n];
    for (p, c) in pairs.iter().zip(curv) {
        diag[p.i] += c;
        diag[p.j] += c;
    }
    let apply = |v: &[f64], out: &mut [f64]| {
        for (o, v) in out.iter_mut().zip(v) {
            *o = 2.0 * lambda * v;
        }
        for (p, c) in pairs.iter().zip(curv) {
            let t = c * (v[p.i] - v[p.j]);
            out[p.i] += t;
            out[p.j] -= t;
        }
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut x = vec![0.0; n];
    let mut r = g.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let tol = 1e-14 * dot(g, g).sqrt().max(f64::MIN_POSITIVE);
    for _ in 0..(4 * n).max(50) {
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        if dot(&r, &r).sqrt() <= tol {
            break;
        }
        for k in 0..n {
            z[k] = r[k] / diag[k];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    x
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn newton(n: usize, pairs: &[Pair], lambda: f64) -> Result<(Vec<f64>, usize, f64), RatingError> {
    let mut theta = vec![0.0; n];
    let mut f = objective(&theta, pairs, lambda);
    for iter in 0..MAX_ITER {
        let (g, curv) = gradient(&theta, pairs, lambda);
        let gmax = max_abs(&g);
        if gmax < GRAD_TOL {
            return Ok((theta, iter, gmax));
        }
        let step = if n <= DENSE_MAX {
            solve_dense(n, pairs, &curv, lambda, &g).unwrap_or_else(|| solve_cg(n, pairs, &curv, lambda, &g))
        } else {
            solve_cg(n, pairs, &curv, lambda, &g)
        };
        let slope: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
        if slope <= 1e-12 * (1.0 + f.abs()) {
            // the predicted gain is below what the objective can resolve, so
            // a line search would only shrink the step; Newton is already in
            // its quadratic regime here
            theta.iter_mut().zip(&step).for_each(|(x, d)| *x += d);
            f = objective(&theta, pairs, lambda);
            continue;
        }
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = theta.iter().zip(&step).map(|(x, d)| x + t * d).collect();
            let ft = objective(&trial, pairs, lambda);
            if ft >= f + 1e-4 * t * slope || t < 1e-10 {
                theta = trial;
                f = ft;
                break;
            }
            t *= 0.5;
        }
    }
    let (g, _) = gradient(&theta, pairs, lambda);
    let gmax = max_abs(&g);
    if gmax < GRAD_TOL {
        Ok((theta, MAX_ITER, gmax))
    } else {
        Err(RatingError::NonConvergence { iterations: MAX_ITER, grad_norm: gmax })
    }
}

/// Maximizes the L2-penalized Bradley-Terry log-likelihood over `items`.
/// Ties count half a win for each side. The comparison graph must connect
/// every item.
pub fn fit_bt(battles: &[BattleRecord], items: &[String], lambda: f64) -> Result<BtFit, RatingError> {
    if !(lambda > 0.0) {
        return Err(RatingError::Config(format!("l2_lambda must be positive, got {lambda}")));
    }
    let index = index_items(items);
    if index.len() != items.len() {
        return Err(RatingError::Config("item ids must be unique".into()));
    }
    let indexed = index_battles(battles, items)?;
    let pairs = aggregate(&indexed);
    let comps = component_roots(items.len(), &pairs);
    if comps.len() > 1 {
        return Err(RatingError::Disconnected(
            comps.into_iter().map(|c| c.into_iter().map(|i| items[i].clone()).collect()).collect(),
        ));
    }
    let (theta, iterations, grad_norm) = newton(items.len(), &pairs, lambda)?;
    Ok(BtFit { theta: items.iter().cloned().zip(theta).collect(), iterations, grad_norm })
}

/// Fits the items that appear in `battles` (indices below `n`). Returns
/// `None` for items without battles, or `None` overall when the appearing
/// items are not connected or the fit fails.
pub(crate) fn fit_present<'a>(n: usize, battles: impl IntoIterator<Item = &'a IndexedBattle>, lambda: f64) -> Option<Vec<Option<f64>>> {
    let battles: Vec<&IndexedBattle> = battles.into_iter().collect();
    let mut compact = vec![usize::MAX; n];
    let mut present = Vec::new();
    for b in &battles {
        for x in [b.a, b.b] {
            if compact[x] == usize::MAX {
                compact[x] = present.len();
                present.push(x);
            }
        }
    }
    let remapped: Vec<IndexedBattle> =
        battles.iter().map(|b| IndexedBattle { a: compact[b.a], b: compact[b.b], outcome: b.outcome }).collect();
    let pairs = aggregate(&remapped);
    if present.is_empty() || component_roots(present.len(), &pairs).len() > 1 {
        return None;
    }
    let (theta, _, _) = newton(present.len(), &pairs, lambda).ok()?;
    let mut out = vec![None; n];
    for (k, &i) in present.iter().enumerate() {
        out[i] = Some(theta[k]);
    }
    Some(out)
}
