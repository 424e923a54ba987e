//! Genetic search for diverse, valid counterfactuals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ecg_io::Class;
use crate::error::{Error, Result};
use crate::model::Classifier;

use super::ranges::FeatureRange;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchParams {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub crossover_rate: f64,
    pub elites: usize,
    /// Required target probability is `0.5 + margin`.
    pub margin: f64,
    /// Multiplier on the validity hinge, keeping validity ahead of closeness.
    pub w_valid: f64,
    pub w_prox: f64,
    pub w_div: f64,
    /// Closeness to an accepted counterfactual is penalized below this normalized distance.
    pub diversity_radius: f64,
    /// Generations the accepted set must stay unchanged before stopping early.
    pub patience: usize,
    /// Shrink accepted counterfactuals toward the original while they stay valid.
    pub polish: bool,
    pub seed: u64,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            population: 120,
            generations: 200,
            tournament: 3,
            crossover_rate: 0.9,
            elites: 2,
            margin: 0.05,
            w_valid: 100.0,
            w_prox: 0.5,
            w_div: 1.0,
            diversity_radius: 0.1,
            patience: 10,
            polish: true,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualQuery {
    /// The model's features, in model input order.
    pub feature_names: Vec<String>,
    pub original: Vec<f64>,
    pub target: Class,
    pub k: usize,
    pub features_to_vary: Vec<String>,
    /// One range per model feature.
    pub ranges: Vec<FeatureRange>,
}

impl CounterfactualQuery {
    /// A query varying every model feature, with ranges widened to contain the original.
    pub fn new(feature_names: Vec<String>, original: Vec<f64>, target: Class, k: usize, ranges: Vec<FeatureRange>) -> Self {
        let ranges = ranges.iter().zip(&original).map(|(r, &v)| r.including(v)).collect();
        CounterfactualQuery { features_to_vary: feature_names.clone(), feature_names, original, target, k, ranges }
    }

    fn validate(&self) -> Result<Vec<usize>> {
        let n = self.feature_names.len();
        if self.k == 0 {
            return Err(Error::InvalidParam("k must be at least 1".into()));
        }
        if self.original.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: self.original.len() });
        }
        if self.ranges.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: self.ranges.len() });
        }
        if self.ranges.iter().any(|r| !(r.lo.is_finite() && r.hi.is_finite() && r.lo <= r.hi)) {
            return Err(Error::InvalidParam("ranges must be finite with lo <= hi".into()));
        }
        let vary = self
            .features_to_vary
            .iter()
            .map(|v| self.feature_names.iter().position(|n| n == v).ok_or_else(|| Error::UnknownFeature(v.clone())))
            .collect::<Result<Vec<_>>>()?;
        if vary.is_empty() {
            return Err(Error::InvalidParam("no features to vary".into()));
        }
        Ok(vary)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Change {
    pub name: String,
    pub old: f64,
    pub new: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterfactual {
    pub values: Vec<f64>,
    pub p_target: f64,
    pub changed: Vec<Change>,
    /// Mean MAD-normalized absolute deviation over the varied features.
    pub proximity: f64,
    pub sparsity_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualSet {
    #[serde(rename = "record")]
    pub record_id: String,
    #[serde(rename = "beat")]
    pub beat_index: usize,
    pub feature_names: Vec<String>,
    pub original: Vec<f64>,
    pub target: Class,
    #[serde(rename = "cfs")]
    pub counterfactuals: Vec<Counterfactual>,
}

fn p_target<C: Classifier>(model: &C, x: &[f64], target: Class) -> Result<f64> {
    let p = model.proba(x)?;
    Ok(if target == Class::Mi { p } else { 1.0 - p })
}

struct Space<'a> {
    q: &'a CounterfactualQuery,
    vary: Vec<usize>,
    threshold: f64,
}

impl Space<'_> {
    fn expand(&self, genes: &[f64]) -> Vec<f64> {
        let mut x = self.q.original.clone();
        for (&i, &g) in self.vary.iter().zip(genes) {
            x[i] = g;
        }
        x
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.vary.iter().zip(a.iter().zip(b)).map(|(&i, (x, y))| (x - y).abs() / self.q.ranges[i].mad).sum::<f64>()
            / self.vary.len() as f64
    }

    fn proximity(&self, genes: &[f64]) -> f64 {
        let orig: Vec<f64> = self.vary.iter().map(|&i| self.q.original[i]).collect();
        self.distance(genes, &orig)
    }
}

#[derive(Clone)]
struct Scored {
    genes: Vec<f64>,
    p: f64,
    prox: f64,
}

/// Greedy diverse selection: repeatedly take the candidate with the lowest
/// proximity plus closeness penalty, skipping exact duplicates.
fn select(space: &Space, archive: &[Scored], k: usize, p: &SearchParams) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    while chosen.len() < k {
        let mut best: Option<(f64, usize)> = None;
        for (i, c) in archive.iter().enumerate() {
            if chosen.iter().any(|&j| archive[j].genes == c.genes) {
                continue;
            }
            let close = chosen
                .iter()
                .map(|&j| space.distance(&c.genes, &archive[j].genes))
                .fold(f64::INFINITY, f64::min);
            let penalty = if chosen.is_empty() { 0.0 } else { (p.diversity_radius - close).max(0.0) };
            let score = p.w_prox * c.prox + p.w_div * penalty;
            if best.is_none_or(|(s, _)| score < s) {
                best = Some((score, i));
            }
        }
        match best {
            Some((_, i)) => chosen.push(i),
            None => break,
        }
    }
    chosen
}

/// Resets changed genes to the original where validity survives, then bisects each
/// remaining change toward the original.
fn polish<C: Classifier>(model: &C, space: &Space, genes: &[f64]) -> Result<Vec<f64>> {
    let orig: Vec<f64> = space.vary.iter().map(|&i| space.q.original[i]).collect();
    let valid = |g: &[f64]| -> Result<bool> { Ok(p_target(model, &space.expand(g), space.q.target)? >= space.threshold) };
    let mut g = genes.to_vec();
    let mut order: Vec<usize> = (0..g.len()).filter(|&j| g[j] != orig[j]).collect();
    order.sort_by(|&a, &b| {
        let da = (g[a] - orig[a]).abs() / space.q.ranges[space.vary[a]].mad;
        let db = (g[b] - orig[b]).abs() / space.q.ranges[space.vary[b]].mad;
        da.total_cmp(&db).then(a.cmp(&b))
    });
    for &j in &order {
        let keep = g[j];
        g[j] = orig[j];
        if !valid(&g)? {
            g[j] = keep;
        }
    }
    for j in 0..g.len() {
        if g[j] == orig[j] {
            continue;
        }
        let (mut inside, mut outside) = (g[j], orig[j]);
        for _ in 0..48 {
            let mid = inside + (outside - inside) / 2.0;
            if mid == inside || mid == outside {
                break;
            }
            g[j] = mid;
            if valid(&g)? {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        g[j] = inside;
    }
    Ok(g)
}

/// Searches for `k` valid, mutually distinct counterfactuals of `query.original`.
pub fn generate<C: Classifier>(model: &C, query: &CounterfactualQuery, params: &SearchParams) -> Result<Vec<Counterfactual>> {
    let vary = query.validate()?;
    if model.n_features() != query.feature_names.len() {
        return Err(Error::LengthMismatch { expected: model.n_features(), got: query.feature_names.len() });
    }
    if params.population < 2 || params.tournament == 0 {
        return Err(Error::InvalidParam("population must be at least 2 and tournament at least 1".into()));
    }
    let threshold = 0.5 + params.margin;
    if p_target(model, &query.original, query.target)? >= 0.5 {
        return Err(Error::AlreadyTarget);
    }
    let space = Space { q: query, vary, threshold };
    let n = space.vary.len();
    let lo: Vec<f64> = space.vary.iter().map(|&i| query.ranges[i].lo).collect();
    let hi: Vec<f64> = space.vary.iter().map(|&i| query.ranges[i].hi).collect();
    let orig: Vec<f64> = space.vary.iter().map(|&i| query.original[i]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let uniform = |rng: &mut ChaCha8Rng, j: usize| if hi[j] > lo[j] { rng.random_range(lo[j]..=hi[j]) } else { lo[j] };

    let mut pop: Vec<Vec<f64>> = (0..params.population)
        .map(|_| {
            let mut g = orig.clone();
            let m = rng.random_range(1..=n);
            for _ in 0..m {
                let j = rng.random_range(0..n);
                g[j] = uniform(&mut rng, j);
            }
            g
        })
        .collect();

    let mut archive: Vec<Scored> = Vec::new();
    let mut accepted: Vec<Vec<f64>> = Vec::new();
    let mut stable = 0;
    let mut best_p = 0.0f64;

    for generation in 0..params.generations {
        let probs = pop
            .par_iter()
            .map(|g| p_target(model, &space.expand(g), query.target))
            .collect::<Result<Vec<f64>>>()?;
        let scored: Vec<Scored> =
            pop.iter().zip(&probs).map(|(g, &p)| Scored { genes: g.clone(), p, prox: space.proximity(g) }).collect();
        for s in &scored {
            best_p = best_p.max(s.p);
            if s.p >= threshold && !archive.iter().any(|a| a.genes == s.genes) {
                archive.push(s.clone());
            }
        }
        archive.sort_by(|a, b| a.prox.total_cmp(&b.prox));
        archive.truncate(4 * params.population);

        let chosen: Vec<Vec<f64>> = select(&space, &archive, query.k, params).into_iter().map(|i| archive[i].genes.clone()).collect();
        if chosen.len() == query.k && chosen == accepted {
            stable += 1;
        } else {
            stable = 0;
        }
        accepted = chosen;
        if accepted.len() == query.k && stable >= params.patience {
            log::debug!("counterfactual search converged after {generation} generations");
            break;
        }

        let fitness: Vec<f64> = scored
            .iter()
            .map(|s| {
                let hinge = (threshold - s.p).max(0.0);
                let close = accepted.iter().map(|a| space.distance(&s.genes, a)).fold(f64::INFINITY, f64::min);
                let crowd = if accepted.is_empty() { 0.0 } else { (params.diversity_radius - close).max(0.0) };
                params.w_valid * hinge + params.w_prox * s.prox + params.w_div * crowd
            })
            .collect();
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)));
        let mut next: Vec<Vec<f64>> = order.iter().take(params.elites).map(|&i| pop[i].clone()).collect();
        let tournament = |rng: &mut ChaCha8Rng| -> usize {
            (0..params.tournament)
                .map(|_| rng.random_range(0..pop.len()))
                .min_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)))
                .expect("tournament is non-empty")
        };
        while next.len() < params.population {
            let a = tournament(&mut rng);
            let b = tournament(&mut rng);
            let mut child = pop[a].clone();
            if rng.random::<f64>() < params.crossover_rate {
                for j in 0..n {
                    if rng.random::<bool>() {
                        child[j] = pop[b][j];
                    }
                }
            }
            let mut mutated = false;
            for j in 0..n {
                if rng.random::<f64>() < 1.0 / n as f64 {
                    mutated = true;
                    mutate(&mut child, j, &lo, &hi, &orig, &mut rng);
                }
            }
            if !mutated {
                let j = rng.random_range(0..n);
                mutate(&mut child, j, &lo, &hi, &orig, &mut rng);
            }
            next.push(child);
        }
        pop = next;
    }

    if accepted.len() < query.k {
        return Err(Error::NoValidCounterfactual { found: accepted.len(), best_probability: best_p });
    }

    let mut out: Vec<Vec<f64>> = Vec::new();
    for genes in accepted {
        let refined = if params.polish { polish(model, &space, &genes)? } else { genes.clone() };
        let pick = [refined, genes]
            .into_iter()
            .find(|g| g.iter().zip(&orig).any(|(a, b)| a != b) && !out.contains(g));
        if let Some(g) = pick {
            out.push(g);
        }
    }
    if out.len() < query.k {
        return Err(Error::NoValidCounterfactual { found: out.len(), best_probability: best_p });
    }
    out.into_iter()
        .map(|g| {
            let values = space.expand(&g);
            let changed: Vec<Change> = query
                .feature_names
                .iter()
                .zip(values.iter().zip(&query.original))
                .filter(|(_, (new, old))| new != old)
                .map(|(name, (&new, &old))| Change { name: name.clone(), old, new })
                .collect();
            Ok(Counterfactual {
                p_target: p_target(model, &values, query.target)?,
                proximity: space.proximity(&g),
                sparsity_count: changed.len(),
                changed,
                values,
            })
        })
        .collect()
}

fn mutate(g: &mut [f64], j: usize, lo: &[f64], hi: &[f64], orig: &[f64], rng: &mut ChaCha8Rng) {
    let span = hi[j] - lo[j];
    let roll: f64 = rng.random();
    g[j] = if roll < 0.4 {
        if span > 0.0 { rng.random_range(lo[j]..=hi[j]) } else { lo[j] }
    } else if roll < 0.8 {
        let step = Normal::new(0.0, 0.1 * span.max(f64::MIN_POSITIVE)).expect("positive scale").sample(rng);
        (g[j] + step).clamp(lo[j], hi[j])
    } else {
        orig[j]
    };
}
