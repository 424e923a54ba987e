//! Gradient-boosted regression trees on logistic loss with exact greedy splits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ecg_io::Class;
use crate::error::{Error, Result};

/// Raw margins are clamped to this magnitude so probabilities stay strictly inside (0, 1).
const MARGIN_LIMIT: f64 = 30.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    pub min_child_weight: f64,
    pub subsample: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams { n_trees: 300, max_depth: 4, learning_rate: 0.1, lambda: 1.0, min_child_weight: 1.0, subsample: 0.8, seed: 42 }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParam(m.to_string()));
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must lie in (0, 1]");
        }
        if !(self.lambda >= 0.0) || !(self.min_child_weight >= 0.0) {
            return bad("lambda and min_child_weight must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    /// Rows with `x[feature] < threshold` go left.
    Split { feature: usize, threshold: f64, gain: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right, .. } => i = if x[feature] < threshold { left } else { right },
            }
        }
    }
}

/// A trained ensemble. `feature_names[i]` names input position `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub params: TrainParams,
    /// Log-odds of the training prior.
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub feature_names: Vec<String>,
    /// Unnormalized split-gain totals per feature.
    pub gain_totals: Vec<f64>,
    /// Values substituted for missing inputs at predict time.
    pub imputation_means: Vec<f64>,
}

fn sigmoid(m: f64) -> f64 {
    1.0 / (1.0 + (-m).exp())
}

impl GbdtModel {
    /// A model with no trees that predicts `prior` everywhere.
    pub fn constant(feature_names: Vec<String>, prior: f64) -> Self {
        let n = feature_names.len();
        GbdtModel {
            params: TrainParams { n_trees: 0, ..TrainParams::default() },
            base_score: (prior / (1.0 - prior)).ln(),
            trees: Vec::new(),
            feature_names,
            gain_totals: vec![0.0; n],
            imputation_means: vec![0.0; n],
        }
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn margin(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::LengthMismatch { expected: self.n_features(), got: x.len() });
        }
        let m = self.base_score + self.trees.iter().map(|t| t.eval(x)).sum::<f64>();
        Ok(m.clamp(-MARGIN_LIMIT, MARGIN_LIMIT))
    }

    /// Probability of class MI.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.margin(x)?))
    }

    /// Like [`predict_proba`](Self::predict_proba) with missing cells imputed.
    pub fn predict_proba_partial(&self, x: &[Option<f64>]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::LengthMismatch { expected: self.n_features(), got: x.len() });
        }
        let dense: Vec<f64> = x.iter().zip(&self.imputation_means).map(|(v, m)| v.unwrap_or(*m)).collect();
        self.predict_proba(&dense)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Class> {
        Ok(if self.predict_proba(x)? >= 0.5 { Class::Mi } else { Class::Norm })
    }

    /// Gain totals normalized to sum to 1 (all zeros for a model without splits).
    pub fn gain_importance(&self) -> Vec<f64> {
        let total: f64 = self.gain_totals.iter().sum();
        if total > 0.0 {
            self.gain_totals.iter().map(|g| g / total).collect()
        } else {
            vec![0.0; self.gain_totals.len()]
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: GbdtModel = serde_json::from_str(text)?;
        let n = m.n_features();
        if m.gain_totals.len() != n || m.imputation_means.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: m.gain_totals.len().min(m.imputation_means.len()) });
        }
        for t in &m.trees {
            for node in &t.nodes {
                if let Node::Split { feature, left, right, .. } = node {
                    if *feature >= n || *left >= t.nodes.len() || *right >= t.nodes.len() {
                        return Err(Error::InvalidParam("tree references a missing feature or node".into()));
                    }
                }
            }
        }
        Ok(m)
    }
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Prefers higher gain, then lower feature index.
fn better(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y.gain > x.gain || (y.gain == x.gain && y.feature < x.feature) { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

fn split_threshold(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo { mid } else { hi }
}

const UNUSED: usize = usize::MAX;

/// Fits an ensemble to dense rows `x` (no missing values) and labels `y`.
pub fn train(x: &[Vec<f64>], y: &[Class], feature_names: &[String], params: &TrainParams) -> Result<GbdtModel> {
    params.validate()?;
    let n = x.len();
    if y.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: y.len() });
    }
    let d = feature_names.len();
    if let Some(bad) = x.iter().find(|r| r.len() != d) {
        return Err(Error::LengthMismatch { expected: d, got: bad.len() });
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParam("training matrix contains non-finite values".into()));
    }
    let positives = y.iter().filter(|c| **c == Class::Mi).count();
    if positives == 0 || positives == n {
        return Err(Error::SingleClass);
    }
    let target: Vec<f64> = y.iter().map(|c| f64::from(c.bit())).collect();
    let prior = positives as f64 / n as f64;

    // Column-wise presorted row order, reused by every node of every tree.
    let sorted: Vec<Vec<usize>> = (0..d)
        .into_par_iter()
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut model = GbdtModel::constant(feature_names.to_vec(), prior);
    model.params = params.clone();
    let mut margin = vec![model.base_score; n];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];

    for _ in 0..params.n_trees {
        for i in 0..n {
            let p = sigmoid(margin[i]);
            grad[i] = p - target[i];
            hess[i] = p * (1.0 - p);
        }
        let mut node_of: Vec<usize> = (0..n)
            .map(|_| if params.subsample >= 1.0 || rng.random::<f64>() < params.subsample { 0 } else { UNUSED })
            .collect();
        let tree = grow_tree(x, &sorted, &grad, &hess, &mut node_of, params, &mut model.gain_totals);
        for (i, row) in x.iter().enumerate() {
            margin[i] += tree.eval(row);
        }
        model.trees.push(tree);
    }
    Ok(model)
}

struct Open {
    node: usize,
    g: f64,
    h: f64,
}

fn grow_tree(
    x: &[Vec<f64>],
    sorted: &[Vec<usize>],
    grad: &[f64],
    hess: &[f64],
    node_of: &mut [usize],
    params: &TrainParams,
    gain_totals: &mut [f64],
) -> Tree {
    let lambda = params.lambda;
    let leaf = |g: f64, h: f64| Node::Leaf { value: -params.learning_rate * g / (h + lambda) };
    let score = |g: f64, h: f64| g * g / (h + lambda);

    let (g0, h0) = node_of
        .iter()
        .enumerate()
        .filter(|(_, &nd)| nd == 0)
        .fold((0.0, 0.0), |(g, h), (i, _)| (g + grad[i], h + hess[i]));
    let mut nodes = vec![leaf(g0, h0)];
    let mut open = vec![Open { node: 0, g: g0, h: h0 }];

    for _depth in 0..params.max_depth {
        if open.is_empty() {
            break;
        }
        // Map node id -> slot in `open` for the per-feature scans.
        let mut slot = vec![UNUSED; nodes.len()];
        for (s, o) in open.iter().enumerate() {
            slot[o.node] = s;
        }
        let best: Vec<Option<Candidate>> = sorted
            .par_iter()
            .enumerate()
            .map(|(f, order)| {
                let k = open.len();
                let mut gl = vec![0.0; k];
                let mut hl = vec![0.0; k];
                let mut last: Vec<Option<f64>> = vec![None; k];
                let mut best: Vec<Option<Candidate>> = vec![None; k];
                for &i in order {
                    let nd = node_of[i];
                    if nd == UNUSED || slot[nd] == UNUSED {
                        continue;
                    }
                    let s = slot[nd];
                    let v = x[i][f];
                    if let Some(prev) = last[s] {
                        if v > prev {
                            let (g, h) = (open[s].g, open[s].h);
                            let (gr, hr) = (g - gl[s], h - hl[s]);
                            if hl[s] >= params.min_child_weight && hr >= params.min_child_weight {
                                let gain = 0.5 * (score(gl[s], hl[s]) + score(gr, hr) - score(g, h));
                                if gain > 0.0 {
                                    let c = Candidate { gain, feature: f, threshold: split_threshold(prev, v) };
                                    best[s] = better(best[s], Some(c));
                                }
                            }
                        }
                    }
                    gl[s] += grad[i];
                    hl[s] += hess[i];
                    last[s] = Some(v);
                }
                best
            })
            .reduce(
                || vec![None; open.len()],
                |a, b| a.into_iter().zip(b).map(|(x, y)| better(x, y)).collect(),
            );

        let mut next = Vec::new();
        let mut children = vec![(UNUSED, UNUSED, 0usize, 0.0f64); nodes.len()];
        for (s, cand) in best.iter().enumerate() {
            let Some(c) = cand else { continue };
            let id = open[s].node;
            let (l, r) = (nodes.len(), nodes.len() + 1);
            nodes.push(leaf(0.0, 0.0));
            nodes.push(leaf(0.0, 0.0));
            nodes[id] = Node::Split { feature: c.feature, threshold: c.threshold, gain: c.gain, left: l, right: r };
            gain_totals[c.feature] += c.gain;
            children[id] = (l, r, c.feature, c.threshold);
        }
        let mut stats = vec![(0.0, 0.0); nodes.len()];
        for (i, nd) in node_of.iter_mut().enumerate() {
            if *nd == UNUSED || *nd >= children.len() {
                continue;
            }
            let (l, r, f, t) = children[*nd];
            if l == UNUSED {
                continue;
            }
            *nd = if x[i][f] < t { l } else { r };
            stats[*nd].0 += grad[i];
            stats[*nd].1 += hess[i];
        }
        for &(l, r, _, _) in &children {
            if l == UNUSED {
                continue;
            }
            for c in [l, r] {
                let (g, h) = stats[c];
                nodes[c] = leaf(g, h);
                next.push(Open { node: c, g, h });
            }
        }
        open = next;
    }
    Tree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("f{i}")).collect()
    }

    fn labels(bits: &[u8]) -> Vec<Class> {
        bits.iter().map(|&b| Class::from_bit(b)).collect()
    }

    #[test]
    fn separable_toy() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 - 20.0]).collect();
        let y: Vec<Class> = x.iter().map(|r| Class::from_bit(u8::from(r[0] >= 0.0))).collect();
        let m = train(&x, &y, &names(1), &TrainParams { n_trees: 30, ..Default::default() }).unwrap();
        let acc = x.iter().zip(&y).filter(|(r, c)| m.predict(r).unwrap() == **c).count();
        assert_eq!(acc, 40);
        assert!(m.predict_proba(&[15.0]).unwrap() > 0.9);
        assert_eq!(m.gain_importance(), vec![1.0]);
    }

    #[test]
    fn empty_ensemble_is_prior() {
        let m = GbdtModel::constant(names(3), 0.5);
        assert_eq!(m.predict_proba(&[1.0, 2.0, 3.0]).unwrap(), 0.5);
        assert!(matches!(m.predict_proba(&[1.0]), Err(Error::LengthMismatch { expected: 3, got: 1 })));
    }

    #[test]
    fn constant_features_give_prior() {
        let x = vec![vec![1.0, 2.0]; 10];
        let y = labels(&[1, 1, 1, 0, 0, 0, 0, 0, 0, 0]);
        let p = TrainParams { n_trees: 20, subsample: 1.0, ..Default::default() };
        let m = train(&x, &y, &names(2), &p).unwrap();
        assert!((m.predict_proba(&[1.0, 2.0]).unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(m.gain_importance(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![1.0]; 4];
        assert!(matches!(train(&x, &labels(&[1, 1, 1, 1]), &names(1), &TrainParams::default()), Err(Error::SingleClass)));
    }

    #[test]
    fn unused_feature_does_not_matter() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i * 7 % 5) as f64]).collect();
        let y: Vec<Class> = (0..30).map(|i| Class::from_bit(u8::from(i >= 15))).collect();
        let m = train(&x, &y, &names(2), &TrainParams { n_trees: 10, max_depth: 1, subsample: 1.0, ..Default::default() }).unwrap();
        assert_eq!(m.gain_importance()[1], 0.0);
        assert_eq!(m.predict_proba(&[3.0, 0.0]).unwrap(), m.predict_proba(&[3.0, 1e6]).unwrap());
    }

    #[test]
    fn hand_summed_gain() {
        // One depth-1 tree on 4 rows; the only useful split separates {0,1} from {2,3}.
        let x = vec![vec![0.0, 5.0], vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]];
        let y = labels(&[0, 0, 1, 1]);
        let p = TrainParams { n_trees: 1, max_depth: 1, subsample: 1.0, min_child_weight: 0.0, ..Default::default() };
        let m = train(&x, &y, &names(2), &p).unwrap();
        // At the prior 0.5: g = ±0.5, h = 0.25 per row.
        let score = |g: f64, h: f64| g * g / (h + 1.0);
        let want = 0.5 * (score(1.0, 0.5) + score(-1.0, 0.5) - score(0.0, 1.0));
        assert!((m.gain_totals[0] - want).abs() < 1e-15);
        assert_eq!(m.gain_totals[1], 0.0);
        match &m.trees[0].nodes[0] {
            Node::Split { threshold, .. } => assert_eq!(*threshold, 1.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn json_round_trip() {
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64).sin(), (i as f64 * 0.37).cos()]).collect();
        let y: Vec<Class> = x.iter().map(|r| Class::from_bit(u8::from(r[0] * r[1] > 0.0))).collect();
        let m = train(&x, &y, &names(2), &TrainParams { n_trees: 15, ..Default::default() }).unwrap();
        let text = m.to_json().unwrap();
        let back = GbdtModel::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json().unwrap(), text);
    }
}
