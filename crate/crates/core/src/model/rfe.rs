//! Recursive feature elimination and the incremental feature-count curve.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ecg_io::Class;
use crate::error::{Error, Result};
use crate::eval::{prf1, Confusion};

use super::gbdt::{train, TrainParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub name: String,
    /// 1 for survivors; eliminated features rank by elimination order (later is better).
    pub rank: usize,
    /// Gain importance in the final survivor model (0 for eliminated features).
    pub importance: f64,
}

fn columns(x: &[Vec<f64>], keep: &[usize]) -> Vec<Vec<f64>> {
    x.iter().map(|r| keep.iter().map(|&c| r[c]).collect()).collect()
}

/// Eliminates `step` features per round, lowest importance first (ties: higher column
/// index first), until `keep` remain. Returned in rank order, survivors sorted by
/// descending importance.
pub fn rfe_rank(
    x: &[Vec<f64>],
    y: &[Class],
    names: &[String],
    params: &TrainParams,
    keep: usize,
    step: usize,
) -> Result<Vec<RankedFeature>> {
    if keep == 0 || step == 0 {
        return Err(Error::InvalidParam("keep and step must be positive".into()));
    }
    if keep >= names.len() {
        return Err(Error::InvalidParam(format!("keep ({keep}) must be below the feature count ({})", names.len())));
    }
    let mut alive: Vec<usize> = (0..names.len()).collect();
    let mut eliminated: Vec<usize> = Vec::new();
    while alive.len() > keep {
        let sub: Vec<String> = alive.iter().map(|&c| names[c].clone()).collect();
        let model = train(&columns(x, &alive), y, &sub, params)?;
        let imp = model.gain_importance();
        let mut order: Vec<usize> = (0..alive.len()).collect();
        order.sort_by(|&a, &b| imp[a].total_cmp(&imp[b]).then(alive[b].cmp(&alive[a])));
        let n_drop = step.min(alive.len() - keep);
        let mut dropped: Vec<usize> = order[..n_drop].iter().map(|&i| alive[i]).collect();
        log::debug!("rfe: {} features left, dropping {:?}", alive.len(), dropped.iter().map(|&c| &names[c]).collect::<Vec<_>>());
        alive.retain(|c| !dropped.contains(c));
        eliminated.append(&mut dropped);
    }
    let sub: Vec<String> = alive.iter().map(|&c| names[c].clone()).collect();
    let final_model = train(&columns(x, &alive), y, &sub, params)?;
    let imp = final_model.gain_importance();
    let mut survivors: Vec<(usize, f64)> = alive.iter().copied().zip(imp).collect();
    survivors.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut out: Vec<RankedFeature> =
        survivors.into_iter().map(|(c, importance)| RankedFeature { name: names[c].clone(), rank: 1, importance }).collect();
    let n_elim = eliminated.len();
    for (pos, &c) in eliminated.iter().enumerate().rev() {
        out.push(RankedFeature { name: names[c].clone(), rank: n_elim - pos + 1, importance: 0.0 });
    }
    Ok(out)
}

/// Feature names in the order used for the incremental curve.
pub fn rank_order(ranking: &[RankedFeature]) -> Vec<String> {
    ranking.iter().map(|r| r.name.clone()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

/// For each `k` in `ks`, trains on the first `k` of `ordered` over `train_rows` and scores
/// the held-out `test_rows` (MI is the positive class).
#[allow(clippy::too_many_arguments)]
pub fn incremental_curve(
    x: &[Vec<f64>],
    y: &[Class],
    names: &[String],
    ordered: &[String],
    ks: &[usize],
    train_rows: &[usize],
    test_rows: &[usize],
    params: &TrainParams,
) -> Result<Vec<CurvePoint>> {
    let cols = ordered
        .iter()
        .map(|n| names.iter().position(|m| m == n).ok_or_else(|| Error::UnknownFeature(n.clone())))
        .collect::<Result<Vec<_>>>()?;
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > cols.len()) {
        return Err(Error::InvalidParam(format!("feature count {k} outside 1..={}", cols.len())));
    }
    ks.par_iter()
        .map(|&k| {
            let keep = &cols[..k];
            let pick = |rows: &[usize]| -> Vec<Vec<f64>> { rows.iter().map(|&r| keep.iter().map(|&c| x[r][c]).collect()).collect() };
            let train_y: Vec<Class> = train_rows.iter().map(|&r| y[r]).collect();
            let model = train(&pick(train_rows), &train_y, &ordered[..k], params)?;
            let mut cm = Confusion::default();
            for (row, &r) in pick(test_rows).iter().zip(test_rows) {
                cm.add(y[r], model.predict(row)?);
            }
            let m = prf1(cm.tp, cm.fp, cm.fn_);
            Ok(CurvePoint { k, precision: m.precision, recall: m.recall, f1: m.f1, accuracy: cm.accuracy() })
        })
        .collect()
}

/// Smallest feature count whose F1 is within `tolerance` of the best F1 on the curve.
pub fn tolerance_minimal_k(curve: &[CurvePoint], tolerance: f64) -> Option<usize> {
    let best = curve.iter().map(|p| p.f1).fold(f64::NEG_INFINITY, f64::max);
    curve.iter().filter(|p| p.f1 >= best - tolerance).map(|p| p.k).min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data(n: usize, noise_cols: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Class>, Vec<String>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            let mut row = vec![a, b];
            row.extend((0..noise_cols).map(|_| rng.random_range(-1.0..1.0)));
            y.push(Class::from_bit(u8::from(a + 0.5 * b > 0.0)));
            x.push(row);
        }
        let names = (0..2 + noise_cols).map(|i| format!("f{i}")).collect();
        (x, y, names)
    }

    fn fast() -> TrainParams {
        TrainParams { n_trees: 20, max_depth: 2, ..Default::default() }
    }

    #[test]
    fn noise_eliminated_first() {
        let (x, y, names) = data(300, 1, 1);
        let r = rfe_rank(&x, &y, &names, &fast(), 2, 1).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r[2], RankedFeature { name: "f2".into(), rank: 2, importance: 0.0 });
        assert!(r[..2].iter().all(|f| f.rank == 1));
        assert_eq!(r[0].name, "f0");
    }

    #[test]
    fn ranks_follow_elimination_order() {
        let (x, y, names) = data(200, 4, 2);
        let r = rfe_rank(&x, &y, &names, &fast(), 2, 1).unwrap();
        let ranks: Vec<usize> = r.iter().map(|f| f.rank).collect();
        assert_eq!(ranks, vec![1, 1, 2, 3, 4, 5]);
        assert!(rfe_rank(&x, &y, &names, &fast(), 0, 1).is_err());
        assert!(rfe_rank(&x, &y, &names, &fast(), 6, 1).is_err());
    }

    #[test]
    fn curve_flat_with_one_informative_feature() {
        let (mut x, _, _) = data(400, 9, 3);
        for r in &mut x {
            r.remove(1);
        }
        let y: Vec<Class> = x.iter().map(|r| Class::from_bit(u8::from(r[0] > 0.1))).collect();
        let names: Vec<String> = (0..10).map(|i| format!("f{i}")).collect();
        let train_rows: Vec<usize> = (0..300).collect();
        let test_rows: Vec<usize> = (300..400).collect();
        let curve = incremental_curve(&x, &y, &names, &names, &[1, 10], &train_rows, &test_rows, &fast()).unwrap();
        assert!(curve[0].f1 > 0.95, "{curve:?}");
        assert!((curve[0].f1 - curve[1].f1).abs() < 0.03, "{curve:?}");
        assert_eq!(tolerance_minimal_k(&curve, 0.02), Some(1));
    }
}
