//! Counterfactual search over tabular beat features.

mod ranges;
mod search;
mod stats;

pub use ranges::{derive_ranges, ranges_for, FeatureRange, MAD_FLOOR};
pub use search::{generate, Change, Counterfactual, CounterfactualQuery, CounterfactualSet, SearchParams};
pub use stats::{alteration_stats, filter_correct, AlterationStats, CorrectCount};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ecg_io::Class;
    use crate::error::{Error, Result};
    use crate::model::Classifier;

    /// MI iff x[0] > 0.5; other inputs ignored.
    struct Threshold(usize);

    impl Classifier for Threshold {
        fn n_features(&self) -> usize {
            self.0
        }

        fn proba(&self, x: &[f64]) -> Result<f64> {
            Ok(if x[0] > 0.5 { 0.9 } else { 0.1 })
        }
    }

    fn range(name: &str, lo: f64, hi: f64) -> FeatureRange {
        FeatureRange { name: name.into(), lo, hi, mad: 0.25 }
    }

    fn query(d: usize, x0: f64, k: usize) -> CounterfactualQuery {
        let names: Vec<String> = (0..d).map(|i| format!("f{i}")).collect();
        let ranges = names.iter().map(|n| range(n, 0.0, 1.0)).collect();
        let mut original = vec![0.3; d];
        original[0] = x0;
        CounterfactualQuery::new(names, original, Class::Mi, k, ranges)
    }

    #[test]
    fn threshold_toy_is_near_grid_optimum() {
        let q = query(1, 0.2, 3);
        let cfs = generate(&Threshold(1), &q, &SearchParams::default()).unwrap();
        assert_eq!(cfs.len(), 3);
        // dense grid oracle: the closest valid point to 0.2 in [0, 1]
        let best = (0..=10_000).map(|i| i as f64 / 10_000.0).filter(|&x| x > 0.5).map(|x| (x - 0.2f64).abs()).fold(f64::INFINITY, f64::min);
        let got = cfs.iter().map(|c| (c.values[0] - 0.2).abs()).fold(f64::INFINITY, f64::min);
        assert!((got - best).abs() <= 0.02, "{got} vs {best}");
        for (i, a) in cfs.iter().enumerate() {
            assert!(a.values[0] > 0.5 && a.values[0] <= 1.0);
            assert!(a.p_target >= 0.55);
            for b in &cfs[i + 1..] {
                assert_ne!(a.values, b.values);
            }
        }
    }

    #[test]
    fn only_listed_features_change() {
        let mut q = query(4, 0.2, 3);
        q.features_to_vary = vec!["f0".into()];
        let cfs = generate(&Threshold(4), &q, &SearchParams::default()).unwrap();
        for cf in &cfs {
            assert!(cf.changed.iter().all(|c| c.name == "f0"));
            assert_eq!(&cf.values[1..], &q.original[1..]);
        }
    }

    #[test]
    fn deterministic_and_errors() {
        let q = query(3, 0.2, 3);
        let p = SearchParams::default();
        assert_eq!(generate(&Threshold(3), &q, &p).unwrap(), generate(&Threshold(3), &q, &p).unwrap());
        let already = query(3, 0.8, 3);
        assert!(matches!(generate(&Threshold(3), &already, &p), Err(Error::AlreadyTarget)));
        let mut cramped = query(1, 0.2, 1);
        cramped.ranges[0].hi = 0.4;
        assert!(matches!(generate(&Threshold(1), &cramped, &p), Err(Error::NoValidCounterfactual { found: 0, .. })));
    }

    #[test]
    fn higher_proximity_weight_never_adds_changes() {
        let mean_changed = |w_prox: f64| -> f64 {
            let total: usize = (0..20)
                .map(|seed| {
                    let p = SearchParams { w_prox, seed, polish: false, generations: 60, ..Default::default() };
                    generate(&Threshold(3), &query(3, 0.2, 3), &p).unwrap().iter().map(|c| c.sparsity_count).sum::<usize>()
                })
                .sum();
            total as f64 / 60.0
        };
        assert!(mean_changed(2.0) <= mean_changed(0.1));
    }

    #[test]
    fn alteration_counts() {
        let cf = |values: Vec<f64>| Counterfactual { values, p_target: 0.9, changed: vec![], proximity: 0.0, sparsity_count: 0 };
        let set = |orig: Vec<f64>, cfs: Vec<Vec<f64>>| CounterfactualSet {
            record_id: "r".into(),
            beat_index: 0,
            feature_names: vec!["II_T".into(), "V1_S".into()],
            original: orig,
            target: Class::Mi,
            counterfactuals: cfs.into_iter().map(cf).collect(),
        };
        let sets = [
            set(vec![1.0, 2.0], vec![vec![0.0, 2.0], vec![0.0, 3.0], vec![1.0, 3.0]]),
            set(vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 0.0]]),
        ];
        let s = alteration_stats(&sets, Some(CorrectCount { correct: 45, total: 50 }));
        assert_eq!(s.n_counterfactuals, 6);
        assert_eq!(s.counts, vec![("II_T".to_string(), 4), ("V1_S".to_string(), 3)]);
        assert_eq!(s.top(1), vec!["II_T: 4"]);
        assert_eq!(s.correctly_classified.unwrap().to_string(), "45/50");
        assert!(alteration_stats(&[], None).counts.is_empty());
    }

    #[test]
    fn filter_correct_counts() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 10.0]).collect();
        let truth: Vec<Class> = rows.iter().map(|r| Class::from_bit(u8::from(r[0] > 0.5))).collect();
        let (keep, c) = filter_correct(&Threshold(1), &rows, &truth).unwrap();
        assert_eq!((keep.len(), c.to_string()), (10, "10/10".to_string()));
        let wrong: Vec<Class> = truth.iter().map(|c| c.opposite()).collect();
        assert_eq!(filter_correct(&Threshold(1), &rows, &wrong).unwrap().1.to_string(), "0/10");
        let mut noisy = truth.clone();
        noisy[0] = noisy[0].opposite();
        assert_eq!(filter_correct(&Threshold(1), &rows, &noisy).unwrap().0, (1..10).collect::<Vec<_>>());
    }
}
