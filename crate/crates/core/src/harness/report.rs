use std::collections::BTreeMap;

use serde::Serialize;

use crate::corpus::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodRow {
    pub method: String,
    pub accuracy: f64,
    pub n_eval: usize,
}

/// Example counts per category name plus the total.
pub fn dataset_fingerprint(d: &Dataset) -> BTreeMap<String, usize> {
    let mut out: BTreeMap<String, usize> = d
        .label_map()
        .names()
        .iter()
        .cloned()
        .zip(d.class_counts())
        .collect();
    out.insert("_total".into(), d.len());
    out
}

/// Accuracy of several methods on one validation set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub methods: Vec<MethodRow>,
    pub dataset: BTreeMap<String, usize>,
    pub configs: BTreeMap<String, BTreeMap<String, String>>,
    pub seed: Option<u64>,
}

impl ComparisonReport {
    /// Rows are ordered by accuracy, best first, then by method name.
    pub fn new(
        mut methods: Vec<MethodRow>,
        dataset: BTreeMap<String, usize>,
        configs: BTreeMap<String, BTreeMap<String, String>>,
        seeds: &[u64],
    ) -> Result<Self> {
        if let Some(bad) = methods.iter().find(|r| !(0.0..=1.0).contains(&r.accuracy)) {
            return Err(Error::Invariant(format!("accuracy {} for {} lies outside [0, 1]", bad.accuracy, bad.method)));
        }
        methods.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy).then_with(|| a.method.cmp(&b.method)));
        let seed = match seeds.split_first() {
            Some((first, rest)) if rest.iter().all(|s| s == first) => Some(*first),
            _ => None,
        };
        Ok(ComparisonReport { methods, dataset, configs, seed })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("method\taccuracy\tn_eval\n");
        for r in &self.methods {
            out.push_str(&format!("{}\t{:.4}\t{}\n", r.method, r.accuracy, r.n_eval));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is plain data");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LabelMap, LabeledExample};

    fn report(seeds: &[u64]) -> ComparisonReport {
        let rows = vec![
            MethodRow { method: "zeromean_logr".into(), accuracy: 0.5, n_eval: 4 },
            MethodRow { method: "cnn".into(), accuracy: 0.75, n_eval: 4 },
            MethodRow { method: "bow_logr".into(), accuracy: 0.5, n_eval: 4 },
        ];
        ComparisonReport::new(rows, BTreeMap::new(), BTreeMap::new(), seeds).unwrap()
    }

    #[test]
    fn tsv_layout() {
        assert_eq!(
            report(&[1]).to_tsv(),
            "method\taccuracy\tn_eval\ncnn\t0.7500\t4\nbow_logr\t0.5000\t4\nzeromean_logr\t0.5000\t4\n"
        );
    }

    #[test]
    fn json_fields_and_seed_policy() {
        let v: serde_json::Value = serde_json::from_str(&report(&[3, 3]).to_json()).unwrap();
        for key in ["methods", "dataset", "configs", "seed"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["seed"], 3);
        assert!(report(&[1, 2]).seed.is_none());
    }

    #[test]
    fn accuracy_out_of_range_is_an_invariant_error() {
        let rows = vec![MethodRow { method: "cnn".into(), accuracy: 1.5, n_eval: 1 }];
        assert!(matches!(
            ComparisonReport::new(rows, BTreeMap::new(), BTreeMap::new(), &[]),
            Err(Error::Invariant(_))
        ));
    }

    #[test]
    fn fingerprint_counts_classes() {
        let labels = LabelMap::new(vec!["a".into(), "b".into()]).unwrap();
        let ex = |label| LabeledExample { text: "t".into(), label };
        let d = Dataset::new(vec![ex(0), ex(1), ex(1)], labels).unwrap();
        let f = dataset_fingerprint(&d);
        assert_eq!(f["a"], 1);
        assert_eq!(f["b"], 2);
        assert_eq!(f["_total"], 3);
    }
}
