//! Random-forest regression, built from scratch: CART trees with
//! variance-reduction splits, bootstrap resampling, and per-split random
//! feature subsets.
//!
//! Training is reproducible from the seed. Each tree draws from its own
//! ChaCha stream (`seed`, stream `tree index + 1`), so parallel and serial
//! training produce identical forests.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datapipe::{DailyValue, TimeWindow};
use crate::error::{Error, Result};

/// One training row: feature vector plus target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSample {
    pub features: Vec<f64>,
    pub target: f64,
}

/// Forest hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features examined per split; `None` means `ceil(p / 3)`.
    pub n_split_features: Option<usize>,
    pub bootstrap: bool,
    pub rng_seed: u64,
}

impl Default for ForestConfig {
    fn default() -> ForestConfig {
        ForestConfig {
            n_trees: 100,
            max_depth: 8,
            min_samples_leaf: 2,
            n_split_features: None,
            bootstrap: true,
            rng_seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParameter("n_trees must be >= 1".to_string()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidParameter(
                "min_samples_leaf must be >= 1".to_string(),
            ));
        }
        Ok(())
    }
}

/// Tree node in an index arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// A single regression tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, features: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if features[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

/// Trained ensemble; prediction is the mean of the per-tree leaf values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub config: ForestConfig,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    sse: f64,
}

struct TreeBuilder<'a> {
    samples: &'a [RegressionSample],
    n_features: usize,
    max_depth: usize,
    min_leaf: usize,
    n_split_features: usize,
    nodes: Vec<Node>,
}

impl<'a> TreeBuilder<'a> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let mean =
            idx.iter().map(|&i| self.samples[i].target).sum::<f64>() / idx.len() as f64;
        self.nodes.push(Node::Leaf { value: mean });
        self.nodes.len() - 1
    }

    /// Best threshold on one feature, or None when the feature is constant
    /// in this node or no cut keeps both children at min_leaf.
    fn best_split_on(&self, idx: &[usize], feature: usize) -> Option<BestSplit> {
        let mut pairs: Vec<(f64, f64)> = idx
            .iter()
            .map(|&i| (self.samples[i].features[feature], self.samples[i].target))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite feature values"));

        let m = pairs.len();
        let mut prefix_sum = 0.0;
        let mut prefix_sq = 0.0;
        let total_sum: f64 = pairs.iter().map(|p| p.1).sum();
        let total_sq: f64 = pairs.iter().map(|p| p.1 * p.1).sum();

        let mut best: Option<BestSplit> = None;
        for cut in 1..m {
            prefix_sum += pairs[cut - 1].1;
            prefix_sq += pairs[cut - 1].1 * pairs[cut - 1].1;
            if pairs[cut - 1].0 == pairs[cut].0 {
                continue;
            }
            if cut < self.min_leaf || m - cut < self.min_leaf {
                continue;
            }
            let nl = cut as f64;
            let nr = (m - cut) as f64;
            let sse_left = prefix_sq - prefix_sum * prefix_sum / nl;
            let right_sum = total_sum - prefix_sum;
            let sse_right = (total_sq - prefix_sq) - right_sum * right_sum / nr;
            let sse = sse_left + sse_right;
            if best.as_ref().is_none_or(|b| sse < b.sse) {
                // Midpoints of adjacent floats can round up onto the right
                // value; fall back to the left value so both children stay
                // nonempty under `<= threshold`.
                let mid = (pairs[cut - 1].0 + pairs[cut].0) / 2.0;
                let threshold = if mid < pairs[cut].0 {
                    mid
                } else {
                    pairs[cut - 1].0
                };
                best = Some(BestSplit {
                    feature,
                    threshold,
                    sse,
                });
            }
        }
        best
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let first = self.samples[idx[0]].target;
        let zero_variance = idx.iter().all(|&i| self.samples[i].target == first);
        if depth >= self.max_depth || idx.len() < 2 * self.min_leaf || zero_variance {
            return self.leaf(&idx);
        }

        // Examine up to n_split_features features that actually admit a
        // split here; features constant within the node do not count
        // against the budget.
        let mut order: Vec<usize> = (0..self.n_features).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut best: Option<BestSplit> = None;
        let mut examined = 0;
        for &feature in &order {
            if examined >= self.n_split_features {
                break;
            }
            if let Some(candidate) = self.best_split_on(&idx, feature) {
                examined += 1;
                if best.as_ref().is_none_or(|b| candidate.sse < b.sse) {
                    best = Some(candidate);
                }
            }
        }
        let Some(split) = best else {
            return self.leaf(&idx);
        };

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.samples[i].features[split.feature] <= split.threshold);

        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 }); // patched below
        let left = self.build(left_idx, depth + 1, rng);
        let right = self.build(right_idx, depth + 1, rng);
        self.nodes[at] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        at
    }
}

fn check_samples(samples: &[RegressionSample]) -> Result<usize> {
    let Some(first) = samples.first() else {
        return Err(Error::InvalidInput(
            "cannot fit on an empty sample set".to_string(),
        ));
    };
    let p = first.features.len();
    if p == 0 {
        return Err(Error::InvalidInput("samples have no features".to_string()));
    }
    for s in samples {
        if s.features.len() != p {
            return Err(Error::InvalidInput(format!(
                "inconsistent feature lengths: {} vs {p}",
                s.features.len()
            )));
        }
        if !s.target.is_finite() || s.features.iter().any(|f| !f.is_finite()) {
            return Err(Error::InvalidInput(
                "samples must be finite".to_string(),
            ));
        }
    }
    Ok(p)
}

fn fit_tree_on(
    samples: &[RegressionSample],
    idx: Vec<usize>,
    n_features: usize,
    max_depth: usize,
    min_samples_leaf: usize,
    n_split_features: usize,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let mut builder = TreeBuilder {
        samples,
        n_features,
        max_depth,
        min_leaf: min_samples_leaf,
        n_split_features,
        nodes: Vec::new(),
    };
    builder.build(idx, 0, rng);
    Tree {
        nodes: builder.nodes,
    }
}

/// Fit a single CART regression tree with greedy variance-reduction splits.
pub fn fit_tree(
    samples: &[RegressionSample],
    max_depth: usize,
    min_samples_leaf: usize,
    n_split_features: Option<usize>,
    rng: &mut ChaCha8Rng,
) -> Result<Tree> {
    let p = check_samples(samples)?;
    let k = n_split_features.unwrap_or(p).clamp(1, p);
    Ok(fit_tree_on(
        samples,
        (0..samples.len()).collect(),
        p,
        max_depth,
        min_samples_leaf.max(1),
        k,
        rng,
    ))
}

/// Default per-split feature budget: `ceil(p / 3)`.
fn default_split_features(p: usize) -> usize {
    p.div_ceil(3)
}

/// Fit the forest: `n_trees` trees, each on a bootstrap resample of the
/// same size, drawn with replacement.
pub fn fit_forest(samples: &[RegressionSample], config: &ForestConfig) -> Result<RandomForest> {
    config.validate()?;
    let p = check_samples(samples)?;
    if samples.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "forest training needs >= 2 samples, got {}",
            samples.len()
        )));
    }
    let k = config
        .n_split_features
        .unwrap_or_else(|| default_split_features(p))
        .clamp(1, p);

    let trees: Vec<Tree> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
            rng.set_stream(t as u64 + 1);
            let idx: Vec<usize> = if config.bootstrap {
                (0..samples.len())
                    .map(|_| rng.gen_range(0..samples.len()))
                    .collect()
            } else {
                (0..samples.len()).collect()
            };
            fit_tree_on(
                samples,
                idx,
                p,
                config.max_depth,
                config.min_samples_leaf,
                k,
                &mut rng,
            )
        })
        .collect();

    Ok(RandomForest {
        config: config.clone(),
        n_features: p,
        trees,
    })
}

impl RandomForest {
    /// Mean of the per-tree predictions.
    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.n_features {
            return Err(Error::InvalidInput(format!(
                "expected {} features, got {}",
                self.n_features,
                features.len()
            )));
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(features)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    /// Deterministic JSON encoding (config + trees).
    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec_pretty(self)?)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_bytes()?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<RandomForest> {
        let bytes = std::fs::read(path)?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

/// Regression quality: coefficient of determination, mean absolute error,
/// and the standard deviation of the absolute errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub r2: f64,
    pub mae: f64,
    pub mae_std: f64,
}

pub fn regression_metrics(preds: &[f64], targets: &[f64]) -> Result<RegressionMetrics> {
    if preds.len() != targets.len() || preds.is_empty() {
        return Err(Error::InvalidInput(format!(
            "prediction/target length mismatch: {} vs {}",
            preds.len(),
            targets.len()
        )));
    }
    let n = targets.len() as f64;
    let mean_t = targets.iter().sum::<f64>() / n;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (&p, &t) in preds.iter().zip(targets) {
        ss_res += (p - t) * (p - t);
        ss_tot += (t - mean_t) * (t - mean_t);
    }
    if ss_tot == 0.0 && ss_res > 0.0 {
        return Err(Error::InvalidInput(
            "r2 undefined: constant targets with nonzero residuals".to_string(),
        ));
    }
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    let abs_err: Vec<f64> = preds
        .iter()
        .zip(targets)
        .map(|(&p, &t)| (p - t).abs())
        .collect();
    let mae = abs_err.iter().sum::<f64>() / n;
    let mae_std = if abs_err.len() > 1 {
        let ss: f64 = abs_err.iter().map(|e| (e - mae) * (e - mae)).sum();
        (ss / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(RegressionMetrics { r2, mae, mae_std })
}

/// Feature vector for one time window: the window ordinal plus the
/// subject's baseline ratios (1.0 by construction on normalized data, kept
/// for extensibility).
pub fn window_features(window: TimeWindow, baseline_area: f64, baseline_count: f64) -> Vec<f64> {
    vec![window.ordinal() as f64, baseline_area, baseline_count]
}

/// Join cleaned daily values into regression rows: one per (subject, time
/// window), with the window mean of `index_name` as target. Windows without
/// data are skipped; days beyond 30 are ignored.
pub fn build_training_samples(daily: &[DailyValue], index_name: &str) -> Vec<RegressionSample> {
    use std::collections::BTreeMap;

    let mut baseline_area: BTreeMap<&str, f64> = BTreeMap::new();
    let mut baseline_count: BTreeMap<&str, f64> = BTreeMap::new();
    for d in daily.iter().filter(|d| d.day == 0) {
        if d.index_name == index_name {
            baseline_area.insert(d.subject_id.as_str(), d.value);
        } else if d.index_name == "Pore_Count" {
            baseline_count.insert(d.subject_id.as_str(), d.value);
        }
    }

    let mut windows: BTreeMap<(&str, TimeWindow), (f64, usize)> = BTreeMap::new();
    for d in daily.iter().filter(|d| d.index_name == index_name) {
        if let Ok(crate::datapipe::DayWindow::Window(w)) = crate::datapipe::assign_time_window(d.day)
        {
            let e = windows.entry((d.subject_id.as_str(), w)).or_insert((0.0, 0));
            e.0 += d.value;
            e.1 += 1;
        }
    }

    windows
        .into_iter()
        .map(|((subject, w), (sum, n))| RegressionSample {
            features: window_features(
                w,
                baseline_area.get(subject).copied().unwrap_or(1.0),
                baseline_count.get(subject).copied().unwrap_or(1.0),
            ),
            target: sum / n as f64,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(42)
    }

    fn step_data() -> Vec<RegressionSample> {
        // x < 0 -> y = 0, x >= 0 -> y = 1.
        [-3.0, -2.0, -0.5, 0.25, 1.0, 2.0]
            .iter()
            .map(|&x| RegressionSample {
                features: vec![x],
                target: if x < 0.0 { 0.0 } else { 1.0 },
            })
            .collect()
    }

    #[test]
    fn constant_targets_make_a_single_leaf() {
        let samples: Vec<RegressionSample> = (0..8)
            .map(|i| RegressionSample {
                features: vec![i as f64],
                target: 0.7,
            })
            .collect();
        let tree = fit_tree(&samples, 8, 1, None, &mut rng()).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert!(matches!(tree.nodes[0], Node::Leaf { value } if (value - 0.7).abs() < 1e-12));
    }

    #[test]
    fn depth_one_split_on_step_data_is_optimal() {
        let samples = step_data();
        let tree = fit_tree(&samples, 1, 1, None, &mut rng()).unwrap();
        let Node::Split {
            threshold,
            left,
            right,
            ..
        } = tree.nodes[0]
        else {
            panic!("expected a root split");
        };
        // The optimal cut separates the classes: threshold in (-0.5, 0.25).
        assert!(threshold > -0.5 && threshold < 0.25, "threshold {threshold}");
        let lv = match tree.nodes[left] {
            Node::Leaf { value } => value,
            _ => panic!(),
        };
        let rv = match tree.nodes[right] {
            Node::Leaf { value } => value,
            _ => panic!(),
        };
        assert_eq!((lv, rv), (0.0, 1.0));

        // Brute force over all candidate thresholds confirms the optimum.
        let mut best_sse = f64::INFINITY;
        let mut xs: Vec<f64> = samples.iter().map(|s| s.features[0]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in xs.windows(2) {
            if w[0] == w[1] {
                continue;
            }
            let cut = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<&RegressionSample>, Vec<&RegressionSample>) =
                samples.iter().partition(|s| s.features[0] <= cut);
            let sse = |part: &[&RegressionSample]| {
                let m = part.iter().map(|s| s.target).sum::<f64>() / part.len() as f64;
                part.iter().map(|s| (s.target - m) * (s.target - m)).sum::<f64>()
            };
            best_sse = best_sse.min(sse(&l) + sse(&r));
        }
        assert!(best_sse.abs() < 1e-12, "optimum must be a clean separation");
    }

    #[test]
    fn unlimited_depth_memorizes_distinct_inputs() {
        use rand::Rng as _;
        let mut r = rng();
        let samples: Vec<RegressionSample> = (0..40)
            .map(|i| RegressionSample {
                features: vec![i as f64],
                target: r.gen_range(-1.0..1.0),
            })
            .collect();
        let tree = fit_tree(&samples, usize::MAX, 1, None, &mut rng()).unwrap();
        for s in &samples {
            assert!((tree.predict(&s.features) - s.target).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_and_undersized_inputs_error() {
        assert!(fit_tree(&[], 8, 1, None, &mut rng()).is_err());
        let one = vec![RegressionSample {
            features: vec![0.0],
            target: 1.0,
        }];
        assert!(fit_forest(&one, &ForestConfig::default()).is_err());
    }

    #[test]
    fn constant_target_forest_predicts_the_constant() {
        // A dyadic constant averages exactly through leaves and trees.
        let samples: Vec<RegressionSample> = (0..10)
            .map(|i| RegressionSample {
                features: vec![i as f64, 1.0],
                target: 0.375,
            })
            .collect();
        let forest = fit_forest(&samples, &ForestConfig::default()).unwrap();
        assert_eq!(forest.predict(&[3.0, 1.0]).unwrap(), 0.375);

        let odd: Vec<RegressionSample> = samples
            .iter()
            .map(|s| RegressionSample {
                features: s.features.clone(),
                target: 0.42,
            })
            .collect();
        let forest = fit_forest(&odd, &ForestConfig::default()).unwrap();
        assert!((forest.predict(&[3.0, 1.0]).unwrap() - 0.42).abs() < 1e-14);
    }

    #[test]
    fn same_seed_gives_byte_equal_models() {
        let samples = step_data();
        let cfg = ForestConfig {
            n_trees: 24,
            rng_seed: 7,
            ..ForestConfig::default()
        };
        let a = fit_forest(&samples, &cfg).unwrap();
        let b = fit_forest(&samples, &cfg).unwrap();
        assert_eq!(a.to_json_bytes().unwrap(), b.to_json_bytes().unwrap());

        let different = fit_forest(
            &samples,
            &ForestConfig {
                rng_seed: 8,
                ..cfg
            },
        )
        .unwrap();
        assert_ne!(
            a.to_json_bytes().unwrap(),
            different.to_json_bytes().unwrap()
        );
    }

    #[test]
    fn forest_learns_noisy_linear_trend() {
        use rand::Rng as _;
        let mut r = rng();
        let samples: Vec<RegressionSample> = (0..600)
            .map(|i| {
                let tw = (i % 3 + 1) as f64;
                RegressionSample {
                    features: vec![tw, 1.0, 1.0],
                    target: 1.0 - 0.05 * tw + r.gen_range(-0.017..0.017),
                }
            })
            .collect();
        let forest = fit_forest(&samples, &ForestConfig::default()).unwrap();
        let preds: Vec<f64> = samples
            .iter()
            .map(|s| forest.predict(&s.features).unwrap())
            .collect();
        let targets: Vec<f64> = samples.iter().map(|s| s.target).collect();
        let m = regression_metrics(&preds, &targets).unwrap();
        assert!(m.r2 >= 0.9, "training r2 = {}", m.r2);
    }

    #[test]
    fn prediction_averages_trees_and_stays_in_target_range() {
        let leaf = |v: f64| Tree {
            nodes: vec![Node::Leaf { value: v }],
        };
        let forest = RandomForest {
            config: ForestConfig {
                n_trees: 2,
                ..ForestConfig::default()
            },
            n_features: 1,
            trees: vec![leaf(0.8), leaf(0.9)],
        };
        assert!((forest.predict(&[0.0]).unwrap() - 0.85).abs() < 1e-12);

        let single = RandomForest {
            config: ForestConfig {
                n_trees: 1,
                ..ForestConfig::default()
            },
            n_features: 1,
            trees: vec![leaf(0.8)],
        };
        assert_eq!(single.predict(&[5.0]).unwrap(), 0.8);

        assert!(forest.predict(&[0.0, 1.0]).is_err());

        // Ensemble mean stays within the tree prediction range.
        let samples = step_data();
        let f = fit_forest(&samples, &ForestConfig::default()).unwrap();
        for x in [-4.0, -1.0, 0.0, 0.5, 3.0] {
            let per_tree: Vec<f64> = f.trees.iter().map(|t| t.predict(&[x])).collect();
            let lo = per_tree.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = per_tree.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let p = f.predict(&[x]).unwrap();
            assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
        }
    }

    #[test]
    fn metrics_examples() {
        let m = regression_metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.r2, 1.0);
        assert_eq!(m.mae, 0.0);

        // Predicting the target mean everywhere gives r2 exactly 0.
        let targets = [2.0, 4.0, 9.0];
        let mean = targets.iter().sum::<f64>() / targets.len() as f64;
        let m = regression_metrics(&[mean, mean, mean], &targets).unwrap();
        assert_eq!(m.r2, 0.0);

        let m = regression_metrics(&[1.0, 2.0], &[2.0, 4.0]).unwrap();
        assert!((m.mae - 1.5).abs() < 1e-12);

        assert!(regression_metrics(&[1.0], &[1.0, 2.0]).is_err());
        assert!(regression_metrics(&[1.0, 2.0], &[3.0, 3.0]).is_err());
    }

    #[test]
    fn duplicated_feature_barely_moves_training_r2() {
        use rand::Rng as _;
        let mut r = rng();
        let base: Vec<RegressionSample> = (0..300)
            .map(|i| {
                let tw = (i % 3 + 1) as f64;
                RegressionSample {
                    features: vec![tw, 1.0, 1.0],
                    target: 1.0 - 0.05 * tw + r.gen_range(-0.01..0.01),
                }
            })
            .collect();
        let duplicated: Vec<RegressionSample> = base
            .iter()
            .map(|s| {
                let mut f = s.features.clone();
                f.push(s.features[0]);
                RegressionSample {
                    features: f,
                    target: s.target,
                }
            })
            .collect();

        let train_r2 = |samples: &[RegressionSample], seed: u64| {
            let cfg = ForestConfig {
                rng_seed: seed,
                ..ForestConfig::default()
            };
            let f = fit_forest(samples, &cfg).unwrap();
            let preds: Vec<f64> = samples
                .iter()
                .map(|s| f.predict(&s.features).unwrap())
                .collect();
            let targets: Vec<f64> = samples.iter().map(|s| s.target).collect();
            regression_metrics(&preds, &targets).unwrap().r2
        };

        let seeds = [0u64, 1, 2, 3, 4];
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        let r2_base = mean(&seeds.map(|s| train_r2(&base, s)));
        let r2_dup = mean(&seeds.map(|s| train_r2(&duplicated, s)));
        assert!(
            (r2_base - r2_dup).abs() <= 0.02,
            "base {r2_base} vs duplicated {r2_dup}"
        );
    }

    #[test]
    fn model_json_round_trip() {
        let samples = step_data();
        let forest = fit_forest(
            &samples,
            &ForestConfig {
                n_trees: 5,
                ..ForestConfig::default()
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        forest.save_json(&path).unwrap();
        let back = RandomForest::load_json(&path).unwrap();
        assert_eq!(forest, back);
    }

    #[test]
    fn training_samples_join_windows_and_baselines() {
        let mut daily = Vec::new();
        for day in 0..=30u32 {
            daily.push(DailyValue {
                subject_id: "s1".into(),
                day,
                index_name: "Pore_Area_total".into(),
                value: 1.0 - 0.005 * day as f64,
            });
        }
        let samples = build_training_samples(&daily, "Pore_Area_total");
        assert_eq!(samples.len(), 3);
        assert_eq!(samples[0].features, vec![1.0, 1.0, 1.0]);
        // TW10 mean over days 1..=10: 1 - 0.005 * 5.5.
        assert!((samples[0].target - (1.0 - 0.005 * 5.5)).abs() < 1e-12);
        assert!(samples[0].target > samples[1].target);
        assert!(samples[1].target > samples[2].target);
    }
}
