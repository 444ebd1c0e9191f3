//! Histogram-based tree boosting.
//!
//! Features are discretized once into equal-frequency bins; every node then
//! accumulates per-bin gradient/hessian/count histograms over its samples
//! and scans bin boundaries for the best second-order gain. Split-gain
//! evaluation runs in parallel across features; per-feature accumulation
//! order is fixed, and the cross-feature reduction scans in index order, so
//! results are identical to a sequential run.

use rayon::prelude::*;

use super::{GbdtError, GbdtModel, GbdtParams, Tree, TreeNode};
use crate::loss::{LossConfig, Objective};
use crate::pipeline::WindowSample;

/// Gain comparison with a relative dead band. Complementary partitions on
/// different features have mathematically equal gains that floating-point
/// summation orders render unequal; treating near-equal gains as ties keeps
/// the lowest-feature, lowest-threshold candidate deterministically. A
/// candidate below the dead band of zero never splits.
pub(crate) fn beats(candidate: f64, incumbent: f64) -> bool {
    candidate > incumbent + 1e-9 * incumbent.abs().max(1.0)
}

/// Result of a training run: the model plus the total training loss after
/// each boosting round.
#[derive(Debug, Clone)]
pub struct GbdtTraining {
    pub model: GbdtModel,
    pub loss_trace: Vec<f64>,
}

/// Per-feature binned view of the training matrix.
struct BinnedFeatures {
    /// `cuts[f]` are ascending thresholds; bin `b` holds `x <= cuts[f][b]`
    /// (the last bin is unbounded above). `codes[f][i]` is sample i's bin.
    cuts: Vec<Vec<f64>>,
    codes: Vec<Vec<u32>>,
}

impl BinnedFeatures {
    fn build(samples: &[WindowSample], n_features: usize, max_bins: usize) -> Self {
        let columns: Vec<Vec<f64>> = (0..n_features)
            .into_par_iter()
            .map(|f| samples.iter().map(|s| s.features[f]).collect())
            .collect();

        let cuts: Vec<Vec<f64>> = columns
            .par_iter()
            .map(|col| {
                let mut sorted = col.clone();
                sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite features"));
                sorted.dedup();
                if sorted.len() <= 1 {
                    return Vec::new();
                }
                if sorted.len() <= max_bins {
                    // Every distinct value gets its own bin.
                    sorted.pop();
                    return sorted;
                }
                // Equal-frequency cut points over the raw (duplicated) column.
                let mut ranked = col.clone();
                ranked.sort_by(|a, b| a.partial_cmp(b).expect("finite features"));
                let n = ranked.len();
                let mut cuts: Vec<f64> = (1..max_bins)
                    .map(|i| ranked[i * n / max_bins])
                    .collect();
                cuts.dedup();
                // A cut at the column max would leave a permanently empty
                // top bin.
                let max = *sorted.last().expect("non-empty column");
                if cuts.last() == Some(&max) {
                    cuts.pop();
                }
                cuts
            })
            .collect();

        let codes: Vec<Vec<u32>> = columns
            .par_iter()
            .zip(cuts.par_iter())
            .map(|(col, cuts)| {
                col.iter()
                    .map(|&x| cuts.partition_point(|c| *c < x) as u32)
                    .collect()
            })
            .collect();

        Self { cuts, codes }
    }

    fn n_bins(&self, feature: usize) -> usize {
        self.cuts[feature].len() + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct SplitCandidate {
    gain: f64,
    feature: usize,
    /// Split after this bin: bins `0..=bin` go left.
    bin: usize,
    threshold: f64,
}

fn best_split_for_feature(
    feature: usize,
    node_samples: &[u32],
    grad: &[f64],
    hess: &[f64],
    binned: &BinnedFeatures,
    params: &GbdtParams,
    totals: (f64, f64),
) -> Option<SplitCandidate> {
    let (total_g, total_h) = totals;
    let n_bins = binned.n_bins(feature);
    if n_bins < 2 {
        return None;
    }
    let codes = &binned.codes[feature];
    let mut hist_g = vec![0.0f64; n_bins];
    let mut hist_h = vec![0.0f64; n_bins];
    let mut hist_c = vec![0u32; n_bins];
    for &i in node_samples {
        let b = codes[i as usize] as usize;
        hist_g[b] += grad[i as usize];
        hist_h[b] += hess[i as usize];
        hist_c[b] += 1;
    }

    let lambda = params.lambda_l2;
    let parent_score = total_g * total_g / (total_h + lambda);
    let total_count = node_samples.len() as u32;
    let msl = params.min_samples_leaf as u32;

    let mut best: Option<SplitCandidate> = None;
    let (mut gl, mut hl, mut cl) = (0.0f64, 0.0f64, 0u32);
    for bin in 0..n_bins - 1 {
        gl += hist_g[bin];
        hl += hist_h[bin];
        cl += hist_c[bin];
        let cr = total_count - cl;
        if cl < msl {
            continue;
        }
        if cr < msl {
            break;
        }
        let gr = total_g - gl;
        let hr = total_h - hl;
        let gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent_score;
        if beats(gain, best.map_or(0.0, |b| b.gain)) {
            best = Some(SplitCandidate {
                gain,
                feature,
                bin,
                threshold: binned.cuts[feature][bin],
            });
        }
    }
    best
}

fn find_best_split(
    node_samples: &[u32],
    grad: &[f64],
    hess: &[f64],
    binned: &BinnedFeatures,
    params: &GbdtParams,
) -> Option<SplitCandidate> {
    let total_g: f64 = node_samples.iter().map(|&i| grad[i as usize]).sum();
    let total_h: f64 = node_samples.iter().map(|&i| hess[i as usize]).sum();

    let candidates: Vec<Option<SplitCandidate>> = (0..binned.codes.len())
        .into_par_iter()
        .map(|f| {
            best_split_for_feature(f, node_samples, grad, hess, binned, params, (total_g, total_h))
        })
        .collect();

    // Scan in feature order; the dead band keeps the lowest index on ties.
    let mut best: Option<SplitCandidate> = None;
    for cand in candidates.into_iter().flatten() {
        if best.is_none_or(|b| beats(cand.gain, b.gain)) {
            best = Some(cand);
        }
    }
    best
}

fn leaf_value(samples: &[u32], grad: &[f64], hess: &[f64], lambda: f64) -> f64 {
    let g: f64 = samples.iter().map(|&i| grad[i as usize]).sum();
    let h: f64 = samples.iter().map(|&i| hess[i as usize]).sum();
    -g / (h + lambda)
}

/// Grow one tree on the current gradients. Returns the tree and, per leaf,
/// the list of training samples it holds (used to update predictions).
fn grow_tree(
    all_samples: Vec<u32>,
    grad: &[f64],
    hess: &[f64],
    binned: &BinnedFeatures,
    params: &GbdtParams,
) -> (Tree, Vec<(usize, Vec<u32>)>) {
    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut leaves: Vec<(usize, Vec<u32>)> = Vec::new();
    // (node slot, samples, depth); slots are pre-allocated placeholders.
    let mut stack: Vec<(usize, Vec<u32>, usize)> = Vec::new();

    nodes.push(TreeNode::Leaf { value: 0.0 });
    stack.push((0, all_samples, 0));

    while let Some((slot, samples, depth)) = stack.pop() {
        let can_split = depth < params.max_depth && samples.len() >= 2 * params.min_samples_leaf;
        let split = if can_split {
            find_best_split(&samples, grad, hess, binned, params)
        } else {
            None
        };
        match split {
            Some(cand) => {
                let codes = &binned.codes[cand.feature];
                let mut left = Vec::with_capacity(samples.len() / 2);
                let mut right = Vec::with_capacity(samples.len() / 2);
                for &i in &samples {
                    if codes[i as usize] as usize <= cand.bin {
                        left.push(i);
                    } else {
                        right.push(i);
                    }
                }
                let left_slot = nodes.len();
                nodes.push(TreeNode::Leaf { value: 0.0 });
                let right_slot = nodes.len();
                nodes.push(TreeNode::Leaf { value: 0.0 });
                nodes[slot] = TreeNode::Split {
                    feature: cand.feature,
                    threshold: cand.threshold,
                    left: left_slot,
                    right: right_slot,
                };
                // Push right first so the left subtree is finished first.
                stack.push((right_slot, right, depth + 1));
                stack.push((left_slot, left, depth + 1));
            }
            None => {
                let value = leaf_value(&samples, grad, hess, params.lambda_l2);
                nodes[slot] = TreeNode::Leaf { value };
                leaves.push((slot, samples));
            }
        }
    }
    (Tree { nodes }, leaves)
}

/// Train an ensemble on window samples with any second-order objective.
///
/// `base_score` is the mean training target; each round fits one tree to
/// the fresh (gradient, hessian) pairs and advances predictions by
/// `learning_rate * leaf_value`. With `learning_rate <= 0.1` the total
/// training loss must be non-increasing round over round; a violation
/// aborts the run.
pub fn train(
    dataset: &[WindowSample],
    objective: &dyn Objective,
    params: &GbdtParams,
    loss_cfg: &LossConfig,
) -> Result<GbdtTraining, GbdtError> {
    params.validate()?;
    if dataset.is_empty() {
        return Err(GbdtError::EmptyDataset);
    }
    let n = dataset.len();
    let n_features = dataset[0].features.len();
    for s in dataset {
        if s.features.len() != n_features {
            return Err(GbdtError::DimensionMismatch {
                expected: n_features,
                found: s.features.len(),
            });
        }
    }

    let targets: Vec<f64> = dataset.iter().map(|s| s.target).collect();
    let base_score = targets.iter().sum::<f64>() / n as f64;

    let binned = BinnedFeatures::build(dataset, n_features, params.max_bins);

    let mut preds = vec![base_score; n];
    let mut grad = vec![0.0f64; n];
    let mut hess = vec![0.0f64; n];
    let mut trees: Vec<Tree> = Vec::with_capacity(params.n_rounds);
    let mut loss_trace: Vec<f64> = Vec::with_capacity(params.n_rounds);
    let mut prev_loss: f64 = preds
        .iter()
        .zip(&targets)
        .map(|(&p, &t)| objective.loss(p, t))
        .sum();

    let monotone_checked = params.learning_rate <= 0.1;

    for round in 0..params.n_rounds {
        let mut hess_sum = 0.0;
        for i in 0..n {
            let gh = objective.grad_hess(preds[i], targets[i]);
            if !gh.grad.is_finite() || !gh.hess.is_finite() {
                return Err(GbdtError::NonFiniteGradient { sample: i, round });
            }
            grad[i] = gh.grad;
            hess[i] = gh.hess;
            hess_sum += gh.hess;
        }
        if hess_sum <= 1e-300 {
            return Err(GbdtError::DegenerateObjective);
        }

        let all: Vec<u32> = (0..n as u32).collect();
        let (tree, leaves) = grow_tree(all, &grad, &hess, &binned, params);
        for (slot, samples) in &leaves {
            if let TreeNode::Leaf { value } = tree.nodes[*slot] {
                for &i in samples {
                    preds[i as usize] += params.learning_rate * value;
                }
            }
        }
        trees.push(tree);

        let loss: f64 = preds
            .iter()
            .zip(&targets)
            .map(|(&p, &t)| objective.loss(p, t))
            .sum();
        if monotone_checked && loss > prev_loss * (1.0 + 1e-9) + 1e-9 {
            return Err(GbdtError::LossNotMonotone {
                round,
                previous: prev_loss,
                current: loss,
            });
        }
        prev_loss = loss;
        loss_trace.push(loss);
    }

    Ok(GbdtTraining {
        model: GbdtModel {
            base_score,
            learning_rate: params.learning_rate,
            n_features,
            trees,
            objective: objective.name().to_string(),
            loss_config: loss_cfg.clone(),
            params: params.clone(),
        },
        loss_trace,
    })
}
