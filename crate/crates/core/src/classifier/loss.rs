//! Cross-entropy terms and the two-sided combined objective
//! `L = mean(labelled CE) + mean(inferred CE)`, where an empty side
//! contributes zero.

use super::ProbabilityDistribution;
use crate::corpus::Label;
use crate::features::FeatureVector;

pub const PROB_FLOOR: f64 = 1e-12;

pub fn cross_entropy(dist: &ProbabilityDistribution, label: Label) -> f64 {
    -dist.p(label).clamp(PROB_FLOOR, 1.0).ln()
}

fn mean_ce(side: &[(ProbabilityDistribution, Label)]) -> f64 {
    if side.is_empty() {
        return 0.0;
    }
    side.iter().map(|(p, l)| cross_entropy(p, *l)).sum::<f64>() / side.len() as f64
}

/// Combined loss over already-computed class probabilities.
pub fn combined_loss(
    labelled: &[(ProbabilityDistribution, Label)],
    inferred: &[(ProbabilityDistribution, Label)],
) -> f64 {
    mean_ce(labelled) + mean_ce(inferred)
}

/// Feature-level mini-batch split into the human-labelled and the inferred
/// side.
#[derive(Clone, Debug, Default)]
pub struct LossBatch<'a> {
    pub labelled: Vec<(&'a FeatureVector, Label)>,
    pub inferred: Vec<(&'a FeatureVector, Label)>,
}

impl LossBatch<'_> {
    pub fn len(&self) -> usize {
        self.labelled.len() + self.inferred.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Sparse gradient of the combined loss with respect to the 2 x d weight
/// matrix (per touched feature, one entry per class) and the bias.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossGradient {
    pub weights: Vec<(u32, [f64; 2])>,
    pub bias: [f64; 2],
}

impl LossGradient {
    pub(crate) fn accumulate(&mut self, x: &FeatureVector, dlogits: [f64; 2]) {
        for &(i, v) in x.entries() {
            self.weights.push((i, [dlogits[0] * v, dlogits[1] * v]));
        }
        self.bias[0] += dlogits[0];
        self.bias[1] += dlogits[1];
    }

    /// Merges duplicate feature indices, keeping index order.
    pub(crate) fn compact(&mut self) {
        self.weights.sort_by_key(|e| e.0);
        let mut out: Vec<(u32, [f64; 2])> = Vec::with_capacity(self.weights.len());
        for (i, g) in self.weights.drain(..) {
            match out.last_mut() {
                Some((j, acc)) if *j == i => {
                    acc[0] += g[0];
                    acc[1] += g[1];
                }
                _ => out.push((i, g)),
            }
        }
        self.weights = out;
    }

    /// Dense lookup for tests and diagnostics.
    pub fn weight(&self, index: u32, class: usize) -> f64 {
        self.weights
            .iter()
            .filter(|(i, _)| *i == index)
            .map(|(_, g)| g[class])
            .sum()
    }
}
