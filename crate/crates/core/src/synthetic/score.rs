use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::PlantModel;

/// Edge agreement between a predicted and a ground-truth model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeScore {
    pub true_positives: usize,
    pub predicted: usize,
    pub truth: usize,
    pub precision: f64,
    pub recall: f64,
    /// Identical edge sets. Instance IDs are shared, so this is tree isomorphism
    /// under the identity labelling.
    pub isomorphic: bool,
}

/// Compare `(parent, child)` edge sets. Both models must hold the same
/// instance IDs with the same classes.
pub fn score_model(predicted: &PlantModel, truth: &PlantModel) -> Result<EdgeScore> {
    if predicted.items.len() != truth.items.len() {
        return Err(Error::Scoring(format!(
            "predicted model has {} items, truth has {}",
            predicted.items.len(),
            truth.items.len()
        )));
    }
    for (p, t) in predicted.items.iter().zip(&truth.items) {
        if p.id() != t.id() || p.class() != t.class() {
            return Err(Error::Scoring(format!(
                "item {} is {} in the prediction but item {} is {} in the truth",
                p.id(),
                p.class(),
                t.id(),
                t.class()
            )));
        }
    }
    let pe: BTreeSet<(usize, usize)> = predicted.edges().into_iter().collect();
    let te: BTreeSet<(usize, usize)> = truth.edges().into_iter().collect();
    let tp = pe.intersection(&te).count();
    let ratio = |n: usize| if n == 0 { 1.0 } else { tp as f64 / n as f64 };
    Ok(EdgeScore {
        true_positives: tp,
        predicted: pe.len(),
        truth: te.len(),
        precision: ratio(pe.len()),
        recall: ratio(te.len()),
        isomorphic: pe == te,
    })
}
