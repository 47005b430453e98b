use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::detector::ClassMetrics;
use crate::matrix::{Cell, SpeciesTraitMatrix};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn metrics(&self) -> ClassMetrics {
        ClassMetrics::from_counts(self.tp, self.fp, self.fn_)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitScore {
    pub trait_name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub coverage: f64,
    pub counts: Counts,
    /// Cells covered in the prediction but NA in the reference.
    pub unverifiable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Micro-averaged over every value bit of cells covered in the prediction.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub coverage: f64,
    pub counts: Counts,
    pub unverifiable: usize,
    /// Unweighted means of the per-trait figures, over traits with any counted bit.
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub per_trait: Vec<TraitScore>,
}

/// Index maps from `pred` onto `reference`, matched by name.
struct Alignment {
    species: Vec<usize>,
    traits: Vec<(usize, Vec<usize>)>,
}

fn align(pred: &SpeciesTraitMatrix, reference: &SpeciesTraitMatrix) -> Result<Alignment, EvalError> {
    let (ps, rs) = (pred.schema(), reference.schema());
    if ps.len() != rs.len() {
        return Err(EvalError::SchemaMismatch(format!(
            "{} traits vs {}",
            ps.len(),
            rs.len()
        )));
    }
    let mut traits = Vec::new();
    for t in ps.traits() {
        let ri = rs
            .trait_index(t.name())
            .ok_or_else(|| EvalError::SchemaMismatch(format!("trait {:?} missing from the reference", t.name())))?;
        let rt = &rs.traits()[ri];
        if rt.values().len() != t.values().len() {
            return Err(EvalError::SchemaMismatch(format!(
                "trait {:?} has different value lists",
                t.name()
            )));
        }
        let values = t
            .values()
            .iter()
            .map(|v| {
                rt.value_index(v).ok_or_else(|| {
                    EvalError::SchemaMismatch(format!("value {:?} of {:?} missing from the reference", v, t.name()))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        traits.push((ri, values));
    }
    if pred.species().len() != reference.species().len() {
        return Err(EvalError::SchemaMismatch(format!(
            "{} species vs {}",
            pred.species().len(),
            reference.species().len()
        )));
    }
    let species = pred
        .species()
        .iter()
        .map(|s| {
            reference
                .species_index(s)
                .ok_or_else(|| EvalError::SchemaMismatch(format!("species {s:?} missing from the reference")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Alignment { species, traits })
}

fn cell_counts(pred: &Cell, reference: &Cell, value_map: &[usize]) -> Counts {
    let mut c = Counts::default();
    for (pi, &ri) in value_map.iter().enumerate() {
        match (pred.bit(pi), reference.bit(ri)) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => {}
        }
    }
    c
}

/// Per-trait figures, in the prediction's trait order.
pub fn per_trait_scores(
    pred: &SpeciesTraitMatrix,
    reference: &SpeciesTraitMatrix,
) -> Result<Vec<TraitScore>, EvalError> {
    let a = align(pred, reference)?;
    let n_species = pred.species().len();
    Ok(pred
        .schema()
        .traits()
        .iter()
        .enumerate()
        .map(|(ti, t)| {
            let (rti, values) = &a.traits[ti];
            let mut counts = Counts::default();
            let mut covered = 0;
            let mut unverifiable = 0;
            for (si, &rsi) in a.species.iter().enumerate() {
                let p = pred.cell(si, ti);
                if p.is_na() {
                    continue;
                }
                covered += 1;
                let r = reference.cell(rsi, *rti);
                if r.is_na() {
                    unverifiable += 1;
                    continue;
                }
                counts.add(cell_counts(p, r, values));
            }
            let m = counts.metrics();
            TraitScore {
                trait_name: t.name().to_string(),
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                coverage: if n_species == 0 {
                    0.0
                } else {
                    covered as f64 / n_species as f64
                },
                counts,
                unverifiable,
            }
        })
        .collect())
}

/// Compares a predicted matrix with a curated one.
///
/// Only cells covered in `pred` and annotated in `reference` are scored;
/// coverage is taken over every cell of `pred`.
pub fn score_matrix(pred: &SpeciesTraitMatrix, reference: &SpeciesTraitMatrix) -> Result<EvalReport, EvalError> {
    let per_trait = per_trait_scores(pred, reference)?;
    let mut counts = Counts::default();
    let mut unverifiable = 0;
    for t in &per_trait {
        counts.add(t.counts);
        unverifiable += t.unverifiable;
    }
    let micro = counts.metrics();
    let scored: Vec<&TraitScore> = per_trait.iter().filter(|t| t.counts != Counts::default()).collect();
    let mean = |f: fn(&TraitScore) -> f64| {
        if scored.is_empty() {
            0.0
        } else {
            scored.iter().map(|t| f(t)).sum::<f64>() / scored.len() as f64
        }
    };
    Ok(EvalReport {
        precision: micro.precision,
        recall: micro.recall,
        f1: micro.f1,
        coverage: pred.coverage(),
        counts,
        unverifiable,
        macro_precision: mean(|t| t.precision),
        macro_recall: mean(|t| t.recall),
        macro_f1: mean(|t| t.f1),
        per_trait,
    })
}
