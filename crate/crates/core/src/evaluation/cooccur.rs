use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::matrix::SpeciesTraitMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CooccurrenceKind {
    AnnotationAnnotation,
    /// Rows are reference values, columns predicted values.
    AnnotationPrediction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CooccurrenceMatrix {
    pub trait_name: String,
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub kind: CooccurrenceKind,
}

impl CooccurrenceMatrix {
    /// CSV with the value labels as header row and first column.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let corner = match self.kind {
            CooccurrenceKind::AnnotationAnnotation => "annotation\\annotation",
            CooccurrenceKind::AnnotationPrediction => "annotation\\prediction",
        };
        let mut header = vec![corner.to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header).unwrap();
        for (label, row) in self.labels.iter().zip(&self.counts) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(u64::to_string));
            w.write_record(&rec).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    /// Heatmap with one shaded square per count, darker for larger counts.
    pub fn to_svg(&self) -> String {
        let n = self.labels.len();
        let cell = 36;
        let margin = 8 * self.labels.iter().map(|l| l.chars().count()).max().unwrap_or(0).max(4) + 10;
        let size = margin + cell * n + 10;
        let max = self.counts.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, "<title>{}</title>", xml_escape(&self.trait_name));
        for (i, label) in self.labels.iter().enumerate() {
            let y = margin + i * cell + cell / 2 + 4;
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{y}" text-anchor="end">{}</text>"#,
                margin - 4,
                xml_escape(label)
            );
            let x = margin + i * cell + cell / 2;
            let _ = writeln!(
                s,
                r#"<text x="{x}" y="{}" text-anchor="start" transform="rotate(-90 {x} {})">{}</text>"#,
                margin - 4,
                margin - 4,
                xml_escape(label)
            );
        }
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                let shade = 255 - (215.0 * c as f64 / max).round() as u8;
                let (x, y) = (margin + j * cell, margin + i * cell);
                let _ = writeln!(
                    s,
                    r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="rgb({shade},{shade},255)" stroke="white"/>"#
                );
                let _ = writeln!(
                    s,
                    r#"<text x="{}" y="{}" text-anchor="middle">{c}</text>"#,
                    x + cell / 2,
                    y + cell / 2 + 4
                );
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// `C[i][j]` = number of species with values `i` and `j` both set. NA cells are skipped.
pub fn cooccurrence(matrix: &SpeciesTraitMatrix, trait_name: &str) -> Result<CooccurrenceMatrix, EvalError> {
    let ti = matrix
        .schema()
        .trait_index(trait_name)
        .ok_or_else(|| EvalError::UnknownTrait(trait_name.to_string()))?;
    let t = &matrix.schema().traits()[ti];
    let n = t.values().len();
    let mut counts = vec![vec![0u64; n]; n];
    for si in 0..matrix.species().len() {
        let ones = matrix.cell(si, ti).ones();
        for &i in &ones {
            for &j in &ones {
                counts[i][j] += 1;
            }
        }
    }
    Ok(CooccurrenceMatrix {
        trait_name: t.name().to_string(),
        labels: t.values().to_vec(),
        counts,
        kind: CooccurrenceKind::AnnotationAnnotation,
    })
}

/// `X[i][j]` = number of species with reference value `i` and predicted value `j` set.
/// Species are matched by name; a species NA on either side is skipped.
pub fn cross_cooccurrence(
    reference: &SpeciesTraitMatrix,
    pred: &SpeciesTraitMatrix,
    trait_name: &str,
) -> Result<CooccurrenceMatrix, EvalError> {
    let rti = reference
        .schema()
        .trait_index(trait_name)
        .ok_or_else(|| EvalError::UnknownTrait(trait_name.to_string()))?;
    let pti = pred
        .schema()
        .trait_index(trait_name)
        .ok_or_else(|| EvalError::UnknownTrait(trait_name.to_string()))?;
    let rt = &reference.schema().traits()[rti];
    let pt = &pred.schema().traits()[pti];
    // predicted value positions expressed in the reference's value order
    let to_ref: Vec<usize> = pt
        .values()
        .iter()
        .map(|v| {
            rt.value_index(v).ok_or_else(|| {
                EvalError::SchemaMismatch(format!("value {v:?} of {trait_name:?} missing from the reference"))
            })
        })
        .collect::<Result<_, _>>()?;
    if to_ref.len() != rt.values().len() {
        return Err(EvalError::SchemaMismatch(format!(
            "trait {trait_name:?} has different value lists"
        )));
    }
    let n = rt.values().len();
    let mut counts = vec![vec![0u64; n]; n];
    for (rsi, name) in reference.species().iter().enumerate() {
        let Some(psi) = pred.species_index(name) else { continue };
        let r = reference.cell(rsi, rti).ones();
        let p: Vec<usize> = pred.cell(psi, pti).ones().into_iter().map(|j| to_ref[j]).collect();
        for &i in &r {
            for &j in &p {
                counts[i][j] += 1;
            }
        }
    }
    Ok(CooccurrenceMatrix {
        trait_name: rt.name().to_string(),
        labels: rt.values().to_vec(),
        counts,
        kind: CooccurrenceKind::AnnotationPrediction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::MatrixBuilder;
    use crate::schema::TraitSchema;

    fn schema() -> TraitSchema {
        TraitSchema::new(vec![("Leaf position", vec!["alternate", "opposite", "whorls of 3"])]).unwrap()
    }

    fn matrix(rows: &[Vec<bool>]) -> SpeciesTraitMatrix {
        let names: Vec<String> = (0..rows.len()).map(|i| format!("G s{i}")).collect();
        let mut b = MatrixBuilder::with_species(schema(), &names).unwrap();
        for (i, r) in rows.iter().enumerate() {
            b.set_bits(i, 0, r.clone());
        }
        b.build()
    }

    #[test]
    fn within_annotation_counts() {
        let m = matrix(&[vec![true, true, false]]);
        let c = cooccurrence(&m, "Leaf position").unwrap();
        assert_eq!(c.counts, [vec![1, 1, 0], vec![1, 1, 0], vec![0, 0, 0]]);
    }

    #[test]
    fn opposite_for_whorled_confusion() {
        let reference = matrix(&[vec![false, true, true]]);
        let pred = matrix(&[vec![false, true, false]]);
        let x = cross_cooccurrence(&reference, &pred, "Leaf position").unwrap();
        assert_eq!(x.counts[1][1], 1);
        assert_eq!(x.counts[2][1], 1);
        assert_eq!(x.counts.iter().flatten().sum::<u64>(), 2);
        let same = cross_cooccurrence(&reference, &reference, "Leaf position").unwrap();
        assert_eq!(same.counts, cooccurrence(&reference, "Leaf position").unwrap().counts);
    }

    #[test]
    fn renderings() {
        let c = cooccurrence(&matrix(&[vec![true, false, true]]), "Leaf position").unwrap();
        let csv = c.to_csv();
        assert!(csv.starts_with("annotation\\annotation,alternate,opposite,whorls of 3\n"));
        assert!(csv.contains("\nalternate,1,0,1\n"));
        let svg = c.to_svg();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<rect").count(), 9);
        assert!(matches!(
            cooccurrence(&c_matrix(), "Nope"),
            Err(EvalError::UnknownTrait(_))
        ));
    }

    fn c_matrix() -> SpeciesTraitMatrix {
        matrix(&[vec![true, false, false]])
    }
}
