//! Score a predicted matrix against a reference and print co-occurrence counts.
//!
//! Usage: cargo run --example evaluate -- [predicted.csv reference.csv]

use std::path::{Path, PathBuf};

use florafill::evaluation::{cooccurrence, cross_cooccurrence, report_text, score_matrix};
use florafill::{Cell, MatrixBuilder, SpeciesTraitMatrix};

fn main() {
    let args: Vec<PathBuf> = std::env::args().skip(1).map(Into::into).collect();
    let planted = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo/planted_matrix.csv");
    let (reference, _) = SpeciesTraitMatrix::read_csv(args.get(1).unwrap_or(&planted)).expect("reference loads");
    let pred = match args.first() {
        Some(p) => SpeciesTraitMatrix::read_csv(p).expect("prediction loads").0,
        // without arguments, score a copy of the reference with one cell flipped
        None => {
            let mut b = MatrixBuilder::with_species(reference.schema().clone(), reference.species()).unwrap();
            for si in 0..reference.species().len() {
                for (ti, cell) in reference.row(si).iter().enumerate() {
                    b.set_cell(si, ti, cell.clone());
                }
            }
            let flipped = reference.cell(0, 0).bits().unwrap_or(&[]).iter().map(|b| !b).collect();
            b.set_cell(0, 0, Cell::from_bits(flipped));
            b.build()
        }
    };

    let report = score_matrix(&pred, &reference).expect("matrices share a schema");
    print!("{}", report_text("prediction", &report));
    let first = reference.schema().traits()[0].name().to_string();
    for m in [
        cooccurrence(&reference, &first),
        cross_cooccurrence(&reference, &pred, &first),
    ] {
        print!("{}", m.expect("trait exists").to_csv());
    }
}
