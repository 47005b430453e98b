//! Binary species × trait × value matrix with per-cell NA.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{CoreError, Result};
use crate::schema::TraitSchema;
use crate::text::match_key;

/// One species–trait entry.
///
/// A cell with no bit set is always stored as [`Cell::Na`]: absence of
/// evidence for every allowed value is the NA state itself.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Cell {
    Na,
    Bits(Vec<bool>),
}

impl Cell {
    /// Normalizing constructor: an all-zero vector becomes NA.
    pub fn from_bits(bits: Vec<bool>) -> Cell {
        if bits.iter().any(|&b| b) {
            Cell::Bits(bits)
        } else {
            Cell::Na
        }
    }

    pub fn is_na(&self) -> bool {
        matches!(self, Cell::Na)
    }

    /// Covered cells are the non-NA ones; by construction they hold at least one set bit.
    pub fn is_covered(&self) -> bool {
        !self.is_na()
    }

    pub fn bits(&self) -> Option<&[bool]> {
        match self {
            Cell::Na => None,
            Cell::Bits(b) => Some(b),
        }
    }

    pub fn bit(&self, value: usize) -> bool {
        self.bits().map(|b| b[value]).unwrap_or(false)
    }

    /// Indices of the set bits (empty for NA).
    pub fn ones(&self) -> Vec<usize> {
        self.bits()
            .map(|b| b.iter().enumerate().filter(|(_, &x)| x).map(|(i, _)| i).collect())
            .unwrap_or_default()
    }
}

/// Species annotations as (trait, chosen values) lists.
pub type Annotation = (String, Vec<(String, Vec<String>)>);

/// Presence/absence cube over species × trait × value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeciesTraitMatrix {
    species: Vec<String>,
    schema: TraitSchema,
    cells: Vec<Cell>,
}

impl SpeciesTraitMatrix {
    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn schema(&self) -> &TraitSchema {
        &self.schema
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    pub fn cell(&self, species: usize, trait_idx: usize) -> &Cell {
        &self.cells[species * self.schema.len() + trait_idx]
    }

    /// Row of cells for one species, in schema order.
    pub fn row(&self, species: usize) -> &[Cell] {
        let w = self.schema.len();
        &self.cells[species * w..(species + 1) * w]
    }

    pub fn cell_by_name(&self, species: &str, trait_name: &str) -> Option<&Cell> {
        let s = self.species_index(species)?;
        let t = self.schema.trait_index(trait_name)?;
        Some(self.cell(s, t))
    }

    /// Chosen values per species and trait; NA traits are omitted.
    pub fn annotations(&self) -> Vec<Annotation> {
        self.species
            .iter()
            .enumerate()
            .map(|(si, name)| {
                let traits = self
                    .schema
                    .traits()
                    .iter()
                    .enumerate()
                    .filter_map(|(ti, t)| {
                        let ones = self.cell(si, ti).ones();
                        (!ones.is_empty()).then(|| {
                            (
                                t.name().to_string(),
                                ones.into_iter().map(|i| t.values()[i].clone()).collect(),
                            )
                        })
                    })
                    .collect();
                (name.clone(), traits)
            })
            .collect()
    }

    /// Number of covered cells.
    pub fn covered_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.is_covered()).count()
    }

    pub fn total_cells(&self) -> usize {
        self.cells.len()
    }

    /// Fraction of species–trait cells with at least one value set.
    pub fn coverage(&self) -> f64 {
        coverage(self)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<(Self, Vec<IngestWarning>)> {
        Self::from_csv_reader(File::open(path)?)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_csv_writer(File::create(path)?)
    }

    /// Serializes to the `species,<trait>::<value>,...` layout.
    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["species".to_string()];
        for t in self.schema.traits() {
            for v in t.values() {
                header.push(format!("{}::{}", t.name(), v));
            }
        }
        w.write_record(&header)?;
        for (si, name) in self.species.iter().enumerate() {
            let mut rec = vec![name.clone()];
            for (ti, t) in self.schema.traits().iter().enumerate() {
                match self.cell(si, ti) {
                    Cell::Na => rec.extend(std::iter::repeat_n("NA".to_string(), t.values().len())),
                    Cell::Bits(bits) => rec.extend(bits.iter().map(|&b| if b { "1" } else { "0" }.to_string())),
                }
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.to_csv_writer(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("utf-8 csv")
    }

    /// Parses the CSV layout. The schema is recovered from the header.
    ///
    /// Non-NA cells whose bits are all zero are normalized to NA and reported
    /// as warnings so that reference data can be audited.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<(Self, Vec<IngestWarning>)> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = r.headers()?.clone();
        let mut iter = header.iter();
        match iter.next() {
            Some(first) if first.trim() == "species" => {}
            _ => {
                return Err(CoreError::MalformedMatrix(
                    "first header column must be `species`".into(),
                ))
            }
        }
        let mut traits: Vec<(String, Vec<String>)> = Vec::new();
        for col in iter {
            let (t, v) = col
                .split_once("::")
                .ok_or_else(|| CoreError::MalformedMatrix(format!("column {col:?} is not `<trait>::<value>`")))?;
            match traits.last_mut() {
                Some((name, values)) if name == t => values.push(v.to_string()),
                _ => {
                    if traits.iter().any(|(n, _)| n == t) {
                        return Err(CoreError::MalformedMatrix(format!(
                            "columns of trait {t:?} are not contiguous"
                        )));
                    }
                    traits.push((t.to_string(), vec![v.to_string()]));
                }
            }
        }
        let schema = TraitSchema::new(traits)?;
        let mut builder = MatrixBuilder::new(schema.clone());
        let mut warnings = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != schema.width() + 1 {
                return Err(CoreError::MalformedMatrix(format!(
                    "row has {} fields, expected {}",
                    rec.len(),
                    schema.width() + 1
                )));
            }
            let name = rec[0].to_string();
            let si = builder.add_species(&name)?;
            let mut col = 1;
            for (ti, t) in schema.traits().iter().enumerate() {
                let fields: Vec<&str> = (0..t.values().len()).map(|k| rec[col + k].trim()).collect();
                col += t.values().len();
                let na = fields.iter().filter(|f| f.eq_ignore_ascii_case("NA")).count();
                if na == fields.len() {
                    continue;
                }
                if na != 0 {
                    return Err(CoreError::MalformedMatrix(format!(
                        "species {name:?}, trait {:?}: mixed NA and binary cells",
                        t.name()
                    )));
                }
                let bits = fields
                    .iter()
                    .map(|f| match *f {
                        "0" => Ok(false),
                        "1" => Ok(true),
                        other => Err(CoreError::MalformedMatrix(format!(
                            "species {name:?}, trait {:?}: cell {other:?} is not 0, 1 or NA",
                            t.name()
                        ))),
                    })
                    .collect::<Result<Vec<bool>>>()?;
                if !bits.iter().any(|&b| b) {
                    warnings.push(IngestWarning::AllZeroCell {
                        species: name.clone(),
                        trait_name: t.name().to_string(),
                    });
                }
                builder.set_bits(si, ti, bits);
            }
        }
        Ok((builder.build(), warnings))
    }
}

/// Non-fatal findings while reading a matrix file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IngestWarning {
    /// A cell written as all zeros; it was read as NA.
    AllZeroCell { species: String, trait_name: String },
}

/// Incremental construction of a [`SpeciesTraitMatrix`]. Cells start as NA.
#[derive(Debug, Clone)]
pub struct MatrixBuilder {
    species: Vec<String>,
    index: HashMap<String, usize>,
    schema: TraitSchema,
    cells: Vec<Cell>,
}

impl MatrixBuilder {
    pub fn new(schema: TraitSchema) -> Self {
        Self {
            species: Vec::new(),
            index: HashMap::new(),
            schema,
            cells: Vec::new(),
        }
    }

    pub fn with_species<I, S>(schema: TraitSchema, species: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut b = Self::new(schema);
        for s in species {
            b.add_species(s.as_ref())?;
        }
        Ok(b)
    }

    pub fn schema(&self) -> &TraitSchema {
        &self.schema
    }

    /// Appends a species with an all-NA row and returns its index.
    pub fn add_species(&mut self, name: &str) -> Result<usize> {
        if self.index.contains_key(name) {
            return Err(CoreError::DuplicateSpecies(name.to_string()));
        }
        let idx = self.species.len();
        self.species.push(name.to_string());
        self.index.insert(name.to_string(), idx);
        self.cells.extend(std::iter::repeat_n(Cell::Na, self.schema.len()));
        Ok(idx)
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Sets a cell from a bit vector; all-zero vectors become NA.
    ///
    /// Panics if `bits` does not have one entry per allowed value.
    pub fn set_bits(&mut self, species: usize, trait_idx: usize, bits: Vec<bool>) {
        let expected = self.schema.traits()[trait_idx].values().len();
        assert_eq!(
            bits.len(),
            expected,
            "bit vector length must match the trait's value count"
        );
        let w = self.schema.len();
        self.cells[species * w + trait_idx] = Cell::from_bits(bits);
    }

    pub fn set_cell(&mut self, species: usize, trait_idx: usize, cell: Cell) {
        match cell {
            Cell::Na => {
                let w = self.schema.len();
                self.cells[species * w + trait_idx] = Cell::Na;
            }
            Cell::Bits(bits) => self.set_bits(species, trait_idx, bits),
        }
    }

    /// ORs a single value into a cell.
    pub fn set_value(&mut self, species: usize, trait_idx: usize, value_idx: usize) {
        let w = self.schema.len();
        let n = self.schema.traits()[trait_idx].values().len();
        let cell = &mut self.cells[species * w + trait_idx];
        let mut bits = cell.bits().map(<[bool]>::to_vec).unwrap_or_else(|| vec![false; n]);
        bits[value_idx] = true;
        *cell = Cell::Bits(bits);
    }

    pub fn build(self) -> SpeciesTraitMatrix {
        SpeciesTraitMatrix {
            species: self.species,
            schema: self.schema,
            cells: self.cells,
        }
    }
}

/// Encodes annotations as presence bits over each trait's allowed values.
///
/// Species appear in annotation order. A (species, trait) pair without any
/// chosen value is NA. Values are matched after normalization.
pub fn binary_encode(annotations: &[Annotation], schema: &TraitSchema) -> Result<SpeciesTraitMatrix> {
    let mut b = MatrixBuilder::new(schema.clone());
    for (species, traits) in annotations {
        let si = b.add_species(species)?;
        let mut touched = HashSet::new();
        for (trait_name, values) in traits {
            let ti = schema.trait_index(trait_name).ok_or_else(|| CoreError::UnknownTrait {
                species: species.clone(),
                trait_name: trait_name.clone(),
            })?;
            touched.insert(ti);
            for v in values {
                let vi = schema.traits()[ti]
                    .value_index(v)
                    .ok_or_else(|| CoreError::UnknownValue {
                        species: species.clone(),
                        trait_name: trait_name.clone(),
                        value: v.clone(),
                    })?;
                b.set_value(si, ti, vi);
            }
        }
    }
    Ok(b.build())
}

/// Proportion of species–trait cells with at least one value found. Empty matrices have coverage 0.
pub fn coverage(matrix: &SpeciesTraitMatrix) -> f64 {
    let total = matrix.total_cells();
    if total == 0 {
        return 0.0;
    }
    matrix.covered_cells() as f64 / total as f64
}

/// Reads a species list: one binomial per line, blank lines and `#` comments ignored.
pub fn read_species_list(path: impl AsRef<Path>) -> Result<Vec<String>> {
    parse_species_list(&std::fs::read_to_string(path)?)
}

pub fn parse_species_list(text: &str) -> Result<Vec<String>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen.insert(match_key(line)) {
            return Err(CoreError::MalformedSpeciesList(format!("duplicate species {line:?}")));
        }
        out.push(line.to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1_schema() -> TraitSchema {
        TraitSchema::new([
            ("Life form", vec!["Tree", "Liana"]),
            ("Phyllotaxis", vec!["Alternate", "Opposite"]),
        ])
        .unwrap()
    }

    fn ann(species: &str, traits: &[(&str, &[&str])]) -> Annotation {
        (
            species.to_string(),
            traits
                .iter()
                .map(|(t, vs)| (t.to_string(), vs.iter().map(|v| v.to_string()).collect()))
                .collect(),
        )
    }

    #[test]
    fn encodes_table1_rows() {
        let m = binary_encode(
            &[
                ann(
                    "Avicennia germinans",
                    &[("Life form", &["Tree"]), ("Phyllotaxis", &["Opposite"])],
                ),
                ann(
                    "Metopium brownei",
                    &[("Life form", &["Tree"]), ("Phyllotaxis", &["Alternate"])],
                ),
                ann(
                    "Cynophalla flexuosa",
                    &[("Life form", &["Liana"]), ("Phyllotaxis", &["Alternate"])],
                ),
            ],
            &table1_schema(),
        )
        .unwrap();
        assert_eq!(m.cell(0, 0), &Cell::Bits(vec![true, false]));
        assert_eq!(m.cell(0, 1), &Cell::Bits(vec![false, true]));
        assert_eq!(m.cell(2, 0), &Cell::Bits(vec![false, true]));
        assert_eq!(m.coverage(), 1.0);
    }

    #[test]
    fn empty_annotation_is_na() {
        let schema = TraitSchema::new([
            ("Fruit type", vec!["Berry", "Drupe"]),
            ("Leaf position", vec!["alternate", "opposite"]),
        ])
        .unwrap();
        let m = binary_encode(
            &[ann(
                "X y",
                &[("Fruit type", &[]), ("Leaf position", &["alternate", "opposite"])],
            )],
            &schema,
        )
        .unwrap();
        assert!(m.cell(0, 0).is_na());
        // multi-label: both bits set
        assert_eq!(m.cell(0, 1), &Cell::Bits(vec![true, true]));
    }

    #[test]
    fn unknown_pairs_are_named() {
        let err = binary_encode(&[ann("A b", &[("Bark", &["Smooth"])])], &table1_schema()).unwrap_err();
        assert!(matches!(err, CoreError::UnknownTrait { ref trait_name, .. } if trait_name == "Bark"));
        let err = binary_encode(&[ann("A b", &[("Life form", &["Shrub"])])], &table1_schema()).unwrap_err();
        assert!(matches!(err, CoreError::UnknownValue { ref value, .. } if value == "Shrub"));
    }

    #[test]
    fn coverage_counts() {
        let schema = table1_schema();
        let all_na = MatrixBuilder::with_species(schema.clone(), ["A a", "B b"])
            .unwrap()
            .build();
        assert_eq!(coverage(&all_na), 0.0);

        let mut b = MatrixBuilder::with_species(schema, ["A a", "B b"]).unwrap();
        b.set_value(0, 0, 0);
        b.set_value(0, 1, 1);
        b.set_value(1, 0, 1);
        assert_eq!(coverage(&b.build()), 0.75);
    }

    #[test]
    fn all_zero_bits_normalize_to_na() {
        assert_eq!(Cell::from_bits(vec![false, false]), Cell::Na);
    }

    #[test]
    fn csv_layout_and_round_trip() {
        let mut b = MatrixBuilder::with_species(table1_schema(), ["Avicennia germinans", "Metopium brownei"]).unwrap();
        b.set_value(0, 0, 0);
        b.set_value(0, 1, 1);
        let m = b.build();
        let text = m.to_csv_string();
        assert_eq!(
            text,
            "species,Life form::Tree,Life form::Liana,Phyllotaxis::Alternate,Phyllotaxis::Opposite\n\
             Avicennia germinans,1,0,0,1\n\
             Metopium brownei,NA,NA,NA,NA\n"
        );
        let (back, warnings) = SpeciesTraitMatrix::from_csv_reader(text.as_bytes()).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(back, m);
    }

    #[test]
    fn csv_all_zero_row_is_flagged() {
        let text = "species,A::x,A::y\nS s,0,0\n";
        let (m, warnings) = SpeciesTraitMatrix::from_csv_reader(text.as_bytes()).unwrap();
        assert!(m.cell(0, 0).is_na());
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn csv_rejects_mixed_na() {
        let text = "species,A::x,A::y\nS s,NA,1\n";
        assert!(SpeciesTraitMatrix::from_csv_reader(text.as_bytes()).is_err());
    }

    #[test]
    fn species_list_parsing() {
        let list = parse_species_list("Hedera helix\n\n# comment\nAlbizia coriaria\n").unwrap();
        assert_eq!(list, vec!["Hedera helix", "Albizia coriaria"]);
        assert!(parse_species_list("A b\nA b\n").is_err());
    }
}
