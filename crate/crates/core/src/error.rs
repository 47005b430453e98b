use std::io;

use thiserror::Error;

/// Errors raised by the shared domain types: schemas, matrices and their files.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("trait name must not be empty")]
    EmptyTraitName,
    #[error("duplicate trait name {0:?}")]
    DuplicateTrait(String),
    #[error("trait {trait_name:?} has an empty value string")]
    EmptyValue { trait_name: String },
    #[error("trait {trait_name:?} lists value {value:?} more than once")]
    DuplicateValue { trait_name: String, value: String },
    #[error("trait {trait_name:?} has {count} allowed values, at least 2 are required")]
    TooFewValues { trait_name: String, count: usize },
    #[error("species {species:?}: unknown trait {trait_name:?}")]
    UnknownTrait { species: String, trait_name: String },
    #[error("species {species:?}: trait {trait_name:?} has no value {value:?}")]
    UnknownValue {
        species: String,
        trait_name: String,
        value: String,
    },
    #[error("duplicate species {0:?}")]
    DuplicateSpecies(String),
    #[error("malformed matrix file: {0}")]
    MalformedMatrix(String),
    #[error("malformed species list: {0}")]
    MalformedSpeciesList(String),
    #[error("schema file: {0}")]
    SchemaJson(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
