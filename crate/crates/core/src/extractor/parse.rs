//! Lenient reader for model answers.
//!
//! Accepts the first `{...}` in the text with either quote style, tuples or
//! arrays for pairs, bare words, trailing commas and a truncated tail. Only
//! pairs naming a trait and value of the schema slice survive.

use serde::{Deserialize, Serialize};

use super::ExtractorError;
use crate::schema::TraitSchema;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraitEvidence {
    pub trait_name: String,
    /// Every allowed value of the trait, in schema order, with its evidence bit.
    pub values: Vec<(String, bool)>,
}

impl TraitEvidence {
    pub fn bits(&self) -> Vec<bool> {
        self.values.iter().map(|(_, b)| *b).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub evidence: Vec<TraitEvidence>,
    /// Dropped out-of-schema traits and values.
    pub hallucinations: usize,
    /// Entries whose shape or evidence bit could not be read.
    pub malformed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Loose {
    Obj(Vec<(String, Loose)>),
    List(Vec<Loose>),
    Str(String),
    Num(f64),
    Bool(bool),
    Null,
}

const MAX_DEPTH: usize = 64;

struct Reader {
    chars: Vec<char>,
    pos: usize,
}

impl Reader {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn value(&mut self, depth: usize) -> Loose {
        self.skip_ws();
        let Some(c) = self.peek() else { return Loose::Null };
        if depth > MAX_DEPTH {
            self.pos += 1;
            return Loose::Null;
        }
        match c {
            '{' => {
                self.pos += 1;
                self.object(depth + 1)
            }
            '[' | '(' => {
                self.pos += 1;
                self.list(depth + 1)
            }
            '"' | '\'' => {
                self.pos += 1;
                Loose::Str(self.string(c))
            }
            c if c == '-' || c == '+' || c.is_ascii_digit() => self.number(),
            c if c.is_alphabetic() || c == '_' => {
                let w = self.word();
                match w.to_ascii_lowercase().as_str() {
                    "true" => Loose::Bool(true),
                    "false" => Loose::Bool(false),
                    "null" | "none" => Loose::Null,
                    _ => Loose::Str(w),
                }
            }
            _ => {
                self.pos += 1;
                Loose::Null
            }
        }
    }

    fn object(&mut self, depth: usize) -> Loose {
        let mut pairs = Vec::new();
        loop {
            self.skip_ws();
            let start = self.pos;
            match self.peek() {
                None => break,
                Some('}') => {
                    self.pos += 1;
                    break;
                }
                Some(',') => {
                    self.pos += 1;
                    continue;
                }
                Some(q @ ('"' | '\'')) => {
                    self.pos += 1;
                    let key = self.string(q);
                    self.skip_ws();
                    if self.peek() == Some(':') {
                        self.pos += 1;
                        let v = self.value(depth);
                        pairs.push((key, v));
                    }
                }
                Some(c) if c.is_alphabetic() => {
                    let key = self.bare_key();
                    self.skip_ws();
                    if self.peek() == Some(':') {
                        self.pos += 1;
                        let v = self.value(depth);
                        pairs.push((key, v));
                    }
                }
                Some(_) => {
                    // junk between members: parse and discard one value
                    self.value(depth);
                }
            }
            if self.pos == start {
                self.pos += 1;
            }
        }
        Loose::Obj(pairs)
    }

    fn list(&mut self, depth: usize) -> Loose {
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            let start = self.pos;
            match self.peek() {
                None => break,
                Some(']' | ')') => {
                    self.pos += 1;
                    break;
                }
                Some(',') => self.pos += 1,
                Some('}') => break,
                Some(_) => items.push(self.value(depth)),
            }
            if self.pos == start {
                self.pos += 1;
            }
        }
        Loose::List(items)
    }

    fn string(&mut self, quote: char) -> String {
        let mut out = String::new();
        while let Some(c) = self.peek() {
            self.pos += 1;
            match c {
                c if c == quote => return out,
                '\\' => {
                    let Some(e) = self.peek() else { break };
                    self.pos += 1;
                    match e {
                        'n' => out.push('\n'),
                        't' => out.push('\t'),
                        'r' => out.push('\r'),
                        'u' => {
                            let hex: String = self.chars[self.pos..].iter().take(4).collect();
                            match u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32) {
                                Some(ch) if hex.len() == 4 => {
                                    out.push(ch);
                                    self.pos += 4;
                                }
                                _ => out.push('u'),
                            }
                        }
                        other => out.push(other),
                    }
                }
                c => out.push(c),
            }
        }
        out
    }

    fn number(&mut self) -> Loose {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_digit() || matches!(c, '-' | '+' | '.' | 'e' | 'E'))
        {
            self.pos += 1;
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        s.parse().map(Loose::Num).unwrap_or(Loose::Null)
    }

    fn word(&mut self) -> String {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn bare_key(&mut self) -> String {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c != ':' && c != ',' && c != '}' && c != '\n')
        {
            self.pos += 1;
        }
        self.chars[start..self.pos]
            .iter()
            .collect::<String>()
            .trim()
            .to_string()
    }
}

/// First `{`-delimited value in `raw`, or `None` if there is no opening brace.
pub(crate) fn first_object(raw: &str) -> Option<Vec<(String, Loose)>> {
    let start = raw.find('{')?;
    let mut r = Reader {
        chars: raw[start..].chars().collect(),
        pos: 0,
    };
    match r.value(0) {
        Loose::Obj(pairs) => Some(pairs),
        _ => None,
    }
}

fn as_bit(v: &Loose) -> Option<bool> {
    match v {
        Loose::Num(n) if *n == 1.0 => Some(true),
        Loose::Num(n) if *n == 0.0 => Some(false),
        Loose::Bool(b) => Some(*b),
        Loose::Str(s) => match s.trim().to_ascii_lowercase().as_str() {
            "1" | "true" | "yes" => Some(true),
            "0" | "false" | "no" => Some(false),
            _ => None,
        },
        _ => None,
    }
}

/// Flattens one trait's entry into (value, bit) candidates; `None` bits are malformed.
fn entries(v: &Loose) -> Vec<(Option<String>, Option<bool>)> {
    match v {
        Loose::List(items) => items
            .iter()
            .map(|item| match item {
                Loose::List(pair) if pair.len() == 2 => match &pair[0] {
                    Loose::Str(s) => (Some(s.clone()), as_bit(&pair[1])),
                    _ => (None, None),
                },
                Loose::Obj(kv) if kv.len() == 1 => (Some(kv[0].0.clone()), as_bit(&kv[0].1)),
                _ => (None, None),
            })
            .collect(),
        Loose::Obj(kv) => kv.iter().map(|(k, b)| (Some(k.clone()), as_bit(b))).collect(),
        _ => vec![(None, None)],
    }
}

/// Reads the model's answer against the schema slice.
///
/// In-schema values missing from the answer get evidence 0. Unknown traits and
/// values are dropped and counted in `hallucinations`.
pub fn parse_response(raw: &str, schema: &TraitSchema) -> Result<ParsedResponse, ExtractorError> {
    let pairs = first_object(raw).ok_or_else(|| ExtractorError::UnparseableResponse(snippet(raw)))?;
    let mut bits: Vec<Vec<bool>> = schema.traits().iter().map(|t| vec![false; t.values().len()]).collect();
    let mut hallucinations = 0;
    let mut malformed = 0;
    for (key, value) in &pairs {
        let Some(ti) = schema.trait_index(key) else {
            hallucinations += 1;
            continue;
        };
        let t = &schema.traits()[ti];
        for (name, bit) in entries(value) {
            let Some(name) = name else {
                malformed += 1;
                continue;
            };
            let Some(vi) = t.value_index(&name) else {
                hallucinations += 1;
                continue;
            };
            match bit {
                Some(b) => bits[ti][vi] |= b,
                None => malformed += 1,
            }
        }
    }
    if hallucinations > 0 {
        log::warn!("dropped {hallucinations} out-of-schema entries from a model answer");
    }
    let evidence = schema
        .traits()
        .iter()
        .zip(bits)
        .map(|(t, b)| TraitEvidence {
            trait_name: t.name().to_string(),
            values: t.values().iter().cloned().zip(b).collect(),
        })
        .collect();
    Ok(ParsedResponse {
        evidence,
        hallucinations,
        malformed,
    })
}

fn snippet(raw: &str) -> String {
    let s: String = raw.chars().take(80).collect();
    if s.len() < raw.len() {
        format!("{s}...")
    } else {
        s
    }
}

/// Writes evidence in the tuple notation models tend to answer with.
pub fn render_response(evidence: &[TraitEvidence]) -> String {
    let mut out = String::from("{\n");
    for (i, t) in evidence.iter().enumerate() {
        out.push_str(&serde_json::to_string(&t.trait_name).unwrap());
        out.push_str(": [\n");
        let rows: Vec<String> = t
            .values
            .iter()
            .map(|(v, b)| format!("({}, {})", serde_json::to_string(v).unwrap(), u8::from(*b)))
            .collect();
        out.push_str(&rows.join(",\n"));
        out.push(']');
        if i + 1 < evidence.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push('}');
    out
}
