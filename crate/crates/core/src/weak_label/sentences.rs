//! Rule-based sentence splitting tuned for botanical descriptions.

use std::collections::HashSet;

/// Abbreviations that never end a sentence. Compared case-insensitively, without the dot.
pub const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "var", "subsp", "ssp", "cf", "ca", "syn", "mm", "cm", "dm", "sp", "spp", "e.g", "i.e", "approx", "fig", "al", "vs",
    "st", "mt", "no",
];

const TERMINATORS: [char; 4] = ['.', '?', '!', ';'];
const CLOSERS: [char; 6] = [')', ']', '"', '\'', '\u{201d}', '\u{2019}'];

/// Sentence splitter configured with an abbreviation list.
#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: HashSet<String>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        Self::new(DEFAULT_ABBREVIATIONS.iter().copied())
    }
}

impl SentenceSplitter {
    pub fn new<I, S>(abbreviations: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            abbreviations: abbreviations
                .into_iter()
                .map(|a| a.as_ref().trim_end_matches('.').to_lowercase())
                .collect(),
        }
    }

    /// Splits at `.`, `?`, `!` or `;` followed by whitespace and an uppercase letter or digit.
    ///
    /// Terminators stay with their sentence. Known abbreviations and single
    /// capital initials (as in author citations) do not end a sentence.
    pub fn split(&self, text: &str) -> Vec<String> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut out = Vec::new();
        let mut start = 0usize;
        let mut i = 0usize;
        while i < chars.len() {
            let (pos, c) = chars[i];
            if TERMINATORS.contains(&c) {
                // absorb repeated terminators and closing brackets/quotes
                let mut j = i + 1;
                while j < chars.len() && (TERMINATORS.contains(&chars[j].1) || CLOSERS.contains(&chars[j].1)) {
                    j += 1;
                }
                let mut k = j;
                while k < chars.len() && chars[k].1.is_whitespace() {
                    k += 1;
                }
                let boundary = k > j
                    && k < chars.len()
                    && (chars[k].1.is_uppercase() || chars[k].1.is_ascii_digit())
                    && !(c == '.' && self.is_abbreviation(&text[start..pos]));
                if boundary {
                    let end = if j < chars.len() { chars[j].0 } else { text.len() };
                    push_trimmed(&mut out, &text[start..end]);
                    start = chars[k].0;
                    i = k;
                    continue;
                }
                i = j;
                continue;
            }
            i += 1;
        }
        push_trimmed(&mut out, &text[start..]);
        out
    }

    fn is_abbreviation(&self, before_dot: &str) -> bool {
        let word = before_dot
            .rsplit(|c: char| c.is_whitespace() || c == '(' || c == '[')
            .next()
            .unwrap_or("");
        if word.is_empty() {
            return false;
        }
        let mut chars = word.chars();
        if let (Some(first), None) = (chars.next(), chars.next()) {
            if first.is_uppercase() {
                return true;
            }
        }
        self.abbreviations.contains(&word.to_lowercase())
    }
}

fn push_trimmed(out: &mut Vec<String>, s: &str) {
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

/// Splits with the default botanical abbreviation list.
pub fn split_sentences(text: &str) -> Vec<String> {
    SentenceSplitter::default().split(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::collapse_whitespace;

    #[test]
    fn two_sentences() {
        let s = split_sentences("The leaves are alternate. The fruit are purple-black to orange-yellow berries.");
        assert_eq!(
            s,
            [
                "The leaves are alternate.",
                "The fruit are purple-black to orange-yellow berries."
            ]
        );
    }

    #[test]
    fn empty_input() {
        assert!(split_sentences("").is_empty());
        assert!(split_sentences("  \n ").is_empty());
    }

    #[test]
    fn decimals_and_ranges_do_not_split() {
        assert_eq!(split_sentences("Pedicels 0.5-2 mm long, minute bracteoles.").len(), 1);
        assert_eq!(split_sentences("Petals 1.5 cm. Sepals green.").len(), 1);
    }

    #[test]
    fn abbreviations_and_initials() {
        let s = split_sentences("Ficus sur var. Glabra grows here. It was described by A. Richard in 1847.");
        assert_eq!(s.len(), 2, "{s:?}");
        let s = split_sentences("Stipules ca. 5 mm long. Leaves opposite.");
        assert_eq!(s.len(), 2, "{s:?}");
    }

    #[test]
    fn other_terminators() {
        let s = split_sentences("Is it a tree? Yes; It is! 3 seeds per berry.");
        assert_eq!(s, ["Is it a tree?", "Yes;", "It is!", "3 seeds per berry."]);
    }

    #[test]
    fn lowercase_after_dot_is_not_a_boundary() {
        assert_eq!(split_sentences("Leaves ovate. often lobed.").len(), 1);
    }

    #[test]
    fn closers_stay_attached() {
        let s = split_sentences("Fruit a berry (edible.) Seeds 3.");
        assert_eq!(s, ["Fruit a berry (edible.)", "Seeds 3."]);
    }

    #[test]
    fn concatenation_reproduces_input() {
        let text = "Albizia coriaria is a deciduous tree 6-36 m tall.\nThe flowers are subsessile; \
                    Leaves are alternate!  It is heavily branched.";
        let joined = split_sentences(text).join(" ");
        assert_eq!(collapse_whitespace(&joined), collapse_whitespace(text));
    }
}
