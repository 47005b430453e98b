//! String normalization shared by every stage.

use unicode_normalization::UnicodeNormalization;

/// Canonical key for comparing trait names and values: NFC, trimmed, case-folded.
pub fn match_key(s: &str) -> String {
    s.nfc().collect::<String>().trim().to_lowercase()
}

/// Collapse runs of whitespace into single spaces and trim the ends.
pub fn collapse_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn match_key_folds_case_and_composes() {
        assert_eq!(match_key("  Opposite "), "opposite");
        // "e" + combining acute vs precomposed "é"
        assert_eq!(match_key("Cafe\u{301}"), match_key("Café"));
    }

    #[test]
    fn collapse() {
        assert_eq!(collapse_whitespace("  a \n\t b  c "), "a b c");
        assert_eq!(collapse_whitespace("   "), "");
    }
}
