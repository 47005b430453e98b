/// Placeholder emitted for purely numeric tokens.
pub const NUM_TOKEN: &str = "<num>";

/// A token with its byte range in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Lowercased alphanumeric runs with byte offsets; all-digit runs become [`NUM_TOKEN`].
pub fn tokenize_with_offsets(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            out.push(make_token(text, s, i));
        }
    }
    if let Some(s) = start {
        out.push(make_token(text, s, text.len()));
    }
    out
}

fn make_token(text: &str, start: usize, end: usize) -> Token {
    let raw = &text[start..end];
    let t = if raw.chars().all(|c| c.is_numeric()) {
        NUM_TOKEN.to_string()
    } else {
        raw.to_lowercase()
    };
    Token { text: t, start, end }
}

/// Lowercased word tokens with numbers mapped to [`NUM_TOKEN`].
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with_offsets(text).into_iter().map(|t| t.text).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words() {
        assert_eq!(tokenize("Leaves are alternate"), ["leaves", "are", "alternate"]);
    }

    #[test]
    fn numbers_and_ranges() {
        assert_eq!(tokenize("6-36 m tall"), [NUM_TOKEN, NUM_TOKEN, "m", "tall"]);
        assert_eq!(tokenize("0.5-2 mm"), [NUM_TOKEN, NUM_TOKEN, NUM_TOKEN, "mm"]);
    }

    #[test]
    fn empty() {
        assert!(tokenize("").is_empty());
        assert!(tokenize(" ,;. ").is_empty());
    }

    #[test]
    fn offsets_slice_back_to_source() {
        let text = "Fruit purple-black, 5 mm.";
        for t in tokenize_with_offsets(text) {
            let again = tokenize(&text[t.start..t.end]);
            assert_eq!(again, vec![t.text]);
        }
    }
}
