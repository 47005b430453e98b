//! Visible-text extraction from HTML.
//!
//! A forgiving tag scanner, not a full parser: it tracks just enough state to
//! drop non-content elements and to keep block boundaries as line breaks.

use crate::text::collapse_whitespace;

/// Elements whose whole subtree is discarded.
const SKIPPED: &[&str] = &[
    "script", "style", "nav", "footer", "noscript", "template", "svg", "head", "iframe",
];

/// Elements whose contents are raw text up to the matching close tag.
const RAW_TEXT: &[&str] = &["script", "style", "textarea", "title"];

const BLOCKS: &[&str] = &[
    "address",
    "article",
    "aside",
    "blockquote",
    "br",
    "dd",
    "details",
    "div",
    "dl",
    "dt",
    "fieldset",
    "figcaption",
    "figure",
    "form",
    "h1",
    "h2",
    "h3",
    "h4",
    "h5",
    "h6",
    "header",
    "hr",
    "li",
    "main",
    "ol",
    "p",
    "pre",
    "section",
    "summary",
    "table",
    "tbody",
    "td",
    "th",
    "thead",
    "tr",
    "ul",
    "body",
    "html",
    "caption",
];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractedHtml {
    pub title: String,
    /// Text of h1–h3 elements in document order.
    pub headings: Vec<String>,
    /// Visible text, one block per line, whitespace collapsed within lines.
    pub body_text: String,
}

impl ExtractedHtml {
    /// Title followed by the h1–h3 headings, one per line.
    pub fn header_text(&self) -> String {
        std::iter::once(self.title.as_str())
            .chain(self.headings.iter().map(String::as_str))
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

struct Tag {
    name: String,
    closing: bool,
    self_closing: bool,
    end: usize,
}

/// Parses the tag starting at `start` (which points at `<`).
fn parse_tag(html: &str, start: usize) -> Option<Tag> {
    let rest = &html[start + 1..];
    let (closing, body) = match rest.strip_prefix('/') {
        Some(b) => (true, b),
        None => (false, rest),
    };
    if !body.starts_with(|c: char| c.is_ascii_alphabetic()) {
        return None;
    }
    // find the closing '>' outside quoted attribute values
    let mut quote = None;
    let mut end = None;
    for (i, c) in rest.char_indices() {
        match (quote, c) {
            (Some(q), c) if c == q => quote = None,
            (Some(_), _) => {}
            (None, '"') | (None, '\'') => quote = Some(c),
            (None, '>') => {
                end = Some(start + 1 + i + 1);
                break;
            }
            _ => {}
        }
    }
    let end = end?;
    let inner = &html[start + 1..end - 1];
    let name: String = body
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric() || *c == '-' || *c == ':')
        .collect::<String>()
        .to_ascii_lowercase();
    Some(Tag {
        self_closing: inner.trim_end().ends_with('/'),
        name,
        closing,
        end,
    })
}

fn find_ci(hay: &str, needle: &str, from: usize) -> Option<usize> {
    let lower = hay[from..].to_ascii_lowercase();
    lower.find(needle).map(|i| i + from)
}

pub fn extract(html: &str) -> ExtractedHtml {
    let mut out = ExtractedHtml::default();
    let mut lines: Vec<String> = Vec::new();
    let mut current = String::new();
    let mut heading: Option<String> = None;
    let mut skip_stack: Vec<String> = Vec::new();
    let mut i = 0;

    let flush = |current: &mut String, lines: &mut Vec<String>| {
        let line = collapse_whitespace(current);
        if !line.is_empty() {
            lines.push(line);
        }
        current.clear();
    };

    while i < html.len() {
        let Some(off) = html[i..].find('<') else {
            if skip_stack.is_empty() {
                push_text(&html[i..], &mut current, &mut heading);
            }
            break;
        };
        let lt = i + off;
        if lt > i && skip_stack.is_empty() {
            push_text(&html[i..lt], &mut current, &mut heading);
        }
        if html[lt..].starts_with("<!--") {
            i = html[lt + 4..].find("-->").map_or(html.len(), |e| lt + 4 + e + 3);
            continue;
        }
        if html[lt..].starts_with("<!") || html[lt..].starts_with("<?") {
            i = html[lt..].find('>').map_or(html.len(), |e| lt + e + 1);
            continue;
        }
        let Some(tag) = parse_tag(html, lt) else {
            let after = html[lt + 1..].trim_start_matches('/');
            if after.starts_with(|c: char| c.is_ascii_alphabetic()) && !after.contains('>') {
                // truncated final tag
                break;
            }
            // a stray '<' is text
            if skip_stack.is_empty() {
                push_text("<", &mut current, &mut heading);
            }
            i = lt + 1;
            continue;
        };
        i = tag.end;
        let name = tag.name.as_str();

        if !tag.closing && RAW_TEXT.contains(&name) && !tag.self_closing {
            let close = format!("</{name}");
            let stop = find_ci(html, &close, i).unwrap_or(html.len());
            let content = &html[i..stop];
            if name == "title" && out.title.is_empty() {
                out.title = collapse_whitespace(&decode_entities(content));
            } else if name == "textarea" && skip_stack.is_empty() {
                push_text(content, &mut current, &mut heading);
            }
            i = html[stop..].find('>').map_or(html.len(), |e| stop + e + 1);
            continue;
        }

        if SKIPPED.contains(&name) {
            if tag.closing {
                if let Some(pos) = skip_stack.iter().rposition(|s| s == name) {
                    skip_stack.truncate(pos);
                }
            } else if !tag.self_closing {
                skip_stack.push(name.to_string());
            }
            continue;
        }
        if !skip_stack.is_empty() {
            continue;
        }

        let is_heading = matches!(name, "h1" | "h2" | "h3");
        if BLOCKS.contains(&name) || is_heading {
            flush(&mut current, &mut lines);
        }
        if is_heading {
            if tag.closing {
                if let Some(h) = heading.take() {
                    let h = collapse_whitespace(&h);
                    if !h.is_empty() {
                        out.headings.push(h);
                    }
                }
            } else {
                heading = Some(String::new());
            }
        }
    }
    flush(&mut current, &mut lines);
    if let Some(h) = heading {
        let h = collapse_whitespace(&h);
        if !h.is_empty() {
            out.headings.push(h);
        }
    }
    out.body_text = lines.join("\n");
    out
}

fn push_text(raw: &str, current: &mut String, heading: &mut Option<String>) {
    let text = decode_entities(raw);
    current.push_str(&text);
    if let Some(h) = heading {
        h.push_str(&text);
    }
}

/// Decodes numeric references and the common named entities.
pub fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        rest = &rest[pos..];
        let semi = rest[1..].find(';').map(|p| p + 1).filter(|&p| p <= 10);
        let decoded = semi.and_then(|p| decode_entity(&rest[1..p]).map(|c| (c, p)));
        match decoded {
            Some((c, p)) => {
                out.push(c);
                rest = &rest[p + 1..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn decode_entity(name: &str) -> Option<char> {
    if let Some(num) = name.strip_prefix('#') {
        let code = match num.strip_prefix(['x', 'X']) {
            Some(hex) => u32::from_str_radix(hex, 16).ok()?,
            None => num.parse().ok()?,
        };
        return char::from_u32(code);
    }
    Some(match name {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        "nbsp" => ' ',
        "ndash" => '\u{2013}',
        "mdash" => '\u{2014}',
        "hellip" => '\u{2026}',
        "times" => '\u{d7}',
        "deg" => '\u{b0}',
        "plusmn" => '\u{b1}',
        "micro" => '\u{b5}',
        "eacute" => '\u{e9}',
        "egrave" => '\u{e8}',
        "aacute" => '\u{e1}',
        "iacute" => '\u{ed}',
        "oacute" => '\u{f3}',
        "uacute" => '\u{fa}',
        "ntilde" => '\u{f1}',
        "ccedil" => '\u{e7}',
        "uuml" => '\u{fc}',
        "ouml" => '\u{f6}',
        "auml" => '\u{e4}',
        "lsquo" => '\u{2018}',
        "rsquo" => '\u{2019}',
        "ldquo" => '\u{201c}',
        "rdquo" => '\u{201d}',
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAGE: &str = r#"<!DOCTYPE html>
<html><head><title>Hedera helix &ndash; Ivy</title>
<style>p { color: red; }</style><script>var x = "<p>not text</p>";</script></head>
<body>
<nav><ul><li>Home</li><li>About</li></ul></nav>
<h1>Hedera <em>helix</em></h1>
<!-- a comment -->
<h2>Description</h2>
<p>Leaves are <b>alternate</b>, 5&ndash;10&nbsp;cm long.</p>
<p>Flowers   greenish-yellow.<br>Fruit a black berry.</p>
<h4>Minor heading</h4>
<footer>Copyright &copy; 2024</footer>
</body></html>"#;

    #[test]
    fn extracts_title_headings_and_body() {
        let e = extract(PAGE);
        assert_eq!(e.title, "Hedera helix \u{2013} Ivy");
        assert_eq!(e.headings, vec!["Hedera helix", "Description"]);
        assert_eq!(
            e.body_text,
            "Hedera helix\nDescription\nLeaves are alternate, 5\u{2013}10 cm long.\nFlowers greenish-yellow.\nFruit a black berry.\nMinor heading"
        );
        assert_eq!(e.header_text(), "Hedera helix \u{2013} Ivy\nHedera helix\nDescription");
    }

    #[test]
    fn body_has_no_markup() {
        let e = extract(PAGE);
        assert!(!e.body_text.contains('<'));
        assert!(!e.body_text.contains("not text"));
        assert!(!e.body_text.contains("Home"));
        assert!(!e.body_text.contains("Copyright"));
    }

    #[test]
    fn tolerates_broken_markup() {
        let e = extract("a < b and <p class='x>y'>c</p><div");
        assert_eq!(e.body_text, "a < b and\nc");
        assert_eq!(extract("").body_text, "");
        assert_eq!(extract("plain text only").body_text, "plain text only");
    }

    #[test]
    fn entities() {
        assert_eq!(
            decode_entities("&lt;b&gt; &amp; &#233;&#x41; &bogus; &"),
            "<b> & \u{e9}A &bogus; &"
        );
    }

    #[test]
    fn nested_skipped_blocks() {
        let e = extract("<nav><nav>x</nav>y</nav><p>z</p>");
        assert_eq!(e.body_text, "z");
    }
}
