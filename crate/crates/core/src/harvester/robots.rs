//! robots.txt parsing and matching.
//!
//! Groups are selected by the most specific matching user-agent token,
//! falling back to `*`. Within the group, the longest matching rule wins and
//! `Allow` wins ties. Paths support `*` wildcards and a trailing `$` anchor.

#[derive(Debug, Clone, PartialEq, Eq)]
struct Rule {
    allow: bool,
    pattern: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Group {
    agents: Vec<String>,
    rules: Vec<Rule>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RobotsRules {
    groups: Vec<Group>,
}

impl RobotsRules {
    /// Rules that allow everything (missing or unreadable robots.txt).
    pub fn allow_all() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Self {
        let mut groups: Vec<Group> = Vec::new();
        let mut current = Group::default();
        let mut in_agents = false;
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            let Some((key, value)) = line.split_once(':') else {
                continue;
            };
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim();
            match key.as_str() {
                "user-agent" => {
                    if !in_agents && (!current.agents.is_empty() || !current.rules.is_empty()) {
                        groups.push(std::mem::take(&mut current));
                    }
                    current.agents.push(value.to_ascii_lowercase());
                    in_agents = true;
                }
                "allow" | "disallow" => {
                    in_agents = false;
                    if current.agents.is_empty() {
                        continue;
                    }
                    // an empty Disallow allows everything and adds no rule
                    if !value.is_empty() {
                        current.rules.push(Rule {
                            allow: key == "allow",
                            pattern: value.to_string(),
                        });
                    }
                }
                _ => in_agents = false,
            }
        }
        if !current.agents.is_empty() {
            groups.push(current);
        }
        Self { groups }
    }

    fn group_for(&self, user_agent: &str) -> Option<&Group> {
        let ua = user_agent.to_ascii_lowercase();
        let product = ua.split(['/', ' ']).next().unwrap_or("");
        let mut best: Option<(&Group, usize)> = None;
        for g in &self.groups {
            for a in &g.agents {
                let score = if a == "*" {
                    0
                } else if !a.is_empty() && product.contains(a.as_str()) {
                    a.len()
                } else {
                    continue;
                };
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some((g, score));
                }
            }
        }
        best.map(|(g, _)| g)
    }

    /// Whether `user_agent` may fetch `path` (path plus optional query).
    pub fn is_allowed(&self, user_agent: &str, path: &str) -> bool {
        let Some(group) = self.group_for(user_agent) else {
            return true;
        };
        let mut best: Option<(usize, bool)> = None;
        for r in &group.rules {
            if pattern_matches(&r.pattern, path) {
                let len = r.pattern.len();
                let better = match best {
                    None => true,
                    Some((l, allow)) => len > l || (len == l && r.allow && !allow),
                };
                if better {
                    best = Some((len, r.allow));
                }
            }
        }
        best.is_none_or(|(_, allow)| allow)
    }
}

fn pattern_matches(pattern: &str, path: &str) -> bool {
    let (pattern, anchored) = match pattern.strip_suffix('$') {
        Some(p) => (p, true),
        None => (pattern, false),
    };
    let parts: Vec<&str> = pattern.split('*').collect();
    let mut pos = 0;
    for (i, part) in parts.iter().enumerate() {
        if i == 0 {
            if !path.starts_with(part) {
                return false;
            }
            pos = part.len();
        } else if i == parts.len() - 1 && anchored {
            return path.len() >= pos + part.len() && path.ends_with(part);
        } else {
            match path[pos..].find(part) {
                Some(off) => pos += off + part.len(),
                None => return false,
            }
        }
    }
    !anchored || pos == path.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TXT: &str = "\
User-agent: *
Disallow: /private/
Allow: /private/public-page
Disallow: /*.pdf$

User-agent: florafill
User-agent: other
Disallow: /no-flora/

User-agent: blocked
Disallow: /
";

    #[test]
    fn wildcard_group() {
        let r = RobotsRules::parse(TXT);
        assert!(r.is_allowed("somebot/1.0", "/species/hedera"));
        assert!(!r.is_allowed("somebot/1.0", "/private/x"));
        assert!(r.is_allowed("somebot/1.0", "/private/public-page"));
        assert!(!r.is_allowed("somebot/1.0", "/docs/a.pdf"));
        assert!(r.is_allowed("somebot/1.0", "/docs/a.pdf?x=1"));
    }

    #[test]
    fn specific_group_replaces_wildcard() {
        let r = RobotsRules::parse(TXT);
        assert!(r.is_allowed("florafill/0.1 (research crawler)", "/private/x"));
        assert!(!r.is_allowed("florafill/0.1", "/no-flora/page"));
        assert!(!r.is_allowed("Blocked", "/anything"));
    }

    #[test]
    fn empty_and_missing() {
        assert!(RobotsRules::allow_all().is_allowed("x", "/"));
        let r = RobotsRules::parse("User-agent: *\nDisallow:\n");
        assert!(r.is_allowed("x", "/anything"));
    }

    #[test]
    fn patterns() {
        assert!(pattern_matches("/a*c", "/abc"));
        assert!(pattern_matches("/a*c", "/abcd"));
        assert!(!pattern_matches("/a*c$", "/abcd"));
        assert!(pattern_matches("/a*c$", "/abc"));
        assert!(pattern_matches("/", "/x"));
        assert!(!pattern_matches("/x$", "/xy"));
    }
}
