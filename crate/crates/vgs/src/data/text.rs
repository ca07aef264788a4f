//! Text normalization applied before speech synthesis.
//!
//! Synthesis engines read text very literally: a space between a sentence-
//! final period and a closing quotation mark gets pronounced ("quote"), and
//! lowercase initialisms like "usa" get read as words instead of letters.
//! Two fixed rules repair exactly these cases; anything corpus-specific can
//! be layered on through a rule file.

use std::path::Path;
use std::sync::OnceLock;

use regex::{Captures, Regex};

use crate::error::{Error, Result};

/// Initialisms that synthesizers misread as words when lowercase. Each is
/// rewritten to its dotted uppercase letter form (`usa` → `U.S.A.`).
/// Deliberately excludes strings that are also ordinary English words
/// ("us", "un", "it").
const INITIALISMS: &[&str] = &[
    "usa", "uk", "fbi", "cia", "cnn", "bbc", "dna", "tv", "gdp", "hiv", "ufo", "atm", "gps",
    "usb", "ceo",
];

/// An ordered list of regex rewrite rules.
pub struct TextRules {
    extra: Vec<(Regex, String)>,
}

fn quote_space_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // A period, one or more spaces, then a closing double quote.
    RE.get_or_init(|| Regex::new(r#"\.\s+(["\u{201d}])"#).expect("static regex"))
}

fn initialism_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let alternation = INITIALISMS.join("|");
        Regex::new(&format!(r"\b({alternation})\b")).expect("static regex")
    })
}

impl TextRules {
    /// Just the two fixed rules.
    pub fn builtin() -> Self {
        TextRules { extra: Vec::new() }
    }

    /// Fixed rules plus extra rules from a file.
    ///
    /// The file is TSV: `pattern<TAB>replacement` per line, `#` comments and
    /// blank lines ignored. Replacements may use capture groups (`$1`).
    /// Extra rules run after the fixed ones, in file order.
    pub fn with_rules_file(path: &Path) -> Result<Self> {
        let display = path.display().to_string();
        let content = std::fs::read_to_string(path)
            .map_err(|e| Error::format(path, format!("cannot read rules: {e}")))?;
        let mut extra = Vec::new();
        for (lineno, line) in content.lines().enumerate() {
            let lineno = lineno + 1;
            let trimmed = line.trim_end();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((pattern, replacement)) = trimmed.split_once('\t') else {
                return Err(Error::format(
                    &display,
                    format!("line {lineno}: expected 'pattern<TAB>replacement'"),
                ));
            };
            let re = Regex::new(pattern).map_err(|e| {
                Error::format(&display, format!("line {lineno}: bad pattern: {e}"))
            })?;
            extra.push((re, replacement.to_string()));
        }
        Ok(TextRules { extra })
    }

    pub fn extra_rule_count(&self) -> usize {
        self.extra.len()
    }

    /// Applies every rule once, fixed rules first.
    pub fn apply(&self, text: &str) -> String {
        let pass1 = quote_space_re().replace_all(text, ".$1");
        let pass2 = initialism_re().replace_all(&pass1, |caps: &Captures| {
            caps[1]
                .chars()
                .map(|c| format!("{}.", c.to_ascii_uppercase()))
                .collect::<String>()
        });
        let mut out = pass2.into_owned();
        for (re, replacement) in &self.extra {
            out = re.replace_all(&out, replacement.as_str()).into_owned();
        }
        out
    }
}

/// Applies the two fixed normalization rules.
pub fn preprocess_sts_text(sentence: &str) -> String {
    TextRules::builtin().apply(sentence)
}
