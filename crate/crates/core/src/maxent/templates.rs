//! Feature templates: the `arch` string and history feature expansion.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{END, START};

/// Full template set: two words either side, one previous tag, affixes up to
/// six characters, word shapes one position either side.
pub const DEFAULT_ARCH: &str = "words(-2,2),order(1),prefix(6),suffix(6),unicodeshapes(1)";

/// Which feature families a maxent model extracts. Families left out of the
/// `arch` string are disabled.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeatureTemplateSet {
    /// Word-identity offsets, inclusive.
    pub words: Option<(i32, i32)>,
    /// Number of previous tags conditioned on (0 or 1).
    pub order: u8,
    pub prefix: usize,
    pub suffix: usize,
    /// Shape window radius; `Some(s)` covers offsets `-s..=s`.
    pub shapes: Option<usize>,
}

impl FeatureTemplateSet {
    pub fn parse(spec: &str) -> Result<Self> {
        let compact: String = spec.chars().filter(|c| !c.is_whitespace()).collect();
        let mut set = FeatureTemplateSet::default();
        let mut seen: Vec<String> = Vec::new();
        let mut rest = compact.as_str();
        while !rest.is_empty() {
            let open = rest
                .find('(')
                .ok_or_else(|| Error::invalid(format!("expected `name(args)` in {rest:?}")))?;
            let close = rest[open..]
                .find(')')
                .map(|c| open + c)
                .ok_or_else(|| Error::invalid(format!("unclosed `(` in {rest:?}")))?;
            let name = &rest[..open];
            let args: Vec<i64> = rest[open + 1..close]
                .split(',')
                .map(|a| {
                    a.parse::<i64>()
                        .map_err(|_| Error::invalid(format!("bad argument {a:?} to {name}")))
                })
                .collect::<Result<_>>()?;
            if seen.iter().any(|s| s == name) {
                return Err(Error::invalid(format!("duplicate template {name}")));
            }
            seen.push(name.to_string());
            set.apply(name, &args)?;

            rest = &rest[close + 1..];
            if let Some(r) = rest.strip_prefix(',') {
                if r.is_empty() {
                    return Err(Error::invalid("trailing comma in architecture"));
                }
                rest = r;
            } else if !rest.is_empty() {
                return Err(Error::invalid(format!("expected `,` before {rest:?}")));
            }
        }
        Ok(set)
    }

    fn apply(&mut self, name: &str, args: &[i64]) -> Result<()> {
        let single = |args: &[i64]| -> Result<usize> {
            match args {
                [n] if *n >= 0 => Ok(*n as usize),
                _ => Err(Error::invalid(format!("{name} takes one non-negative integer"))),
            }
        };
        match name {
            "words" => match args {
                [lo, hi] if lo <= &0 && &0 <= hi => {
                    let lo = i32::try_from(*lo).map_err(|_| Error::invalid("words offset too large"))?;
                    let hi = i32::try_from(*hi).map_err(|_| Error::invalid("words offset too large"))?;
                    self.words = Some((lo, hi));
                }
                [_, _] => return Err(Error::invalid("words(lo,hi) needs lo <= 0 <= hi")),
                _ => return Err(Error::invalid("words takes two integers")),
            },
            "order" => match single(args)? {
                n @ (0 | 1) => self.order = n as u8,
                n => return Err(Error::invalid(format!("order({n}) unsupported; use 0 or 1"))),
            },
            "prefix" => self.prefix = single(args)?,
            "suffix" => self.suffix = single(args)?,
            "unicodeshapes" => self.shapes = Some(single(args)?),
            other => return Err(Error::invalid(format!("unknown template {other:?}"))),
        }
        Ok(())
    }

    /// Every feature for `position` except the previous-tag feature.
    pub fn context_features(&self, words: &[&str], position: usize) -> Vec<String> {
        let mut out = vec!["bias".to_string()];
        let at = |offset: i32| -> &str {
            let j = position as i64 + offset as i64;
            if j < 0 {
                START
            } else if j as usize >= words.len() {
                END
            } else {
                words[j as usize]
            }
        };
        if let Some((lo, hi)) = self.words {
            for o in lo..=hi {
                out.push(format!("w[{}]={}", fmt_offset(o), at(o)));
            }
        }
        let word = words[position];
        let chars: Vec<char> = word.chars().collect();
        for n in 1..=self.prefix.min(chars.len()) {
            out.push(format!("pre{n}={}", chars[..n].iter().collect::<String>()));
        }
        for n in 1..=self.suffix.min(chars.len()) {
            out.push(format!("suf{n}={}", chars[chars.len() - n..].iter().collect::<String>()));
        }
        if let Some(s) = self.shapes {
            let s = s as i32;
            for o in -s..=s {
                let w = at(o);
                let shape = if w == START || w == END {
                    w.to_string()
                } else {
                    word_shape(w)
                };
                out.push(format!("shape[{}]={}", fmt_offset(o), shape));
            }
        }
        out
    }

    /// `None` when the set does not condition on the previous tag.
    pub fn prev_tag_feature(&self, prev_tag: &str) -> Option<String> {
        (self.order >= 1).then(|| format!("prevtag={prev_tag}"))
    }
}

impl FromStr for FeatureTemplateSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureTemplateSet::parse(s)
    }
}

impl fmt::Display for FeatureTemplateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some((lo, hi)) = self.words {
            parts.push(format!("words({lo},{hi})"));
        }
        parts.push(format!("order({})", self.order));
        if self.prefix > 0 {
            parts.push(format!("prefix({})", self.prefix));
        }
        if self.suffix > 0 {
            parts.push(format!("suffix({})", self.suffix));
        }
        if let Some(s) = self.shapes {
            parts.push(format!("unicodeshapes({s})"));
        }
        f.write_str(&parts.join(","))
    }
}

fn fmt_offset(o: i32) -> String {
    if o > 0 {
        format!("+{o}")
    } else {
        o.to_string()
    }
}

/// Character-class shape: `X` upper-case letter, `x` any other letter, `9`
/// digit, `-` anything else; runs of one class are cut to two symbols.
pub fn word_shape(word: &str) -> String {
    let mut out = String::new();
    let mut last = '\0';
    let mut run = 0;
    for c in word.chars() {
        let class = if c.is_uppercase() {
            'X'
        } else if c.is_alphabetic() {
            'x'
        } else if c.is_numeric() {
            '9'
        } else {
            '-'
        };
        if class == last {
            run += 1;
        } else {
            last = class;
            run = 1;
        }
        if run <= 2 {
            out.push(class);
        }
    }
    out
}

/// The observation a maxent model conditions on when predicting one tag.
#[derive(Debug, Clone, Copy)]
pub struct History<'a> {
    pub words: &'a [&'a str],
    pub position: usize,
    pub prev_tag: &'a str,
}

pub fn extract_history_features(h: &History<'_>, templates: &FeatureTemplateSet) -> Vec<String> {
    let mut out = templates.context_features(h.words, h.position);
    out.extend(templates.prev_tag_feature(h.prev_tag));
    out
}
