//! Mapping a free-text answer onto one label of a closed category set.
//!
//! Rule cascade:
//! 1. A line of the form `answer: <name>` or `category is <name>` naming
//!    exactly one category decides.
//! 2. Otherwise the last sentence that mentions any category decides, if it
//!    mentions exactly one.
//! 3. Otherwise the answer is unparseable.
//!
//! Matching is case-insensitive and word-bounded. Multiword names match with
//! spaces, underscores, hyphens, or no separator (`night stand`, `night_stand`,
//! `nightstand`).

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::prompt::CategorySet;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParsedChoice {
    Label(String),
    Unparseable,
}

impl ParsedChoice {
    pub fn label(&self) -> Option<&str> {
        match self {
            ParsedChoice::Label(l) => Some(l),
            ParsedChoice::Unparseable => None,
        }
    }
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Token sequences that spell a category, longest first.
struct Matcher<'a> {
    aliases: Vec<(Vec<String>, &'a str)>,
}

impl<'a> Matcher<'a> {
    fn new(categories: &'a CategorySet) -> Self {
        let mut aliases = Vec::new();
        for name in categories.names() {
            let toks = words(name);
            if toks.len() > 1 {
                aliases.push((vec![toks.concat()], name.as_str()));
            }
            aliases.push((toks, name.as_str()));
        }
        aliases.sort_by_key(|a| std::cmp::Reverse(a.0.len()));
        Self { aliases }
    }

    /// Category spelled at `tokens[pos..]`, with its length in tokens.
    fn match_at(&self, tokens: &[String], pos: usize) -> Option<(&'a str, usize)> {
        self.aliases.iter().find_map(|(alias, name)| {
            let end = pos + alias.len();
            (end <= tokens.len() && tokens[pos..end] == alias[..]).then_some((*name, alias.len()))
        })
    }

    /// Non-overlapping mentions, scanning left to right with longest match.
    fn mentions(&self, tokens: &[String]) -> Vec<&'a str> {
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < tokens.len() {
            match self.match_at(tokens, pos) {
                Some((name, len)) => {
                    out.push(name);
                    pos += len;
                }
                None => pos += 1,
            }
        }
        out
    }
}

fn cue_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(?:answer\s*:|category\s+is\b)").expect("valid regex"))
}

const FILLER: [&str; 3] = ["a", "an", "the"];

fn explicit_answer<'a>(response: &str, m: &Matcher<'a>) -> Option<&'a str> {
    let mut hits: Vec<&str> = Vec::new();
    for line in response.lines() {
        let line: String = line.chars().filter(|c| !matches!(c, '*' | '`' | '#')).collect();
        for cue in cue_regex().find_iter(&line) {
            let tokens = words(&line[cue.end()..]);
            let start = tokens.iter().take_while(|t| FILLER.contains(&t.as_str())).count();
            if let Some((name, _)) = m.match_at(&tokens, start) {
                if !hits.contains(&name) {
                    hits.push(name);
                }
            }
        }
    }
    match hits.as_slice() {
        [only] => Some(only),
        _ => None,
    }
}

fn last_conclusive_sentence<'a>(response: &str, m: &Matcher<'a>) -> Option<&'a str> {
    let last = response
        .rsplit(['.', '!', '?', '\n'])
        .map(|s| m.mentions(&words(s)))
        .find(|found| !found.is_empty())?;
    let first = last[0];
    last.iter().all(|&n| n == first).then_some(first)
}

pub fn parse_choice(response: &str, categories: &CategorySet) -> ParsedChoice {
    let m = Matcher::new(categories);
    explicit_answer(response, &m)
        .or_else(|| last_conclusive_sentence(response, &m))
        .map(|l| ParsedChoice::Label(l.to_owned()))
        .unwrap_or(ParsedChoice::Unparseable)
}
