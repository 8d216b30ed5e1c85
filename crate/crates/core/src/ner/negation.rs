//! Trigger-window negation.
//!
//! An entity is negated when a trigger phrase sits inside its clause within
//! `before` word tokens ahead of it or `after` word tokens behind it.
//! Clauses end at `.`/`!`/`?` and at a `, but` conjunction.

use super::gazetteer::{fold_char, is_word_char};
use super::model::HealthEntity;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegationConfig {
    pub triggers: Vec<String>,
    pub before: usize,
    pub after: usize,
}

pub const DEFAULT_TRIGGERS: [&str; 6] = ["no", "not", "without", "never", "negative for", "did not"];

impl Default for NegationConfig {
    fn default() -> Self {
        Self { triggers: DEFAULT_TRIGGERS.iter().map(|s| s.to_string()).collect(), before: 6, after: 3 }
    }
}

#[derive(Debug)]
struct Word {
    start: usize,
    end: usize,
    folded: String,
    clause: usize,
}

fn words(chars: &[char]) -> Vec<Word> {
    let mut out: Vec<Word> = Vec::new();
    let mut clause = 0;
    let mut comma_pending = false;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if is_word_char(c) {
            let start = i;
            while i < chars.len() && is_word_char(chars[i]) {
                i += 1;
            }
            let folded: String = chars[start..i].iter().map(|&c| fold_char(c)).collect();
            if comma_pending && folded == "but" {
                clause += 1;
            }
            comma_pending = false;
            out.push(Word { start, end: i, folded, clause });
            continue;
        }
        match c {
            '!' | '?' => clause += 1,
            '.' if chars.get(i + 1).is_none_or(|n| n.is_whitespace()) => clause += 1,
            _ => {}
        }
        if c == ',' {
            comma_pending = true;
        } else if !c.is_whitespace() {
            comma_pending = false;
        }
        i += 1;
    }
    out
}

fn contains_phrase(window: &[&Word], phrases: &[Vec<String>]) -> bool {
    phrases.iter().any(|phrase| {
        !phrase.is_empty()
            && window.len() >= phrase.len()
            && window.windows(phrase.len()).any(|w| w.iter().zip(phrase).all(|(tok, p)| tok.folded == *p))
    })
}

/// Sets `is_negated` on each entity; entities must lie within `text`.
pub fn detect_negation(text: &str, entities: &mut [HealthEntity], config: &NegationConfig) {
    let chars: Vec<char> = text.chars().collect();
    let words = words(&chars);
    let phrases: Vec<Vec<String>> =
        config.triggers.iter().map(|t| t.split_whitespace().map(|w| w.chars().map(fold_char).collect()).collect()).collect();

    for entity in entities.iter_mut() {
        let inside: Vec<usize> = (0..words.len()).filter(|&i| words[i].start < entity.end() && words[i].end > entity.offset).collect();
        let (Some(&first), Some(&last)) = (inside.first(), inside.last()) else {
            entity.is_negated = false;
            continue;
        };
        let clause_before = words[first].clause;
        let clause_after = words[last].clause;
        let before: Vec<&Word> = words[..first]
            .iter()
            .rev()
            .take_while(|w| w.clause == clause_before)
            .take(config.before)
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect();
        let after: Vec<&Word> = words[last + 1..].iter().take_while(|w| w.clause == clause_after).take(config.after).collect();
        entity.is_negated = contains_phrase(&before, &phrases) || contains_phrase(&after, &phrases);
    }
}
