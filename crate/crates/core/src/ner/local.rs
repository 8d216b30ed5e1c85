//! Offline extractor: gazetteer matching, negation and abbreviation pairing.

use super::gazetteer::Gazetteer;
use super::model::{HealthEntity, HealthRelation, ABBREVIATION};
use super::negation::{detect_negation, NegationConfig};

/// Pairs each long form with a parenthesized short form right after it.
///
/// `long (short)`: only whitespace may separate the long form from `(`, the
/// short form must start at most two characters after `(`, and both must
/// share a category. When both carry UMLS ids those ids must agree.
pub fn detect_abbreviations(text: &str, entities: &[HealthEntity]) -> Vec<HealthRelation> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    for (li, long) in entities.iter().enumerate() {
        let mut pos = long.end();
        while pos < chars.len() && chars[pos].is_whitespace() {
            pos += 1;
        }
        if chars.get(pos) != Some(&'(') {
            continue;
        }
        let window = pos + 1..=pos + 2;
        let short = entities
            .iter()
            .enumerate()
            .skip(li + 1)
            .take_while(|(_, e)| e.offset <= pos + 2)
            .find(|(_, e)| window.contains(&e.offset) && e.category == long.category);
        if let Some((si, short)) = short {
            if let (Some(a), Some(b)) = (long.umls_id(), short.umls_id()) {
                if a != b {
                    continue;
                }
            }
            out.push(HealthRelation { relation_type: ABBREVIATION.to_string(), bidirectional: true, source: li, target: si });
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct LocalExtractor {
    gazetteer: Gazetteer,
    negation: NegationConfig,
}

impl LocalExtractor {
    pub fn new(gazetteer: Gazetteer, negation: NegationConfig) -> Self {
        Self { gazetteer, negation }
    }

    pub fn bundled() -> Self {
        Self::new(Gazetteer::bundled(), NegationConfig::default())
    }

    pub fn gazetteer(&self) -> &Gazetteer {
        &self.gazetteer
    }

    pub fn analyze(&self, text: &str) -> (Vec<HealthEntity>, Vec<HealthRelation>) {
        analyze_local(text, &self.gazetteer, &self.negation)
    }
}

pub fn analyze_local(text: &str, gazetteer: &Gazetteer, negation: &NegationConfig) -> (Vec<HealthEntity>, Vec<HealthRelation>) {
    let chars: Vec<char> = text.chars().collect();
    let mut entities: Vec<HealthEntity> = gazetteer
        .find(&chars)
        .into_iter()
        .map(|m| {
            let entry = gazetteer.entry(m.entry);
            HealthEntity {
                offset: m.start,
                length: m.len,
                text: chars[m.start..m.start + m.len].iter().collect(),
                category: entry.category.clone(),
                confidence: 1.0,
                is_negated: false,
                links: entry.links(),
            }
        })
        .collect();
    detect_negation(text, &mut entities, negation);
    let relations = detect_abbreviations(text, &entities);
    (entities, relations)
}
