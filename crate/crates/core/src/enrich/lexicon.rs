//! Rule-based fallback lexicons.
//!
//! Two JSON maps ship with the crate: category -> area names (each
//! matched category casts one vote per listed area) and abnormality term
//! -> score. The scores are repo fixtures, not measured quantities.

use serde::Deserialize;
use std::collections::BTreeMap;
use std::sync::OnceLock;

const AREA_LEXICON_JSON: &str = include_str!("../../assets/lexicons/area_lexicon.json");
const ABNORMALITY_LEXICON_JSON: &str =
    include_str!("../../assets/lexicons/abnormality_lexicon.json");

/// Deterministic rule tables backing the fallback annotator.
#[derive(Debug, Clone, Deserialize)]
pub struct Lexicons {
    pub areas: BTreeMap<String, Vec<String>>,
    pub abnormality: BTreeMap<String, f64>,
}

impl Lexicons {
    /// The lexicons bundled with the crate.
    pub fn bundled() -> &'static Lexicons {
        static BUNDLED: OnceLock<Lexicons> = OnceLock::new();
        BUNDLED.get_or_init(|| Lexicons {
            areas: serde_json::from_str(AREA_LEXICON_JSON).expect("bundled area lexicon"),
            abnormality: serde_json::from_str(ABNORMALITY_LEXICON_JSON)
                .expect("bundled abnormality lexicon"),
        })
    }

    /// Majority vote over matched categories; ties break to the
    /// lexicographically smallest area name; no hit means "Unknown Area".
    pub fn vote_area(&self, categories: &[String]) -> String {
        let mut votes: BTreeMap<&str, usize> = BTreeMap::new();
        for category in categories {
            let key = category.trim().to_lowercase();
            if let Some(areas) = self.areas.get(&key) {
                for area in areas {
                    *votes.entry(area.as_str()).or_insert(0) += 1;
                }
            }
        }
        votes
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(area, _)| (*area).to_string())
            .unwrap_or_else(|| "Unknown Area".to_string())
    }

    /// Maximum score over abnormality terms found in the attribute text;
    /// 0 when nothing matches. Terms match on whole lowercased tokens;
    /// multi-word terms must appear as a contiguous token run.
    pub fn score_abnormality(&self, attributes: &str) -> f64 {
        let tokens: Vec<String> = attributes
            .to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect();
        let mut best = 0.0_f64;
        for (term, &score) in &self.abnormality {
            let term_tokens: Vec<&str> = term.split_whitespace().collect();
            if term_tokens.is_empty() || term_tokens.len() > tokens.len() {
                continue;
            }
            let hit = tokens
                .windows(term_tokens.len())
                .any(|window| window.iter().zip(&term_tokens).all(|(a, b)| a == b));
            if hit && score > best {
                best = score;
            }
        }
        best.clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cats(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn kitchen_categories_vote_kitchen() {
        let lex = Lexicons::bundled();
        assert_eq!(lex.vote_area(&cats(&["stove", "pan", "sink"])), "Kitchen Area");
    }

    #[test]
    fn tie_breaks_lexicographically() {
        let lex = Lexicons::bundled();
        // sofa -> Living Area, stove -> Kitchen Area: 1-1 tie.
        assert_eq!(lex.vote_area(&cats(&["sofa", "stove"])), "Kitchen Area");
    }

    #[test]
    fn unmatched_categories_give_unknown_area() {
        let lex = Lexicons::bundled();
        assert_eq!(lex.vote_area(&cats(&["blorp"])), "Unknown Area");
        assert_eq!(lex.vote_area(&[]), "Unknown Area");
    }

    #[test]
    fn broken_scores_expected_value() {
        let lex = Lexicons::bundled();
        assert_eq!(lex.score_abnormality("the microwave is broken"), 0.9);
    }

    #[test]
    fn no_match_scores_zero() {
        let lex = Lexicons::bundled();
        assert_eq!(lex.score_abnormality("a perfectly fine mug"), 0.0);
        assert_eq!(lex.score_abnormality(""), 0.0);
    }

    #[test]
    fn multi_word_terms_match_contiguously() {
        let lex = Lexicons::bundled();
        assert_eq!(lex.score_abnormality("the pot is on fire"), 0.95);
        // "fire on" reversed must not match "on fire".
        assert_eq!(lex.score_abnormality("fire drill poster on the wall"), 0.0);
    }

    #[test]
    fn substring_of_token_does_not_match() {
        let lex = Lexicons::bundled();
        // "unbroken" must not trigger the "broken" term.
        assert_eq!(lex.score_abnormality("an unbroken streak"), 0.0);
    }

    #[test]
    fn max_over_matched_terms_wins() {
        let lex = Lexicons::bundled();
        // dirty (0.4) and cracked (0.8) both present -> 0.8.
        assert_eq!(lex.score_abnormality("dirty and cracked"), 0.8);
    }
}
