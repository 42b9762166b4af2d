//! Grounder replies and the reply text grammar.
//!
//! A resolved reply reads `The <object> is labeled as <id> in the <which> image.`
//! Several candidates are joined with `or`:
//! `It could be chair2 in the first image or chair5 in the second image.`
//! Anything without a recognisable `<id> in the <which> image` clause means
//! nothing was found.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::id::ObjectId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ResponseStatus {
    Resolved,
    Ambiguous,
    NotFound,
}

/// An object id together with the 1-based image it was pointed out in.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Candidate {
    pub id: ObjectId,
    pub image: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrounderResponse {
    status: ResponseStatus,
    candidates: Vec<Candidate>,
    raw_text: Option<String>,
}

impl GrounderResponse {
    /// Builds a response whose status follows the number of distinct ids.
    /// Repeated ids keep their first image.
    pub fn from_candidates(candidates: Vec<Candidate>, raw_text: Option<String>) -> Self {
        let mut seen = BTreeSet::new();
        let candidates: Vec<Candidate> = candidates.into_iter().filter(|c| seen.insert(c.id.clone())).collect();
        let status = match candidates.len() {
            0 => ResponseStatus::NotFound,
            1 => ResponseStatus::Resolved,
            _ => ResponseStatus::Ambiguous,
        };
        Self { status, candidates, raw_text }
    }

    pub fn status(&self) -> ResponseStatus {
        self.status
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn raw_text(&self) -> Option<&str> {
        self.raw_text.as_deref()
    }

    pub fn ids(&self) -> BTreeSet<ObjectId> {
        self.candidates.iter().map(|c| c.id.clone()).collect()
    }

    pub fn resolved_id(&self) -> Option<&ObjectId> {
        match self.status {
            ResponseStatus::Resolved => Some(&self.candidates[0].id),
            _ => None,
        }
    }
}

const ORDINALS: [&str; 10] = ["first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth"];

/// Ordinal word for `n` (`4` → `fourth`), falling back to `4th`-style suffixes.
pub fn ordinal_word(n: usize) -> String {
    match n {
        1..=10 => ORDINALS[n - 1].to_string(),
        _ => {
            let suffix = match (n % 10, n % 100) {
                (_, 11..=13) => "th",
                (1, _) => "st",
                (2, _) => "nd",
                (3, _) => "rd",
                _ => "th",
            };
            alloc::format!("{n}{suffix}")
        }
    }
}

fn parse_ordinal(word: &str) -> Option<usize> {
    let w = word.to_ascii_lowercase();
    if let Some(i) = ORDINALS.iter().position(|o| *o == w) {
        return Some(i + 1);
    }
    let digits = w.trim_end_matches(|c: char| c.is_ascii_alphabetic());
    let suffix = &w[digits.len()..];
    if !matches!(suffix, "" | "st" | "nd" | "rd" | "th") {
        return None;
    }
    digits.parse().ok().filter(|&n| n >= 1)
}

fn is_object_id(word: &str) -> bool {
    let mut chars = word.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && word.chars().last().is_some_and(|c| c.is_ascii_digit())
        && word.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn tokenize(text: &str) -> Vec<&str> {
    text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '-'))
        .map(|w| w.trim_matches('-'))
        .filter(|w| !w.is_empty())
        .collect()
}

/// Extracts `(id, image)` pairs from reply text. Total: unparseable text
/// yields `NotFound` with the text kept.
pub fn parse_response(text: &str) -> GrounderResponse {
    let words = tokenize(text);
    let eq = |w: &str, k: &str| w.eq_ignore_ascii_case(k);
    let is_image = |w: &str| eq(w, "image") || eq(w, "images") || eq(w, "picture") || eq(w, "snapshot");
    let mut found = Vec::new();
    let mut i = 0;
    while i + 3 < words.len() {
        let id = words[i];
        if is_object_id(id) && eq(words[i + 1], "in") {
            // `<id> in the <ordinal> image`
            if i + 4 < words.len() && eq(words[i + 2], "the") && is_image(words[i + 4]) {
                if let Some(n) = parse_ordinal(words[i + 3]) {
                    found.push(Candidate { id: ObjectId::new(id), image: n });
                    i += 5;
                    continue;
                }
            }
            // `<id> in image <n>`
            if is_image(words[i + 2]) {
                if let Some(n) = parse_ordinal(words[i + 3]) {
                    found.push(Candidate { id: ObjectId::new(id), image: n });
                    i += 4;
                    continue;
                }
            }
        }
        i += 1;
    }
    GrounderResponse::from_candidates(found, Some(text.to_string()))
}

/// Renders a response in the reply grammar, `object` being the type word
/// used in the resolved sentence.
pub fn format_response(object: &str, candidates: &[Candidate]) -> String {
    match candidates {
        [] => "I cannot find it.".to_string(),
        [only] => alloc::format!("The {object} is labeled as {} in the {} image.", only.id, ordinal_word(only.image)),
        many => {
            let clauses: Vec<String> = many
                .iter()
                .map(|c| alloc::format!("{} in the {} image", c.id, ordinal_word(c.image)))
                .collect();
            alloc::format!("It could be {}.", clauses.join(" or "))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn cand(id: &str, image: usize) -> Candidate {
        Candidate { id: ObjectId::new(id), image }
    }

    #[test]
    fn single_template() {
        let r = parse_response("The chair is labeled as chair7 in the fourth image.");
        assert_eq!(r.status(), ResponseStatus::Resolved);
        assert_eq!(r.candidates(), &[cand("chair7", 4)]);
        assert_eq!(r.resolved_id(), Some(&ObjectId::new("chair7")));
    }

    #[test]
    fn or_joined_candidates() {
        let r = parse_response("It could be chair2 in the first image or chair5 in the second image.");
        assert_eq!(r.status(), ResponseStatus::Ambiguous);
        assert_eq!(r.candidates(), &[cand("chair2", 1), cand("chair5", 2)]);
    }

    #[test]
    fn unparseable_is_not_found_with_text() {
        let r = parse_response("I cannot find it.");
        assert_eq!(r.status(), ResponseStatus::NotFound);
        assert!(r.candidates().is_empty());
        assert_eq!(r.raw_text(), Some("I cannot find it."));
    }

    #[test]
    fn digit_ordinals_and_image_number() {
        let r = parse_response("The table is labeled as table3 in the 2nd image.");
        assert_eq!(r.candidates(), &[cand("table3", 2)]);
        let r = parse_response("Probably high_chair12 in image 6.");
        assert_eq!(r.candidates(), &[cand("high_chair12", 6)]);
    }

    #[test]
    fn same_id_twice_counts_once() {
        let r = parse_response("chair2 in the first image or chair2 in the second image");
        assert_eq!(r.status(), ResponseStatus::Resolved);
        assert_eq!(r.candidates(), &[cand("chair2", 1)]);
    }

    #[test]
    fn ordinal_words() {
        assert_eq!(ordinal_word(4), "fourth");
        assert_eq!(ordinal_word(11), "11th");
        assert_eq!(ordinal_word(22), "22nd");
        assert_eq!(parse_ordinal("eighth"), Some(8));
        assert_eq!(parse_ordinal("3rd"), Some(3));
        assert_eq!(parse_ordinal("0"), None);
        assert_eq!(parse_ordinal("fourx"), None);
    }

    #[test]
    fn format_cases() {
        assert_eq!(format_response("chair", &[]), "I cannot find it.");
        assert_eq!(format_response("chair", &[cand("chair7", 4)]), "The chair is labeled as chair7 in the fourth image.");
        assert_eq!(
            format_response("chair", &[cand("chair2", 1), cand("chair5", 2)]),
            "It could be chair2 in the first image or chair5 in the second image."
        );
    }

    proptest! {
        #[test]
        fn parse_inverts_format(label in "[a-z]{1,8}", n in 1usize..1000, image in 1usize..=8, extra in proptest::collection::vec((1usize..50, 1usize..=8), 0..4)) {
            let mut cands = vec![Candidate { id: ObjectId::from_parts(&label, n), image }];
            for (k, img) in extra {
                let id = ObjectId::from_parts(&label, n + k);
                if cands.iter().all(|c| c.id != id) {
                    cands.push(Candidate { id, image: img });
                }
            }
            let parsed = parse_response(&format_response(&label, &cands));
            prop_assert_eq!(parsed.candidates(), &cands[..]);
        }
    }
}
