//! Global normalized edit distance for typographic accuracy.
//!
//! Both strings are NFC-normalized and whitespace-collapsed, then compared
//! as Unicode scalar sequences:
//!
//! ```text
//! gned(a, b) = 1 - lev(a, b) / max(|a|, |b|)
//! ```
//!
//! Two empty strings score 1.0 by convention. The symmetric normalization
//! penalizes over-generation and omission alike: extra characters and
//! missing characters both grow the raw distance against the longer
//! length.

use unicode_normalization::UnicodeNormalization;

/// Similarity in [0, 1]; 1.0 means identical after normalization.
pub fn gned(reference: &str, hypothesis: &str) -> f64 {
    let a = normalize(reference);
    let b = normalize(hypothesis);
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(&a, &b) as f64 / longest as f64
}

fn normalize(s: &str) -> Vec<char> {
    let nfc: String = s.nfc().collect();
    let collapsed = nfc.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.chars().collect()
}

/// Two-row dynamic-programming Levenshtein distance.
fn levenshtein(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=a.len()).collect();
    let mut curr = vec![0usize; a.len() + 1];
    for (j, bc) in b.iter().enumerate() {
        curr[0] = j + 1;
        for (i, ac) in a.iter().enumerate() {
            let substitution = prev[i] + usize::from(ac != bc);
            curr[i + 1] = substitution.min(prev[i + 1] + 1).min(curr[i] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[a.len()]
}
