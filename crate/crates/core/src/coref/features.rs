use crate::corpus::Document;

/// Bucket upper bounds: 1, 2, 3, 4, 5-7, 8-15, 16-31, 32-63, 64+.
pub const BUCKETS: usize = 9;

pub fn bucket(n: usize) -> usize {
    match n {
        0..=4 => n.saturating_sub(1),
        5..=7 => 4,
        8..=15 => 5,
        16..=31 => 6,
        32..=63 => 7,
        _ => 8,
    }
}

/// 0 when both types are equal (NA equals NA), 1 otherwise.
pub fn type_consistency(a: Option<&str>, b: Option<&str>) -> u8 {
    u8::from(a != b)
}

const QUOTES: [char; 3] = ['"', '\u{201c}', '\u{201d}'];

/// Per flattened token: true when an odd number of quote characters occur
/// in the tokens before it.
pub fn quote_flags(doc: &Document) -> Vec<bool> {
    let mut open = false;
    doc.tokens()
        .map(|t| {
            let flag = open;
            let n = t.chars().filter(|c| QUOTES.contains(c)).count();
            if n % 2 == 1 {
                open = !open;
            }
            flag
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairFeatures {
    pub distance_bucket: usize,
    pub nested: bool,
    pub type_consistency: Option<u8>,
}

impl PairFeatures {
    /// Features between antecedent ordinal `j` and anaphor ordinal `k`
    /// (`j < k`) for mentions `mj`, `mk` of `doc`.
    pub fn between(doc: &Document, j: usize, mj: usize, k: usize, mk: usize, with_types: bool) -> Self {
        let (a, b) = (&doc.mentions[mj], &doc.mentions[mk]);
        Self {
            distance_bucket: bucket(k - j),
            nested: a.nests_with(b),
            type_consistency: with_types
                .then(|| type_consistency(a.entity_type.as_deref(), b.entity_type.as_deref())),
        }
    }
}
