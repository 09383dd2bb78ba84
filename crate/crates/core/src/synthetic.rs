//! Typed toy corpora where names repeat verbatim and generic mentions are
//! resolved mostly by agreeing on entity type.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, MentionSpan};

const TYPES: [&str; 4] = ["PER", "ORG", "LOC", "FAC"];
/// Generic mention words; entry `i` is favored by type `i`.
const GENERIC: [&str; 8] = ["one", "it", "there", "that", "they", "this", "these", "those"];
const FILLER: [&str; 16] = [
    "and", "then", "saw", "near", "with", "of", "the", "later", "met", "said", "about", "by", "again", "while",
    "so", "from",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub documents: usize,
    pub seed: u64,
    pub min_mentions: usize,
    pub max_mentions: usize,
    /// Chance that a repeat mention is generic rather than the name.
    pub generic_rate: f64,
    /// Chance that a generic mention uses its type's favored word.
    pub type_cue: f64,
    pub mentions_per_sentence: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            documents: 60,
            seed: 0,
            min_mentions: 10,
            max_mentions: 14,
            generic_rate: 0.6,
            type_cue: 0.3,
            mentions_per_sentence: 3,
        }
    }
}

fn document(index: usize, spec: &SynthSpec) -> Document {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64 + 1);
    let entities = rng.gen_range(3..=5);
    let mut kinds: Vec<usize> = (0..TYPES.len()).collect();
    kinds.shuffle(&mut rng);
    kinds.truncate(entities.min(TYPES.len()));
    // a fifth entity shares a type with one of the others
    while kinds.len() < entities {
        let k = *kinds.choose(&mut rng).unwrap();
        kinds.push(k);
    }
    let mut ids: Vec<u32> = (100..1000).collect();
    ids.shuffle(&mut rng);
    let names: Vec<String> = ids[..entities].iter().map(|i| format!("Nm{i}")).collect();

    let count = rng.gen_range(spec.min_mentions..=spec.max_mentions.max(spec.min_mentions));
    let mut introduced = vec![false; entities];
    let mut sentences: Vec<Vec<String>> = vec![Vec::new()];
    let mut clusters: Vec<Vec<MentionSpan>> = vec![Vec::new(); entities];
    for n in 0..count {
        if n > 0 && n % spec.mentions_per_sentence.max(1) == 0 {
            sentences.last_mut().unwrap().push(".".into());
            sentences.push(Vec::new());
        }
        let e = rng.gen_range(0..entities);
        let kind = kinds[e];
        let word = if !introduced[e] || !rng.gen_bool(spec.generic_rate) {
            introduced[e] = true;
            names[e].clone()
        } else if rng.gen_bool(spec.type_cue) {
            GENERIC[kind].to_string()
        } else {
            GENERIC.choose(&mut rng).unwrap().to_string()
        };
        let sentence_index = sentences.len() - 1;
        let s = sentences.last_mut().unwrap();
        for _ in 0..rng.gen_range(1..=2) {
            s.push(FILLER.choose(&mut rng).unwrap().to_string());
        }
        clusters[e].push(MentionSpan::new(sentence_index, s.len(), s.len()).typed(TYPES[kind]));
        s.push(word);
    }
    sentences.last_mut().unwrap().push(".".into());
    clusters.retain(|c| !c.is_empty());
    Document::with_clusters(format!("synth_{index:03}"), sentences, clusters)
}

pub fn synthetic_corpus(spec: &SynthSpec) -> Vec<Document> {
    (0..spec.documents).map(|i| document(i, spec)).collect()
}
