use std::collections::HashMap;

use super::Document;

/// Gives every member of a cluster the majority type among its typed
/// members. Ties go to the type of the earliest typed mention among the
/// tied types. Clusters without any typed member are left untyped.
pub fn propagate_cluster_types(doc: &Document) -> Document {
    let mut out = doc.clone();
    for members in doc.clusters.values() {
        let mut ordered = members.clone();
        ordered.sort_by_key(|&m| doc.mentions[m].key());

        let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
        for (rank, &m) in ordered.iter().enumerate() {
            if let Some(t) = doc.mentions[m].entity_type.as_deref() {
                counts.entry(t).or_insert((0, rank)).0 += 1;
            }
        }
        let winner = counts
            .iter()
            .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
            .map(|(t, _)| t.to_string());
        if let Some(t) = winner {
            for &m in members {
                out.mentions[m].entity_type = Some(t.clone());
            }
        }
    }
    out
}
