//! TF-IDF cosine similarity and hunk repetition counts.

use std::collections::{BTreeMap, HashMap};

use crate::model::Hunk;

/// Cosine similarity between `query` and every document, using smoothed
/// IDF `ln((1+N)/(1+df)) + 1` over the documents plus the query (N of them),
/// raw term counts and L2 normalisation.
pub fn tfidf_cosine<S: AsRef<str>>(docs: &[Vec<S>], query: &[S]) -> Vec<f64> {
    let n = (docs.len() + 1) as f64;
    let mut df: HashMap<&str, usize> = HashMap::new();
    for d in docs.iter().map(Vec::as_slice).chain(std::iter::once(query)) {
        let mut seen: Vec<&str> = d.iter().map(AsRef::as_ref).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_default() += 1;
        }
    }
    let idf = |t: &str| ((1.0 + n) / (1.0 + df[t] as f64)).ln() + 1.0;
    let q = unit_vector(query, &idf);
    docs.iter()
        .map(|d| {
            if d.is_empty() || query.is_empty() {
                return 0.0;
            }
            let v = unit_vector(d, &idf);
            let dot: f64 = q.iter().filter_map(|(t, x)| v.get(t).map(|y| x * y)).sum();
            dot.clamp(0.0, 1.0)
        })
        .collect()
}

fn unit_vector<'a, S: AsRef<str>>(d: &'a [S], idf: &dyn Fn(&str) -> f64) -> BTreeMap<&'a str, f64> {
    let mut tf: BTreeMap<&str, f64> = BTreeMap::new();
    for t in d {
        *tf.entry(t.as_ref()).or_default() += 1.0;
    }
    for (t, v) in tf.iter_mut() {
        *v *= idf(t);
    }
    let norm = tf.values().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        tf.values_mut().for_each(|v| *v /= norm);
    }
    tf
}

/// Whitespace-collapsed change text used for repetition equality.
pub fn normalized_change(h: &Hunk) -> String {
    let norm = |lines: &[String]| lines.iter().map(|l| l.split_whitespace().collect::<Vec<_>>().join(" ")).collect::<Vec<_>>().join("\n");
    format!("{}\u{0}{}", norm(&h.deleted_lines), norm(&h.added_lines))
}

/// For each hunk, how many hunks (itself included) carry the same change.
pub fn repetition_counts(hunks: &[Hunk]) -> Vec<usize> {
    let keys: Vec<String> = hunks.iter().map(normalized_change).collect();
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for k in &keys {
        *counts.entry(k.as_str()).or_default() += 1;
    }
    keys.iter().map(|k| counts[k.as_str()]).collect()
}
