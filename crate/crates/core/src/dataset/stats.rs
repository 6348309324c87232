//! Corpus statistics and a sampled diversity score.

use super::DatasetRecord;
use crate::reasoner::QuestionType;
use rand::seq::index::sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Maps text to a fixed-size vector.
pub trait Embedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, String>;
}

/// Hashed character trigrams, L2-normalised.
#[derive(Debug, Clone, Copy)]
pub struct TrigramEmbedder {
    pub dim: usize,
}

impl Default for TrigramEmbedder {
    fn default() -> Self {
        Self { dim: 512 }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

impl Embedder for TrigramEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, String> {
        let dim = self.dim.max(1);
        let mut v = vec![0.0; dim];
        let chars: Vec<char> = text.to_lowercase().chars().collect();
        for w in chars.windows(3) {
            let s: String = w.iter().collect();
            v[(fnv1a(s.as_bytes()) % dim as u64) as usize] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    if a == b {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    (1.0 - dot / (na * nb)).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub figures: usize,
    pub qa_pairs: usize,
    pub qa_per_figure: f64,
    pub substrate_kinds: BTreeMap<String, usize>,
    pub substrate_groups: BTreeMap<String, usize>,
    pub question_types: BTreeMap<String, usize>,
    pub unique_patterns: usize,
    /// Mean pairwise cosine distance of sampled Q&A texts; `None` with
    /// fewer than two pairs or when embedding fails.
    pub diversity: Option<f64>,
    pub diversity_sample: usize,
}

/// Counts over the corpus. Diversity uses up to `sample_size` questions
/// drawn with a fixed seed, so the score is reproducible.
pub fn compute_stats(
    records: &[DatasetRecord],
    embedder: &dyn Embedder,
    sample_size: usize,
    seed: u64,
) -> Result<CorpusStats, String> {
    if records.is_empty() {
        return Err("corpus is empty".into());
    }
    let mut kinds = BTreeMap::new();
    let mut groups = BTreeMap::new();
    let mut types: BTreeMap<String, usize> = QuestionType::ALL.iter().map(|t| (t.as_str().to_string(), 0)).collect();
    let mut patterns = BTreeSet::new();
    let mut questions = Vec::new();
    for r in records {
        for s in &r.scene.substrates {
            *kinds.entry(s.kind.clone()).or_default() += 1;
            *groups.entry(s.group.clone()).or_default() += 1;
        }
        patterns.insert(r.pattern.as_str());
        for p in &r.qa {
            *types.entry(p.qtype.as_str().to_string()).or_default() += 1;
            questions.push(format!("{} {}", p.question, p.answer));
        }
    }
    let n = sample_size.min(questions.len());
    let diversity = if n >= 2 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample(&mut rng, questions.len(), n).into_vec();
        idx.sort_unstable();
        let vecs: Result<Vec<Vec<f64>>, String> = idx.iter().map(|&i| embedder.embed(&questions[i])).collect();
        vecs.ok().map(|vecs| {
            let mut total = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    total += cosine_distance(&vecs[i], &vecs[j]);
                }
            }
            total / (n * (n - 1) / 2) as f64
        })
    } else {
        None
    };
    Ok(CorpusStats {
        figures: records.len(),
        qa_pairs: questions.len(),
        qa_per_figure: questions.len() as f64 / records.len() as f64,
        substrate_kinds: kinds,
        substrate_groups: groups,
        question_types: types,
        unique_patterns: patterns.len(),
        diversity,
        diversity_sample: if diversity.is_some() { n } else { 0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_texts_have_zero_distance() {
        let e = TrigramEmbedder::default();
        let a = e.embed("Find the length of AB.").unwrap();
        assert!(cosine_distance(&a, &a).abs() < 1e-12);
        let b = e.embed("What is the measure of angle XYZ?").unwrap();
        let d = cosine_distance(&a, &b);
        assert!(d > 0.2 && d <= 1.0, "{d}");
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(compute_stats(&[], &TrigramEmbedder::default(), 10, 0).is_err());
    }
}
