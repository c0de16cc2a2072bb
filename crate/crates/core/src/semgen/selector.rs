//! Semantic text selection: cosine similarity matrix, mean centrality index,
//! and argmax selection of the most representative sample.

use serde::{Deserialize, Serialize};

use crate::diagnose::provider::LlmProvider;

use super::embed::{Embedder, UnitVector};
use super::prompt::PromptTemplate;
use super::SemGenError;

/// One sampled semanticization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticText {
    pub text: String,
    pub prompt_id: String,
    pub sample_index: usize,
}

/// Symmetric n×n cosine similarity matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    n: usize,
    entries: Vec<f64>,
}

const SYMMETRY_TOLERANCE: f64 = 1e-12;
const DIAGONAL_TOLERANCE: f64 = 1e-9;
const RANGE_TOLERANCE: f64 = 1e-9;

impl SimilarityMatrix {
    fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self, SemGenError> {
        debug_assert_eq!(entries.len(), n * n);
        for i in 0..n {
            for j in 0..n {
                let v = entries[i * n + j];
                if !(-1.0 - RANGE_TOLERANCE..=1.0 + RANGE_TOLERANCE).contains(&v) {
                    return Err(SemGenError::SimilarityOutOfRange(v));
                }
                if (v - entries[j * n + i]).abs() > SYMMETRY_TOLERANCE {
                    return Err(SemGenError::AsymmetricSimilarity { i, j });
                }
            }
            let d = entries[i * n + i];
            if (d - 1.0).abs() > DIAGONAL_TOLERANCE {
                return Err(SemGenError::BadDiagonal { index: i, value: d });
            }
        }
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }
}

/// Mean centrality index per text: the average similarity to every other
/// sample. Only defined for two or more samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityScores(pub Vec<f64>);

/// Pairwise dot products of unit vectors (all the same dimension).
pub fn similarity_matrix(vectors: &[UnitVector]) -> Result<SimilarityMatrix, SemGenError> {
    if vectors.is_empty() {
        return Err(SemGenError::EmptyList);
    }
    let d = vectors[0].dims();
    for v in vectors {
        if v.dims() != d {
            return Err(SemGenError::DimMismatch {
                expected: d,
                actual: v.dims(),
            });
        }
    }
    let n = vectors.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            entries[i * n + j] = vectors[i].dot(&vectors[j])?;
        }
    }
    SimilarityMatrix::from_entries(n, entries)
}

/// Off-diagonal row means of the similarity matrix.
pub fn mean_centrality(s: &SimilarityMatrix) -> Result<CentralityScores, SemGenError> {
    let n = s.n();
    if n < 2 {
        return Err(SemGenError::TooFewTexts(n));
    }
    let mut scores = Vec::with_capacity(n);
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            if j != i {
                sum += s.get(i, j);
            }
        }
        scores.push(sum / (n - 1) as f64);
    }
    Ok(CentralityScores(scores))
}

/// Pick the text with the highest mean centrality; ties break to the lowest
/// index. A single text is returned directly without embedding.
pub fn select_best<'a>(
    texts: &'a [SemanticText],
    embedder: &dyn Embedder,
) -> Result<(usize, &'a SemanticText), SemGenError> {
    match texts.len() {
        0 => Err(SemGenError::EmptyList),
        1 => Ok((0, &texts[0])),
        _ => {
            let vectors: Vec<UnitVector> = texts
                .iter()
                .map(|t| embedder.embed(&t.text))
                .collect::<Result<_, _>>()?;
            let matrix = similarity_matrix(&vectors)?;
            let scores = mean_centrality(&matrix)?;
            let best = argmax_lowest_index(&scores.0);
            Ok((best, &texts[best]))
        }
    }
}

fn argmax_lowest_index(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Draw `n` semanticizations from the provider. Each sample gets its own
/// derived seed so a deterministic provider yields a pure function of
/// `(prompt, n, seed)`; results are ordered by sample index.
pub fn sample_semantics(
    prompt: &PromptTemplate,
    provider: &dyn LlmProvider,
    n: usize,
    seed: u64,
    temperature: f64,
) -> Result<Vec<SemanticText>, SemGenError> {
    if n == 0 {
        return Err(SemGenError::EmptyList);
    }
    let rendered = prompt.render();
    let prompt_id = prompt.prompt_id();
    let mut out = Vec::with_capacity(n);
    for sample_index in 0..n {
        let sample_seed = seed.wrapping_add(sample_index as u64);
        let text = provider
            .complete(&rendered, temperature, sample_seed)
            .map_err(|source| SemGenError::Provider {
                sample_index,
                source,
            })?;
        out.push(SemanticText {
            text,
            prompt_id: prompt_id.clone(),
            sample_index,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semgen::embed::HashEmbedder;

    fn unit(components: Vec<f64>) -> UnitVector {
        UnitVector::normalize(components).unwrap()
    }

    fn texts(contents: &[&str]) -> Vec<SemanticText> {
        contents
            .iter()
            .enumerate()
            .map(|(i, t)| SemanticText {
                text: t.to_string(),
                prompt_id: "p".into(),
                sample_index: i,
            })
            .collect()
    }

    #[test]
    fn identical_vectors_give_all_ones() {
        let v = unit(vec![1.0, 2.0, 3.0]);
        let m = similarity_matrix(&[v.clone(), v.clone(), v]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((m.get(i, j) - 1.0).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn orthogonal_vectors_give_identity() {
        let m = similarity_matrix(&[unit(vec![1.0, 0.0]), unit(vec![0.0, 1.0])]).unwrap();
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(1, 0), 0.0);
        assert_eq!(m.get(1, 1), 1.0);
    }

    #[test]
    fn matches_brute_force_dot_products_exactly() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let d = 16;
        let vectors: Vec<UnitVector> = (0..6)
            .map(|_| unit((0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect();
        let m = similarity_matrix(&vectors).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let mut dot = 0.0;
                for k in 0..d {
                    dot += vectors[i].components()[k] * vectors[j].components()[k];
                }
                assert_eq!(m.get(i, j), dot, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn dim_mismatch_rejected() {
        let err =
            similarity_matrix(&[unit(vec![1.0, 0.0]), unit(vec![1.0, 0.0, 0.0])]).unwrap_err();
        assert!(matches!(err, SemGenError::DimMismatch { .. }));
    }

    #[test]
    fn centrality_of_all_ones_matrix() {
        let v = unit(vec![2.0, 0.0]);
        let m = similarity_matrix(&[v.clone(), v.clone(), v]).unwrap();
        let mu = mean_centrality(&m).unwrap();
        for s in &mu.0 {
            assert!((s - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn hand_computed_centrality_case() {
        // v1=(1,0), v2=(1,0), v3=(0,1): mu = (0.5, 0.5, 0).
        let m = similarity_matrix(&[
            unit(vec![1.0, 0.0]),
            unit(vec![1.0, 0.0]),
            unit(vec![0.0, 1.0]),
        ])
        .unwrap();
        let mu = mean_centrality(&m).unwrap();
        assert_eq!(mu.0, vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn single_text_matrix_is_too_few() {
        let m = similarity_matrix(&[unit(vec![1.0, 0.0])]).unwrap();
        assert!(matches!(
            mean_centrality(&m),
            Err(SemGenError::TooFewTexts(1))
        ));
    }

    #[test]
    fn select_best_single_text_returns_index_zero() {
        let ts = texts(&["only"]);
        // An embedder that always fails proves n=1 skips embedding.
        struct Failing;
        impl Embedder for Failing {
            fn dims(&self) -> usize {
                1
            }
            fn embed(&self, _: &str) -> Result<UnitVector, SemGenError> {
                Err(SemGenError::EmptyText)
            }
        }
        let (idx, t) = select_best(&ts, &Failing).unwrap();
        assert_eq!(idx, 0);
        assert_eq!(t.text, "only");
    }

    #[test]
    fn select_best_tie_breaks_to_lowest_index() {
        // Same duplicated-vector configuration as the hand-computed case.
        struct Fixture;
        impl Embedder for Fixture {
            fn dims(&self) -> usize {
                2
            }
            fn embed(&self, text: &str) -> Result<UnitVector, SemGenError> {
                match text {
                    "a" | "b" => UnitVector::new(vec![1.0, 0.0]),
                    _ => UnitVector::new(vec![0.0, 1.0]),
                }
            }
        }
        let ts = texts(&["a", "b", "c"]);
        let (idx, _) = select_best(&ts, &Fixture).unwrap();
        assert_eq!(idx, 0);
    }

    #[test]
    fn select_best_matches_independent_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xbead);
        let embedder = HashEmbedder::default();
        for _ in 0..20 {
            let n = rng.gen_range(2..=8);
            let ts: Vec<SemanticText> = (0..n)
                .map(|i| {
                    let words: Vec<String> = (0..rng.gen_range(3..9))
                        .map(|_| format!("w{}", rng.gen_range(0..30)))
                        .collect();
                    SemanticText {
                        text: words.join(" "),
                        prompt_id: "p".into(),
                        sample_index: i,
                    }
                })
                .collect();
            let (got, _) = select_best(&ts, &embedder).unwrap();

            // Independent route: explicit loops over raw components.
            let vecs: Vec<UnitVector> =
                ts.iter().map(|t| embedder.embed(&t.text).unwrap()).collect();
            let mut best = 0;
            let mut best_mu = f64::NEG_INFINITY;
            for i in 0..n {
                let mut sum = 0.0;
                for (j, vj) in vecs.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let mut dot = 0.0;
                    for k in 0..vecs[i].dims() {
                        dot += vecs[i].components()[k] * vj.components()[k];
                    }
                    sum += dot;
                }
                let mu = sum / (n - 1) as f64;
                if mu > best_mu {
                    best_mu = mu;
                    best = i;
                }
            }
            assert_eq!(got, best);
        }
    }

    #[test]
    fn empty_list_rejected() {
        let embedder = HashEmbedder::default();
        assert!(matches!(
            select_best(&[], &embedder),
            Err(SemGenError::EmptyList)
        ));
    }

    #[test]
    fn sampling_is_pure_function_of_prompt_n_seed() {
        use crate::diagnose::MockProvider;
        use crate::semgen::prompt::{build_semantic_prompt, PromptVariant};
        let prompt = build_semantic_prompt(
            PromptVariant::ZeroShot,
            "d1 @ 1000: delay_ms=40 ms, throughput_mbps=3 Mbps",
            &[],
            "",
        )
        .unwrap();
        let a = sample_semantics(&prompt, &MockProvider::new(), 5, 99, 0.0).unwrap();
        let b = sample_semantics(&prompt, &MockProvider::new(), 5, 99, 0.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        for (i, s) in a.iter().enumerate() {
            assert_eq!(s.sample_index, i);
            assert!(!s.text.is_empty());
        }
        let single = sample_semantics(&prompt, &MockProvider::new(), 1, 99, 0.0).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].text, a[0].text);
    }

    #[test]
    fn unreachable_remote_fails_at_sample_index_zero() {
        use crate::diagnose::provider::RemoteProvider;
        use crate::semgen::prompt::{build_semantic_prompt, PromptVariant};
        let provider =
            RemoteProvider::new("http://127.0.0.1:1/v1/chat".into(), None, "m".into())
                .unwrap()
                .with_retry_policy(0, 1);
        let prompt = build_semantic_prompt(PromptVariant::ZeroShot, "x", &[], "").unwrap();
        let err = sample_semantics(&prompt, &provider, 5, 0, 0.7).unwrap_err();
        match err {
            SemGenError::Provider { sample_index, .. } => assert_eq!(sample_index, 0),
            other => panic!("expected Provider error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_never_lowers_rank() {
        use rand::{Rng, SeedableRng};
        let embedder = HashEmbedder::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xd0d0);
        for _ in 0..20 {
            let n = rng.gen_range(3..=6);
            let base: Vec<SemanticText> = (0..n)
                .map(|i| SemanticText {
                    text: (0..5)
                        .map(|_| format!("t{}", rng.gen_range(0..40)))
                        .collect::<Vec<_>>()
                        .join(" "),
                    prompt_id: "p".into(),
                    sample_index: i,
                })
                .collect();
            let rank_of = |ts: &[SemanticText], target: usize| -> usize {
                let vecs: Vec<UnitVector> =
                    ts.iter().map(|t| embedder.embed(&t.text).unwrap()).collect();
                let m = similarity_matrix(&vecs).unwrap();
                let mu = mean_centrality(&m).unwrap().0;
                mu.iter().filter(|&&s| s > mu[target]).count()
            };
            let pick = rng.gen_range(0..n);
            let before = rank_of(&base, pick);
            let mut dup = base.clone();
            dup.push(SemanticText {
                text: base[pick].text.clone(),
                prompt_id: "p".into(),
                sample_index: n,
            });
            let after = rank_of(&dup, pick);
            assert!(
                after <= before,
                "rank worsened from {before} to {after} after duplicating"
            );
        }
    }
}
