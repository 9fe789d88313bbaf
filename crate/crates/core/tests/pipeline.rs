use std::collections::{BTreeMap, BTreeSet};

use lectern_core::corpus::{Corpus, DocumentRecord, QuestionType};
use lectern_core::embedding::{hash_embed, EmbeddingProvider, HashEmbedder};
use lectern_core::pipeline::{GenerateError, GeneratorAdapter, Pipeline, PipelineConfig, PipelineError};
use lectern_core::rerank::{LexicalScorer, PairScorer, ScoreError};
use lectern_core::FlatIndex;

fn corpus(answers: &[(&str, &str)]) -> Corpus {
    let records = answers
        .iter()
        .enumerate()
        .map(|(i, (id, answer))| DocumentRecord {
            doc_id: id.to_string(),
            week: 1 + i as u32 / 3,
            slide: 1 + i as u32 % 3,
            answer_text: answer.to_string(),
            question_text: None,
            qtype: QuestionType::Open,
            transcript_text: None,
            image_ref: Some(format!("weeks/week_01/slide_{:02}.png", i + 1)),
        })
        .collect();
    Corpus::from_parts(".", "c", "T", records, BTreeMap::new()).unwrap()
}

const FIVE: [(&str, &str); 5] = [
    ("qa1", "a perceptron computes a weighted sum"),
    ("qa2", "gradient descent follows the negative gradient"),
    ("qa3", "dropout disables random units while training"),
    ("qa4", "pooling downsamples feature maps"),
    ("qa5", "a validation set estimates generalization error"),
];

/// Scores pairs by the same cosine stage I uses, so reranking agrees with it.
struct CosineScorer;
impl PairScorer for CosineScorer {
    fn score(&self, q: &str, c: &str) -> Result<f64, ScoreError> {
        let (a, b) = (hash_embed(q, 256).unwrap(), hash_embed(c, 256).unwrap());
        Ok(a.dot(&b).unwrap())
    }
    fn name(&self) -> &str {
        "cosine"
    }
}

struct Broken;
impl GeneratorAdapter for Broken {
    fn generate(&self, _: &str, _: &str) -> Result<String, GenerateError> {
        Err(GenerateError("model offline".into()))
    }
    fn name(&self) -> &str {
        "broken"
    }
}

struct Shout;
impl GeneratorAdapter for Shout {
    fn generate(&self, _: &str, context: &str) -> Result<String, GenerateError> {
        Ok(context.to_uppercase())
    }
    fn name(&self) -> &str {
        "shout"
    }
}

fn setup(c: &Corpus) -> (FlatIndex, HashEmbedder) {
    let e = HashEmbedder::default();
    (c.build_index(&e).unwrap(), e)
}

#[test]
fn exact_answer_retrieves_itself() {
    let c = corpus(&FIVE);
    let (idx, e) = setup(&c);
    let p = Pipeline::new(&idx, &c, &e, &LexicalScorer);
    let r = p.retrieve(FIVE[2].1, &PipelineConfig::default()).unwrap();
    assert_eq!(r.best.doc_id, "qa3");
    assert!((r.best.stage1_score - 1.0).abs() < 1e-6);
    assert_eq!(r.candidates.len(), 1);
    assert_eq!(r.best, r.candidates[0]);
    assert_eq!(r.answer_text, FIVE[2].1);
    assert_eq!((r.week, r.slide), (1, 3));
    assert_eq!(r.image_ref.as_deref(), Some("weeks/week_01/slide_03.png"));
    assert!(!r.degraded);
}

#[test]
fn agreeing_scorer_changes_nothing() {
    let c = corpus(&FIVE);
    let (idx, e) = setup(&c);
    let p = Pipeline::new(&idx, &c, &e, &CosineScorer);
    for q in [
        "what is a perceptron",
        "gradient units training",
        "feature maps and error",
    ] {
        let on = PipelineConfig {
            final_n: 5,
            ..Default::default()
        };
        let off = PipelineConfig {
            rerank_enabled: false,
            ..on.clone()
        };
        let a = p.retrieve(q, &on).unwrap();
        let b = p.retrieve(q, &off).unwrap();
        let ids =
            |r: &lectern_core::RetrievalResponse| r.candidates.iter().map(|c| c.doc_id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&a), ids(&b));
        assert_eq!(a.answer_text, b.answer_text);
        assert_eq!((a.week, a.slide), (b.week, b.slide));
    }
}

#[test]
fn reranking_flips_the_distractor() {
    // tests/oracles/oracle.py, section "pipeline".
    let c = corpus(&[
        ("true", "a kernel slides over the image computing local features"),
        ("distractor", "kernel image kernel image kernel image kernel trick"),
        ("other", "pooling shrinks feature maps"),
    ]);
    let (idx, e) = setup(&c);
    let p = Pipeline::new(&idx, &c, &e, &LexicalScorer);
    let q = "what is a kernel in image features";
    let cfg = PipelineConfig {
        final_n: 3,
        ..Default::default()
    };

    let off = p
        .retrieve(
            q,
            &PipelineConfig {
                rerank_enabled: false,
                ..cfg.clone()
            },
        )
        .unwrap();
    let got: Vec<_> = off
        .candidates
        .iter()
        .map(|c| (c.doc_id.as_str(), c.stage1_score))
        .collect();
    let want = [
        ("distractor", 0.5188745058965285),
        ("true", 0.5039526374325938),
        ("other", 0.0),
    ];
    for ((gi, gs), (wi, ws)) in got.iter().zip(want) {
        assert_eq!(*gi, wi);
        assert!((gs - ws).abs() < 1e-9, "{gi}: {gs} vs {ws}");
    }

    let on = p.retrieve(q, &cfg).unwrap();
    let got: Vec<_> = on
        .candidates
        .iter()
        .map(|c| (c.doc_id.as_str(), c.stage2_score.unwrap()))
        .collect();
    assert_eq!(got, [("true", 0.5), ("distractor", 0.4), ("other", 0.0)]);
    assert_eq!(on.best.doc_id, "true");
}

#[test]
fn rank_invariants() {
    let c = corpus(&FIVE);
    let (idx, e) = setup(&c);
    let p = Pipeline::new(&idx, &c, &e, &LexicalScorer);
    let on = PipelineConfig::default();
    let off = PipelineConfig {
        rerank_enabled: false,
        ..Default::default()
    };
    for q in [
        "a weighted gradient",
        "random training units",
        "generalization of pooling maps",
    ] {
        let (_, plain) = p.rank(q, &off).unwrap();
        let search = idx.search(&e.embed(q).unwrap(), off.k).unwrap();
        assert_eq!(plain, search);

        let (_, reranked) = p.rank(q, &on).unwrap();
        let a: BTreeSet<_> = plain.iter().map(|c| &c.doc_id).collect();
        let b: BTreeSet<_> = reranked.iter().map(|c| &c.doc_id).collect();
        assert_eq!(a, b);
        assert_eq!(p.retrieve(q, &on).unwrap(), p.retrieve(q, &on).unwrap());
    }
}

#[test]
fn generator_rewrites_or_degrades() {
    let c = corpus(&FIVE);
    let (idx, e) = setup(&c);
    let cfg = PipelineConfig::default();

    let r = Pipeline::new(&idx, &c, &e, &LexicalScorer)
        .with_generator(&Shout)
        .retrieve(FIVE[0].1, &cfg)
        .unwrap();
    assert_eq!(r.answer_text, FIVE[0].1.to_uppercase());
    assert!(!r.degraded);

    let r = Pipeline::new(&idx, &c, &e, &LexicalScorer)
        .with_generator(&Broken)
        .retrieve(FIVE[0].1, &cfg)
        .unwrap();
    assert_eq!(r.answer_text, FIVE[0].1);
    assert!(r.degraded);
}

#[test]
fn errors() {
    let c = corpus(&FIVE);
    let (idx, e) = setup(&c);
    let p = Pipeline::new(&idx, &c, &e, &LexicalScorer);
    assert!(matches!(
        p.retrieve("?!", &PipelineConfig::default()),
        Err(PipelineError::EmptyQuery)
    ));
    assert!(matches!(
        p.retrieve(
            "x",
            &PipelineConfig {
                k: 1,
                final_n: 2,
                ..Default::default()
            }
        ),
        Err(PipelineError::InvalidConfig(_))
    ));

    let mut empty = FlatIndex::new(256);
    empty.finalize();
    let p = Pipeline::new(&empty, &c, &e, &LexicalScorer);
    assert!(matches!(
        p.retrieve("gradient", &PipelineConfig::default()),
        Err(PipelineError::Index(_))
    ));
}

#[test]
fn long_query_is_truncated_on_a_boundary() {
    let c = corpus(&FIVE);
    let (idx, e) = setup(&c);
    let p = Pipeline::new(&idx, &c, &e, &LexicalScorer);
    let q = "gradient descent follows ".repeat(400);
    let cfg = PipelineConfig {
        max_input_chars: 100,
        ..Default::default()
    };
    let r = p.retrieve(&q, &cfg).unwrap();
    assert!(r.query_used.chars().count() <= 100);
    assert!(q.starts_with(&r.query_used));
    assert!(
        r.query_used.ends_with("follows") || r.query_used.ends_with("descent") || r.query_used.ends_with("gradient")
    );
    assert_eq!(r.best.doc_id, "qa2");
}
