//! Multi-modal, low-prevalence synthetic benchmark.
//!
//! Background documents each belong to one of several background topics and
//! mix that topic's vocabulary with a shared Zipfian general vocabulary. The
//! relevant class is split into `modes` facets of decreasing size; facet `j`
//! is hosted by background topic `j mod topics` and adds a vocabulary of its
//! own, so every relevant document carries at least one term that never
//! appears outside its facet.
//!
//! Labels: topic [`RELEVANT_TOPIC`] marks the whole relevant class and topic
//! `mode{j}` marks facet `j` (used to draw single-facet seed sets).

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::Document;
use crate::rng;

pub const RELEVANT_TOPIC: &str = "relevant";

pub fn mode_topic(mode: usize) -> String {
    format!("mode{mode}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub modes: usize,
    pub n: usize,
    pub prevalence: f64,
    pub seed: u64,
    pub background_topics: usize,
    pub general_terms: usize,
    pub topic_terms: usize,
    pub mode_terms: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Share of a background document's tokens drawn from its topic.
    pub topic_share: f64,
    /// Share of a relevant document's tokens drawn from its facet.
    pub mode_share: f64,
    /// Relative size of facet `j + 1` with respect to facet `j`.
    pub mode_decay: f64,
}

impl SyntheticSpec {
    pub fn new(modes: usize, n: usize, prevalence: f64, seed: u64) -> Self {
        Self {
            modes,
            n,
            prevalence,
            seed,
            background_topics: 10,
            general_terms: 500,
            topic_terms: 80,
            mode_terms: 15,
            min_len: 30,
            max_len: 70,
            topic_share: 0.5,
            mode_share: 0.2,
            mode_decay: 0.5,
        }
    }

    /// Relevant documents per facet: `floor(n * prevalence)` split with
    /// geometrically decreasing weights, largest remainder rounding.
    pub fn mode_sizes(&self) -> Vec<usize> {
        let total = (self.n as f64 * self.prevalence).floor() as usize;
        let weights: Vec<f64> = (0..self.modes).map(|j| self.mode_decay.powi(j as i32)).collect();
        let sum: f64 = weights.iter().sum();
        let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
        let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut order: Vec<usize> = (0..self.modes).collect();
        order.sort_by(|&a, &b| {
            let ra = exact[a] - exact[a].floor();
            let rb = exact[b] - exact[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let short = total - sizes.iter().sum::<usize>();
        for &j in order.iter().take(short) {
            sizes[j] += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub docs: Vec<Document>,
    /// Facet of each document, `None` for background.
    pub mode_of: Vec<Option<usize>>,
}

impl SyntheticCorpus {
    pub fn relevant_count(&self) -> usize {
        self.mode_of.iter().filter(|m| m.is_some()).count()
    }
}

/// Shorthand for [`generate`] with default shape parameters.
pub fn generate_synthetic(modes: usize, n: usize, prevalence: f64, seed: u64) -> SyntheticCorpus {
    generate(&SyntheticSpec::new(modes, n, prevalence, seed))
}

struct Zipf {
    cdf: Vec<f64>,
}

impl Zipf {
    fn new(n: usize, exponent: f64) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = (0..n)
            .map(|r| {
                acc += 1.0 / ((r + 1) as f64).powf(exponent);
                acc
            })
            .collect();
        cdf.iter_mut().for_each(|c| *c /= acc);
        Self { cdf }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

pub fn generate(spec: &SyntheticSpec) -> SyntheticCorpus {
    assert!(spec.modes >= 2, "need at least two relevant modes");
    assert!(
        spec.prevalence > 0.0 && spec.prevalence < 0.2,
        "prevalence must be in (0, 0.2)"
    );
    let mut rng = rng::stream(spec.seed, 0);
    let general = Zipf::new(spec.general_terms, 1.0);
    let topical = Zipf::new(spec.topic_terms, 0.8);
    let sizes = spec.mode_sizes();

    let mut kinds: Vec<Option<usize>> = sizes
        .iter()
        .enumerate()
        .flat_map(|(j, &s)| std::iter::repeat_n(Some(j), s))
        .collect();
    kinds.resize(spec.n, None);
    kinds.shuffle(&mut rng);

    let mut docs = Vec::with_capacity(spec.n);
    for (i, kind) in kinds.iter().enumerate() {
        let len = rng.random_range(spec.min_len..=spec.max_len);
        let mut tokens: Vec<String> = Vec::with_capacity(len);
        let (topic, mode_share, topic_share) = match *kind {
            Some(j) => (
                j % spec.background_topics,
                spec.mode_share,
                spec.topic_share * (1.0 - spec.mode_share),
            ),
            None => (
                rng.random_range(0..spec.background_topics),
                0.0,
                spec.topic_share,
            ),
        };
        if let Some(j) = *kind {
            tokens.push(format!("m{j}x{}", rng.random_range(0..spec.mode_terms)));
        }
        while tokens.len() < len {
            let u: f64 = rng.random();
            let token = if u < mode_share {
                format!("m{}x{}", kind.unwrap(), rng.random_range(0..spec.mode_terms))
            } else if u < mode_share + topic_share {
                format!("t{topic}w{}", topical.sample(&mut rng))
            } else {
                format!("g{}", general.sample(&mut rng))
            };
            tokens.push(token);
        }
        let mut doc = Document::new(format!("doc{i:05}"), tokens.join(" "));
        doc.labels
            .insert(RELEVANT_TOPIC.to_string(), u8::from(kind.is_some()));
        if let Some(j) = *kind {
            doc.labels.insert(mode_topic(j), 1);
        }
        docs.push(doc);
    }
    SyntheticCorpus {
        docs,
        mode_of: kinds,
    }
}
