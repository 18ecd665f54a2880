//! Fixtures shared by the criterion benches in `benches/`.

use std::sync::Arc;

use highrecall_core::classifier::Example;
use highrecall_core::cluster::soft_cluster;
use highrecall_core::corpus::{build_vocabulary, vectorize};
use highrecall_core::search::synthetic::{generate_synthetic, RELEVANT_TOPIC};
use highrecall_core::{Corpus, CorpusMatrix, MembershipMatrix, Provenance, TrainingSet};

pub struct Fixture {
    pub corpus: Corpus,
    pub matrix: Arc<CorpusMatrix>,
    pub memberships: Arc<MembershipMatrix>,
}

/// Synthetic corpus of `n` documents clustered into `k` arms.
pub fn fixture(n: usize, k: usize) -> Fixture {
    let corpus = Corpus::new(generate_synthetic(5, n, 0.02, 7).docs).expect("synthetic corpus");
    let vocab = build_vocabulary(corpus.docs(), 3).expect("vocabulary");
    let matrix = Arc::new(vectorize(corpus.docs(), &vocab));
    let memberships = Arc::new(soft_cluster(&matrix, k, 0.1, 7).expect("clusters"));
    Fixture {
        corpus,
        matrix,
        memberships,
    }
}

/// Every relevant document plus the first `negatives` others.
pub fn training_set(fx: &Fixture, negatives: usize) -> TrainingSet {
    let mut examples = Vec::new();
    let mut left = negatives;
    for (row, doc) in fx.corpus.docs().iter().enumerate() {
        let label = doc.is_relevant(RELEVANT_TOPIC);
        if label || left > 0 {
            left -= usize::from(!label);
            examples.push(Example {
                x: fx.matrix.row(row).clone(),
                label,
                provenance: Provenance::Reviewed,
            });
        }
    }
    TrainingSet::new(examples)
}
