use std::collections::HashMap;

use highrecall_core::corpus::{build_vocabulary, tokenize, vectorize};
use highrecall_core::Document;
use proptest::prelude::*;

const WORDS: [&str; 12] = [
    "tax", "trade", "oil", "price", "bank", "rate", "gold", "wheat", "ship", "port", "coal", "steel",
];

fn docs_strategy() -> impl Strategy<Value = Vec<Document>> {
    prop::collection::vec(prop::collection::vec(0usize..WORDS.len(), 0..15), 3..40).prop_map(|texts| {
        texts
            .into_iter()
            .enumerate()
            .map(|(i, words)| {
                let text: Vec<&str> = words.iter().map(|&w| WORDS[w]).collect();
                Document::new(format!("d{i}"), text.join(" "))
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn vocabulary_respects_min_df(docs in docs_strategy(), min_df in 1usize..5) {
        let Ok(vocab) = build_vocabulary(&docs, min_df) else { return Ok(()); };
        let mut df: HashMap<String, usize> = HashMap::new();
        for d in &docs {
            let mut terms = tokenize(&d.text);
            terms.sort();
            terms.dedup();
            for t in terms {
                *df.entry(t).or_default() += 1;
            }
        }
        let mut expected: Vec<&String> = df.iter().filter(|(_, &c)| c >= min_df).map(|(t, _)| t).collect();
        expected.sort();
        let got: Vec<&str> = vocab.entries().map(|e| e.0).collect();
        prop_assert_eq!(got.len(), expected.len());
        for (i, (term, index, d, idf)) in vocab.entries().enumerate() {
            prop_assert_eq!(term, expected[i].as_str());
            prop_assert_eq!(index, i);
            prop_assert_eq!(d, df[term]);
            prop_assert!((idf - (docs.len() as f64 / d as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn rows_are_unit_or_zero_and_deterministic(docs in docs_strategy()) {
        let Ok(vocab) = build_vocabulary(&docs, 3) else { return Ok(()); };
        let m = vectorize(&docs, &vocab);
        prop_assert_eq!(m.len(), docs.len());
        for row in m.rows() {
            prop_assert!(row.indices().windows(2).all(|w| w[0] < w[1]));
            prop_assert!(row.values().iter().all(|&v| v != 0.0));
            prop_assert!(row.indices().iter().all(|&j| (j as usize) < vocab.len()));
            if !row.is_zero() {
                prop_assert!((row.norm() - 1.0).abs() <= 1e-9);
            }
        }
        let again = vectorize(&docs, &build_vocabulary(&docs, 3).unwrap());
        prop_assert_eq!(again.rows(), m.rows());
    }

    #[test]
    fn document_order_does_not_change_vocabulary(docs in docs_strategy()) {
        let mut shuffled = docs.clone();
        shuffled.reverse();
        let a = build_vocabulary(&docs, 2);
        let b = build_vocabulary(&shuffled, 2);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false),
        }
    }
}

#[test]
fn hand_evaluated_tf_idf_row() {
    let docs: Vec<Document> = ["tax tax trade", "tax", "trade", "tax trade", "oil"]
        .iter()
        .enumerate()
        .map(|(i, t)| Document::new(format!("d{i}"), *t))
        .collect();
    let vocab = build_vocabulary(&docs, 3).unwrap();
    let m = vectorize(&docs, &vocab);
    let tax = vocab.index_of("tax").unwrap();
    let trade = vocab.index_of("trade").unwrap();
    let idf_tax = (5.0f64 / 3.0).ln();
    let idf_trade = (5.0f64 / 3.0).ln();
    let (a, b) = (2.0 * idf_tax, idf_trade);
    let n = (a * a + b * b).sqrt();
    assert!((m.row(0).get(tax as u32) - a / n).abs() < 1e-12);
    assert!((m.row(0).get(trade as u32) - b / n).abs() < 1e-12);
    assert!(m.row(4).is_zero());
}
