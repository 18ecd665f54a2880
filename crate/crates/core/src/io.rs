//! Corpus-side file formats.
//!
//! - corpus: one JSON object per line with `id`, `text`, optional `labels`
//!   (topic to 0/1) and optional `stratum_weight` (default 1.0);
//! - vocabulary: `term \t index \t df \t idf`;
//! - matrix: `doc_id \t index:weight index:weight ...`, rows in corpus order.

use std::io::{BufRead, Write};

use crate::corpus::{Corpus, CorpusError, CorpusMatrix, Document, SparseVector, Vocabulary};

pub fn read_corpus<R: BufRead>(reader: R) -> Result<Corpus, CorpusError> {
    let mut docs = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: n + 1,
            message: e.to_string(),
        })?;
        if let Some((topic, v)) = doc.labels.iter().find(|(_, &v)| v > 1) {
            return Err(CorpusError::Parse {
                line: n + 1,
                message: format!("label for `{topic}` must be 0 or 1, got {v}"),
            });
        }
        docs.push(doc);
    }
    Corpus::new(docs)
}

pub fn write_corpus<W: Write>(docs: &[Document], mut out: W) -> std::io::Result<()> {
    for doc in docs {
        serde_json::to_writer(&mut out, doc)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_vocabulary<W: Write>(vocab: &Vocabulary, mut out: W) -> std::io::Result<()> {
    for (term, index, df, idf) in vocab.entries() {
        writeln!(out, "{term}\t{index}\t{df}\t{idf}")?;
    }
    Ok(())
}

pub fn read_vocabulary<R: BufRead>(reader: R) -> Result<Vocabulary, CorpusError> {
    let mut entries = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let bad = |message: &str| CorpusError::Parse {
            line: n + 1,
            message: message.to_string(),
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(bad("expected `term \\t index \\t df \\t idf`"));
        }
        let index: usize = f[1].parse().map_err(|_| bad("bad index"))?;
        if index != entries.len() {
            return Err(bad("indices must be contiguous from 0"));
        }
        let df: usize = f[2].parse().map_err(|_| bad("bad df"))?;
        let idf: f64 = f[3].parse().map_err(|_| bad("bad idf"))?;
        entries.push((f[0].to_string(), df, idf));
    }
    let vocab = Vocabulary::from_entries(entries.clone());
    if vocab.entries().map(|e| e.0).ne(entries.iter().map(|e| e.0.as_str())) {
        return Err(CorpusError::Parse {
            line: 0,
            message: "terms must be in lexicographic index order".into(),
        });
    }
    Ok(vocab)
}

pub fn write_matrix<W: Write>(matrix: &CorpusMatrix, mut out: W) -> std::io::Result<()> {
    for (row, id) in matrix.ids().iter().enumerate() {
        out.write_all(id.as_bytes())?;
        for (j, v) in matrix.row(row).iter() {
            write!(out, "\t{j}:{v}")?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_matrix<R: BufRead>(reader: R, vocab: Vocabulary) -> Result<CorpusMatrix, CorpusError> {
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let bad = |message: &str| CorpusError::Parse {
            line: n + 1,
            message: message.to_string(),
        };
        let mut fields = line.split('\t');
        let id = fields.next().ok_or_else(|| bad("missing id"))?;
        let mut pairs = Vec::new();
        for f in fields {
            let (j, v) = f.split_once(':').ok_or_else(|| bad("expected index:weight"))?;
            pairs.push((
                j.parse().map_err(|_| bad("bad index"))?,
                v.parse().map_err(|_| bad("bad weight"))?,
            ));
        }
        ids.push(id.to_string());
        rows.push(SparseVector::from_pairs(pairs));
    }
    CorpusMatrix::from_rows(ids, rows, vocab)
}
