use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use highrecall_core::cluster::{import_memberships, soft_cluster};
use highrecall_core::corpus::{build_vocabulary, vectorize};
use highrecall_core::io::{read_corpus, read_matrix, read_vocabulary, write_corpus, write_matrix, write_vocabulary};
use highrecall_core::search::synthetic::generate_synthetic;
use highrecall_core::{Corpus, CorpusMatrix, MembershipMatrix};
use sha2::{Digest, Sha256};

pub const VOCAB_FILE: &str = "vocab.tsv";
pub const MATRIX_FILE: &str = "matrix.tsv";

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(file))
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    read_corpus(open(path)?).with_context(|| format!("in {}", path.display()))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Vectorises a corpus file into `out/vocab.tsv` and `out/matrix.tsv`.
pub fn cmd_ingest(corpus: &Path, out: &Path, min_df: usize) -> Result<CorpusMatrix> {
    let corpus = load_corpus(corpus)?;
    let vocab = build_vocabulary(corpus.docs(), min_df)?;
    let matrix = vectorize(corpus.docs(), &vocab);
    let mut w = create(&out.join(VOCAB_FILE))?;
    write_vocabulary(matrix.vocabulary(), &mut w)?;
    w.flush()?;
    let mut w = create(&out.join(MATRIX_FILE))?;
    write_matrix(&matrix, &mut w)?;
    w.flush()?;
    Ok(matrix)
}

pub fn load_matrix(dir: &Path) -> Result<CorpusMatrix> {
    let vocab_path = dir.join(VOCAB_FILE);
    let vocab = read_vocabulary(open(&vocab_path)?).with_context(|| format!("in {}", vocab_path.display()))?;
    let matrix_path = dir.join(MATRIX_FILE);
    read_matrix(open(&matrix_path)?, vocab).with_context(|| format!("in {}", matrix_path.display()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClusterSource {
    Build { k: usize, seed: u64, temperature: f64 },
    Import(PathBuf),
}

pub(crate) fn memberships(matrix: &CorpusMatrix, source: &ClusterSource) -> Result<MembershipMatrix> {
    match source {
        ClusterSource::Build { k, seed, temperature } => Ok(soft_cluster(matrix, *k, *temperature, *seed)?),
        ClusterSource::Import(path) => {
            import_memberships(open(path)?, matrix.ids()).with_context(|| format!("in {}", path.display()))
        }
    }
}

/// Clusters an ingested matrix (or validates an imported membership file
/// against it) and writes `doc_id \t cluster \t mu` triplets.
pub fn cmd_cluster(ingested: &Path, source: &ClusterSource, out: &Path) -> Result<MembershipMatrix> {
    let matrix = load_matrix(ingested)?;
    let mem = memberships(&matrix, source)?;
    let mut w = create(out)?;
    mem.write_triplets(matrix.ids(), &mut w)?;
    w.flush()?;
    Ok(mem)
}

/// Writes the synthetic multi-facet corpus as JSON lines.
pub fn cmd_generate(modes: usize, n: usize, prevalence: f64, seed: u64, out: &Path) -> Result<usize> {
    anyhow::ensure!(modes >= 2, "need at least two relevant modes");
    anyhow::ensure!(prevalence > 0.0 && prevalence < 0.2, "prevalence must be in (0, 0.2)");
    let synth = generate_synthetic(modes, n, prevalence, seed);
    let mut w = create(out)?;
    write_corpus(&synth.docs, &mut w)?;
    w.flush()?;
    Ok(synth.docs.len())
}
