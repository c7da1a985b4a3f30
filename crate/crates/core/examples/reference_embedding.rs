//! Embeds a few sentences with the offline reference embedder, prints their
//! pairwise cosine similarities and shows the cache at work.

use mmrag::corpus::{Corpus, Example, OutputFormat, Split, TaskKind, TaskSpec};
use mmrag::embedding::{cosine, embed_corpus, reference_embed, EmbeddingCache, ReferenceEmbedder};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let texts = [
        "Ketoconazole increases the plasma concentration of simvastatin.",
        "Simvastatin levels rise when given with ketoconazole.",
        "Patients with asthma were enrolled at baseline.",
    ];
    let vectors = texts
        .iter()
        .map(|t| reference_embed(t, 64))
        .collect::<Result<Vec<_>, _>>()?;
    for (i, a) in vectors.iter().enumerate() {
        for (j, b) in vectors.iter().enumerate().skip(i + 1) {
            println!("cos({i}, {j}) = {:.4}", cosine(a, b)?);
        }
    }

    let task = TaskSpec::new(TaskKind::Ner, vec![], "Extract.", OutputFormat::EntityList)?;
    let examples = texts
        .iter()
        .enumerate()
        .map(|(i, t)| Example::new(format!("s{i}"), *t, ""))
        .collect();
    let corpus = Corpus::new(task, Split::Train, examples)?;

    let dir = std::env::temp_dir().join("mmrag-reference-embedding");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("cache.jsonl");
    let _ = std::fs::remove_file(&path);
    let embedder = ReferenceEmbedder::new(64)?;

    let cache = EmbeddingCache::open(&path)?;
    embed_corpus(&embedder, &corpus, &cache)?;
    println!(
        "first pass cached {} vectors in {}",
        cache.len(),
        path.display()
    );

    // A reopened cache serves every vector without calling the embedder.
    let reopened = EmbeddingCache::open(&path)?;
    let again = embed_corpus(&embedder, &corpus, &reopened)?;
    println!(
        "second pass: {} vectors, cache still holds {}",
        again.len(),
        reopened.len()
    );
    Ok(())
}
