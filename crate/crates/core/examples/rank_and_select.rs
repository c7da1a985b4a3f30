//! Ranks a synthetic drug-interaction training set against one test query
//! and shows what each selection mode picks from the ranking.

use mmrag::embedding::{embed_corpus, embed_corpus_as, EmbeddingCache, ReferenceEmbedder, Role};
use mmrag::rng::query_seed;
use mmrag::selection::{rank, select, SelectionMode, SelectionSpec};
use mmrag::synthetic;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = synthetic::ddi(7, 40, 5);
    let embedder = ReferenceEmbedder::new(256)?;
    let cache = EmbeddingCache::in_memory();
    let train = embed_corpus(&embedder, &data.train, &cache)?;
    let test = embed_corpus_as(&embedder, &data.test, &cache, Role::Query)?;

    let query = &data.test.examples()[0];
    let ranked = rank(&train, test.vector(&query.id).expect("embedded"), &query.id)?;
    println!("query {}: {}", query.id, query.text);
    println!("top of the ranking:");
    for line in ranked.to_tsv().lines().take(6) {
        println!("  {line}");
    }

    let modes = [
        SelectionMode::Top,
        SelectionMode::Diversity { gap: 3 },
        SelectionMode::Class,
        SelectionMode::Random {
            seed: query_seed(1, &query.id),
        },
    ];
    for mode in modes {
        let spec = SelectionSpec::new(mode, 4)?;
        let demos = select(&spec, &data.train, Some(&ranked))?;
        let picked: Vec<String> = demos
            .examples()
            .iter()
            .map(|e| format!("{} ({})", e.id, e.gold))
            .collect();
        println!("{:<34} {}", mode.to_string(), picked.join(", "));
    }
    Ok(())
}
