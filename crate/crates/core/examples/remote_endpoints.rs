//! Talks to OpenAI-compatible embedding and chat endpoints.
//!
//! ```text
//! MMRAG_EMBED_API_KEY=... MMRAG_LLM_API_KEY=... \
//!   cargo run -p mmrag --example remote_endpoints -- <endpoint> <embed-model> <dims> <chat-model>
//! ```
//!
//! Both keys are optional and sent as bearer tokens.

use mmrag::corpus::Example;
use mmrag::embedding::{cosine, Embedder, RemoteEmbedder, Role};
use mmrag::generation::{GenerationParams, GenerationRequest, LlmClient, RemoteLlm};
use mmrag::http::RetryPolicy;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [endpoint, embed_model, dims, chat_model] = args.as_slice() else {
        eprintln!("usage: remote_endpoints <endpoint> <embed-model> <dims> <chat-model>");
        return Ok(());
    };
    let retry = RetryPolicy {
        max_retries: 2,
        ..RetryPolicy::default()
    };

    let embedder = RemoteEmbedder::new(endpoint.as_str(), embed_model.as_str(), dims.parse()?)?
        .with_retry(retry);
    let texts = [
        "aspirin inhibits platelet aggregation",
        "aspirin reduces platelet activity",
    ];
    let vectors = embedder.embed_batch(&texts, Role::Passage)?;
    println!("cosine = {:.4}", cosine(&vectors[0], &vectors[1])?);

    let llm = RemoteLlm::new(
        endpoint.as_str(),
        chat_model.as_str(),
        GenerationParams::default(),
    )?
    .with_retry(retry);
    let query = Example::new("q1", "Aspirin increases the effect of warfarin.", "");
    let prompt =
        "Classify the drug interaction as ddi-mechanism, ddi-effect, ddi-advise or ddi-int.\n\n\
                  Input: Aspirin increases the effect of warfarin.\nOutput:";
    let completion = llm.generate(&GenerationRequest {
        query: &query,
        prompt,
        k: 0,
    })?;
    println!(
        "{} answered {:?} in {} ms",
        completion.client_name, completion.raw_text, completion.latency_ms
    );
    Ok(())
}
