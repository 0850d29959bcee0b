//! Minimal end-to-end library usage: ingest a CSV corpus, segment it into
//! stanzas, accumulate per-unit co-occurrence networks, and fit the
//! projection model. Run from the workspace root:
//!
//! ```text
//! cargo run -p epinet --example quickstart
//! ```

use epinet::accumulation::{accumulate_corpus, CooccurrenceMode};
use epinet::corpus::{segment_stanzas, Codebook, Corpus, CsvSchema, SegmentOptions};
use epinet::projection::{fit_model, LabeledVector};

fn main() -> Result<(), epinet::Error> {
    let codebook = Codebook::from_json_path("data/worked_example/codebook.json")?;
    let corpus = Corpus::from_csv_path(
        "data/worked_example/corpus.csv",
        &CsvSchema::default(),
        &codebook,
    )?;
    let options = SegmentOptions {
        // "Partner" is a simulated interlocutor, not a unit of analysis; its
        // codes count toward the participant sharing the stanza.
        non_units: ["Partner".to_string()].into(),
        ..SegmentOptions::default()
    };
    let corpus = segment_stanzas(&corpus, &options)?;
    let units = accumulate_corpus(&corpus, CooccurrenceMode::StanzaUnion)?;
    let labeled: Vec<LabeledVector> = units.iter().map(Into::into).collect();
    let (model, scores) = fit_model(&labeled, 2)?;
    println!("{} units, {} dims", scores.len(), model.retained_dims());
    Ok(())
}
