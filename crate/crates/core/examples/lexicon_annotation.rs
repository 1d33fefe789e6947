//! Longest-match term annotation, and how overlapping spans from one source
//! are coalesced.
//!
//! Run with `cargo run --example lexicon_annotation`.

use clinforge::annotate::{annotate_lexicon, merge_overlapping, TermLexicon};
use clinforge::corpus::{AnnotationSpan, Document, SpanSource};

fn main() -> clinforge::Result<()> {
    let lexicon = TermLexicon::from_terms(["diabetes", "type 2 diabetes mellitus", "insulin", "blood glucose"])?;
    let doc = Document::new(
        "n1",
        "Known Type 2 Diabetes Mellitus on insulin; blood glucose 180. Diabetes education given.",
    );
    for span in annotate_lexicon(&doc, &lexicon) {
        println!("{:>3}..{:<3} {:<28} -> {}", span.start, span.end, &doc.text[span.start..span.end], span.label);
    }

    let tagged = vec![
        AnnotationSpan::new(6, 30, "PROBLEM", SpanSource::ExternalNer),
        AnnotationSpan::new(12, 30, "PROBLEM", SpanSource::ExternalNer),
        AnnotationSpan::new(30, 41, "TREATMENT", SpanSource::ExternalNer),
    ];
    for span in merge_overlapping(&tagged) {
        println!("merged {}..{} {:?} {}", span.start, span.end, &doc.text[span.start..span.end], span.label);
    }
    Ok(())
}
