//! Builds span-corruption examples for a handful of notes and shows that each
//! one can be spliced back into the original text.
//!
//! Run with `cargo run --example pretrain_masking`.

use clinforge::annotate::{annotate_lexicon, TermLexicon};
use clinforge::corpus::{AnnotationSpan, Document, SpanSource};
use clinforge::masking::{build_pretraining_example, reconstruct, BuildOutcome, MaskingConfig};

fn main() -> clinforge::Result<()> {
    let lexicon = TermLexicon::from_terms(["chest pain", "shortness of breath", "aspirin", "hypertension"])?;
    let docs = [
        Document::new("note-1", "Patient reports chest pain since Monday. History of hypertension. Started aspirin."),
        Document::new("note-2", "Denies shortness of breath. Vitals stable overnight."),
        Document::new(
            "note-3",
            "Seen in clinic today. Afebrile. Mild cough. Lungs clear. Plan rest. Return if worse. Follow up in two weeks.",
        ),
    ];
    // stand-in for the output of an external NER tagger
    let ner = [
        vec![AnnotationSpan::new(16, 26, "PROBLEM", SpanSource::ExternalNer)],
        vec![],
        vec![],
    ];
    let config = MaskingConfig::with_seed(42);

    for (doc, ner_spans) in docs.iter().zip(&ner) {
        let lexicon_spans = annotate_lexicon(doc, &lexicon);
        let BuildOutcome::Example(ex) = build_pretraining_example(doc, &lexicon_spans, ner_spans, &config)? else {
            println!("{}: skipped", doc.id);
            continue;
        };
        println!("{} [{}]", doc.id, ex.policy);
        println!("  input : {}", ex.masked_input);
        println!("  target: {}", ex.target);
        assert_eq!(reconstruct(&ex.masked_input, &ex.target)?, doc.text);
    }

    let combined = MaskingConfig { combined: true, ..config };
    let doc = &docs[0];
    let ex = build_pretraining_example(doc, &annotate_lexicon(doc, &lexicon), &[], &combined)?
        .example()
        .expect("non-empty note");
    println!("combined [{}]\n  input : {}\n  target: {}", ex.policy, ex.masked_input, ex.target);
    Ok(())
}
