//! Learns section headers from training notes, then ranks candidate notes by
//! how many of those headers they share and splits the best one into sections.
//!
//! Run with `cargo run --example section_selection`.

use clinforge::corpus::Document;
use clinforge::sectionizer::{
    build_header_lexicon, extract_headers, score_candidates, select_top_n, split_sections,
};

fn main() {
    let training = [
        Document::new("t1", "CHIEF COMPLAINT:\nCough.\nHISTORY OF PRESENT ILLNESS:\nThree days.\nPLAN:\nFluids."),
        Document::new("t2", "CHIEF COMPLAINT:\nRash.\nMEDICATIONS:\nNone.\nASSESSMENT:\nContact dermatitis."),
    ];
    let lexicon = build_header_lexicon(&training);
    println!("lexicon: {:?}", lexicon.counts);

    let candidates = [
        Document::new("c1", "Seen for follow up.\nDoing well."),
        Document::new("c2", "CHIEF COMPLAINT:\nSore throat.\nMEDICATIONS:\nIbuprofen.\nPLAN:\nRest."),
        Document::new("c3", "REASON FOR VISIT:\nCheck up.\nPLAN:\nNone."),
        Document::new("c4", "CHIEF COMPLAINT:\nFatigue.\nSOCIAL HISTORY:\nNonsmoker.\nPLAN:\nLabs."),
    ];
    for doc in &candidates {
        println!("{} headers {:?}", doc.id, extract_headers(&doc.text));
    }
    let top = select_top_n(&score_candidates(&candidates, &lexicon), 2);
    for c in &top {
        println!("rank {} {} score {}", c.rank, c.doc_id, c.score);
    }

    let best = candidates.iter().find(|d| d.id == top[0].doc_id).unwrap();
    for section in split_sections(&best.text, &lexicon) {
        println!("[{}] {:?}", section.header.as_deref().unwrap_or("-"), section.body.trim());
    }
}
