//! Generates synthetic doctor-patient dialogues for a few notes against an
//! in-process mock of a chat-completions endpoint, then ranks them and builds
//! (dialogue, note) training pairs.
//!
//! One note is refused by the mock's content filter and one request is
//! rate-limited once, so the run also shows skipping and retrying.
//!
//! Run with `cargo run --example dialogue_augmentation`.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use clinforge::augmentor::mock::{MockChatServer, MockReply};
use clinforge::augmentor::{
    build_dataset, run_augmentation, ChatEndpointConfig, DialogueGenerator, Exemplar, HttpChatClient, RunFiles, Task,
};
use clinforge::corpus::Document;
use clinforge::rouge::RougeVariant;

fn main() -> clinforge::Result<()> {
    let throttled = AtomicBool::new(false);
    let server = MockChatServer::start(move |req| {
        let id = req.request_id.as_deref().unwrap_or("");
        if req.last_message().contains("overdose") {
            MockReply::content_filter()
        } else if id == "note-2/stage1" && !throttled.swap(true, Ordering::SeqCst) {
            MockReply::rate_limited()
        } else if id.ends_with("/stage2") {
            MockReply::completion("Doctor: So, um, what brings you in?\nPatient: Uh, my knee has been hurting.")
        } else {
            MockReply::completion("Doctor: What brings you in?\nPatient: My knee has been hurting.")
        }
    })
    .expect("bind mock server");

    let config = ChatEndpointConfig {
        backoff_base: Duration::from_millis(50),
        max_in_flight: 2,
        ..ChatEndpointConfig::for_base_url(server.base_url())
    };
    let client = HttpChatClient::new(config)?;
    let exemplar = Exemplar {
        id: "train-1".into(),
        note: "CHIEF COMPLAINT:\nHeadache.".into(),
        dialogue: "Doctor: What seems to be the problem?\nPatient: I have a headache.".into(),
    };
    let refs = vec![exemplar.dialogue.clone()];
    let generator = DialogueGenerator::new(&client, exemplar);

    let notes = vec![
        Document::new("note-1", "CHIEF COMPLAINT:\nKnee pain.\nPLAN:\nIce and rest."),
        Document::new("note-2", "CHIEF COMPLAINT:\nKnee swelling.\nPLAN:\nX-ray."),
        Document::new("note-3", "CHIEF COMPLAINT:\nIntentional overdose.\nPLAN:\nAdmit."),
    ];
    let dir = tempfile::tempdir().expect("temp dir");
    let files = RunFiles::beside(&dir.path().join("augmented"));

    let mut run = run_augmentation(&notes, &generator, Task::C, &files, false, 2)?;
    for record in run.manifest.values() {
        println!("{:<7} {:?} stage {:?}", record.note_id, record.status, record.stage);
    }
    println!("{} requests, {} retries", client.requests_sent(), client.retries());

    for row in build_dataset(&mut run, &notes, &refs, 10, RougeVariant::R1)? {
        println!("\n{} (score {:.3})\n{}\n=> {:?}", row.id, row.rank_score.unwrap_or(0.0), row.input, row.target);
    }

    // a second pass over the same run files finds nothing left to do
    let again = run_augmentation(&notes, &generator, Task::C, &files, true, 2)?;
    println!("\nresumed run attempted {} notes", again.attempted);
    Ok(())
}
