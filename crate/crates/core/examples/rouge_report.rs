//! Scores generated notes against references and prints the ROUGE report.
//!
//! Run with `cargo run --example rouge_report`.

use clinforge::rouge::{evaluate_corpus, rouge_l, rouge_lsum, rouge_n, EvalPair};

fn main() -> clinforge::Result<()> {
    let candidate = "The patient has a cough.\nNo fever reported.";
    let reference = "Patient reports a dry cough.\nDenies fever.";
    println!("R1    {:?}", rouge_n(candidate, reference, 1));
    println!("R2    {:?}", rouge_n(candidate, reference, 2));
    println!("RL    {:?}", rouge_l(candidate, reference));
    println!("RLSum {:?}", rouge_lsum(candidate, reference));

    let pairs = vec![
        EvalPair {
            id: "a".into(),
            candidate: candidate.into(),
            reference: reference.into(),
        },
        EvalPair {
            id: "b".into(),
            candidate: "Return in two weeks.".into(),
            reference: "Follow up in two weeks.".into(),
        },
    ];
    let report = evaluate_corpus(&pairs)?;
    print!("\n{}", report.to_table());
    print!("\n{}", report.to_tsv());
    Ok(())
}
