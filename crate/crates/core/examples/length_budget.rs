//! Sentence splitting, token counts, and percentile-based length budgets.
//!
//! Run with `cargo run --example length_budget`.

use clinforge::segmenter::{count_tokens, split_sentences, tokenize, truncate_tokens, TruncationConfig};

fn main() -> clinforge::Result<()> {
    let text = "Pt. seen by Dr. Smith at 10 a.m. today. Temp 38.2 C! Started on amoxicillin 500 mg.\nReturn in 2 weeks";
    for s in split_sentences(text) {
        println!("sentence {}: {:?}", s.index, s.slice(text));
    }
    let words: Vec<&str> = tokenize(text).iter().map(|t| t.slice(text)).collect();
    println!("{} tokens: {words:?}", words.len());

    let dialogues = [
        "Doctor: Hi.\nPatient: Hello.",
        "Doctor: What brings you in?\nPatient: A cough for three days, worse at night.",
        "Doctor: Any fever?\nPatient: No.",
        "Doctor: Any allergies?\nPatient: Penicillin gives me a rash.",
    ];
    let notes = ["Cough.", "Cough, three days, nocturnal.", "Afebrile.", "Allergy: penicillin (rash)."];
    let mut budget = TruncationConfig {
        percentile: 0.75,
        ..TruncationConfig::default()
    };
    let input_lengths: Vec<usize> = dialogues.iter().map(|d| count_tokens(d)).collect();
    let output_lengths: Vec<usize> = notes.iter().map(|n| count_tokens(n)).collect();
    budget.fit(&input_lengths, &output_lengths)?;
    println!("input lengths {input_lengths:?} -> limit {:?}", budget.input_limit);
    println!("output lengths {output_lengths:?} -> limit {:?}", budget.output_limit);

    let limit = budget.input_limit.unwrap_or(usize::MAX);
    for d in dialogues {
        println!("{:?}", truncate_tokens(d, limit));
    }
    Ok(())
}
