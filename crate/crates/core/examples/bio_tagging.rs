//! Encodes entity spans as B/I/O tags and decodes them back, including
//! how a stray `I` is handled.
//!
//! cargo run --example bio_tagging

use prgc::bio::{bio_decode, bio_decode_with, bio_encode, StrayInside};
use prgc::types::{EntitySpan, Sentence, Tag};

fn show(tags: &[Tag]) -> String {
    tags.iter()
        .map(|t| format!("{t:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() -> prgc::Result<()> {
    let sentence = Sentence::from_text("s1", "The New York Times reported from Paris")?;
    let spans = [EntitySpan::new(1, 3), EntitySpan::single(6)];
    let tags = bio_encode(spans, sentence.len())?;
    println!("{}", sentence.text());
    println!("{}", show(&tags));
    for span in bio_decode(&tags) {
        println!(
            "  [{}, {}] {}",
            span.start,
            span.end,
            sentence.span_text(span)
        );
    }

    // Overlapping spans cannot share one tag sequence.
    match bio_encode([EntitySpan::new(0, 2), EntitySpan::new(2, 3)], 5) {
        Ok(_) => println!("unexpected success"),
        Err(e) => println!("overlap rejected: {e}"),
    }

    // A sequence that opens with I.
    let stray = [Tag::I, Tag::I, Tag::O, Tag::B, Tag::I];
    println!("{}", show(&stray));
    for policy in [StrayInside::Strict, StrayInside::Lenient] {
        println!("  {policy:?}: {:?}", bio_decode_with(&stray, policy));
    }
    Ok(())
}
