//! BIO encoding of entity spans and decoding of tag sequences back to spans.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{EntitySpan, Tag, TagSeq};

/// Treatment of an `I` that does not continue an open `B I*` run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrayInside {
    /// Drop it.
    #[default]
    Strict,
    /// Start a new entity at it.
    Lenient,
}

/// Tags every span's first token `B`, its interior `I`, everything else `O`.
/// Duplicate spans collapse; spans sharing a token are rejected.
pub fn bio_encode(spans: impl IntoIterator<Item = EntitySpan>, n: usize) -> Result<TagSeq> {
    let spans: BTreeSet<EntitySpan> = spans.into_iter().collect();
    let mut prev: Option<EntitySpan> = None;
    for span in &spans {
        if !span.fits(n) {
            return Err(Error::SpanOutOfBounds {
                span: *span,
                len: n,
            });
        }
        // Sorted by start, so only the neighbour can overlap.
        if let Some(p) = prev {
            if p.overlaps(span) {
                return Err(Error::OverlappingSpans(p, *span));
            }
        }
        prev = Some(match prev {
            Some(p) if p.end > span.end => p,
            _ => *span,
        });
    }

    let mut tags = vec![Tag::O; n];
    for span in spans {
        tags[span.start] = Tag::B;
        for t in &mut tags[span.start + 1..=span.end] {
            *t = Tag::I;
        }
    }
    Ok(tags)
}

/// Strict decoding: maximal `B I*` runs become spans.
pub fn bio_decode(tags: &[Tag]) -> Vec<EntitySpan> {
    bio_decode_with(tags, StrayInside::Strict)
}

pub fn bio_decode_with(tags: &[Tag], stray: StrayInside) -> Vec<EntitySpan> {
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (i, tag) in tags.iter().enumerate() {
        match tag {
            Tag::B => {
                if let Some(start) = open.take() {
                    spans.push(EntitySpan::new(start, i - 1));
                }
                open = Some(i);
            }
            Tag::I => {
                if open.is_none() && stray == StrayInside::Lenient {
                    open = Some(i);
                }
            }
            Tag::O => {
                if let Some(start) = open.take() {
                    spans.push(EntitySpan::new(start, i - 1));
                }
            }
        }
    }
    if let Some(start) = open {
        spans.push(EntitySpan::new(start, tags.len() - 1));
    }
    spans
}
