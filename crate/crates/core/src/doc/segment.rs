use crate::interval::Interval;

use super::DocError;

/// A sentence cut into the text around and between two concepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segments {
    pub preceding: Interval,
    pub concept1: Interval,
    pub between: Interval,
    pub concept2: Interval,
    pub succeeding: Interval,
}

impl Segments {
    pub fn as_array(&self) -> [Interval; 5] {
        [
            self.preceding,
            self.concept1,
            self.between,
            self.concept2,
            self.succeeding,
        ]
    }
}

/// Partitions `sentence` into preceding / concept1 / between / concept2 /
/// succeeding. `c1` must end at or before `c2` starts.
pub fn segment_spans(sentence: Interval, c1: Interval, c2: Interval) -> Result<Segments, DocError> {
    for c in [c1, c2] {
        if !sentence.covers(&c) {
            return Err(DocError::OutOfBounds {
                span: c,
                len: sentence.end,
            });
        }
    }
    if c1.end > c2.start {
        if c2.end <= c1.start && c1 != c2 {
            return Err(DocError::Order(c2, c1));
        }
        return Err(DocError::Overlap(c1, c2));
    }
    Ok(Segments {
        preceding: Interval {
            start: sentence.start,
            end: c1.start,
        },
        concept1: c1,
        between: Interval {
            start: c1.end,
            end: c2.start,
        },
        concept2: c2,
        succeeding: Interval {
            start: c2.end,
            end: sentence.end,
        },
    })
}
