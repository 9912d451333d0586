//! Half-open intervals and the thirteen Allen relations between them.
//!
//! Offsets are 0-based and half-open: `(start, end)` covers every position
//! `p` with `start <= p < end`. A null interval has `start == end`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IntervalError {
    #[error("invalid interval: start {start} is after end {end}")]
    Inverted { start: usize, end: usize },
    #[error("unknown relation tag {0:?}; expected one of: {valid}", valid = AllenRelation::tag_list())]
    UnknownRelation(String),
}

/// A half-open span of character (or token) offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn new(start: usize, end: usize) -> Result<Self, IntervalError> {
        if start > end {
            return Err(IntervalError::Inverted { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_null(&self) -> bool {
        self.start == self.end
    }

    /// Whether `other` lies within this interval (endpoints may coincide).
    pub fn covers(&self, other: &Interval) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// Relations from `self` to `other`; see [`relate`].
    pub fn relate(&self, other: &Interval) -> RelationSet {
        relate(self, other)
    }
}

impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Canonical order: ascending start, ties broken by ascending end.
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        canonical_compare(self, other)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.start, self.end)
    }
}

pub fn canonical_compare(a: &Interval, b: &Interval) -> Ordering {
    a.start.cmp(&b.start).then(a.end.cmp(&b.end))
}

/// The thirteen qualitative relations between two intervals `i` and `j`,
/// read as "i REL j".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AllenRelation {
    Eq,
    Before,
    After,
    Meets,
    MetBy,
    During,
    Contains,
    Starts,
    StartedBy,
    Finishes,
    FinishedBy,
    Overlaps,
    OverlappedBy,
}

impl AllenRelation {
    pub const ALL: [AllenRelation; 13] = [
        AllenRelation::Eq,
        AllenRelation::Before,
        AllenRelation::After,
        AllenRelation::Meets,
        AllenRelation::MetBy,
        AllenRelation::During,
        AllenRelation::Contains,
        AllenRelation::Starts,
        AllenRelation::StartedBy,
        AllenRelation::Finishes,
        AllenRelation::FinishedBy,
        AllenRelation::Overlaps,
        AllenRelation::OverlappedBy,
    ];

    pub fn inverse(self) -> AllenRelation {
        use AllenRelation::*;
        match self {
            Eq => Eq,
            Before => After,
            After => Before,
            Meets => MetBy,
            MetBy => Meets,
            During => Contains,
            Contains => During,
            Starts => StartedBy,
            StartedBy => Starts,
            Finishes => FinishedBy,
            FinishedBy => Finishes,
            Overlaps => OverlappedBy,
            OverlappedBy => Overlaps,
        }
    }

    /// Whether `i REL j` holds, evaluated directly on the endpoints.
    pub fn holds(self, i: &Interval, j: &Interval) -> bool {
        use AllenRelation::*;
        let (is, ie, js, je) = (i.start, i.end, j.start, j.end);
        match self {
            Eq => is == js && ie == je,
            Before => ie < js,
            After => is > je,
            Meets => ie == js,
            MetBy => je == is,
            During => is > js && ie < je,
            Contains => js > is && je < ie,
            Starts => is == js && ie < je,
            StartedBy => is == js && ie > je,
            Finishes => js < is && ie == je,
            FinishedBy => js > is && ie == je,
            Overlaps => is < js && js < ie && ie < je,
            OverlappedBy => js < is && is < je && je < ie,
        }
    }

    pub fn tag(self) -> &'static str {
        use AllenRelation::*;
        match self {
            Eq => "eq",
            Before => "before",
            After => "after",
            Meets => "meets",
            MetBy => "met-by",
            During => "during",
            Contains => "contains",
            Starts => "starts",
            StartedBy => "started-by",
            Finishes => "finishes",
            FinishedBy => "finished-by",
            Overlaps => "overlaps",
            OverlappedBy => "overlapped-by",
        }
    }

    fn tag_list() -> String {
        Self::ALL.iter().map(|r| r.tag()).collect::<Vec<_>>().join(", ")
    }

    fn bit(self) -> u16 {
        1 << (self as u16)
    }
}

impl fmt::Display for AllenRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for AllenRelation {
    type Err = IntervalError;

    /// Accepts the hyphenated tags, their underscore spellings, and the
    /// single-symbol forms (`=`, `<`, `>`, `m`, `mi`, `d`, `di`, ...).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use AllenRelation::*;
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        let rel = match norm.as_str() {
            "eq" | "equals" | "=" => Eq,
            "before" | "<" => Before,
            "after" | ">" => After,
            "meets" | "m" => Meets,
            "met-by" | "mi" => MetBy,
            "during" | "d" => During,
            "contains" | "di" => Contains,
            "starts" | "s" => Starts,
            "started-by" | "si" => StartedBy,
            "finishes" | "f" => Finishes,
            "finished-by" | "fi" => FinishedBy,
            "overlaps" | "o" => Overlaps,
            "overlapped-by" | "oi" => OverlappedBy,
            _ => return Err(IntervalError::UnknownRelation(s.to_string())),
        };
        Ok(rel)
    }
}

/// A small set of relations, stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RelationSet(u16);

impl RelationSet {
    pub fn empty() -> Self {
        Self(0)
    }

    pub fn insert(&mut self, rel: AllenRelation) {
        self.0 |= rel.bit();
    }

    pub fn contains(&self, rel: AllenRelation) -> bool {
        self.0 & rel.bit() != 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = AllenRelation> + '_ {
        AllenRelation::ALL.into_iter().filter(|r| self.contains(*r))
    }

    pub fn inverse(&self) -> RelationSet {
        self.iter().map(AllenRelation::inverse).collect()
    }
}

impl FromIterator<AllenRelation> for RelationSet {
    fn from_iter<T: IntoIterator<Item = AllenRelation>>(iter: T) -> Self {
        let mut set = RelationSet::empty();
        for rel in iter {
            set.insert(rel);
        }
        set
    }
}

impl fmt::Debug for RelationSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Every relation whose predicate holds for `i` against `j`.
///
/// Two non-null intervals always yield exactly one relation. Null intervals
/// can satisfy several at once, e.g. `(3,3)` both meets and starts `(3,5)`.
pub fn relate(i: &Interval, j: &Interval) -> RelationSet {
    AllenRelation::ALL
        .into_iter()
        .filter(|r| r.holds(i, j))
        .collect()
}

/// Inclusive bounds on the start and end of any interval that can satisfy a
/// relation against a fixed query interval. Used to prune tree descent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Window {
    pub start_lo: usize,
    pub start_hi: usize,
    pub end_lo: usize,
    pub end_hi: usize,
}

impl Window {
    /// `None` when no interval can satisfy `rel` against `b`.
    pub(crate) fn for_relation(rel: AllenRelation, b: &Interval) -> Option<Window> {
        use AllenRelation::*;
        const MAX: usize = usize::MAX;
        let (bs, be) = (b.start, b.end);
        let below = |x: usize| x.checked_sub(1);
        let (start_lo, start_hi, end_lo, end_hi) = match rel {
            Eq => (bs, bs, be, be),
            Before => {
                let hi = below(bs)?;
                (0, hi, 0, hi)
            }
            After => (be + 1, MAX, be + 1, MAX),
            Meets => (0, bs, bs, bs),
            MetBy => (be, be, be, MAX),
            During => (bs + 1, below(be)?, bs + 1, below(be)?),
            Contains => (0, below(bs)?, be + 1, MAX),
            Starts => (bs, bs, bs, below(be)?),
            StartedBy => (bs, bs, be + 1, MAX),
            Finishes => (bs + 1, be, be, be),
            FinishedBy => (0, below(bs)?, be, be),
            Overlaps => (0, below(bs)?, bs + 1, below(be)?),
            OverlappedBy => (bs + 1, below(be)?, be + 1, MAX),
        };
        // an interval's start never exceeds its end
        let start_hi = start_hi.min(end_hi);
        let end_lo = end_lo.max(start_lo);
        if start_lo > start_hi || end_lo > end_hi {
            return None;
        }
        Some(Window {
            start_lo,
            start_hi,
            end_lo,
            end_hi,
        })
    }

    pub(crate) fn admits_ends(&self, min_end: usize, max_end: usize) -> bool {
        min_end <= self.end_hi && max_end >= self.end_lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use AllenRelation::*;

    fn iv(s: usize, e: usize) -> Interval {
        Interval::new(s, e).unwrap()
    }

    fn set(rels: &[AllenRelation]) -> RelationSet {
        rels.iter().copied().collect()
    }

    #[test]
    fn worked_relations() {
        assert_eq!(relate(&iv(1, 3), &iv(3, 5)), set(&[Meets]));
        assert_eq!(relate(&iv(47, 83), &iv(87, 95)), set(&[Before]));
        assert_eq!(relate(&iv(3, 3), &iv(3, 5)), set(&[Meets, Starts]));
        assert_eq!(relate(&iv(2, 4), &iv(1, 5)), set(&[During]));
    }

    #[test]
    fn canonical_order() {
        assert_eq!(canonical_compare(&iv(1, 5), &iv(2, 3)), Ordering::Less);
        assert_eq!(canonical_compare(&iv(1, 5), &iv(1, 7)), Ordering::Less);
        assert_eq!(canonical_compare(&iv(4, 6), &iv(4, 6)), Ordering::Equal);
    }

    #[test]
    fn inverted_interval_rejected() {
        assert_eq!(
            Interval::new(5, 2),
            Err(IntervalError::Inverted { start: 5, end: 2 })
        );
    }

    #[test]
    fn inverses_are_distinct_and_involutive() {
        for rel in AllenRelation::ALL {
            assert_eq!(rel.inverse().inverse(), rel);
            if rel != Eq {
                assert_ne!(rel.inverse(), rel);
            }
        }
    }

    #[test]
    fn tags_round_trip() {
        for rel in AllenRelation::ALL {
            assert_eq!(rel.tag().parse::<AllenRelation>().unwrap(), rel);
        }
        assert_eq!("MET_BY".parse::<AllenRelation>().unwrap(), MetBy);
        assert!(matches!(
            "inside".parse::<AllenRelation>(),
            Err(IntervalError::UnknownRelation(_))
        ));
    }

    // Windows must never exclude a true answer.
    #[test]
    fn windows_are_sound_exhaustively() {
        for bs in 0..6 {
            for be in bs..6 {
                let b = iv(bs, be);
                for s in 0..8 {
                    for e in s..8 {
                        let i = iv(s, e);
                        for rel in AllenRelation::ALL {
                            if rel.holds(&i, &b) {
                                let w = Window::for_relation(rel, &b)
                                    .unwrap_or_else(|| panic!("{rel} {i} {b}"));
                                assert!(w.start_lo <= s && s <= w.start_hi, "{rel} {i} {b}");
                                assert!(w.end_lo <= e && e <= w.end_hi, "{rel} {i} {b}");
                            }
                        }
                    }
                }
            }
        }
    }

    fn non_null() -> impl Strategy<Value = Interval> {
        (0usize..50, 1usize..20).prop_map(|(s, l)| Interval { start: s, end: s + l })
    }

    fn any_interval() -> impl Strategy<Value = Interval> {
        (0usize..30, 0usize..10).prop_map(|(s, l)| Interval { start: s, end: s + l })
    }

    proptest! {
        #[test]
        fn non_null_pairs_have_exactly_one_relation(i in non_null(), j in non_null()) {
            let forward = relate(&i, &j);
            prop_assert_eq!(forward.len(), 1);
            prop_assert_eq!(relate(&j, &i), forward.inverse());
        }

        #[test]
        fn every_pair_is_related(i in any_interval(), j in any_interval()) {
            prop_assert!(!relate(&i, &j).is_empty());
        }
    }
}
