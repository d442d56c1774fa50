//! Timelines: ordered monoids `(T, <=, 0, +)` in which `0` is the global
//! minimum and every `a <= b` has a unique difference `d` with `b = a + d`.
//!
//! Three instances are provided: natural-number ticks, nonnegative rational
//! durations, and words over a finite alphabet ordered by prefix.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{Signed, Zero};

use crate::scalar::Rational;
use crate::{Error, Result};

pub type Letter = u8;

/// Largest supported alphabet; letters are stored as `u8`.
pub const MAX_ALPHABET: usize = 256;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TimelineKind {
    /// `(N, <=, 0, +)`.
    DiscreteLinear,
    /// Nonnegative rationals with the usual order and sum.
    ContinuousLinear,
    /// Words over `alphabet` letters with concatenation and prefix order.
    FreeMonoid { alphabet: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TimePoint {
    Ticks(u64),
    Duration(Rational),
    Word(Vec<Letter>),
}

impl TimePoint {
    pub fn word(letters: &[Letter]) -> Self {
        TimePoint::Word(letters.to_vec())
    }

    /// Number of generator steps: ticks, or word length. `None` for durations.
    pub fn steps(&self) -> Option<u64> {
        match self {
            TimePoint::Ticks(n) => Some(*n),
            TimePoint::Word(w) => Some(w.len() as u64),
            TimePoint::Duration(_) => None,
        }
    }
}

impl fmt::Display for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimePoint::Ticks(n) => write!(f, "{n}"),
            TimePoint::Duration(q) => write!(f, "{q}"),
            TimePoint::Word(w) if w.is_empty() => f.write_str("ε"),
            TimePoint::Word(w) => {
                for &letter in w {
                    if letter < 26 {
                        write!(f, "{}", (b'a' + letter) as char)?;
                    } else {
                        write!(f, "[{letter}]")?;
                    }
                }
                Ok(())
            }
        }
    }
}

/// Parses the textual form produced by `Display`: a tick count, a rational
/// duration, or a word of letters `a`, `b`, ... (`ε` or the empty string is
/// the empty word).
pub fn parse_time_point(kind: &TimelineKind, text: &str) -> Result<TimePoint> {
    let text = text.trim();
    let point = match kind {
        TimelineKind::DiscreteLinear => TimePoint::Ticks(
            text.parse().map_err(|_| Error::InvalidTimePoint(format!("`{text}` is not a tick count")))?,
        ),
        TimelineKind::ContinuousLinear => {
            TimePoint::Duration(crate::scalar::parse_rational(text).map_err(Error::InvalidTimePoint)?)
        }
        TimelineKind::FreeMonoid { .. } => {
            let body = if text == "ε" { "" } else { text };
            let mut letters = Vec::with_capacity(body.len());
            for c in body.chars() {
                if !c.is_ascii_lowercase() {
                    return Err(Error::InvalidTimePoint(format!("`{c}` is not a letter a..z")));
                }
                letters.push(c as u8 - b'a');
            }
            TimePoint::Word(letters)
        }
    };
    kind.validate(&point)?;
    Ok(point)
}

impl TimelineKind {
    pub fn free_monoid(alphabet: usize) -> Result<Self> {
        if alphabet == 0 || alphabet > MAX_ALPHABET {
            return Err(Error::InvalidTimeline(format!(
                "alphabet size must be between 1 and {MAX_ALPHABET}, got {alphabet}"
            )));
        }
        Ok(TimelineKind::FreeMonoid { alphabet })
    }

    pub fn zero(&self) -> TimePoint {
        match self {
            TimelineKind::DiscreteLinear => TimePoint::Ticks(0),
            TimelineKind::ContinuousLinear => TimePoint::Duration(Rational::zero()),
            TimelineKind::FreeMonoid { .. } => TimePoint::Word(Vec::new()),
        }
    }

    pub fn validate(&self, t: &TimePoint) -> Result<()> {
        match (self, t) {
            (TimelineKind::DiscreteLinear, TimePoint::Ticks(_)) => Ok(()),
            (TimelineKind::ContinuousLinear, TimePoint::Duration(q)) => {
                if q.is_negative() {
                    Err(Error::InvalidTimePoint(format!("negative duration {q}")))
                } else {
                    Ok(())
                }
            }
            (TimelineKind::FreeMonoid { alphabet }, TimePoint::Word(w)) => {
                match w.iter().find(|&&l| l as usize >= *alphabet) {
                    Some(l) => Err(Error::InvalidTimePoint(format!(
                        "letter {l} outside alphabet of size {alphabet}"
                    ))),
                    None => Ok(()),
                }
            }
            _ => Err(Error::KindMismatch),
        }
    }

    fn validate_pair(&self, a: &TimePoint, b: &TimePoint) -> Result<()> {
        self.validate(a)?;
        self.validate(b)
    }

    /// Monoid composition. Words concatenate, so this is not commutative.
    pub fn plus(&self, a: &TimePoint, b: &TimePoint) -> Result<TimePoint> {
        self.validate_pair(a, b)?;
        Ok(match (a, b) {
            (TimePoint::Ticks(x), TimePoint::Ticks(y)) => {
                TimePoint::Ticks(x.checked_add(*y).ok_or(Error::TimeOverflow)?)
            }
            (TimePoint::Duration(x), TimePoint::Duration(y)) => TimePoint::Duration(x + y),
            (TimePoint::Word(x), TimePoint::Word(y)) => {
                let mut w = Vec::with_capacity(x.len() + y.len());
                w.extend_from_slice(x);
                w.extend_from_slice(y);
                TimePoint::Word(w)
            }
            _ => unreachable!("validated above"),
        })
    }

    /// `a <= b` iff `b` extends `a`: numeric order, or prefix order on words.
    pub fn leq(&self, a: &TimePoint, b: &TimePoint) -> Result<bool> {
        self.validate_pair(a, b)?;
        Ok(match (a, b) {
            (TimePoint::Ticks(x), TimePoint::Ticks(y)) => x <= y,
            (TimePoint::Duration(x), TimePoint::Duration(y)) => x <= y,
            (TimePoint::Word(x), TimePoint::Word(y)) => y.starts_with(x),
            _ => unreachable!("validated above"),
        })
    }

    /// The unique `d` with `b = a + d`.
    pub fn difference(&self, a: &TimePoint, b: &TimePoint) -> Result<TimePoint> {
        if !self.leq(a, b)? {
            return Err(Error::NotComparable { left: format!("{a}"), right: format!("{b}") });
        }
        Ok(match (a, b) {
            (TimePoint::Ticks(x), TimePoint::Ticks(y)) => TimePoint::Ticks(y - x),
            (TimePoint::Duration(x), TimePoint::Duration(y)) => TimePoint::Duration(y - x),
            (TimePoint::Word(x), TimePoint::Word(y)) => TimePoint::Word(y[x.len()..].to_vec()),
            _ => unreachable!("validated above"),
        })
    }

    /// One-step time points that generate the explored part of the timeline:
    /// a single tick, each letter, or one duration step of size `dt`.
    pub fn generators(&self, dt: &Rational) -> Vec<TimePoint> {
        match self {
            TimelineKind::DiscreteLinear => vec![TimePoint::Ticks(1)],
            TimelineKind::ContinuousLinear => vec![TimePoint::Duration(dt.clone())],
            TimelineKind::FreeMonoid { alphabet } => {
                (0..*alphabet).map(|l| TimePoint::Word(vec![l as Letter])).collect()
            }
        }
    }

    /// Number of generator maps a system over this timeline needs.
    pub fn arity(&self) -> usize {
        match self {
            TimelineKind::DiscreteLinear | TimelineKind::ContinuousLinear => 1,
            TimelineKind::FreeMonoid { alphabet } => *alphabet,
        }
    }

    pub fn name(&self) -> String {
        match self {
            TimelineKind::DiscreteLinear => "discrete".into(),
            TimelineKind::ContinuousLinear => "continuous".into(),
            TimelineKind::FreeMonoid { alphabet } => format!("words({alphabet})"),
        }
    }
}

/// All words over `alphabet` letters of length at most `max_len`, shortest
/// first.
pub fn words_up_to(alphabet: usize, max_len: usize) -> Vec<Vec<Letter>> {
    let mut out = vec![Vec::new()];
    let mut layer: Vec<Vec<Letter>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(layer.len() * alphabet);
        for w in &layer {
            for l in 0..alphabet {
                let mut v = w.clone();
                v.push(l as Letter);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}
