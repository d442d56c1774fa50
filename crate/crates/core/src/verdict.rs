/// Outcome of a verification.
///
/// `Proved` means every state and every time point was quantified exactly
/// (finite systems with exact arithmetic). `Sampled` means the check passed
/// on a bounded horizon, a finite point cloud, or with floating-point
/// comparisons. `Fail` always carries a witness that can be replayed.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict<W> {
    Proved,
    Sampled,
    Fail(W),
}

impl<W> Verdict<W> {
    pub fn pass(exact: bool) -> Self {
        if exact {
            Verdict::Proved
        } else {
            Verdict::Sampled
        }
    }

    pub fn is_pass(&self) -> bool {
        !matches!(self, Verdict::Fail(_))
    }

    pub fn is_proved(&self) -> bool {
        matches!(self, Verdict::Proved)
    }

    pub fn witness(&self) -> Option<&W> {
        match self {
            Verdict::Fail(w) => Some(w),
            _ => None,
        }
    }

    pub fn map_witness<V>(self, f: impl FnOnce(W) -> V) -> Verdict<V> {
        match self {
            Verdict::Proved => Verdict::Proved,
            Verdict::Sampled => Verdict::Sampled,
            Verdict::Fail(w) => Verdict::Fail(f(w)),
        }
    }

    /// Conjunction: the first failure wins, otherwise the weaker provenance.
    pub fn and(self, other: Verdict<W>) -> Verdict<W> {
        match (self, other) {
            (Verdict::Fail(w), _) | (_, Verdict::Fail(w)) => Verdict::Fail(w),
            (Verdict::Proved, Verdict::Proved) => Verdict::Proved,
            _ => Verdict::Sampled,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Proved => "PROVED",
            Verdict::Sampled => "SAMPLED",
            Verdict::Fail(_) => "FAIL",
        }
    }
}
