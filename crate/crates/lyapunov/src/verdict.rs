use serde::{Deserialize, Serialize};

/// Outcome of an inequality check whose sides carry Monte Carlo error.
///
/// A check only `Holds` or `Fails` when the margin exceeds three standard
/// errors; anything closer is `Inconclusive`. Exact quantities (zero standard
/// error) resolve strictly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

impl Verdict {
    /// Verdict for `measured < bound` when `measured` has standard error
    /// `sigma`.
    pub fn for_upper_bound(measured: f64, bound: f64, sigma: f64) -> Verdict {
        if measured.is_nan() || bound.is_nan() {
            return Verdict::Inconclusive;
        }
        if measured == f64::NEG_INFINITY {
            return Verdict::Holds;
        }
        if measured == f64::INFINITY {
            return if bound == f64::INFINITY { Verdict::Inconclusive } else { Verdict::Fails };
        }
        if !sigma.is_finite() {
            return Verdict::Inconclusive;
        }
        let slack = bound - measured;
        if sigma == 0.0 {
            return if slack >= 0.0 { Verdict::Holds } else { Verdict::Fails };
        }
        if slack >= 3.0 * sigma {
            Verdict::Holds
        } else if slack <= -3.0 * sigma {
            Verdict::Fails
        } else {
            Verdict::Inconclusive
        }
    }

    /// Verdict for `measured > bound`.
    pub fn for_lower_bound(measured: f64, bound: f64, sigma: f64) -> Verdict {
        Verdict::for_upper_bound(-measured, -bound, sigma)
    }

    pub fn is_fail(self) -> bool {
        self == Verdict::Fails
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
