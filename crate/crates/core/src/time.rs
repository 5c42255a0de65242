//! Simulated time. Instants and durations are both integer nanoseconds.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub};

/// A span of simulated time in nanoseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Nanos(pub u64);

impl Nanos {
    pub const ZERO: Nanos = Nanos(0);

    pub const fn from_us(us: u64) -> Self {
        Nanos(us * 1_000)
    }

    pub const fn from_ms(ms: u64) -> Self {
        Nanos(ms * 1_000_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        Nanos(s * 1_000_000_000)
    }

    pub fn from_ms_f64(ms: f64) -> Self {
        Nanos((ms * 1e6).round() as u64)
    }

    pub fn as_us_f64(self) -> f64 {
        self.0 as f64 / 1e3
    }

    pub fn as_ms_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e9
    }
}

impl Add for Nanos {
    type Output = Nanos;
    fn add(self, rhs: Nanos) -> Nanos {
        Nanos(self.0 + rhs.0)
    }
}

impl AddAssign for Nanos {
    fn add_assign(&mut self, rhs: Nanos) {
        self.0 += rhs.0;
    }
}

impl Sub for Nanos {
    type Output = Nanos;
    fn sub(self, rhs: Nanos) -> Nanos {
        Nanos(self.0.saturating_sub(rhs.0))
    }
}

impl Mul<u64> for Nanos {
    type Output = Nanos;
    fn mul(self, rhs: u64) -> Nanos {
        Nanos(self.0 * rhs)
    }
}

impl std::iter::Sum for Nanos {
    fn sum<I: Iterator<Item = Nanos>>(iter: I) -> Nanos {
        Nanos(iter.map(|n| n.0).sum())
    }
}

impl fmt::Display for Nanos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.0;
        if n.is_multiple_of(1_000_000_000) && n > 0 {
            write!(f, "{}s", n / 1_000_000_000)
        } else if n.is_multiple_of(1_000_000) && n > 0 {
            write!(f, "{}ms", n / 1_000_000)
        } else if n.is_multiple_of(1_000) && n > 0 {
            write!(f, "{}us", n / 1_000)
        } else {
            write!(f, "{}ns", n)
        }
    }
}

/// An instant on the simulated clock.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn since(self, earlier: SimTime) -> Nanos {
        Nanos(self.0.saturating_sub(earlier.0))
    }

    pub fn as_ms_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }
}

impl Add<Nanos> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: Nanos) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub<Nanos> for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: Nanos) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl AddAssign<Nanos> for SimTime {
    fn add_assign(&mut self, rhs: Nanos) {
        self.0 += rhs.0;
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={}ns", self.0)
    }
}

/// Parses `3us`, `0.5ms`, `30s`, `65000ns` or a bare nanosecond count.
pub fn parse_duration(s: &str) -> Option<Nanos> {
    let s = s.trim();
    let (num, scale) = if let Some(v) = s.strip_suffix("ns") {
        (v, 1.0)
    } else if let Some(v) = s.strip_suffix("us") {
        (v, 1e3)
    } else if let Some(v) = s.strip_suffix("ms") {
        (v, 1e6)
    } else if let Some(v) = s.strip_suffix("min") {
        (v, 60e9)
    } else if let Some(v) = s.strip_suffix('s') {
        (v, 1e9)
    } else {
        (s, 1.0)
    };
    let v: f64 = num.trim().parse().ok()?;
    if !v.is_finite() || v < 0.0 {
        return None;
    }
    Some(Nanos((v * scale).round() as u64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_units() {
        assert_eq!(parse_duration("3us"), Some(Nanos(3_000)));
        assert_eq!(parse_duration("0.5ms"), Some(Nanos(500_000)));
        assert_eq!(parse_duration("30s"), Some(Nanos::from_secs(30)));
        assert_eq!(parse_duration("10min"), Some(Nanos::from_secs(600)));
        assert_eq!(parse_duration("42"), Some(Nanos(42)));
        assert_eq!(parse_duration("-1ms"), None);
        assert_eq!(parse_duration("abc"), None);
    }

    #[test]
    fn display_round_trips_through_parse() {
        for n in [Nanos(1), Nanos(3_000), Nanos(500_000), Nanos::from_secs(30), Nanos(65_123)] {
            assert_eq!(parse_duration(&n.to_string()), Some(n));
        }
    }
}
