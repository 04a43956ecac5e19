//! Simulated time. Protocol freshness checks read a clock that only
//! the harness advances, so timestamp behavior is deterministic.

use serde::{Deserialize, Serialize};

/// Seconds since the simulation epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub fn secs(self) -> u64 {
        self.0
    }

    pub fn abs_diff(self, other: Timestamp) -> u64 {
        self.0.abs_diff(other.0)
    }

    pub fn add_secs(self, secs: u64) -> Timestamp {
        Timestamp(self.0.saturating_add(secs))
    }

    /// Big-endian wire encoding.
    pub fn to_bytes(self) -> [u8; 8] {
        self.0.to_be_bytes()
    }

    pub fn from_bytes(bytes: &[u8; 8]) -> Timestamp {
        Timestamp(u64::from_be_bytes(*bytes))
    }
}

/// Monotone non-decreasing simulated clock.
#[derive(Debug, Clone)]
pub struct SimClock {
    now: Timestamp,
}

impl SimClock {
    pub fn starting_at(t: u64) -> Self {
        Self { now: Timestamp(t) }
    }

    pub fn now(&self) -> Timestamp {
        self.now
    }

    /// Moves the clock forward; earlier targets are ignored.
    pub fn advance_to(&mut self, t: Timestamp) {
        if t > self.now {
            self.now = t;
        }
    }

    pub fn advance_by(&mut self, secs: u64) {
        self.now = self.now.add_secs(secs);
    }
}

impl Default for SimClock {
    fn default() -> Self {
        Self::starting_at(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clock_never_goes_backward() {
        let mut clock = SimClock::starting_at(100);
        clock.advance_to(Timestamp(50));
        assert_eq!(clock.now(), Timestamp(100));
        clock.advance_to(Timestamp(150));
        assert_eq!(clock.now(), Timestamp(150));
        clock.advance_by(5);
        assert_eq!(clock.now().secs(), 155);
    }

    #[test]
    fn timestamp_bytes_roundtrip() {
        let t = Timestamp(0x0102030405060708);
        assert_eq!(Timestamp::from_bytes(&t.to_bytes()), t);
    }
}
