use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Duration, NaiveDateTime, TimeZone, Timelike, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::Error;

/// A UTC instant at minute resolution.
///
/// Serialized as ISO-8601 `YYYY-MM-DDTHH:MMZ`. Parsing also accepts a
/// seconds field as long as it is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(DateTime<Utc>);

impl Timestamp {
    pub fn from_datetime(dt: DateTime<Utc>) -> Result<Self, Error> {
        if dt.second() != 0 || dt.nanosecond() != 0 {
            return Err(Error::InvalidInput(format!(
                "timestamp {dt} is not at minute resolution"
            )));
        }
        Ok(Timestamp(dt))
    }

    /// Truncates to the containing minute.
    pub fn floor(dt: DateTime<Utc>) -> Self {
        let secs = dt.timestamp().div_euclid(60) * 60;
        Timestamp(Utc.timestamp_opt(secs, 0).single().expect("in range"))
    }

    pub fn ymd_hm(year: i32, month: u32, day: u32, hour: u32, minute: u32) -> Self {
        let dt = Utc
            .with_ymd_and_hms(year, month, day, hour, minute, 0)
            .single()
            .expect("valid calendar time");
        Timestamp(dt)
    }

    pub fn as_datetime(&self) -> DateTime<Utc> {
        self.0
    }

    pub fn plus_minutes(self, minutes: i64) -> Self {
        Timestamp(self.0 + Duration::minutes(minutes))
    }

    /// Whole minutes from `earlier` to `self` (negative if `self` is earlier).
    pub fn minutes_since(self, earlier: Timestamp) -> i64 {
        (self.0 - earlier.0).num_minutes()
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%dT%H:%MZ"))
    }
}

impl FromStr for Timestamp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            return Timestamp::from_datetime(dt.with_timezone(&Utc));
        }
        let trimmed = s.strip_suffix('Z').unwrap_or(s);
        for fmt in ["%Y-%m-%dT%H:%M", "%Y-%m-%dT%H:%M:%S"] {
            if let Ok(naive) = NaiveDateTime::parse_from_str(trimmed, fmt) {
                return Timestamp::from_datetime(Utc.from_utc_datetime(&naive));
            }
        }
        Err(Error::Parse(format!(
            "invalid ISO-8601 UTC timestamp: {s:?}"
        )))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
