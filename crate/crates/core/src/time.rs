//! Timestamps and ISO-8601 durations.

use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, TimeDelta, Utc};
use thiserror::Error;

/// Absolute UTC instant. Serialized as RFC 3339.
pub type Timestamp = DateTime<Utc>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimeError {
    #[error("invalid ISO-8601 duration {0:?}: {1}")]
    Duration(String, String),
    #[error("calendar units (years, months) are not fixed-length: {0:?}")]
    CalendarUnits(String),
    #[error("invalid RFC 3339 timestamp {0:?}")]
    Timestamp(String),
}

/// Parses an ISO-8601 duration such as `PT4H` or `P1DT30M`.
pub fn parse_duration(text: &str) -> Result<TimeDelta, TimeError> {
    let parsed = iso8601::Duration::from_str(text.trim())
        .map_err(|e| TimeError::Duration(text.to_string(), e))?;
    match parsed {
        iso8601::Duration::Weeks(w) => Ok(TimeDelta::weeks(i64::from(w))),
        iso8601::Duration::YMDHMS {
            year,
            month,
            day,
            hour,
            minute,
            second,
            millisecond,
        } => {
            if year != 0 || month != 0 {
                return Err(TimeError::CalendarUnits(text.to_string()));
            }
            Ok(TimeDelta::days(i64::from(day))
                + TimeDelta::hours(i64::from(hour))
                + TimeDelta::minutes(i64::from(minute))
                + TimeDelta::seconds(i64::from(second))
                + TimeDelta::milliseconds(i64::from(millisecond)))
        }
    }
}

/// Formats a non-negative duration as `PT…` (hours, minutes, seconds).
pub fn format_duration(d: TimeDelta) -> String {
    let total_ms = d.num_milliseconds().max(0);
    let (secs, ms) = (total_ms / 1000, total_ms % 1000);
    let (h, m, s) = (secs / 3600, (secs / 60) % 60, secs % 60);
    let mut out = String::from("PT");
    if h > 0 {
        out.push_str(&format!("{h}H"));
    }
    if m > 0 {
        out.push_str(&format!("{m}M"));
    }
    if s > 0 || ms > 0 || (h == 0 && m == 0) {
        if ms > 0 {
            out.push_str(&format!("{s}.{ms:03}S"));
        } else {
            out.push_str(&format!("{s}S"));
        }
    }
    out
}

pub fn parse_timestamp(text: &str) -> Result<Timestamp, TimeError> {
    DateTime::parse_from_rfc3339(text.trim())
        .map(|t| t.with_timezone(&Utc))
        .map_err(|_| TimeError::Timestamp(text.to_string()))
}

pub fn format_timestamp(t: Timestamp) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// Serde adapter for `TimeDelta` as an ISO-8601 duration string.
pub mod iso_duration {
    use chrono::TimeDelta;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &TimeDelta, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_duration(*d))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<TimeDelta, D::Error> {
        let raw = String::deserialize(d)?;
        super::parse_duration(&raw).map_err(serde::de::Error::custom)
    }
}
