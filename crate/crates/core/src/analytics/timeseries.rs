use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interval {
    Minute,
    Hour,
    Day,
}

impl Interval {
    pub fn seconds(self) -> i64 {
        match self {
            Interval::Minute => 60,
            Interval::Hour => 3_600,
            Interval::Day => 86_400,
        }
    }

    pub fn floor(self, ts: DateTime<Utc>) -> DateTime<Utc> {
        let secs = ts.timestamp();
        let start = secs - secs.rem_euclid(self.seconds());
        DateTime::from_timestamp(start, 0).expect("in range")
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Interval::Minute => "minute",
            Interval::Hour => "hour",
            Interval::Day => "day",
        })
    }
}

impl FromStr for Interval {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "minute" => Ok(Interval::Minute),
            "hour" => Ok(Interval::Hour),
            "day" => Ok(Interval::Day),
            other => Err(format!("unknown interval `{other}` (expected minute, hour or day)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    #[serde(with = "crate::tweet::rfc3339")]
    pub start: DateTime<Utc>,
    pub tweet_count: u64,
    /// Distinct authors in the bucket.
    pub user_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub interval: Interval,
    pub buckets: Vec<Bucket>,
}

impl TimeSeries {
    pub fn total_tweets(&self) -> u64 {
        self.buckets.iter().map(|b| b.tweet_count).sum()
    }
}

/// Buckets `(timestamp, author)` points into aligned intervals covering the
/// first to the last point, including empty buckets in between.
pub fn time_series(
    points: impl IntoIterator<Item = (DateTime<Utc>, u64)>,
    interval: Interval,
) -> TimeSeries {
    let mut filled: BTreeMap<DateTime<Utc>, (u64, BTreeSet<u64>)> = BTreeMap::new();
    for (ts, author) in points {
        let slot = filled.entry(interval.floor(ts)).or_default();
        slot.0 += 1;
        slot.1.insert(author);
    }
    let (Some(&first), Some(&last)) = (filled.keys().next(), filled.keys().next_back()) else {
        return TimeSeries { interval, buckets: Vec::new() };
    };
    let step = chrono::Duration::seconds(interval.seconds());
    let mut buckets = Vec::new();
    let mut start = first;
    while start <= last {
        let (tweet_count, users) = filled.remove(&start).unwrap_or_default();
        buckets.push(Bucket { start, tweet_count, user_count: users.len() as u64 });
        start += step;
    }
    TimeSeries { interval, buckets }
}
