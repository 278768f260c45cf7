use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub t: f64,
    pub y: usize,
}

impl Event {
    pub fn new(t: f64, y: usize) -> Self {
        Self { t, y }
    }
}

/// A realization `{(t_j, y_j) | t_j <= T}` of a marked point process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSequence {
    #[serde(deserialize_with = "id_from_any")]
    pub id: String,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub events: Vec<Event>,
}

fn id_from_any<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Id {
        S(String),
        N(serde_json::Number),
    }
    Ok(match Id::deserialize(d)? {
        Id::S(s) => s,
        Id::N(n) => n.to_string(),
    })
}

impl EventSequence {
    pub fn new(id: impl Into<String>, horizon: f64, events: Vec<Event>) -> Self {
        Self {
            id: id.into(),
            horizon,
            events,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Check `0 < t_1 < ... < t_L <= T` and, if given, `y < num_types`.
    pub fn validate(&self, num_types: Option<usize>) -> std::result::Result<(), String> {
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(format!("horizon must be finite and >= 0, got {}", self.horizon));
        }
        let mut prev = 0.0;
        for (j, e) in self.events.iter().enumerate() {
            if !e.t.is_finite() {
                return Err(format!("event {j}: non-finite timestamp"));
            }
            if e.t <= prev {
                return Err(format!(
                    "event {j}: timestamp {} not strictly after {}",
                    e.t, prev
                ));
            }
            if let Some(k) = num_types {
                if e.y >= k {
                    return Err(format!("event {j}: type {} >= number of types {k}", e.y));
                }
            }
            prev = e.t;
        }
        if prev > self.horizon {
            return Err(format!("last event {prev} exceeds horizon {}", self.horizon));
        }
        Ok(())
    }

    /// Inter-event interval boundaries `(t_{j-1}, t_j]` with `t_0 = 0`, followed
    /// by the trailing interval `(t_L, T]`.
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.events.len() + 1);
        let mut prev = 0.0;
        for e in &self.events {
            out.push((prev, e.t));
            prev = e.t;
        }
        out.push((prev, self.horizon));
        out
    }

    pub fn max_type(&self) -> Option<usize> {
        self.events.iter().map(|e| e.y).max()
    }
}

pub(crate) fn check_all(seqs: &[EventSequence], num_types: Option<usize>) -> Result<()> {
    for (i, s) in seqs.iter().enumerate() {
        s.validate(num_types)
            .map_err(|msg| Error::InvalidArgument(format!("sequence {i} ({}): {msg}", s.id)))?;
    }
    Ok(())
}
