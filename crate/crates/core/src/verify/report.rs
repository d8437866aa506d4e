use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Outcome of a check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl Status {
    pub fn is_ok(self) -> bool {
        !matches!(self, Status::Fail)
    }

    /// `Fail` dominates, then `Pass`; all-skipped stays `Skipped`.
    pub fn combine(self, other: Status) -> Status {
        match (self, other) {
            (Status::Fail, _) | (_, Status::Fail) => Status::Fail,
            (Status::Pass, _) | (_, Status::Pass) => Status::Pass,
            _ => Status::Skipped,
        }
    }
}

/// Where a check came closest to failing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub label: String,
    pub t: Option<f64>,
    pub x: Option<f64>,
    #[serde(with = "real")]
    pub lhs: f64,
    #[serde(with = "real")]
    pub rhs: f64,
}

/// Settings a report depends on.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub space: String,
    pub backend: String,
    pub seed: Option<u64>,
    pub grid: String,
    #[serde(with = "real_map")]
    pub tolerances: BTreeMap<String, f64>,
}

/// Structured pass/fail record. `margin` is the smallest `rhs − lhs` seen
/// (negative means violated); `status` applies the check's tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    pub status: Status,
    #[serde(with = "real")]
    pub margin: f64,
    pub worst: Option<Witness>,
    #[serde(with = "real_map")]
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub fingerprint: Fingerprint,
}

impl VerificationReport {
    pub fn new(name: impl Into<String>, fingerprint: Fingerprint) -> VerificationReport {
        VerificationReport {
            name: name.into(),
            status: Status::Pass,
            margin: f64::INFINITY,
            worst: None,
            metrics: BTreeMap::new(),
            notes: Vec::new(),
            fingerprint,
        }
    }

    pub fn skipped(name: impl Into<String>, fingerprint: Fingerprint, reason: impl Into<String>) -> VerificationReport {
        let mut r = VerificationReport::new(name, fingerprint);
        r.status = Status::Skipped;
        r.notes.push(reason.into());
        r
    }

    pub fn failed(name: impl Into<String>, fingerprint: Fingerprint, reason: impl Into<String>) -> VerificationReport {
        let mut r = VerificationReport::new(name, fingerprint);
        r.status = Status::Fail;
        r.notes.push(reason.into());
        r
    }

    /// Record one comparison `lhs ≤ rhs`, keeping the tightest witness.
    pub fn observe(&mut self, label: &str, t: Option<f64>, x: Option<f64>, lhs: f64, rhs: f64) {
        let m = rhs - lhs;
        let m = if m.is_nan() { f64::NEG_INFINITY } else { m };
        if self.worst.is_none() || m < self.margin {
            self.margin = m;
            self.worst = Some(Witness { label: label.to_string(), t, x, lhs, rhs });
        }
    }

    pub fn metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), value);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Set the status from the margin: pass iff `margin ≥ −tol`.
    pub fn finish(mut self, tol: f64) -> VerificationReport {
        if self.status != Status::Skipped || self.worst.is_some() {
            self.status = if self.margin >= -tol { Status::Pass } else { Status::Fail };
        }
        self.metric("tolerance", tol);
        self
    }

    pub fn passed(&self) -> bool {
        self.status.is_ok()
    }
}

/// Serialize non-finite floats as strings so JSON stays lossless.
pub mod real {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "nan" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(D::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

pub mod real_map {
    use std::collections::BTreeMap;

    use serde::ser::SerializeMap;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrapped(#[serde(with = "super::real")] f64);

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        let mut out = s.serialize_map(Some(m.len()))?;
        for (k, v) in m {
            out.serialize_entry(k, &Wrapped(*v))?;
        }
        out.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        let raw = BTreeMap::<String, Wrapped>::deserialize(d)?;
        Ok(raw.into_iter().map(|(k, v)| (k, v.0)).collect())
    }
}
