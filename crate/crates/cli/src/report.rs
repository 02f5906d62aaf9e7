//! `report.json`: checks, metrics, config echo and artifact manifest.
//!
//! Wall-clock data lives only under `timing`, so two runs with the same
//! config and seed agree byte for byte once that field is dropped.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Timing {
    pub total_seconds: f64,
    /// Stage name and seconds, in execution order.
    pub stages: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, Value>,
    pub artifacts: Vec<String>,
    pub config: RunConfig,
    pub timing: Timing,
    #[serde(skip)]
    started: Option<Instant>,
}

impl RunReport {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.into(),
            pass: true,
            checks: Vec::new(),
            metrics: BTreeMap::new(),
            artifacts: Vec::new(),
            config: config.clone(),
            timing: Timing::default(),
            started: Some(Instant::now()),
        }
    }

    /// Record a check; each name appears once.
    pub fn check(&mut self, name: &str, pass: bool, value: Option<f64>, threshold: Option<f64>, detail: Option<String>) {
        assert!(self.checks.iter().all(|c| c.name != name), "check {name} recorded twice");
        self.pass &= pass;
        self.checks.push(Check { name: name.into(), pass, value, threshold, detail });
    }

    /// A check that could not run because an earlier step failed.
    pub fn fail(&mut self, name: &str, detail: impl Into<String>) {
        self.check(name, false, None, None, Some(detail.into()));
    }

    pub fn metric(&mut self, name: &str, value: impl Serialize) {
        self.metrics.insert(name.into(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    /// Run `f` and record its wall time under `name`.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> T) -> T {
        let t0 = Instant::now();
        let out = f(self);
        self.timing.stages.push((name.into(), t0.elapsed().as_secs_f64()));
        out
    }

    pub fn finish(&mut self) {
        if let Some(t0) = self.started {
            self.timing.total_seconds = t0.elapsed().as_secs_f64();
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failing_check_fails_report() {
        let mut r = RunReport::new("x", &RunConfig::default());
        r.check("a", true, Some(1.0), None, None);
        assert!(r.pass);
        r.fail("b", "broken");
        assert!(!r.pass);
        let v: Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["checks"][1]["detail"], "broken");
        assert!(v.get("started").is_none());
    }

    #[test]
    #[should_panic(expected = "twice")]
    fn duplicate_check_names_panic() {
        let mut r = RunReport::new("x", &RunConfig::default());
        r.check("a", true, None, None, None);
        r.check("a", true, None, None, None);
    }
}
