//! Structured residual/violation records emitted by every checker.

use std::fmt;

/// How a recorded value is judged against its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// Pass iff |value| <= threshold.
    AbsLe,
    /// Pass iff value <= threshold.
    Le,
    /// Pass iff value >= threshold.
    Ge,
    /// Informational only; never fails.
    Info,
}

/// One named check inside a [`Report`].
#[derive(Debug, Clone)]
pub struct CheckEntry {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub sense: Sense,
    pub pass: bool,
    pub note: String,
}

/// Residual/violation record produced by a feasibility or duality checker.
///
/// A report is a flat list of named checks; `pass()` is the conjunction of
/// the individual verdicts. Checkers push entries through the `check_*`
/// helpers so that the pass/fail rule is stated once per sense.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub title: String,
    pub entries: Vec<CheckEntry>,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Report { title: title.into(), entries: Vec::new() }
    }

    pub fn check(&mut self, name: impl Into<String>, value: f64, threshold: f64, sense: Sense) {
        let pass = match sense {
            Sense::AbsLe => value.abs() <= threshold,
            Sense::Le => value <= threshold,
            Sense::Ge => value >= threshold,
            Sense::Info => true,
        };
        self.entries.push(CheckEntry {
            name: name.into(),
            value,
            threshold,
            sense,
            pass,
            note: String::new(),
        });
    }

    pub fn check_with_note(
        &mut self,
        name: impl Into<String>,
        value: f64,
        threshold: f64,
        sense: Sense,
        note: impl Into<String>,
    ) {
        self.check(name, value, threshold, sense);
        if let Some(last) = self.entries.last_mut() {
            last.note = note.into();
        }
    }

    pub fn info(&mut self, name: impl Into<String>, value: f64) {
        self.check(name, value, f64::NAN, Sense::Info);
    }

    pub fn info_note(&mut self, name: impl Into<String>, value: f64, note: impl Into<String>) {
        self.check_with_note(name, value, f64::NAN, Sense::Info, note);
    }

    /// Conjunction of all entry verdicts.
    pub fn pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    /// Entry lookup by exact name.
    pub fn get(&self, name: &str) -> Option<&CheckEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Worst (largest) value among entries whose name starts with `prefix`.
    pub fn max_value(&self, prefix: &str) -> Option<f64> {
        self.entries
            .iter()
            .filter(|e| e.name.starts_with(prefix))
            .map(|e| e.value)
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    }

    /// CSV serialization: header plus one row per entry.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,value,threshold,sense,pass,note\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{:?},{},{}\n",
                csv_escape(&e.name),
                fmt_f64(e.value),
                fmt_f64(e.threshold),
                e.sense,
                e.pass,
                csv_escape(&e.note)
            ));
        }
        out
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} [{}]", self.title, if self.pass() { "PASS" } else { "FAIL" })?;
        for e in &self.entries {
            let verdict = if e.pass { "ok  " } else { "FAIL" };
            write!(f, "  {verdict} {:<42} {:>24}", e.name, format!("{:.6e}", e.value))?;
            match e.sense {
                Sense::Info => {}
                _ => write!(f, "  (threshold {:.3e}, {:?})", e.threshold, e.sense)?,
            }
            if !e.note.is_empty() {
                write!(f, "  # {}", e.note)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// 17 significant digits: enough to round-trip any f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn senses_judge_as_documented() {
        let mut r = Report::new("t");
        r.check("abs", -1e-9, 1e-8, Sense::AbsLe);
        r.check("le", -0.5, 0.0, Sense::Le);
        r.check("ge", 0.2, 0.0, Sense::Ge);
        r.info("just a number", 42.0);
        assert!(r.pass());
        r.check("too big", 2.0, 1.0, Sense::AbsLe);
        assert!(!r.pass());
        assert_eq!(r.get("le").unwrap().value, -0.5);
    }

    #[test]
    fn csv_round_trips_doubles() {
        let x = 0.1 + 0.2;
        let s = fmt_f64(x);
        let back: f64 = s.parse().unwrap();
        assert_eq!(x, back);
    }

    #[test]
    fn max_value_scans_prefix() {
        let mut r = Report::new("t");
        r.info("res[0]", 1.0);
        r.info("res[1]", 3.0);
        r.info("other", 9.0);
        assert_eq!(r.max_value("res").unwrap(), 3.0);
    }
}
