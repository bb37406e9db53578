//! Reporting for the acceptance run: one PASS or FAIL line per criterion.

use std::time::Instant;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

/// Result of a check: whether it holds and what was measured.
pub type Verdict = Result<(bool, String), String>;

/// Runs one criterion, timing it and printing its line as soon as it ends.
/// An error counts as a failure.
pub fn run(id: u8, name: &'static str, check: impl FnOnce() -> Verdict) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
    let outcome = Outcome {
        id,
        name,
        pass,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    };
    println!("{}", line(&outcome));
    outcome
}

pub fn line(o: &Outcome) -> String {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    format!(
        "{tag} criterion {} {} ({:.1} s): {}",
        o.id, o.name, o.seconds, o.detail
    )
}

/// Collects sub-checks of one criterion into a single verdict.
#[derive(Debug, Default)]
pub struct Checks {
    parts: Vec<(bool, String)>,
}

impl Checks {
    pub fn check(&mut self, ok: bool, what: impl Into<String>) -> &mut Self {
        self.parts.push((ok, what.into()));
        self
    }

    pub fn verdict(&self) -> Verdict {
        let pass = self.parts.iter().all(|p| p.0);
        let detail = self
            .parts
            .iter()
            .map(|(ok, what)| {
                if *ok {
                    what.clone()
                } else {
                    format!("[fails] {what}")
                }
            })
            .collect::<Vec<_>>()
            .join("; ");
        Ok((pass, detail))
    }
}

/// Criteria selected by numeric command-line arguments; all when none given.
pub fn selected(args: impl Iterator<Item = String>) -> Vec<u8> {
    let picked: Vec<u8> = args.filter_map(|a| a.parse().ok()).collect();
    if picked.is_empty() {
        (1..=7).collect()
    } else {
        picked
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_part_fails_verdict() {
        let mut c = Checks::default();
        c.check(true, "a").check(false, "b");
        assert_eq!(c.verdict().unwrap(), (false, "a; [fails] b".to_string()));
        let o = run(9, "x", || Err("boom".into()));
        assert!(!o.pass && o.detail.contains("boom"));
        assert!(line(&o).starts_with("FAIL criterion 9 x"));
    }

    #[test]
    fn selection() {
        assert_eq!(
            selected(["--nocapture".to_string()].into_iter()),
            (1..=7).collect::<Vec<_>>()
        );
        assert_eq!(
            selected(["3".to_string(), "5".to_string()].into_iter()),
            vec![3, 5]
        );
    }
}
