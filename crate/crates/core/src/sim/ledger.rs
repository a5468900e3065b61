use std::fmt::Write as _;
use std::time::Duration;

/// Wall-clock accounting of one run.
///
/// `eval_uvlm_total` and `eval_structure_total` cover work outside the
/// nonlinear solves; the `newton_*` entries are nested inside `newton_total`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TimingLedger {
    pub integration_total: Duration,
    pub eval_uvlm_total: Duration,
    pub eval_structure_total: Duration,
    pub newton_total: Duration,
    pub newton_eval_uvlm: Duration,
    pub newton_eval_structure: Duration,
    pub newton_linear_solver: Duration,
    pub time_steps: usize,
    pub newton_steps: usize,
    pub refinement_steps: usize,
}

impl TimingLedger {
    /// Nested categories fit inside the Newton total, which fits inside the run.
    pub fn check_invariants(&self) -> Result<(), String> {
        let nested = self.newton_eval_uvlm + self.newton_eval_structure + self.newton_linear_solver;
        if nested > self.newton_total {
            return Err(format!("nested Newton categories {nested:?} exceed Newton total {:?}", self.newton_total));
        }
        let outer = self.newton_total + self.eval_uvlm_total + self.eval_structure_total;
        if outer > self.integration_total {
            return Err(format!("categories {outer:?} exceed integration total {:?}", self.integration_total));
        }
        Ok(())
    }

    /// Share of the Newton phase spent factorizing and solving.
    pub fn linear_solver_fraction(&self) -> f64 {
        let n = self.newton_total.as_secs_f64();
        if n > 0.0 {
            self.newton_linear_solver.as_secs_f64() / n
        } else {
            0.0
        }
    }

    /// Plain-text table with a total and a per-step section.
    pub fn report(&self) -> String {
        let rows: [(&str, Duration); 7] = [
            ("Integration", self.integration_total),
            (". Eval UVLM", self.eval_uvlm_total),
            (". Eval structure", self.eval_structure_total),
            (". Newton", self.newton_total),
            (". . Eval UVLM", self.newton_eval_uvlm),
            (". . Eval structure", self.newton_eval_structure),
            (". . Linear solver", self.newton_linear_solver),
        ];
        let mut out = String::new();
        let _ = writeln!(out, "Total [s]");
        for (name, d) in rows {
            let _ = writeln!(out, "{name:<22}{:>16.6}", d.as_secs_f64());
        }
        let _ = writeln!(out, "{:<22}{:>16}", "Newton steps", self.newton_steps);
        let _ = writeln!(out, "{:<22}{:>16}", "Refinement steps", self.refinement_steps);
        let _ = writeln!(out, "{:<22}{:>16}", "Time steps", self.time_steps);
        let _ = writeln!(out);
        let _ = writeln!(out, "Average per time step [s]");
        let avg = |v: f64| -> String {
            if self.time_steps == 0 {
                "n/a".to_string()
            } else {
                format!("{:.6}", v / self.time_steps as f64)
            }
        };
        for (name, d) in rows {
            let _ = writeln!(out, "{name:<22}{:>16}", avg(d.as_secs_f64()));
        }
        let _ = writeln!(out, "{:<22}{:>16}", "Newton steps", avg(self.newton_steps as f64));
        let _ = writeln!(out, "{:<22}{:>16}", "Refinement steps", avg(self.refinement_steps as f64));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_ledger_reports_na() {
        let l = TimingLedger::default();
        let r = l.report();
        assert!(r.contains("n/a"));
        assert!(!r.contains("NaN") && !r.contains("inf"));
        assert!(l.check_invariants().is_ok());
    }

    #[test]
    fn counters_echoed() {
        let l = TimingLedger {
            newton_steps: 2625,
            refinement_steps: 8594,
            time_steps: 540,
            ..Default::default()
        };
        let r = l.report();
        assert!(r.lines().any(|s| s.split_whitespace().collect::<Vec<_>>() == ["Newton", "steps", "2625"]));
        assert!(r.lines().any(|s| s.split_whitespace().collect::<Vec<_>>() == ["Refinement", "steps", "8594"]));
    }

    #[test]
    fn violated_nesting_detected() {
        let l = TimingLedger {
            newton_total: Duration::from_millis(5),
            newton_linear_solver: Duration::from_millis(6),
            integration_total: Duration::from_millis(10),
            ..Default::default()
        };
        assert!(l.check_invariants().is_err());
    }
}
