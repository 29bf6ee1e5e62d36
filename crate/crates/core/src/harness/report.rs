use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::label::{ClassLabel, NUM_CLASSES};

/// Evaluation conditions in report column order.
pub const CONDITIONS: [&str; 5] = ["normal", "bias", "noise", "replacement", "replay"];

/// How switch-level accuracy is conditioned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SwitchConvention {
    /// Only fault samples whose predicted inverter is correct.
    #[default]
    RoutedOnly,
    /// Every fault sample; a wrong inverter counts as a wrong switch.
    AllFaults,
}

/// Scores for one evaluation condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub condition: String,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub switch_convention: SwitchConvention,
}

impl ConditionReport {
    pub fn new(condition: &str, switch_convention: SwitchConvention) -> Self {
        Self {
            condition: condition.to_string(),
            confusion: vec![vec![0; NUM_CLASSES]; NUM_CLASSES],
            switch_convention,
        }
    }

    pub fn record(&mut self, truth: ClassLabel, predicted: ClassLabel) {
        self.confusion[truth.id()][predicted.id()] += 1;
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    fn cells(&self) -> impl Iterator<Item = (ClassLabel, ClassLabel, usize)> + '_ {
        self.confusion.iter().enumerate().flat_map(|(t, row)| {
            row.iter().enumerate().filter(|(_, &n)| n > 0).map(move |(p, &n)| {
                (
                    ClassLabel::from_id(t).expect("confusion index"),
                    ClassLabel::from_id(p).expect("confusion index"),
                    n,
                )
            })
        })
    }

    fn ratio(hits: usize, total: usize) -> f64 {
        if total == 0 {
            0.0
        } else {
            hits as f64 / total as f64
        }
    }

    /// Trace over total.
    pub fn overall_accuracy(&self) -> f64 {
        let hits = (0..NUM_CLASSES).map(|k| self.confusion[k][k]).sum();
        Self::ratio(hits, self.total())
    }

    /// Fraction of samples whose inverter (or normal state) is identified.
    pub fn inverter_accuracy(&self) -> f64 {
        let hits = self
            .cells()
            .filter(|(t, p, _)| t.inverter() == p.inverter())
            .map(|c| c.2)
            .sum();
        Self::ratio(hits, self.total())
    }

    pub fn switch_accuracy(&self) -> f64 {
        let faults = self.cells().filter(|(t, _, _)| !t.is_normal());
        let (mut hits, mut total) = (0, 0);
        for (t, p, n) in faults {
            let routed = t.inverter() == p.inverter();
            if routed || self.switch_convention == SwitchConvention::AllFaults {
                total += n;
            }
            if routed && t.switch() == p.switch() {
                hits += n;
            }
        }
        Self::ratio(hits, total)
    }

    /// Share of errors between related classes: same inverter, or switch
    /// indices one apart. Zero when there are no errors.
    pub fn adjacency_error_fraction(&self) -> f64 {
        let (mut adjacent, mut errors) = (0, 0);
        for (t, p, n) in self.cells().filter(|(t, p, _)| t != p) {
            errors += n;
            let same_inverter = t.inverter().is_some() && t.inverter() == p.inverter();
            let neighbours = matches!((t.switch(), p.switch()), (Some(a), Some(b)) if a.abs_diff(b) == 1);
            if same_inverter || neighbours {
                adjacent += n;
            }
        }
        Self::ratio(adjacent, errors)
    }
}

/// Per-condition accuracies and confusion matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub conditions: Vec<ConditionReport>,
}

pub const REPORT_HEADER: &str =
    "condition,n,overall_acc,inverter_acc,switch_acc,adjacency_error_frac";

impl EvalReport {
    pub fn condition(&self, name: &str) -> Result<&ConditionReport> {
        self.conditions
            .iter()
            .find(|c| c.condition == name)
            .ok_or_else(|| Error::domain(format!("no condition {name:?} in report")))
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{REPORT_HEADER}\n");
        for c in &self.conditions {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                c.condition,
                c.total(),
                c.overall_accuracy(),
                c.inverter_accuracy(),
                c.switch_accuracy(),
                c.adjacency_error_fraction()
            );
        }
        out
    }

    /// Long-form confusion counts: `condition,true_class,pred_class,count`,
    /// non-zero cells only.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("condition,true_class,pred_class,count\n");
        for c in &self.conditions {
            for (t, p, n) in c.cells() {
                let _ = writeln!(out, "{},{},{},{n}", c.condition, t.id(), p.id());
            }
        }
        out
    }

    /// Fixed-width table with one column per condition.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<22}", "metric");
        for c in &self.conditions {
            let _ = write!(out, "{:>13}", c.condition);
        }
        out.push('\n');
        let rows: [(&str, fn(&ConditionReport) -> f64); 4] = [
            ("overall accuracy", ConditionReport::overall_accuracy),
            ("inverter accuracy", ConditionReport::inverter_accuracy),
            ("switch accuracy", ConditionReport::switch_accuracy),
            ("adjacent errors", ConditionReport::adjacency_error_fraction),
        ];
        for (name, f) in rows {
            let _ = write!(out, "{name:<22}");
            for c in &self.conditions {
                let _ = write!(out, "{:>12.2}%", 100.0 * f(c));
            }
            out.push('\n');
        }
        out
    }
}
