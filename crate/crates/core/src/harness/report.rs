use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{HarnessError, TrialRecord, GRASP_PLANNER_SLOT};

/// Successes out of trials; the rate is exact division.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub trials: u64,
    pub successes: u64,
    pub rate: f64,
}

impl Tally {
    fn add(&mut self, success: bool) {
        self.trials += 1;
        self.successes += u64::from(success);
        self.rate = self.successes as f64 / self.trials as f64;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    /// Grouping key to value, in `by` order.
    pub group: IndexMap<String, String>,
    #[serde(flatten)]
    pub tally: Tally,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub by: Vec<String>,
    /// Groups in order of first appearance.
    pub rows: Vec<GroupRow>,
    /// Planner id bound to the grasp planner slot, to its tally.
    pub per_planner: IndexMap<String, Tally>,
    pub total: Tally,
}

/// Value of a grouping key for one record. `planner` reads the factor when
/// present and the bound grasp planner otherwise; `component:<slot>` reads
/// the component bound to that slot; anything else is a factor name.
fn key_value(r: &TrialRecord, key: &str) -> Result<String, HarnessError> {
    let from_component = |slot: &str| r.components.get(slot).cloned();
    let v = match key {
        "planner" => r
            .condition
            .get("planner")
            .cloned()
            .or_else(|| from_component(GRASP_PLANNER_SLOT)),
        k => match k.strip_prefix("component:") {
            Some(slot) => from_component(slot),
            None => r.condition.get(k).cloned(),
        },
    };
    v.ok_or_else(|| HarnessError::Report(format!("trial {} has no value for `{key}`", r.trial_id)))
}

/// Success counts and rates per group of `by` keys.
pub fn compare(records: &[TrialRecord], by: &[String]) -> Result<ComparisonReport, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::Report("no trial records".into()));
    }
    let mut rows: IndexMap<Vec<String>, Tally> = IndexMap::new();
    let mut per_planner: IndexMap<String, Tally> = IndexMap::new();
    let mut total = Tally::default();
    for r in records {
        let key = by
            .iter()
            .map(|k| key_value(r, k))
            .collect::<Result<Vec<_>, _>>()?;
        let success = r.outcome.is_success();
        rows.entry(key).or_default().add(success);
        let planner = r
            .components
            .get(GRASP_PLANNER_SLOT)
            .cloned()
            .unwrap_or_else(|| "-".into());
        per_planner.entry(planner).or_default().add(success);
        total.add(success);
    }
    let rows = rows
        .into_iter()
        .map(|(values, tally)| GroupRow {
            group: by.iter().cloned().zip(values).collect(),
            tally,
        })
        .collect();
    Ok(ComparisonReport {
        by: by.to_vec(),
        rows,
        per_planner,
        total,
    })
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Aligned plain-text table: one row per group, then planners and the total.
    pub fn render_text(&self) -> String {
        let mut header: Vec<String> = self.by.clone();
        if header.is_empty() {
            header.push("group".into());
        }
        header.extend(["trials", "successes", "rate"].map(String::from));
        let tally_cells = |t: &Tally| {
            vec![
                t.trials.to_string(),
                t.successes.to_string(),
                format!("{:.4}", t.rate),
            ]
        };
        let mut lines: Vec<Vec<String>> = vec![header];
        for row in &self.rows {
            let mut cells: Vec<String> = row.group.values().cloned().collect();
            if cells.is_empty() {
                cells.push("all".into());
            }
            cells.extend(tally_cells(&row.tally));
            lines.push(cells);
        }
        let mut out = table(&lines);
        out.push('\n');
        let mut planners = vec![["planner", "trials", "successes", "rate"]
            .map(String::from)
            .to_vec()];
        for (p, t) in &self.per_planner {
            let mut cells = vec![p.clone()];
            cells.extend(tally_cells(t));
            planners.push(cells);
        }
        let mut total = vec!["total".to_owned()];
        total.extend(tally_cells(&self.total));
        planners.push(total);
        out.push_str(&table(&planners));
        out
    }
}

fn table(lines: &[Vec<String>]) -> String {
    let cols = lines.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            lines
                .iter()
                .filter_map(|l| l.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for l in lines {
        let mut line = String::new();
        for (c, cell) in l.iter().enumerate() {
            if c > 0 {
                line.push_str("  ");
            }
            // text columns left-aligned, the three numeric columns right-aligned
            if c + 3 >= l.len() {
                let _ = write!(line, "{cell:>w$}", w = widths[c]);
            } else {
                let _ = write!(line, "{cell:<w$}", w = widths[c]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{Condition, TrialOutcome, RECORD_SCHEMA_VERSION};

    fn rec(id: u64, planner: &str, ok: bool) -> TrialRecord {
        let mut condition = Condition::new();
        condition.insert("planner".into(), planner.into());
        TrialRecord {
            schema_version: RECORD_SCHEMA_VERSION,
            trial_id: id,
            condition,
            rep: 1,
            outcome: if ok {
                TrialOutcome::Success
            } else {
                TrialOutcome::Failure {
                    reason: "tolerance".into(),
                }
            },
            duration_s: 0.0,
            components: [(GRASP_PLANNER_SLOT.to_owned(), planner.to_owned())]
                .into_iter()
                .collect(),
            seed: id,
            trace_ref: format!("traces.jsonl#{id}"),
            reset_verified: true,
            diagnostic: None,
        }
    }

    #[test]
    fn three_of_four() {
        let rs: Vec<_> = [true, true, false, true]
            .iter()
            .enumerate()
            .map(|(i, ok)| rec(i as u64 + 1, "a", *ok))
            .collect();
        let r = compare(&rs, &[]).unwrap();
        assert_eq!(r.total.rate, 0.75);
        assert_eq!(r.rows.len(), 1);
    }

    #[test]
    fn disjoint_planners_split_the_total() {
        let rs = vec![rec(1, "a", true), rec(2, "b", false), rec(3, "a", false)];
        let r = compare(&rs, &["planner".into()]).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows.iter().map(|g| g.tally.trials).sum::<u64>(), 3);
        assert_eq!(r.per_planner["a"].successes, 1);
        assert!(r.render_text().contains("total"));
        assert!(compare(&[], &[]).is_err());
        assert!(compare(&rs, &["lighting".into()]).is_err());
    }
}
