use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::{Channel, ExperimentResult, Representation, Strategy};
use crate::corpus::FeatureKind;
use crate::error::Result;
use crate::stats::fmt_coef;

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub target: String,
    pub kind: FeatureKind,
    pub values: Vec<Option<f64>>,
}

/// Targets (alphabetical, then Average) by channel for one representation,
/// strategy and test corpus, with one sub-row per feature kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub title: String,
    pub first_column: &'static str,
    pub columns: Vec<Channel>,
    pub rows: Vec<TableRow>,
}

fn display_name(target: &str) -> String {
    target
        .split('_')
        .map(|w| {
            let mut c = w.chars();
            c.next().map(|f| f.to_ascii_uppercase().to_string() + c.as_str()).unwrap_or_default()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn kind_name(k: FeatureKind) -> &'static str {
    match k {
        FeatureKind::Expert => "Expert",
        FeatureKind::Deep => "Deep",
    }
}

pub fn results_table(r: &ExperimentResult, representation: Representation, strategy: Strategy, test: &str) -> ResultTable {
    let cells: Vec<_> = r
        .cells
        .iter()
        .filter(|c| c.representation == representation && c.strategy == strategy && c.test_corpus == test)
        .collect();
    let columns: Vec<Channel> = Channel::ALL.iter().copied().filter(|ch| cells.iter().any(|c| c.channel == *ch)).collect();
    // Expert rows precede Deep rows within a target.
    let mut kinds: Vec<FeatureKind> = cells.iter().map(|c| c.kind).collect::<BTreeSet<_>>().into_iter().collect();
    kinds.sort_by_key(|k| *k != FeatureKind::Expert);
    let mut targets: Vec<(String, &str)> =
        cells.iter().map(|c| c.target.as_str()).collect::<BTreeSet<_>>().into_iter().map(|t| (display_name(t), t)).collect();
    targets.sort();

    let mut rows = Vec::new();
    for (name, t) in &targets {
        for &k in &kinds {
            let values = columns
                .iter()
                .map(|&ch| cells.iter().find(|c| c.target == *t && c.kind == k && c.channel == ch).and_then(|c| c.ccc))
                .collect();
            rows.push(TableRow {
                target: name.clone(),
                kind: k,
                values,
            });
        }
    }
    for &k in &kinds {
        let values = (0..columns.len())
            .map(|j| {
                let col: Option<Vec<f64>> = rows.iter().filter(|row| row.kind == k).map(|row| row.values[j]).collect();
                col.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
            })
            .collect();
        rows.push(TableRow {
            target: "Average".into(),
            kind: k,
            values,
        });
    }
    ResultTable {
        title: format!("{representation} CCC, {strategy} strategy, tested on {test}"),
        first_column: if representation == Representation::Labels { "Label" } else { "Dimension" },
        columns,
        rows,
    }
}

impl ResultTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![self.first_column.to_string(), "Modality".into()];
        header.extend(self.columns.iter().map(|c| c.heading().to_string()));
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.target.clone(), kind_name(row.kind).to_string()];
            rec.extend(row.values.iter().map(|v| v.map_or("NA".to_string(), fmt_coef)));
            w.write_record(&rec)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!("**{}**\n\n| {} | Modality |", self.title, self.first_column);
        for c in &self.columns {
            let _ = write!(s, " {} |", c.heading());
        }
        s.push_str("\n|---|---|");
        s.push_str(&"---:|".repeat(self.columns.len()));
        s.push('\n');
        let mut last = "";
        for row in &self.rows {
            let name = if row.target == last { "" } else { row.target.as_str() };
            last = &row.target;
            let _ = write!(s, "| {name} | {} |", kind_name(row.kind));
            for v in &row.values {
                let _ = write!(s, " {} |", v.map_or("NA".to_string(), fmt_coef));
            }
            s.push('\n');
        }
        s
    }
}

/// One line per cell, in result order.
pub fn results_csv(r: &ExperimentResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["representation", "kind", "target", "channel", "strategy", "source", "test_corpus", "ccc", "n_values", "error"])?;
    for c in &r.cells {
        w.write_record([
            c.representation.as_str(),
            c.kind.as_str(),
            &c.target,
            c.channel.as_str(),
            c.strategy.as_str(),
            &c.source,
            &c.test_corpus,
            &c.ccc.map_or("NA".to_string(), |v| format!("{v:.6}")),
            &c.n_values.to_string(),
            c.error.as_deref().unwrap_or(""),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{Cell, ResultMeta};

    // Deep rows of the young-corpus core-set label table.
    const DEEP_LABELS: [(&str, [f64; 4]); 5] = [
        ("annoyed", [0.151, 0.104, 0.100, 0.121]),
        ("frustrated", [0.228, 0.169, 0.093, 0.270]),
        ("interested", [0.270, 0.219, 0.024, 0.277]),
        ("relaxed", [0.407, 0.287, 0.287, 0.400]),
        ("surprised", [0.178, 0.128, 0.131, 0.194]),
    ];

    fn fixture() -> ExperimentResult {
        let mut cells = Vec::new();
        for (t, vals) in DEEP_LABELS {
            for (ch, v) in Channel::ALL.iter().zip(vals) {
                cells.push(Cell {
                    representation: Representation::Labels,
                    kind: FeatureKind::Deep,
                    target: t.into(),
                    channel: *ch,
                    strategy: Strategy::Within,
                    source: "young".into(),
                    test_corpus: "young".into(),
                    ccc: Some(v),
                    n_values: 10,
                    error: None,
                });
            }
        }
        ExperimentResult {
            meta: ResultMeta {
                seed: 0,
                config_hash: String::new(),
                code_version: String::new(),
            },
            cells,
        }
    }

    #[test]
    fn average_row_reproduces_label_table() {
        let t = results_table(&fixture(), Representation::Labels, Strategy::Within, "young");
        let avg = t.rows.last().unwrap();
        assert_eq!(avg.target, "Average");
        assert_eq!(fmt_coef(avg.values[3].unwrap()), ".252");
        assert_eq!(fmt_coef(avg.values[0].unwrap()), ".247");
        let csv = t.to_csv().unwrap();
        assert!(csv.lines().last().unwrap().starts_with("Average,Deep,.247,.181,.127,.252"), "{csv}");
        assert!(t.to_markdown().contains("| Relaxed | Deep | .407 | .287 | .287 | .400 |"));
    }

    #[test]
    fn undefined_cells_render_as_na() {
        let mut r = fixture();
        r.cells[0].ccc = None;
        let t = results_table(&r, Representation::Labels, Strategy::Within, "young");
        let csv = t.to_csv().unwrap();
        assert!(csv.contains("Annoyed,Deep,NA,.104"));
        assert!(csv.contains("Average,Deep,NA,.181"));
    }

    #[test]
    fn multi_word_dimensions_are_title_cased() {
        assert_eq!(display_name("goal_conduciveness"), "Goal Conduciveness");
    }
}
