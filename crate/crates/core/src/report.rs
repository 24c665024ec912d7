//! Result rows, the report CSV, and the aligned per-task tables.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::NetworkKind;
use crate::error::{Error, Result};
use crate::evalkit::ClassifierKind;

/// Embedding method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Metapath2vec,
    Node2vec,
    Verse,
    Combine,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Metapath2vec,
        Method::Node2vec,
        Method::Verse,
        Method::Combine,
    ];
    pub const BASE: [Method; 3] = [Method::Metapath2vec, Method::Node2vec, Method::Verse];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Metapath2vec => "metapath2vec",
            Method::Node2vec => "node2vec",
            Method::Verse => "verse",
            Method::Combine => "combine",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Method::Metapath2vec => "Metapath2vec",
            Method::Node2vec => "Node2vec",
            Method::Verse => "VERSE",
            Method::Combine => "Combine",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidInput(format!("unknown method {s:?}")))
    }
}

/// Evaluation task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Linkpred,
    Areaclass,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Linkpred, Task::Areaclass];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Linkpred => "linkpred",
            Task::Areaclass => "areaclass",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Task::Linkpred => "Co-authorship prediction accuracy",
            Task::Areaclass => "Research-area classification accuracy",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidInput(format!("unknown task {s:?}")))
    }
}

/// One line of the report CSV.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReportRow {
    pub task: Task,
    pub network: NetworkKind,
    pub method: Method,
    pub classifier: ClassifierKind,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub repeats: usize,
    pub n_samples: usize,
    /// Fraction of candidate items that had embeddings.
    pub coverage: f64,
}

pub const CSV_HEADER: [&str; 9] = [
    "task",
    "network",
    "method",
    "classifier",
    "mean_accuracy",
    "std_accuracy",
    "repeats",
    "n_samples",
    "coverage",
];

/// Floats are written with six decimals so reruns compare byte for byte.
pub fn write_report_csv(rows: &[ReportRow], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| Error::InvalidInput(format!("writing report CSV: {e}"));
    out.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        out.write_record([
            r.task.as_str().to_string(),
            r.network.as_str().to_string(),
            r.method.as_str().to_string(),
            r.classifier.as_str().to_string(),
            format!("{:.6}", r.mean_accuracy),
            format!("{:.6}", r.std_accuracy),
            r.repeats.to_string(),
            r.n_samples.to_string(),
            format!("{:.6}", r.coverage),
        ])
        .map_err(csv_err)?;
    }
    out.flush()
        .map_err(|e| Error::InvalidInput(format!("writing report CSV: {e}")))?;
    Ok(())
}

pub fn read_report_csv(r: impl Read) -> Result<Vec<ReportRow>> {
    let mut reader = csv::Reader::from_reader(r);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::InvalidInput(format!("report CSV header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != CSV_HEADER {
        return Err(Error::InvalidInput(format!(
            "unexpected report CSV header {header:?}"
        )));
    }
    reader
        .deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

/// One aligned text table per task present in `rows`: classifiers down,
/// methods × networks across. The best LR cell of each method group is
/// starred; absent cells stay blank and are listed under the table.
pub fn report_table(rows: &[ReportRow]) -> String {
    let cells: HashMap<(Task, Method, NetworkKind, ClassifierKind), f64> = rows
        .iter()
        .map(|r| ((r.task, r.method, r.network, r.classifier), r.mean_accuracy))
        .collect();
    let nets = NetworkKind::ALL_KINDS;
    let label_w = 4;
    let cell_w = 8;
    let group_w = nets.len() * (cell_w + 1) - 1;
    let mut out = String::new();
    for task in Task::ALL {
        if !rows.iter().any(|r| r.task == task) {
            continue;
        }
        if !out.is_empty() {
            out.push('\n');
        }
        let _ = writeln!(out, "{}", task.title());
        let _ = write!(out, "{:label_w$}", "");
        for m in Method::ALL {
            let _ = write!(out, " | {:^group_w$}", m.title());
        }
        out.push('\n');
        let _ = write!(out, "{:label_w$}", "");
        for _ in Method::ALL {
            out.push_str(" |");
            for n in nets {
                let _ = write!(out, " {:>cell_w$}", n.as_str());
            }
        }
        out.push('\n');
        let rule = label_w + Method::ALL.len() * (group_w + 3);
        out.push_str(&"-".repeat(rule));
        out.push('\n');

        let best_lr: HashMap<Method, f64> = Method::ALL
            .into_iter()
            .filter_map(|m| {
                nets.iter()
                    .filter_map(|&n| cells.get(&(task, m, n, ClassifierKind::LR)).copied())
                    .reduce(f64::max)
                    .map(|b| (m, b))
            })
            .collect();
        let mut missing = Vec::new();
        for c in ClassifierKind::ALL {
            let _ = write!(out, "{:label_w$}", c.as_str());
            for m in Method::ALL {
                out.push_str(" |");
                for n in nets {
                    let text = match cells.get(&(task, m, n, c)) {
                        Some(&v) => {
                            let star = c == ClassifierKind::LR && best_lr.get(&m) == Some(&v);
                            format!("{v:.4}{}", if star { "*" } else { " " })
                        }
                        None => {
                            missing.push(format!("{}/{}/{}", m.title(), n.as_str(), c.as_str()));
                            String::new()
                        }
                    };
                    let _ = write!(out, " {text:>cell_w$}");
                }
            }
            out.push('\n');
        }
        out.push_str("* best LR accuracy within the method group\n");
        if !missing.is_empty() {
            let _ = writeln!(out, "blank cells (not evaluated): {}", missing.join(", "));
        }
    }
    out
}
