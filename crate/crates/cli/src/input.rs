//! Prediction CSV files: `true_label,pred_label,conf[,conf_0,...,conf_{K-1}]`.

use std::fs;
use std::io::Write;
use std::path::Path;

use calrisk::{clip_confidences, CalRiskError, EvaluationSet, PredictionRecord};

use crate::error::{CliError, CliResult};

/// `conf_*` entries may differ from `conf` by this much before the row is
/// rejected; smaller differences are snapped to `conf`.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-6;

const REQUIRED: [&str; 3] = ["true_label", "pred_label", "conf"];

#[derive(Debug, Clone)]
pub struct ParsedPredictions {
    pub set: EvaluationSet,
    /// Confidence values moved by clipping.
    pub clipped: usize,
    /// `conf_*` entries snapped to `conf`.
    pub snapped: usize,
    /// Line number of every record, in input order.
    pub lines: Vec<u64>,
}

impl ParsedPredictions {
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.clipped > 0 {
            out.push(format!(
                "{} confidence value(s) clipped to [{e}, 1 - {e}]",
                self.clipped,
                e = self.set.epsilon()
            ));
        }
        if self.snapped > 0 {
            out.push(format!(
                "{} conf_* value(s) at pred_label differed from conf by < {CONSISTENCY_TOLERANCE} and were set to conf",
                self.snapped
            ));
        }
        out
    }
}

fn parse_error(line: u64, message: impl Into<String>) -> CliError {
    CliError::Parse {
        line,
        message: message.into(),
    }
}

fn csv_error(err: csv::Error) -> CliError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    let message = match err.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("expected {expected_len} fields, found {len}"),
        _ => err.to_string(),
    };
    parse_error(line, message)
}

fn header_class_count(headers: &csv::StringRecord) -> CliResult<Option<usize>> {
    let names: Vec<&str> = headers.iter().collect();
    if names.len() < 3 || names[..3] != REQUIRED {
        return Err(CliError::Schema(format!(
            "header must start with true_label,pred_label,conf; found '{}'",
            names.join(",")
        )));
    }
    let extra = &names[3..];
    for (k, name) in extra.iter().enumerate() {
        if *name != format!("conf_{k}") {
            return Err(CliError::Schema(format!(
                "column {} must be conf_{k}, found '{name}'",
                k + 4
            )));
        }
    }
    match extra.len() {
        0 => Ok(None),
        1 => Err(CliError::Schema("a single conf_* column is not a valid class vector".into())),
        k => Ok(Some(k)),
    }
}

fn parse_label(field: &str, name: &str, line: u64) -> CliResult<usize> {
    field
        .parse()
        .map_err(|_| parse_error(line, format!("{name} '{field}' is not a non-negative integer")))
}

fn parse_prob(field: &str, name: &str, line: u64) -> CliResult<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| parse_error(line, format!("{name} '{field}' is not a decimal number")))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(parse_error(line, format!("{name} {field} outside [0, 1]")));
    }
    Ok(v)
}

/// Reads prediction CSV text from any reader.
pub fn read_predictions<R: std::io::Read>(reader: R, epsilon: f64) -> CliResult<ParsedPredictions> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let width = header_class_count(rdr.headers().map_err(csv_error)?)?;

    let mut records = Vec::new();
    let mut lines = Vec::new();
    let mut max_label = 0usize;
    let mut snapped = 0usize;
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let truth = parse_label(&row[0], "true_label", line)?;
        let pred = parse_label(&row[1], "pred_label", line)?;
        let conf = parse_prob(&row[2], "conf", line)?;
        max_label = max_label.max(truth).max(pred);
        let class_confs = match width {
            None => None,
            Some(k) => {
                let mut cc = (0..k)
                    .map(|c| parse_prob(&row[3 + c], &format!("conf_{c}"), line))
                    .collect::<CliResult<Vec<f64>>>()?;
                if pred < k {
                    let gap = (cc[pred] - conf).abs();
                    if gap > CONSISTENCY_TOLERANCE {
                        return Err(CliError::Consistency {
                            line,
                            message: format!(
                                "conf_{pred} = {} but conf = {conf} at pred_label {pred}",
                                cc[pred]
                            ),
                        });
                    }
                    if gap > 0.0 {
                        cc[pred] = conf;
                        snapped += 1;
                    }
                }
                Some(cc)
            }
        };
        records.push(PredictionRecord {
            true_label: truth,
            pred_label: pred,
            conf,
            class_confs,
        });
        lines.push(line);
    }
    if records.is_empty() {
        return Err(CliError::Schema("file has a header but no data rows".into()));
    }

    let k = match width {
        Some(k) => {
            if max_label >= k {
                let bad = records
                    .iter()
                    .position(|r| r.true_label.max(r.pred_label) >= k)
                    .expect("some label reaches k");
                return Err(CliError::Schema(format!(
                    "line {}: label {max_label} needs at least {} conf_* columns, found {k}",
                    lines[bad],
                    max_label + 1
                )));
            }
            k
        }
        None => (max_label + 1).max(2),
    };

    let eps_ok = epsilon > 0.0 && epsilon < 0.5;
    let clip_count = |v: f64| usize::from(eps_ok && (v < epsilon || v > 1.0 - epsilon));
    let clipped = records
        .iter()
        .map(|r| {
            clip_count(r.conf)
                + r.class_confs
                    .as_ref()
                    .map_or(0, |cc| cc.iter().map(|&v| clip_count(v)).sum())
        })
        .sum();

    let set = clip_confidences(records, k, epsilon).map_err(|e| locate(e, &lines))?;
    Ok(ParsedPredictions {
        set,
        clipped,
        snapped,
        lines,
    })
}

fn locate(err: CalRiskError, lines: &[u64]) -> CliError {
    let at = |index: usize| lines.get(index).copied().unwrap_or(0);
    match err {
        CalRiskError::LabelOutOfRange { index, .. }
        | CalRiskError::InvalidConfidence { index, .. }
        | CalRiskError::ClassConfidenceLength { index, .. } => parse_error(at(index), err.to_string()),
        CalRiskError::ClassConfidenceMismatch { index, .. } => CliError::Consistency {
            line: at(index),
            message: err.to_string(),
        },
        CalRiskError::InvalidEpsilon(_) => CliError::Usage(err.to_string()),
        other => CliError::Library(other),
    }
}

/// Parses and clips a prediction file.
pub fn parse_predictions(path: &Path, epsilon: f64) -> CliResult<ParsedPredictions> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_predictions(std::io::BufReader::new(file), epsilon)
}

/// CSV text for `records`; the `conf_*` columns appear when every record
/// carries class confidences.
pub fn predictions_csv(records: &[PredictionRecord], k: usize) -> String {
    let with_classes = records.iter().all(|r| r.class_confs.is_some());
    let mut out = String::from("true_label,pred_label,conf");
    if with_classes {
        for c in 0..k {
            out.push_str(&format!(",conf_{c}"));
        }
    }
    out.push('\n');
    for r in records {
        out.push_str(&format!("{},{},{}", r.true_label, r.pred_label, r.conf));
        if let (true, Some(cc)) = (with_classes, &r.class_confs) {
            for v in cc {
                out.push_str(&format!(",{v}"));
            }
        }
        out.push('\n');
    }
    out
}

/// Writes to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("'{}' is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let result = fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(contents)?;
            f.sync_all()
        })
        .and_then(|_| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::io(path, e));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> CliResult<ParsedPredictions> {
        read_predictions(text.as_bytes(), 1e-8)
    }

    #[test]
    fn three_row_binary() {
        let p = read("true_label,pred_label,conf\n0,0,0.9\n1,0,0.6\n1,1,0.7\n").unwrap();
        assert_eq!(p.set.len(), 3);
        assert_eq!(p.set.k(), 2);
        assert_eq!(p.clipped, 0);
        assert_eq!(p.lines, vec![2, 3, 4]);
    }

    #[test]
    fn crlf_and_spaces() {
        let p = read("true_label,pred_label,conf\r\n0, 0, 0.9\r\n1,1,0.7\r\n").unwrap();
        assert_eq!(p.set.len(), 2);
    }

    #[test]
    fn conf_one_is_clipped_with_warning() {
        let p = read("true_label,pred_label,conf\n0,0,1.0\n1,0,0.5\n").unwrap();
        assert_eq!(p.set.records()[0].conf, 1.0 - 1e-8);
        assert_eq!(p.clipped, 1);
        assert_eq!(p.warnings().len(), 1);
    }

    #[test]
    fn malformed_row_reports_line() {
        match read("true_label,pred_label,conf\n0,0,0.9\n1,x,0.6\n").unwrap_err() {
            CliError::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("{e:?}"),
        }
        match read("true_label,pred_label,conf\n0,0,0.9\n1,0\n").unwrap_err() {
            CliError::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("{e:?}"),
        }
        match read("true_label,pred_label,conf\n0,0,1.5\n").unwrap_err() {
            CliError::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn conf_mismatch_is_line_addressed() {
        let text = "true_label,pred_label,conf,conf_0,conf_1,conf_2\n\
                    0,0,0.5,0.5,0.3,0.2\n\
                    2,2,0.6,0.2,0.2,0.55\n";
        match read(text).unwrap_err() {
            CliError::Consistency { line, .. } => assert_eq!(line, 3),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn small_mismatch_is_snapped() {
        let text = "true_label,pred_label,conf,conf_0,conf_1\n0,0,0.6,0.6000004,0.4\n1,1,0.7,0.3,0.7\n";
        let p = read(text).unwrap();
        assert_eq!(p.snapped, 1);
        assert_eq!(p.set.records()[0].class_confs.as_ref().unwrap()[0], 0.6);
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(read("label,pred,conf\n0,0,0.5\n"), Err(CliError::Schema(_))));
        assert!(matches!(
            read("true_label,pred_label,conf,conf_1,conf_0\n0,0,0.5,0.5,0.5\n"),
            Err(CliError::Schema(_))
        ));
        // label 2 with only two class columns
        assert!(matches!(
            read("true_label,pred_label,conf,conf_0,conf_1\n2,0,0.5,0.5,0.5\n"),
            Err(CliError::Schema(_))
        ));
        assert!(matches!(read("true_label,pred_label,conf\n"), Err(CliError::Schema(_))));
    }

    #[test]
    fn k_from_labels() {
        let p = read("true_label,pred_label,conf\n0,0,0.9\n3,1,0.6\n").unwrap();
        assert_eq!(p.set.k(), 4);
        let p = read("true_label,pred_label,conf\n0,0,0.9\n").unwrap();
        assert_eq!(p.set.k(), 2);
    }

    #[test]
    fn csv_round_trip() {
        let text = "true_label,pred_label,conf,conf_0,conf_1\n0,0,0.6,0.6,0.4\n1,1,0.7,0.3,0.7\n";
        let p = read(text).unwrap();
        let again = read(&predictions_csv(p.set.records(), 2)).unwrap();
        assert_eq!(p.set, again.set);
    }
}
