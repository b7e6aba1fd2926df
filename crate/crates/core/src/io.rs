//! Dataset files and atomic artifact writes.
//!
//! Datasets are comma-separated with the header
//! `t_s,v_pu,omega_pu,p_w,q_var`. Leading `# key=value` lines carry the
//! metadata (`scenario`, `configuration`, `chp_in_service`).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::dataset::{Dataset, DatasetMeta};
use crate::error::{EdmError, Result};
use crate::simulator::Trace;

pub const HEADER: [&str; 5] = ["t_s", "v_pu", "omega_pu", "p_w", "q_var"];

/// Largest tolerated deviation from a uniform time grid [s].
pub const DT_JITTER: f64 = 1e-6;

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| EdmError::io(path, e))?;
    parse_dataset(&text, path)
}

pub fn parse_dataset(text: &str, path: &Path) -> Result<Dataset> {
    let err = |line: u64, message: String| EdmError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut meta = DatasetMeta::default();
    for (i, line) in text.lines().enumerate() {
        let Some(body) = line.trim_start().strip_prefix('#') else {
            break;
        };
        let Some((key, value)) = body.split_once('=') else {
            continue;
        };
        let value = value.trim();
        match key.trim() {
            "scenario" => meta.scenario = value.to_string(),
            "configuration" => {
                meta.configuration = Some(value.parse().map_err(|e: EdmError| err(i as u64 + 1, e.to_string()))?)
            }
            "chp_in_service" => {
                meta.chp_in_service = Some(
                    value
                        .parse()
                        .map_err(|_| err(i as u64 + 1, format!("expected true or false, got `{value}`")))?,
                )
            }
            _ => {}
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| err(e.position().map_or(1, |p| p.line()), e.to_string()))?
        .clone();
    if header.is_empty() {
        return Err(err(1, "empty file".into()));
    }
    if header.iter().ne(HEADER) {
        return Err(err(
            reader.position().line().saturating_sub(1).max(1),
            format!("expected header `{}`, got `{}`", HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }

    let mut cols: [Vec<f64>; 5] = Default::default();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            let message = match e.kind() {
                csv::ErrorKind::UnequalLengths { len, .. } => {
                    format!("expected {} columns, found {len}", HEADER.len())
                }
                _ => e.to_string(),
            };
            err(line, message)
        })?;
        let line = record.position().map_or(0, |p| p.line());
        for (j, field) in record.iter().enumerate() {
            let x: f64 = field
                .parse()
                .map_err(|_| err(line, format!("column {}: `{field}` is not a number", HEADER[j])))?;
            if !x.is_finite() {
                return Err(err(line, format!("column {}: non-finite value", HEADER[j])));
            }
            cols[j].push(x);
        }
    }

    let n = cols[0].len();
    if n == 0 {
        return Err(err(1, "no data rows".into()));
    }
    if n < 2 {
        return Err(EdmError::TooShort { need: 2, got: n });
    }
    let t = &cols[0];
    let t0 = t[0];
    let dt = (t[n - 1] - t0) / (n - 1) as f64;
    if !(dt > 0.0) {
        return Err(err(2, "time stamps must increase".into()));
    }
    for (k, &tk) in t.iter().enumerate() {
        if (tk - (t0 + k as f64 * dt)).abs() > DT_JITTER {
            return Err(err(
                data_line(text, k),
                format!("non-uniform sampling: t = {tk} deviates from the {dt} s grid"),
            ));
        }
    }

    let [_, v, omega, p, q] = cols;
    let trace = Trace::new(t0, dt, v, omega).map_err(|e| err(0, e.to_string()))?;
    Dataset::new(trace, p, q, meta)
}

/// One-based file line of the `k`-th data row.
fn data_line(text: &str, k: usize) -> u64 {
    let mut seen = None::<usize>;
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        seen = Some(seen.map_or(0, |s| s + 1));
        // The first non-comment line is the header.
        if seen == Some(k + 1) {
            return i as u64 + 1;
        }
    }
    0
}

pub fn format_dataset(ds: &Dataset) -> String {
    let mut out = String::new();
    if !ds.meta.scenario.is_empty() {
        out.push_str(&format!("# scenario={}\n", ds.meta.scenario));
    }
    if let Some(c) = ds.meta.configuration {
        out.push_str(&format!("# configuration={c}\n"));
    }
    if let Some(c) = ds.meta.chp_in_service {
        out.push_str(&format!("# chp_in_service={c}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    for k in 0..ds.len() {
        let u = ds.trace.input(k);
        w.write_record([ds.trace.time(k), u.v, u.omega, ds.p[k], ds.q[k]].map(|x| x.to_string()))
            .expect("in-memory write");
    }
    let body = w.into_inner().expect("in-memory flush");
    out.push_str(std::str::from_utf8(&body).expect("ascii csv"));
    out
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    write_atomic(path, format_dataset(ds).as_bytes())
}

/// Writes to a temporary sibling and renames it over `path`, so readers
/// never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| EdmError::io(path, std::io::Error::other("not a file path")))?;
    let mut tmp = PathBuf::from(dir);
    tmp.push(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        EdmError::io(path, e)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Dataset> {
        parse_dataset(text, Path::new("mem.csv"))
    }

    #[test]
    fn three_rows() {
        let ds = parse(
            "# scenario=3\n# configuration=A\n# chp_in_service=true\n\
             t_s,v_pu,omega_pu,p_w,q_var\n0,1,1,10,5\n0.02,1.01,1,11,6\n0.04,1,0.999,12,7\n",
        )
        .unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.meta.scenario, "3");
        assert_eq!(ds.meta.chp_in_service, Some(true));
        assert!((ds.dt() - 0.02).abs() < 1e-15);
        assert_eq!(ds.q, vec![5.0, 6.0, 7.0]);
    }

    #[test]
    fn missing_column_names_line() {
        let e = parse("t_s,v_pu,omega_pu,p_w,q_var\n0,1,1,10,5\n0.02,1,1,11\n").unwrap_err();
        match e {
            EdmError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn rejects_nan_gaps_and_jitter() {
        let h = "t_s,v_pu,omega_pu,p_w,q_var\n";
        assert!(parse(&format!("{h}0,1,1,NaN,5\n0.02,1,1,1,1\n")).is_err());
        assert!(parse(&format!("{h}0,1,1,,5\n0.02,1,1,1,1\n")).is_err());
        let e = parse(&format!("{h}0,1,1,1,1\n0.02,1,1,1,1\n0.06,1,1,1,1\n0.08,1,1,1,1\n")).unwrap_err();
        match e {
            EdmError::Parse { line, message, .. } => {
                assert!(message.contains("non-uniform"), "{message}");
                assert!(line >= 2);
            }
            other => panic!("{other}"),
        }
        // Jitter below the tolerance is accepted.
        assert!(parse(&format!("{h}0,1,1,1,1\n0.0200005,1,1,1,1\n0.04,1,1,1,1\n")).is_ok());
    }

    #[test]
    fn empty_and_wrong_header() {
        assert!(parse("").is_err());
        assert!(parse("t_s,v_pu,omega_pu,p_w,q_var\n").is_err());
        assert!(parse("t,v,w,p,q\n0,1,1,1,1\n").is_err());
    }

    #[test]
    fn format_round_trip() {
        let text = "# scenario=x\nt_s,v_pu,omega_pu,p_w,q_var\n0,1,1,0.1,0.3\n0.02,1.0000000001,0.99,1e-7,-3\n";
        let ds = parse(text).unwrap();
        let back = parse(&format_dataset(&ds)).unwrap();
        assert_eq!(ds, back);
    }
}
