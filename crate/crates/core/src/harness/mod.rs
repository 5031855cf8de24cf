//! Experiment drivers behind the `fishtank` command line.

pub mod audit;
pub mod exec;
pub mod hbb;
pub mod merge;
pub mod stats;
pub mod study;

use std::io::Write;

use crate::SketchError;

/// Writes rows in the long CSV layout `key,statistic,value`, where `key` names
/// the first column (`lambda`, `q`, ...).
pub fn write_long_csv<W: Write>(
    out: W,
    key: &str,
    rows: impl IntoIterator<Item = (f64, String, f64)>,
) -> Result<(), SketchError> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| SketchError::InvalidParams(format!("csv: {e}"));
    w.write_record([key, "statistic", "value"]).map_err(err)?;
    for (k, stat, v) in rows {
        w.serialize((k, stat, v)).map_err(err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn long_csv_layout() {
        let mut buf = Vec::new();
        write_long_csv(
            &mut buf,
            "lambda",
            vec![
                (1024.0, "mean".to_string(), 0.5),
                (2048.0, "q50".into(), 1e-3),
            ],
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "lambda,statistic,value\n1024.0,mean,0.5\n2048.0,q50,0.001\n"
        );
    }
}
