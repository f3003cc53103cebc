//! Flat text and CSV renderings of detection results.
//!
//! Projection indices are printed 1-based; the in-memory structs use 0-based
//! indices.

use std::io::Write;

use crate::detector::{DetectionReport, RepetitionSummary};
use crate::error::{Error, Result};

fn io_err(e: std::io::Error) -> Error {
    Error::io("<output>", e)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `key=value` lines, one field per line.
pub fn write_report_kv<W: Write>(r: &DetectionReport, mut w: W) -> Result<()> {
    let lines = [
        ("n", r.n.to_string()),
        ("p", r.p.to_string()),
        ("k", r.k.to_string()),
        ("variant", r.variant.to_string()),
        ("method", r.method.to_string()),
        ("p_comb", r.p_comb.to_string()),
        ("significant", r.significant.to_string()),
        ("z_hat", r.z_hat.to_string()),
        ("theta_hat", r.theta_hat.to_string()),
        ("winner", (r.winner + 1).to_string()),
        ("degenerate", r.degenerate.to_string()),
    ];
    for (k, v) in lines {
        writeln!(w, "{k}={v}").map_err(io_err)?;
    }
    Ok(())
}

pub const REPORT_CSV_HEADER: &str = "n,p,k,variant,method,p_comb,significant,z_hat,theta_hat,winner,degenerate";

/// Header plus a single row.
pub fn write_report_csv<W: Write>(r: &DetectionReport, mut w: W) -> Result<()> {
    writeln!(w, "{REPORT_CSV_HEADER}").map_err(io_err)?;
    writeln!(
        w,
        "{},{},{},{},{},{},{},{},{},{},{}",
        r.n,
        r.p,
        r.k,
        r.variant,
        r.method,
        r.p_comb,
        r.significant,
        r.z_hat,
        r.theta_hat,
        r.winner + 1,
        r.degenerate
    )
    .map_err(io_err)
}

/// Per-projection audit table; errors if the report was built without it.
pub fn write_projection_csv<W: Write>(r: &DetectionReport, mut w: W) -> Result<()> {
    let rows = r
        .per_projection
        .as_ref()
        .ok_or_else(|| Error::invalid("report has no per-projection table"))?;
    writeln!(w, "projection,raw_p,adjusted_p,sup_stat,arg_sup").map_err(io_err)?;
    for (i, row) in rows.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{}",
            i + 1,
            row.raw_p,
            fmt_opt(row.adjusted_p),
            row.sup_stat,
            row.arg_sup
        )
        .map_err(io_err)?;
    }
    Ok(())
}

/// Maps a location index to a calendar label: `first + z - 1`.
pub fn location_label(first_label: i64, z: usize) -> i64 {
    first_label + z as i64 - 1
}

/// `key=value` summary of a repetition run. With `first_label`, the mode is
/// also printed as a calendar label.
pub fn write_summary_kv<W: Write>(s: &RepetitionSummary, first_label: Option<i64>, mut w: W) -> Result<()> {
    let significant = s.significant_mask.iter().filter(|&&b| b).count();
    writeln!(w, "repetitions={}", s.repetitions()).map_err(io_err)?;
    writeln!(w, "significant={significant}").map_err(io_err)?;
    writeln!(w, "mode={}", s.mode).map_err(io_err)?;
    writeln!(w, "mode_count={}", s.mode_count).map_err(io_err)?;
    if let Some(first) = first_label {
        writeln!(w, "mode_label={}", location_label(first, s.mode)).map_err(io_err)?;
    }
    if let Some((_, mode, count)) = s.significant_only() {
        writeln!(w, "mode_significant={mode}").map_err(io_err)?;
        writeln!(w, "mode_significant_count={count}").map_err(io_err)?;
    }
    Ok(())
}

/// Two-column `location,count` histogram, ascending by location.
pub fn write_histogram_csv<W: Write>(s: &RepetitionSummary, mut w: W) -> Result<()> {
    writeln!(w, "location,count").map_err(io_err)?;
    for (z, c) in &s.histogram {
        writeln!(w, "{z},{c}").map_err(io_err)?;
    }
    Ok(())
}

/// Reads a histogram written by [`write_histogram_csv`].
pub fn read_histogram_csv<R: std::io::Read>(r: R) -> Result<Vec<(usize, usize)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |c: usize| -> Result<usize> {
            let cell = rec.get(c).ok_or_else(|| Error::Format(format!("row {} too short", i + 1)))?;
            cell.trim().parse().map_err(|e| Error::Parse {
                row: i + 1,
                column: c + 1,
                message: format!("{e}"),
            })
        };
        out.push((parse(0)?, parse(1)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combine::Method;
    use crate::cusum::Variant;
    use crate::detector::ProjectionRow;

    fn report() -> DetectionReport {
        DetectionReport {
            n: 50,
            p: 10,
            k: 3,
            method: Method::Bh,
            variant: Variant::Standard,
            p_comb: 0.25,
            significant: false,
            z_hat: 25,
            theta_hat: 0.5,
            winner: 0,
            degenerate: false,
            per_projection: Some(vec![
                ProjectionRow {
                    raw_p: 0.5,
                    adjusted_p: Some(1.0),
                    sup_stat: 0.5,
                    arg_sup: 3,
                };
                2
            ]),
        }
    }

    #[test]
    fn kv_prints_winner_one_based() {
        let mut out = Vec::new();
        write_report_kv(&report(), &mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert!(s.contains("winner=1\n"));
        assert!(s.contains("method=bh\n"));
        assert!(s.contains("z_hat=25\n"));
    }

    #[test]
    fn csv_has_matching_columns() {
        let mut out = Vec::new();
        write_report_csv(&report(), &mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
    }

    #[test]
    fn projection_table() {
        let mut out = Vec::new();
        write_projection_csv(&report(), &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 3);
        let mut r = report();
        r.per_projection = None;
        assert!(write_projection_csv(&r, Vec::new()).is_err());
    }

    #[test]
    fn histogram_round_trip_and_labels() {
        let s = RepetitionSummary::from_locations(vec![25, 25, 26, 3], vec![true, false, true, true]).unwrap();
        let mut out = Vec::new();
        write_histogram_csv(&s, &mut out).unwrap();
        let back = read_histogram_csv(out.as_slice()).unwrap();
        assert_eq!(back, vec![(3, 1), (25, 2), (26, 1)]);

        let mut kv = Vec::new();
        write_summary_kv(&s, Some(1910), &mut kv).unwrap();
        let kv = String::from_utf8(kv).unwrap();
        assert!(kv.contains("mode=25\n"));
        assert!(kv.contains("mode_label=1934\n"));
        assert!(kv.contains("significant=3\n"));
        assert_eq!(location_label(1910, 1), 1910);
    }
}
