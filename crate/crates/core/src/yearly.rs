//! Daily station records reshaped into one 365-value row per year.
//!
//! February 29 is dropped so that every year has the same length. Years with
//! missing days are either excluded or filled by linear interpolation.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

pub const DAYS: usize = 365;

/// Years × 365 matrix with contiguous, increasing year labels.
#[derive(Debug, Clone, PartialEq)]
pub struct YearlyMatrix {
    station_id: String,
    years: Vec<i32>,
    values: Vec<f64>,
}

impl YearlyMatrix {
    pub fn new(station_id: impl Into<String>, years: Vec<i32>, values: Vec<f64>) -> Result<Self> {
        if years.is_empty() {
            return Err(Error::invalid("no years"));
        }
        if values.len() != years.len() * DAYS {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} years of {DAYS} days",
                values.len(),
                years.len()
            )));
        }
        if years.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(Error::invalid("year labels must be contiguous and increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite value in yearly matrix"));
        }
        let station_id = station_id.into();
        if station_id.contains('\n') {
            return Err(Error::invalid("station id contains a newline"));
        }
        Ok(Self {
            station_id,
            years,
            values,
        })
    }

    pub fn station_id(&self) -> &str {
        &self.station_id
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn first_year(&self) -> i32 {
        self.years[0]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * DAYS..(i + 1) * DAYS]
    }

    pub fn to_data_matrix(&self) -> DataMatrix {
        DataMatrix::new(self.years.len(), DAYS, self.values.clone()).expect("validated on construction")
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# station: {}", self.station_id)?;
        write!(w, "year")?;
        for d in 1..=DAYS {
            write!(w, ",d{d:03}")?;
        }
        writeln!(w)?;
        for (i, y) in self.years.iter().enumerate() {
            write!(w, "{y}")?;
            for v in self.row(i) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut station_id = String::new();
        let mut years = Vec::new();
        let mut values = Vec::new();
        let mut seen_header = false;
        for (i, line) in BufReader::new(r).lines().enumerate() {
            let line = line.map_err(|e| Error::io("<input>", e))?;
            let row = i + 1;
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(id) = rest.trim_start().strip_prefix("station:") {
                    station_id = id.trim().to_string();
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != DAYS + 1 {
                return Err(Error::Format(format!(
                    "row {row}: expected {} columns, found {}",
                    DAYS + 1,
                    cells.len()
                )));
            }
            if !seen_header {
                seen_header = true;
                if cells[0].trim() == "year" {
                    continue;
                }
            }
            let year = cells[0].trim().parse::<i32>().map_err(|e| Error::Parse {
                row,
                column: 1,
                message: e.to_string(),
            })?;
            years.push(year);
            for (j, c) in cells[1..].iter().enumerate() {
                values.push(c.trim().parse::<f64>().map_err(|e| Error::Parse {
                    row,
                    column: j + 2,
                    message: e.to_string(),
                })?);
            }
        }
        Self::new(station_id, years, values)
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(f)
    }
}

/// Daily `date,value` records. Blank or `NA` values count as missing.
pub fn read_daily<R: Read>(r: R) -> Result<Vec<(NaiveDate, Option<f64>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(r);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() < 2 {
            return Err(Error::Format(format!("row {row}: expected date,value")));
        }
        let date_cell = rec[0].trim();
        let date = match NaiveDate::parse_from_str(date_cell, "%Y-%m-%d") {
            Ok(d) => d,
            // a header line
            Err(_) if i == 0 => continue,
            Err(e) => {
                return Err(Error::Parse {
                    row,
                    column: 1,
                    message: format!("{date_cell:?}: {e}"),
                })
            }
        };
        let cell = rec[1].trim();
        let value = if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
            None
        } else {
            let v = cell.parse::<f64>().map_err(|e| Error::Parse {
                row,
                column: 2,
                message: format!("{cell:?}: {e}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: 2,
                    message: "non-finite value".into(),
                });
            }
            Some(v)
        };
        out.push((date, value));
    }
    Ok(out)
}

pub fn read_daily_path(path: &Path) -> Result<Vec<(NaiveDate, Option<f64>)>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_daily(f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissingPolicy {
    Exclude,
    Interpolate,
}

#[derive(Debug, Clone)]
pub struct Reshaped {
    pub matrix: YearlyMatrix,
    /// Years dropped for incomplete data or for lying outside the kept block.
    pub excluded: Vec<i32>,
    /// Days filled under [`MissingPolicy::Interpolate`].
    pub interpolated: usize,
    pub warnings: Vec<String>,
}

/// Zero-based day of a 365-day year, `None` for February 29.
pub fn day_index(d: NaiveDate) -> Option<usize> {
    let ord = d.ordinal0() as usize;
    let leap = NaiveDate::from_ymd_opt(d.year(), 2, 29).is_some();
    match (leap, ord) {
        (true, 59) => None,
        (true, o) if o > 59 => Some(o - 1),
        (_, o) => Some(o),
    }
}

/// Groups records by year, drops leap days and applies `policy`.
///
/// Under exclusion, incomplete years are dropped; if that leaves gaps, only
/// the longest run of consecutive complete years is kept (earliest on ties).
pub fn reshape(
    records: &[(NaiveDate, Option<f64>)],
    station_id: &str,
    policy: MissingPolicy,
) -> Result<Reshaped> {
    let mut seen: BTreeMap<NaiveDate, ()> = BTreeMap::new();
    let mut by_year: BTreeMap<i32, Vec<Option<f64>>> = BTreeMap::new();
    for &(date, value) in records {
        if seen.insert(date, ()).is_some() {
            return Err(Error::invalid(format!("duplicated date {date}")));
        }
        let Some(day) = day_index(date) else { continue };
        by_year.entry(date.year()).or_insert_with(|| vec![None; DAYS])[day] = value;
    }
    let (&first, &last) = match (by_year.keys().next(), by_year.keys().next_back()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::invalid("no rows in input")),
    };
    let mut warnings = Vec::new();
    match policy {
        MissingPolicy::Interpolate => {
            let years: Vec<i32> = (first..=last).collect();
            let mut series: Vec<Option<f64>> = Vec::with_capacity(years.len() * DAYS);
            for y in &years {
                match by_year.get(y) {
                    Some(v) => series.extend_from_slice(v),
                    None => series.extend(std::iter::repeat_n(None, DAYS)),
                }
            }
            let missing = series.iter().filter(|v| v.is_none()).count();
            let values = interpolate(&series).ok_or_else(|| Error::invalid("no observed values to interpolate from"))?;
            if missing > 0 {
                warnings.push(format!("interpolated {missing} missing days"));
            }
            Ok(Reshaped {
                matrix: YearlyMatrix::new(station_id, years, values)?,
                excluded: Vec::new(),
                interpolated: missing,
                warnings,
            })
        }
        MissingPolicy::Exclude => {
            let complete: Vec<i32> = by_year
                .iter()
                .filter(|(_, v)| v.iter().all(Option::is_some))
                .map(|(&y, _)| y)
                .collect();
            let incomplete: Vec<i32> = (first..=last).filter(|y| !complete.contains(y)).collect();
            if !incomplete.is_empty() {
                warnings.push(format!("excluded incomplete years: {}", join(&incomplete)));
            }
            let block = longest_run(&complete).ok_or_else(|| Error::invalid("no complete years in input"))?;
            let dropped: Vec<i32> = complete.iter().copied().filter(|y| !block.contains(y)).collect();
            if !dropped.is_empty() {
                warnings.push(format!("dropped complete years outside the longest contiguous block: {}", join(&dropped)));
            }
            let mut values = Vec::with_capacity(block.len() * DAYS);
            for y in &block {
                values.extend(by_year[y].iter().map(|v| v.expect("complete year")));
            }
            let mut excluded = incomplete;
            excluded.extend(dropped);
            excluded.sort_unstable();
            Ok(Reshaped {
                matrix: YearlyMatrix::new(station_id, block, values)?,
                excluded,
                interpolated: 0,
                warnings,
            })
        }
    }
}

fn join(years: &[i32]) -> String {
    years.iter().map(|y| y.to_string()).collect::<Vec<_>>().join(" ")
}

fn longest_run(sorted: &[i32]) -> Option<Vec<i32>> {
    let mut best: Option<(usize, usize)> = None;
    let mut start = 0;
    for i in 0..sorted.len() {
        if i + 1 == sorted.len() || sorted[i + 1] != sorted[i] + 1 {
            let len = i + 1 - start;
            if best.is_none_or(|(_, l)| len > l) {
                best = Some((start, len));
            }
            start = i + 1;
        }
    }
    best.map(|(s, l)| sorted[s..s + l].to_vec())
}

/// Linear interpolation over the index; edges copy the nearest observation.
fn interpolate(series: &[Option<f64>]) -> Option<Vec<f64>> {
    let known: Vec<usize> = (0..series.len()).filter(|&i| series[i].is_some()).collect();
    let (&lo, &hi) = (known.first()?, known.last()?);
    let mut out = vec![0.0; series.len()];
    for i in 0..=lo {
        out[i] = series[lo].unwrap();
    }
    for i in hi..series.len() {
        out[i] = series[hi].unwrap();
    }
    for w in known.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (va, vb) = (series[a].unwrap(), series[b].unwrap());
        for i in a..=b {
            let t = (i - a) as f64 / (b - a) as f64;
            out[i] = va + t * (vb - va);
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn year_records(year: i32, skip: &[usize]) -> Vec<(NaiveDate, Option<f64>)> {
        let mut d = NaiveDate::from_ymd_opt(year, 1, 1).unwrap();
        let mut out = Vec::new();
        let mut i = 0;
        while d.year() == year {
            if !skip.contains(&i) {
                out.push((d, Some(year as f64 + i as f64 / 1000.0)));
            }
            d = d.succ_opt().unwrap();
            i += 1;
        }
        out
    }

    #[test]
    fn leap_day_is_dropped() {
        let recs = year_records(2020, &[]);
        assert_eq!(recs.len(), 366);
        let r = reshape(&recs, "X", MissingPolicy::Exclude).unwrap();
        assert_eq!(r.matrix.years(), &[2020]);
        let row = r.matrix.row(0);
        // Feb 28 is day 58, Feb 29 (i = 59) skipped, Mar 1 (i = 60) lands at 59
        assert_eq!(row[58], 2020.058);
        assert_eq!(row[59], 2020.060);
        assert_eq!(row[364], 2020.365);
    }

    #[test]
    fn full_year_unchanged() {
        let recs = year_records(2021, &[]);
        let r = reshape(&recs, "X", MissingPolicy::Exclude).unwrap();
        let expect: Vec<f64> = recs.iter().map(|r| r.1.unwrap()).collect();
        assert_eq!(r.matrix.row(0), expect.as_slice());
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn short_year_excluded_with_warning() {
        let mut recs = year_records(2019, &[]);
        recs.extend(year_records(2020, &[100]));
        recs.extend(year_records(2021, &[]));
        recs.extend(year_records(2022, &[]));
        let r = reshape(&recs, "X", MissingPolicy::Exclude).unwrap();
        assert_eq!(r.matrix.years(), &[2021, 2022]);
        assert_eq!(r.excluded, vec![2019, 2020]);
        assert!(r.warnings[0].contains("2020"));
    }

    #[test]
    fn interpolation_fills_gaps() {
        let mut recs = year_records(2021, &[0, 1, 10, 11, 364]);
        recs.extend(year_records(2022, &[0]));
        let r = reshape(&recs, "X", MissingPolicy::Interpolate).unwrap();
        assert_eq!(r.interpolated, 6);
        let row = r.matrix.row(0);
        assert_eq!(row[0], 2021.002);
        assert!((row[10] - (2021.009 + (2021.012 - 2021.009) / 3.0)).abs() < 1e-12);
        // year boundary: between 2021-12-30 and 2022-01-02
        let next = r.matrix.row(1);
        assert!((row[364] - (2021.363 + (2022.001 - 2021.363) / 3.0)).abs() < 1e-12);
        assert!((next[0] - (2021.363 + 2.0 * (2022.001 - 2021.363) / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn duplicate_dates_rejected() {
        let mut recs = year_records(2021, &[]);
        recs.push(recs[3]);
        assert!(reshape(&recs, "X", MissingPolicy::Exclude).is_err());
    }

    #[test]
    fn round_trip() {
        let mut recs = year_records(1999, &[]);
        recs.extend(year_records(2000, &[]));
        let m = reshape(&recs, "ST-01", MissingPolicy::Exclude).unwrap().matrix;
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        let back = YearlyMatrix::read(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.station_id(), "ST-01");
    }

    #[test]
    fn daily_parsing() {
        let text = "date,value\n2021-01-01,1.5\n2021-01-02,NA\n2021-01-03,\n";
        let recs = read_daily(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].1, Some(1.5));
        assert_eq!(recs[1].1, None);
        let bad = "2021-01-01,1\n2021-01-02,x\n";
        match read_daily(bad.as_bytes()) {
            Err(Error::Parse { row: 2, column: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_contiguous_labels_rejected() {
        assert!(YearlyMatrix::new("s", vec![2000, 2002], vec![0.0; 2 * DAYS]).is_err());
    }
}
