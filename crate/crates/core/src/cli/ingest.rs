//! Station and measurement CSV ingestion.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use super::config::MissingPolicy;
use crate::error::{Error, Result};
use crate::geometry::Point2;

/// Raw T×N panel with explicit missing markers, rows sorted by date.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPanel {
    pub station_ids: Vec<String>,
    pub stations: Vec<Point2>,
    pub dates: Vec<String>,
    /// values[t][i]; `None` is a missing measurement.
    pub values: Vec<Vec<Option<f64>>>,
}

/// A panel without gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletePanel {
    pub station_ids: Vec<String>,
    pub stations: Vec<Point2>,
    pub dates: Vec<String>,
    /// T×N.
    pub values: DMatrix<f64>,
}

fn schema(file: &str, message: impl Into<String>) -> Error {
    Error::SchemaError {
        file: file.to_string(),
        message: message.into(),
    }
}

fn check_header(file: &str, rdr: &mut csv::Reader<impl Read>, want: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(|e| schema(file, e.to_string()))?;
    let got: Vec<&str> = header.iter().map(|h| h.trim().trim_start_matches('\u{feff}')).collect();
    if got != want {
        return Err(schema(file, format!("expected header `{}`, got `{}`", want.join(","), got.join(","))));
    }
    Ok(())
}

fn parse_number(file: &str, line: u64, field: &str, text: &str) -> Result<f64> {
    let v: f64 = text
        .trim()
        .parse()
        .map_err(|_| schema(file, format!("line {line}: {field} `{text}` is not a number")))?;
    if !v.is_finite() {
        return Err(schema(file, format!("line {line}: {field} must be finite")));
    }
    Ok(v)
}

fn reader(source: impl Read) -> csv::Reader<impl Read> {
    csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(source)
}

/// Parses `station_id,x,y`.
pub fn read_stations(file: &str, source: impl Read) -> Result<Vec<(String, Point2)>> {
    let mut rdr = reader(source);
    check_header(file, &mut rdr, &["station_id", "x", "y"])?;
    let mut out: Vec<(String, Point2)> = Vec::new();
    let mut seen = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| schema(file, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(schema(file, format!("line {line}: expected 3 fields, got {}", rec.len())));
        }
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(schema(file, format!("line {line}: empty station id")));
        }
        let p = Point2::new(parse_number(file, line, "x", &rec[1])?, parse_number(file, line, "y", &rec[2])?);
        if seen.insert(id.clone(), line).is_some() {
            return Err(schema(file, format!("line {line}: station `{id}` listed twice")));
        }
        out.push((id, p));
    }
    if out.is_empty() {
        return Err(schema(file, "no stations"));
    }
    Ok(out)
}

fn is_missing(text: &str) -> bool {
    matches!(text.trim(), "" | "NA" | "na" | "NaN" | "nan")
}

/// Parses `date,station_id,value` against the known stations.
pub fn read_panel(
    stations: Vec<(String, Point2)>,
    file: &str,
    source: impl Read,
) -> Result<ObservationPanel> {
    let index: HashMap<&str, usize> = stations.iter().enumerate().map(|(i, (id, _))| (id.as_str(), i)).collect();
    let mut rdr = reader(source);
    check_header(file, &mut rdr, &["date", "station_id", "value"])?;
    let mut cells: BTreeMap<NaiveDate, HashMap<usize, Option<f64>>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| schema(file, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(schema(file, format!("line {line}: expected 3 fields, got {}", rec.len())));
        }
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
            .map_err(|_| schema(file, format!("line {line}: `{}` is not an ISO-8601 date", &rec[0])))?;
        let station = *index
            .get(&rec[1])
            .ok_or_else(|| schema(file, format!("line {line}: unknown station `{}`", &rec[1])))?;
        let value = if is_missing(&rec[2]) {
            None
        } else {
            Some(parse_number(file, line, "value", &rec[2])?)
        };
        if cells.entry(date).or_default().insert(station, value).is_some() {
            return Err(Error::DuplicateRecord {
                date: date.format("%Y-%m-%d").to_string(),
                station: rec[1].to_string(),
            });
        }
    }

    let mut measured = vec![false; stations.len()];
    for day in cells.values() {
        for (&i, v) in day {
            measured[i] |= v.is_some();
        }
    }
    let keep: Vec<usize> = (0..stations.len()).filter(|&i| measured[i]).collect();
    for (i, (id, _)) in stations.iter().enumerate() {
        if !measured[i] {
            log::warn!("station {id} has no measurements and is dropped");
        }
    }
    if keep.is_empty() {
        return Err(Error::NoCompleteStations);
    }
    let values = cells
        .values()
        .map(|day| keep.iter().map(|i| day.get(i).copied().flatten()).collect())
        .collect();
    Ok(ObservationPanel {
        station_ids: keep.iter().map(|&i| stations[i].0.clone()).collect(),
        stations: keep.iter().map(|&i| stations[i].1).collect(),
        dates: cells.keys().map(|d| d.format("%Y-%m-%d").to_string()).collect(),
        values,
    })
}

pub fn ingest(stations_path: &Path, measurements_path: &Path) -> Result<ObservationPanel> {
    let open = |p: &Path| {
        std::fs::File::open(p).map_err(|e| schema(&p.display().to_string(), format!("cannot open: {e}")))
    };
    let stations = read_stations(&stations_path.display().to_string(), open(stations_path)?)?;
    read_panel(stations, &measurements_path.display().to_string(), open(measurements_path)?)
}

/// Linear interpolation over the time index; the ends are held constant.
fn interpolate_column(col: &mut [Option<f64>]) {
    let known: Vec<usize> = (0..col.len()).filter(|&t| col[t].is_some()).collect();
    let (Some(&first), Some(&last)) = (known.first(), known.last()) else {
        return;
    };
    for t in 0..col.len() {
        if col[t].is_some() {
            continue;
        }
        col[t] = Some(if t < first {
            col[first].unwrap()
        } else if t > last {
            col[last].unwrap()
        } else {
            let hi = known[known.partition_point(|&k| k < t)];
            let lo = known[known.partition_point(|&k| k < t) - 1];
            let (a, b) = (col[lo].unwrap(), col[hi].unwrap());
            a + (b - a) * (t - lo) as f64 / (hi - lo) as f64
        });
    }
}

impl ObservationPanel {
    pub fn complete(&self, policy: MissingPolicy) -> Result<CompletePanel> {
        let t = self.dates.len();
        let n = self.station_ids.len();
        if t == 0 {
            return Err(Error::NoCompleteStations);
        }
        let mut columns: Vec<Vec<Option<f64>>> = (0..n).map(|i| (0..t).map(|r| self.values[r][i]).collect()).collect();
        let keep: Vec<usize> = match policy {
            MissingPolicy::DropStation => (0..n).filter(|&i| columns[i].iter().all(Option::is_some)).collect(),
            MissingPolicy::Interpolate => {
                columns.iter_mut().for_each(|c| interpolate_column(c));
                (0..n).collect()
            }
        };
        for i in (0..n).filter(|i| !keep.contains(i)) {
            let gaps = columns[i].iter().filter(|v| v.is_none()).count();
            log::warn!("station {} misses {gaps} of {t} days and is dropped", self.station_ids[i]);
        }
        if keep.is_empty() {
            return Err(Error::NoCompleteStations);
        }
        Ok(CompletePanel {
            station_ids: keep.iter().map(|&i| self.station_ids[i].clone()).collect(),
            stations: keep.iter().map(|&i| self.stations[i]).collect(),
            dates: self.dates.clone(),
            values: DMatrix::from_fn(t, keep.len(), |r, c| columns[keep[c]][r].expect("complete column")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STATIONS: &str = "station_id,x,y\nA,0,0\nB,1,0\n";

    fn panel(measurements: &str) -> Result<ObservationPanel> {
        read_panel(read_stations("s", STATIONS.as_bytes()).unwrap(), "m", measurements.as_bytes())
    }

    #[test]
    fn complete_panel() {
        let m = "date,station_id,value\n2011-01-02,A,2\n2011-01-01,A,1\n2011-01-01,B,10\n2011-01-02,B,20\n2011-01-03,A,3\n2011-01-03,B,30\n";
        let p = panel(m).unwrap();
        assert_eq!(p.dates, ["2011-01-01", "2011-01-02", "2011-01-03"]);
        let c = p.complete(MissingPolicy::DropStation).unwrap();
        assert_eq!(c.values.shape(), (3, 2));
        assert_eq!(c.values[(0, 0)], 1.0);
        assert_eq!(c.values[(2, 1)], 30.0);
        assert_eq!(c.station_ids, ["A", "B"]);
    }

    #[test]
    fn duplicate_rows_are_rejected() {
        let m = "date,station_id,value\n2011-01-01,A,1\n2011-01-01,A,2\n";
        match panel(m) {
            Err(Error::DuplicateRecord { date, station }) => {
                assert_eq!(date, "2011-01-01");
                assert_eq!(station, "A");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn incomplete_station_is_dropped() {
        let m = "date,station_id,value\n2011-01-01,A,1\n2011-01-01,B,5\n2011-01-02,A,2\n2011-01-02,B,NA\n2011-01-03,A,3\n2011-01-03,B,7\n";
        let c = panel(m).unwrap().complete(MissingPolicy::DropStation).unwrap();
        let want = CompletePanel {
            station_ids: vec!["A".into()],
            stations: vec![Point2::new(0.0, 0.0)],
            dates: vec!["2011-01-01".into(), "2011-01-02".into(), "2011-01-03".into()],
            values: DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]),
        };
        assert_eq!(c, want);
        // an absent row counts as missing too
        let m = "date,station_id,value\n2011-01-01,A,1\n2011-01-01,B,5\n2011-01-02,A,2\n2011-01-03,A,3\n2011-01-03,B,7\n";
        let p = panel(m).unwrap();
        assert_eq!(p.values[1][1], None);
        let c = p.complete(MissingPolicy::Interpolate).unwrap();
        assert_eq!(c.values[(1, 1)], 6.0);
    }

    #[test]
    fn interpolation_holds_ends() {
        let mut col = vec![None, Some(2.0), None, None, Some(8.0), None];
        interpolate_column(&mut col);
        let got: Vec<f64> = col.into_iter().map(Option::unwrap).collect();
        assert_eq!(got, [2.0, 2.0, 4.0, 6.0, 8.0, 8.0]);
    }

    #[test]
    fn unmeasured_station_is_dropped_and_empty_panel_errors() {
        let m = "date,station_id,value\n2011-01-01,A,1\n2011-01-02,A,2\n";
        let p = panel(m).unwrap();
        assert_eq!(p.station_ids, ["A"]);
        let m = "date,station_id,value\n2011-01-01,A,NA\n";
        assert!(matches!(panel(m), Err(Error::NoCompleteStations)));
        let m = "date,station_id,value\n2011-01-01,A,1\n2011-01-01,B,NA\n2011-01-02,A,NA\n2011-01-02,B,3\n";
        assert!(matches!(
            panel(m).unwrap().complete(MissingPolicy::DropStation),
            Err(Error::NoCompleteStations)
        ));
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(
            read_stations("s", "id,x,y\nA,0,0\n".as_bytes()),
            Err(Error::SchemaError { .. })
        ));
        assert!(matches!(
            read_stations("s", "station_id,x,y\nA,0,zero\n".as_bytes()),
            Err(Error::SchemaError { .. })
        ));
        assert!(matches!(
            read_stations("s", "station_id,x,y\nA,0,0\nA,1,1\n".as_bytes()),
            Err(Error::SchemaError { .. })
        ));
        for m in [
            "date,station,value\n",
            "date,station_id,value\n01/02/2011,A,1\n",
            "date,station_id,value\n2011-01-01,C,1\n",
            "date,station_id,value\n2011-01-01,A,1,2\n",
            "date,station_id,value\n2011-01-01,A,abc\n",
        ] {
            assert!(matches!(panel(m), Err(Error::SchemaError { .. })), "{m}");
        }
    }
}
