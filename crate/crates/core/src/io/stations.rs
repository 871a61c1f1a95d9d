//! Station CSV ingestion (`id,lat,lon,value`).

use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::StationTable;

pub const STATION_HEADER: [&str; 4] = ["id", "lat", "lon", "value"];

pub fn read_stations_csv(path: &Path) -> Result<StationTable> {
    let text = std::fs::read_to_string(path)?;
    parse_stations(&text, &path.display().to_string())
}

/// Parses station rows; errors carry the 1-based line number in `origin`.
pub fn parse_stations(text: &str, origin: &str) -> Result<StationTable> {
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| err(1, e.to_string()))?
        .clone();
    let got: Vec<&str> = header.iter().collect();
    if got != STATION_HEADER {
        return Err(err(
            1,
            format!(
                "expected header `{}`, found `{}`",
                STATION_HEADER.join(","),
                got.join(",")
            ),
        ));
    }
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 4 {
            return Err(err(line, format!("expected 4 fields, found {}", record.len())));
        }
        let num = |idx: usize, name: &str| -> Result<f64> {
            let raw = &record[idx];
            let v: f64 = raw
                .parse()
                .map_err(|_| err(line, format!("{name} `{raw}` is not a number")))?;
            if !v.is_finite() {
                return Err(err(line, format!("{name} `{raw}` is not finite")));
            }
            Ok(v)
        };
        let lat = num(1, "lat")?;
        let lon = num(2, "lon")?;
        let value = num(3, "value")?;
        if !(-90.0..=90.0).contains(&lat) {
            return Err(err(line, format!("latitude {lat} outside [-90, 90]")));
        }
        ids.push(record[0].to_string());
        coords.push([lat, lon]);
        values.push(value);
    }
    StationTable::new(ids, coords, values).map_err(|e| err(0, e.to_string()))
}

pub fn write_stations_csv<W: Write>(stations: &StationTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STATION_HEADER)?;
    for ((id, c), v) in stations
        .ids()
        .iter()
        .zip(stations.coords())
        .zip(stations.signal())
    {
        w.write_record([id.clone(), c[0].to_string(), c[1].to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// SHA-256 over ids and the exact bit patterns of coordinates and values.
pub fn dataset_digest(stations: &StationTable) -> String {
    let mut h = Sha256::new();
    for ((id, c), v) in stations
        .ids()
        .iter()
        .zip(stations.coords())
        .zip(stations.signal())
    {
        h.update((id.len() as u64).to_le_bytes());
        h.update(id.as_bytes());
        h.update(c[0].to_le_bytes());
        h.update(c[1].to_le_bytes());
        h.update(v.to_le_bytes());
    }
    hex(&h.finalize())
}

pub fn digest_f64s(values: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    hex(&h.finalize())
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_two_rows() {
        let st = parse_stations("id,lat,lon,value\na,-10.5,-50,21.3\nb,-11,-51.25,19\n", "t")
            .unwrap();
        assert_eq!(st.len(), 2);
        assert_eq!(st.coords()[1], [-11.0, -51.25]);
        assert_eq!(st.signal(), &[21.3, 19.0]);
    }

    #[test]
    fn missing_header_is_an_error() {
        let e = parse_stations("a,-10.5,-50,21.3\nb,-11,-51.25,19\n", "t").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }), "{e}");
    }

    #[test]
    fn bad_number_reports_line() {
        let e = parse_stations("id,lat,lon,value\na,1,2,3\nb,x,2,3\n", "f.csv").unwrap_err();
        match e {
            Error::Parse { line, path, .. } => {
                assert_eq!(line, 3);
                assert_eq!(path, "f.csv");
            }
            other => panic!("{other}"),
        }
        let e = parse_stations("id,lat,lon,value\na,1,2\n", "f.csv").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
    }

    #[test]
    fn write_then_read() {
        let st = StationTable::new(
            vec!["x".into(), "y".into()],
            vec![[0.1, 0.2], [-3.0, 4.0]],
            vec![0.30000000000000004, 7.0],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_stations_csv(&st, &mut buf).unwrap();
        let back = parse_stations(std::str::from_utf8(&buf).unwrap(), "mem").unwrap();
        assert_eq!(back, st);
        assert_eq!(dataset_digest(&back), dataset_digest(&st));
    }
}
