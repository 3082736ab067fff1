//! CSV datasets with a header row: a response column `y`, coordinates
//! `x1..xd` with an optional trailing time column `t` (or `lon`/`lat` in
//! degrees, mapped onto the unit sphere), and covariates in every other
//! column.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{lonlat_to_sphere, ObservationSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    /// Covariate columns to use, in order. `None` takes every column that is
    /// not the response or a coordinate.
    pub covariates: Option<Vec<String>>,
    /// Prepend a constant column to the design.
    pub intercept: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            covariates: None,
            intercept: true,
        }
    }
}

fn coordinate_columns(header: &csv::StringRecord) -> Result<(Vec<usize>, bool)> {
    let find = |name: &str| header.iter().position(|h| h == name);
    let mut cols = Vec::new();
    let mut k = 1;
    while let Some(i) = find(&format!("x{k}")) {
        cols.push(i);
        k += 1;
    }
    let lonlat = match (find("lon"), find("lat")) {
        (Some(lo), Some(la)) if cols.is_empty() => {
            cols.push(lo);
            cols.push(la);
            true
        }
        (Some(_), Some(_)) => {
            return Err(Error::Input(
                "use either x1..xd or lon/lat, not both".into(),
            ));
        }
        (Some(_), None) => return Err(Error::MissingColumn("lat".into())),
        (None, Some(_)) => return Err(Error::MissingColumn("lon".into())),
        (None, None) => false,
    };
    if cols.is_empty() {
        return Err(Error::MissingColumn("x1".into()));
    }
    if let Some(t) = find("t") {
        cols.push(t);
    }
    Ok((cols, lonlat))
}

/// Reads a dataset, reporting bad values with their line number.
pub fn read_dataset<R: Read>(reader: R, opts: &CsvOptions) -> Result<ObservationSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    for (i, h) in header.iter().enumerate() {
        if header.iter().skip(i + 1).any(|other| other == h) {
            return Err(Error::Input(format!("duplicate column `{h}`")));
        }
    }
    let y_col = header
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| Error::MissingColumn("y".into()))?;
    let (coord_cols, lonlat) = coordinate_columns(&header)?;
    let cov_cols: Vec<usize> = match &opts.covariates {
        Some(names) => names
            .iter()
            .map(|name| {
                header
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::MissingColumn(name.clone()))
            })
            .collect::<Result<_>>()?,
        None => (0..header.len())
            .filter(|i| *i != y_col && !coord_cols.contains(i))
            .collect(),
    };

    let mut y = Vec::new();
    let mut coords = Vec::new();
    let mut design = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let line = rdr.position().line();
        let more = rdr.read_record(&mut record).map_err(|e| Error::Parse {
            line: e.position().map_or(line, |p| p.line()),
            message: e.to_string(),
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(line, |p| p.line());
        let num = |col: usize| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                line,
                message: format!("column `{}`: `{raw}` is not a number", &header[col]),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Parse {
                    line,
                    message: format!("column `{}`: value must be finite", &header[col]),
                })
            }
        };
        y.push(num(y_col)?);
        if lonlat {
            let (lon, lat) = (num(coord_cols[0])?, num(coord_cols[1])?);
            if !(-90.0..=90.0).contains(&lat) {
                return Err(Error::Parse {
                    line,
                    message: format!("latitude {lat} outside [-90, 90]"),
                });
            }
            coords.extend(lonlat_to_sphere(lon, lat));
            for &c in &coord_cols[2..] {
                coords.push(num(c)?);
            }
        } else {
            for &c in &coord_cols {
                coords.push(num(c)?);
            }
        }
        if opts.intercept {
            design.push(1.0);
        }
        for &c in &cov_cols {
            design.push(num(c)?);
        }
    }
    let n = y.len();
    if n == 0 {
        return Err(Error::Input("dataset has no rows".into()));
    }
    let dim = coords.len() / n;
    let p = design.len() / n;
    ObservationSet::new(
        DMatrix::from_row_slice(n, dim, &coords),
        DVector::from_vec(y),
        DMatrix::from_row_slice(n, p, &design),
    )
}

/// Writes `data` in the same layout. Constant design columns are left out,
/// since reading adds the intercept back; with `time_last` the final
/// coordinate is written as `t`.
pub fn write_dataset<W: Write>(writer: W, data: &ObservationSet, time_last: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let d = data.dim();
    let n_space = if time_last && d > 1 { d - 1 } else { d };
    let x = data.design();
    let keep: Vec<usize> = (0..x.ncols())
        .filter(|&c| x.column(c).iter().any(|v| *v != 1.0))
        .collect();
    let mut header = vec!["y".to_string()];
    header.extend((1..=n_space).map(|k| format!("x{k}")));
    if n_space < d {
        header.push("t".into());
    }
    header.extend((1..=keep.len()).map(|k| format!("z{k}")));
    let csv_err = |e: csv::Error| Error::Input(format!("writing CSV: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    let mut row = Vec::with_capacity(header.len());
    for i in 0..data.len() {
        row.clear();
        row.push(data.y()[i].to_string());
        row.extend(data.point(i).iter().map(f64::to_string));
        row.extend(keep.iter().map(|&c| x[(i, c)].to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let coords = DMatrix::from_row_slice(3, 2, &[0.1, 0.2, 1.0 / 3.0, 0.5, 0.9, 1e-17]);
        let y = DVector::from_vec(vec![1.5, -0.25, std::f64::consts::PI]);
        let data = ObservationSet::with_intercept(coords, y).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &data, false).unwrap();
        let back = read_dataset(buf.as_slice(), &CsvOptions::default()).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn covariates_and_time() {
        let text = "y,x1,x2,t,elev,depth\n1,0,0,0.5,10,3\n2,1,0,0.25,20,4\n";
        let d = read_dataset(text.as_bytes(), &CsvOptions::default()).unwrap();
        assert_eq!(d.dim(), 3);
        assert_eq!(d.point(1), &[1.0, 0.0, 0.25]);
        assert_eq!(d.n_covariates(), 3);
        assert_eq!(d.design()[(1, 2)], 4.0);
        let opts = CsvOptions {
            covariates: Some(vec!["depth".into()]),
            intercept: false,
        };
        let d = read_dataset(text.as_bytes(), &opts).unwrap();
        assert_eq!(d.n_covariates(), 1);
        assert_eq!(d.design()[(0, 0)], 3.0);
    }

    #[test]
    fn lonlat_maps_to_sphere() {
        let text = "y,lon,lat\n0,0,0\n1,90,0\n2,0,90\n";
        let d = read_dataset(text.as_bytes(), &CsvOptions::default()).unwrap();
        assert_eq!(d.dim(), 3);
        assert!((d.point(1)[1] - 1.0).abs() < 1e-15);
        assert!((d.point(2)[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn errors_name_lines_and_columns() {
        let text = "y,x1\n1,0\n2,oops\n";
        match read_dataset(text.as_bytes(), &CsvOptions::default()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("x1"));
            }
            other => panic!("{other:?}"),
        }
        let opts = CsvOptions {
            covariates: Some(vec!["elev".into()]),
            intercept: true,
        };
        match read_dataset("y,x1\n1,0\n".as_bytes(), &opts) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "elev"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            read_dataset("x1\n0\n".as_bytes(), &CsvOptions::default()),
            Err(Error::MissingColumn(c)) if c == "y"
        ));
        assert!(matches!(
            read_dataset("y,x1\n1,0,5\n".as_bytes(), &CsvOptions::default()),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(read_dataset("y,x1\n".as_bytes(), &CsvOptions::default()).is_err());
    }
}
