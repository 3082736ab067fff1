use crate::error::{Error, Result};

/// Parses a comma-separated neighbor schedule such as `10,30`.
pub fn parse_neighbor_schedule(s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        let m: usize = part
            .parse()
            .map_err(|_| Error::Input(format!("bad neighbor count `{part}` in `{s}`")))?;
        if m == 0 {
            return Err(Error::Input("neighbor counts must be positive".into()));
        }
        out.push(m);
    }
    Ok(out)
}
