use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::fields::FieldSnapshot;

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Drops the sign of negative zero.
fn clean(v: f64) -> f64 {
    v + 0.0
}

pub fn csv<const N: usize>(header: [&str; N], rows: &[[f64; N]]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{}", clean(*v)).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn boundaries_csv(rows: &[[f64; 7]]) -> String {
    csv(["t", "h0", "hu", "dh0", "dhu", "T0", "S0"], rows)
}

/// Salinity is left empty outside the ocean.
pub fn snapshot_csv(snap: &FieldSnapshot) -> String {
    let mut out = String::from("x,region,T,Tx,S\n");
    for i in 0..snap.x.len() {
        write!(
            out,
            "{},{},{},{},",
            clean(snap.x[i]),
            snap.region[i].as_str(),
            clean(snap.temperature[i]),
            clean(snap.gradient[i])
        )
        .unwrap();
        if let Some(s) = snap.salinity[i] {
            write!(out, "{}", clean(s)).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn snapshot_name(t: f64) -> String {
    format!("snapshot_{t}.csv")
}
