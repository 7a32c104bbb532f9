use std::io::Write;

use super::path::PathSample;
use crate::error::Result;

/// Writes `stream,time,value` rows.
pub fn write_paths_csv<W: Write>(out: &mut W, paths: &[PathSample]) -> Result<()> {
    writeln!(out, "stream,time,value")?;
    for p in paths {
        for (t, v) in p.times.iter().zip(&p.values) {
            writeln!(out, "{},{},{}", p.meta.stream, t, v.value())?;
        }
    }
    Ok(())
}

/// Writes `stream,time,mark` rows for paths that recorded atoms.
pub fn write_atoms_csv<W: Write>(out: &mut W, paths: &[PathSample]) -> Result<()> {
    writeln!(out, "stream,time,mark")?;
    for p in paths {
        for a in p.atoms.iter().flatten() {
            writeln!(out, "{},{},{}", p.meta.stream, a.time, a.mark.value())?;
        }
    }
    Ok(())
}
