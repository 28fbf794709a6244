//! Grid-function files: CSV with a metadata preamble and a flat binary dump.
//!
//! CSV layout: `#` comment lines (the first is `# grid n=<n> domain=<domain>`,
//! the rest `# key=value`), a header row `x,y,value`, then one row per active
//! node in row-major order. Values are written in shortest round-trip form, so
//! reading a file back reproduces the field bit for bit.
//!
//! Binary layout: `n` as u32 LE, the disk flag as u32 LE, then one f64 LE per
//! lattice node in row-major order (inactive nodes hold zero).

use std::io::{BufRead, Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{build_grid, Domain, Grid, GridFunction};

/// Node coordinates in a file must match the rebuilt grid to this tolerance.
const COORD_TOL: f64 = 1e-9;

pub fn write_csv<W: Write>(u: &GridFunction, meta: &[(String, String)], mut out: W) -> Result<()> {
    let grid = u.grid();
    writeln!(out, "# grid n={} domain={}", grid.n(), grid.domain())?;
    for (k, v) in meta {
        writeln!(out, "# {k}={v}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "value"])?;
    for k in grid.active_nodes() {
        let [x, y] = grid.node(k);
        w.write_record([x.to_string(), y.to_string(), u.value(k).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV field, returning it with the `key=value` metadata lines.
pub fn read_csv<R: BufRead>(input: R) -> Result<(GridFunction, Vec<(String, String)>)> {
    let mut text = String::new();
    let mut input = input;
    input.read_to_string(&mut text)?;
    let mut grid_line = None;
    let mut meta = Vec::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let body = line.trim_start_matches('#').trim();
        if grid_line.is_none() {
            grid_line = Some(body.to_string());
        } else if let Some((k, v)) = body.split_once('=') {
            meta.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    let grid_line = grid_line.ok_or_else(|| Error::Parse("missing `# grid n=.. domain=..` line".into()))?;
    let grid = parse_grid_line(&grid_line)?;

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["x", "y", "value"] {
        return Err(Error::Parse(format!("expected header x,y,value, found {headers:?}")));
    }
    let mut values = vec![0.0; grid.num_nodes()];
    let mut nodes = grid.active_nodes();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| Error::Parse(format!("row {row}: missing column {i}")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {row}: {e}")))
        };
        let k = nodes
            .next()
            .ok_or_else(|| Error::Parse(format!("row {row}: more rows than active nodes")))?;
        let [x, y] = grid.node(k);
        let (fx, fy) = (num(0)?, num(1)?);
        if (fx - x).abs() > COORD_TOL || (fy - y).abs() > COORD_TOL {
            return Err(Error::Parse(format!(
                "row {row}: point ({fx}, {fy}) does not match node ({x}, {y})"
            )));
        }
        values[k] = num(2)?;
    }
    if nodes.next().is_some() {
        return Err(Error::Parse("fewer rows than active nodes".into()));
    }
    Ok((GridFunction::from_values(&grid, values)?, meta))
}

fn parse_grid_line(line: &str) -> Result<Arc<Grid>> {
    let mut n = None;
    let mut domain = None;
    let mut words = line.split_whitespace();
    if words.next() != Some("grid") {
        return Err(Error::Parse(format!("first comment line must start with `grid`: {line}")));
    }
    for word in words {
        match word.split_once('=') {
            Some(("n", v)) => {
                n = Some(v.parse::<usize>().map_err(|e| Error::Parse(format!("grid n: {e}")))?)
            }
            Some(("domain", v)) => domain = Some(v.parse::<Domain>()?),
            _ => return Err(Error::Parse(format!("unexpected grid attribute `{word}`"))),
        }
    }
    let n = n.ok_or_else(|| Error::Parse("grid line lacks n=".into()))?;
    let domain = domain.ok_or_else(|| Error::Parse("grid line lacks domain=".into()))?;
    build_grid(n, domain == Domain::Disk)
}

pub fn write_binary<W: Write>(u: &GridFunction, mut out: W) -> Result<()> {
    let grid = u.grid();
    let n = u32::try_from(grid.n()).map_err(|_| Error::Config("grid too large for the binary format".into()))?;
    out.write_all(&n.to_le_bytes())?;
    out.write_all(&u32::from(grid.domain() == Domain::Disk).to_le_bytes())?;
    for v in u.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<GridFunction> {
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let n = u32::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let disk = match u32::from_le_bytes(word) {
        0 => false,
        1 => true,
        other => return Err(Error::Parse(format!("invalid mask flag {other}"))),
    };
    let grid = build_grid(n, disk)?;
    let mut values = vec![0.0; grid.num_nodes()];
    let mut buf = [0u8; 8];
    for v in values.iter_mut() {
        input.read_exact(&mut buf)?;
        *v = f64::from_le_bytes(buf);
    }
    if input.read(&mut buf)? != 0 {
        return Err(Error::Parse("trailing bytes after the last value".into()));
    }
    GridFunction::from_values(&grid, values)
}
