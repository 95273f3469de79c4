//! File formats: field snapshots (CSV and little-endian binary), marker
//! loops, and invariant time series.
//!
//! Floats are written with Rust's shortest round-trip formatting, so CSV
//! snapshots also reproduce values exactly.

use std::fmt::Write as _;
use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};
use crate::filaments::MarkerLoop;
use crate::homology::ChannelField;
use crate::invariants::InvariantSeries;
use crate::spectral2d::ScalarField2D;

const MAGIC: &[u8; 8] = b"MFSNAP1\0";

/// Grid samples with one or more components, row-major `j * nx + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub components: Vec<Vec<f64>>,
}

impl Snapshot {
    fn validate(&self) -> Result<()> {
        if self.components.is_empty() || self.components.iter().any(|c| c.len() != self.nx * self.ny) {
            return Err(Error::Parse(format!(
                "snapshot needs at least one component of {} samples",
                self.nx * self.ny
            )));
        }
        Ok(())
    }

    pub fn from_scalar(f: &ScalarField2D) -> Self {
        Self { nx: f.nx(), ny: f.ny(), lx: f.lx(), ly: f.ly(), components: vec![f.values().to_vec()] }
    }

    pub fn to_scalar(&self) -> Result<ScalarField2D> {
        if self.components.len() != 1 {
            return Err(Error::Parse(format!("expected one component, found {}", self.components.len())));
        }
        ScalarField2D::new(self.nx, self.ny, self.lx, self.ly, self.components[0].clone())
    }

    /// Channel fields carry `ly = 1` and two components.
    pub fn from_channel(u: &ChannelField) -> Self {
        Self { nx: u.nx(), ny: u.ny(), lx: u.lx(), ly: 1.0, components: vec![u.ux().to_vec(), u.uy().to_vec()] }
    }

    pub fn to_channel(&self) -> Result<ChannelField> {
        if self.components.len() != 2 {
            return Err(Error::Parse(format!("expected two components, found {}", self.components.len())));
        }
        ChannelField::new(self.nx, self.ny, self.lx, self.components[0].clone(), self.components[1].clone())
    }

    /// Header `nx,ny,lx,ly` (plus `,ncomp` when there is more than one
    /// component), the header values, then `ny` rows of `nx` samples per
    /// component.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        self.validate()?;
        let multi = self.components.len() > 1;
        let mut s = String::new();
        if multi {
            writeln!(s, "nx,ny,lx,ly,ncomp").unwrap();
            writeln!(s, "{},{},{},{},{}", self.nx, self.ny, self.lx, self.ly, self.components.len()).unwrap();
        } else {
            writeln!(s, "nx,ny,lx,ly").unwrap();
            writeln!(s, "{},{},{},{}", self.nx, self.ny, self.lx, self.ly).unwrap();
        }
        for c in &self.components {
            for row in c.chunks(self.nx) {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                s.push_str(&line.join(","));
                s.push('\n');
            }
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read_csv(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines.next().ok_or_else(|| Error::Parse("unexpected end of snapshot".into()))?.map_err(Error::from)
        };
        let header = next()?;
        let multi = match header.trim() {
            "nx,ny,lx,ly" => false,
            "nx,ny,lx,ly,ncomp" => true,
            other => return Err(Error::Parse(format!("bad snapshot header `{other}`"))),
        };
        let meta = next()?;
        let f: Vec<&str> = meta.trim().split(',').collect();
        if f.len() != if multi { 5 } else { 4 } {
            return Err(Error::Parse(format!("bad snapshot metadata `{meta}`")));
        }
        let int = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::Parse(format!("`{s}`: {e}")));
        let float = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}")));
        let (nx, ny, lx, ly) = (int(f[0])?, int(f[1])?, float(f[2])?, float(f[3])?);
        let ncomp = if multi { int(f[4])? } else { 1 };
        let mut components = Vec::with_capacity(ncomp);
        for _ in 0..ncomp {
            let mut c = Vec::with_capacity(nx * ny);
            for _ in 0..ny {
                let line = next()?;
                let row = line.trim().split(',').map(float).collect::<Result<Vec<_>>>()?;
                if row.len() != nx {
                    return Err(Error::Parse(format!("row has {} values, expected {nx}", row.len())));
                }
                c.extend(row);
            }
            components.push(c);
        }
        let s = Self { nx, ny, lx, ly, components };
        s.validate()?;
        Ok(s)
    }

    /// Magic, then `nx, ny, ncomp` as u64 and `lx, ly` and samples as f64,
    /// all little-endian.
    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        self.validate()?;
        let mut buf = Vec::with_capacity(48 + 8 * self.nx * self.ny * self.components.len());
        buf.extend_from_slice(MAGIC);
        for v in [self.nx, self.ny, self.components.len()] {
            buf.extend_from_slice(&(v as u64).to_le_bytes());
        }
        buf.extend_from_slice(&self.lx.to_le_bytes());
        buf.extend_from_slice(&self.ly.to_le_bytes());
        for c in &self.components {
            for v in c {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() < 48 || &bytes[..8] != MAGIC {
            return Err(Error::Parse("not a binary snapshot".into()));
        }
        let word = |k: usize| -> [u8; 8] { bytes[8 + 8 * k..16 + 8 * k].try_into().unwrap() };
        let nx = u64::from_le_bytes(word(0)) as usize;
        let ny = u64::from_le_bytes(word(1)) as usize;
        let ncomp = u64::from_le_bytes(word(2)) as usize;
        let lx = f64::from_le_bytes(word(3));
        let ly = f64::from_le_bytes(word(4));
        let count = nx.checked_mul(ny).and_then(|v| v.checked_mul(ncomp)).ok_or_else(|| Error::Parse("snapshot size overflow".into()))?;
        if bytes.len() != 48 + 8 * count {
            return Err(Error::Parse(format!("binary snapshot has {} bytes, expected {}", bytes.len(), 48 + 8 * count)));
        }
        let vals: Vec<f64> = bytes[48..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let components = vals.chunks(nx * ny).map(<[f64]>::to_vec).collect();
        let s = Self { nx, ny, lx, ly, components };
        s.validate()?;
        Ok(s)
    }
}

/// Markers as `x,y` (planar) or `x,y,z` rows under a matching header.
pub fn write_loop_csv(l: &MarkerLoop, w: &mut impl Write) -> Result<()> {
    let mut s = String::new();
    if l.is_planar() {
        s.push_str("x,y\n");
        for p in l.points() {
            writeln!(s, "{},{}", p[0], p[1]).unwrap();
        }
    } else {
        s.push_str("x,y,z\n");
        for p in l.points() {
            writeln!(s, "{},{},{}", p[0], p[1], p[2]).unwrap();
        }
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// Reads a loop; the header line is optional and closure is implied.
pub fn read_loop_csv(r: impl BufRead) -> Result<MarkerLoop> {
    let mut pts: Vec<[f64; 3]> = Vec::new();
    let mut width = None;
    let mut planar = true;
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || (k == 0 && t.starts_with('x')) {
            continue;
        }
        let vals = t
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("line {}: `{s}`: {e}", k + 1))))
            .collect::<Result<Vec<_>>>()?;
        if !(2..=3).contains(&vals.len()) || width.is_some_and(|w| w != vals.len()) {
            return Err(Error::Parse(format!("line {}: expected a consistent 2 or 3 columns", k + 1)));
        }
        width = Some(vals.len());
        planar = vals.len() == 2;
        pts.push([vals[0], vals[1], vals.get(2).copied().unwrap_or(0.0)]);
    }
    if planar {
        let p2: Vec<[f64; 2]> = pts.iter().map(|p| [p[0], p[1]]).collect();
        MarkerLoop::planar(&p2)
    } else {
        MarkerLoop::new(pts)
    }
}

/// Columns `t,name1,name2,...`.
pub fn write_series_csv(series: &InvariantSeries, w: &mut impl Write) -> Result<()> {
    let mut s = String::from("t");
    for n in series.names() {
        s.push(',');
        s.push_str(n);
    }
    s.push('\n');
    for (t, row) in series.times().iter().zip(series.rows()) {
        s.push_str(&t.to_string());
        for v in row {
            s.push(',');
            s.push_str(&v.to_string());
        }
        s.push('\n');
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// Parses a numeric table with a header row; returns the names and rows.
pub fn read_table_csv(r: impl BufRead) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty table".into()))??;
    let names: Vec<String> = header.trim().split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .trim()
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("row {}: `{s}`: {e}", k + 1))))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != names.len() {
            return Err(Error::Parse(format!("row {} has {} columns, header {}", k + 1, row.len(), names.len())));
        }
        rows.push(row);
    }
    Ok((names, rows))
}
