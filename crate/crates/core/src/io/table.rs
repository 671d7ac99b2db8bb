//! Binary drift-table files.
//!
//! Layout, all little-endian:
//!
//! | field      | type                                  |
//! |------------|---------------------------------------|
//! | magic      | `b"KSID"`                             |
//! | version    | u32                                   |
//! | P, K, d    | u32 each                              |
//! | schedule   | u8 (0 linear, 1 trig)                 |
//! | ridge      | f64                                   |
//! | descriptor | u32 byte length, then UTF-8 JSON      |
//! | grid       | K + 1 f64                             |
//! | eta        | K * P f64, row-major by time node     |

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::fit::{DriftTable, TableDescriptor};
use crate::schedule::ScheduleId;

pub const MAGIC: &[u8; 4] = b"KSID";
pub const VERSION: u32 = 1;

pub fn encode_table(table: &DriftTable) -> Result<Vec<u8>> {
    table.validate()?;
    let code = table
        .schedule
        .code()
        .ok_or_else(|| Error::invalid("custom schedules cannot be stored in a table file"))?;
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::invalid(format!("{what} {v} does not fit in 32 bits")))
    };
    let (k, p) = table.etas.dim();
    let desc = serde_json::to_string(&table.descriptor).map_err(|e| Error::invalid(e.to_string()))?;
    let mut buf = Vec::with_capacity(4 + 4 * 4 + 1 + 8 + 4 + desc.len() + 8 * (k + 1 + k * p));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&to_u32(p, "P")?.to_le_bytes());
    buf.extend_from_slice(&to_u32(k, "K")?.to_le_bytes());
    buf.extend_from_slice(&to_u32(table.dim, "d")?.to_le_bytes());
    buf.push(code);
    buf.extend_from_slice(&table.ridge.to_le_bytes());
    buf.extend_from_slice(&to_u32(desc.len(), "descriptor length")?.to_le_bytes());
    buf.extend_from_slice(desc.as_bytes());
    for g in &table.grid {
        buf.extend_from_slice(&g.to_le_bytes());
    }
    for v in table.etas.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(buf)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, section: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::CorruptTable(section))?;
        let out = self.bytes.get(self.pos..end).ok_or(Error::CorruptTable(section))?;
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, section: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, section)?.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, n: usize, section: &'static str) -> Result<Vec<f64>> {
        let len = n.checked_mul(8).ok_or(Error::CorruptTable(section))?;
        Ok(self
            .take(len, section)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn decode_table(bytes: &[u8]) -> Result<DriftTable> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::NotATable);
    }
    let mut c = Cursor { bytes, pos: 4 };
    let version = c.u32("header")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let p = c.u32("header")? as usize;
    let k = c.u32("header")? as usize;
    let dim = c.u32("header")? as usize;
    let code = c.take(1, "header")?[0];
    let schedule = ScheduleId::from_code(code).ok_or(Error::CorruptTable("schedule"))?;
    let ridge = f64::from_le_bytes(c.take(8, "header")?.try_into().expect("8 bytes"));
    let desc_len = c.u32("descriptor")? as usize;
    let desc_bytes = c.take(desc_len, "descriptor")?;
    let descriptor: TableDescriptor = std::str::from_utf8(desc_bytes)
        .ok()
        .and_then(|s| serde_json::from_str(s).ok())
        .ok_or(Error::CorruptTable("descriptor"))?;
    let grid = c.f64s(k.checked_add(1).ok_or(Error::CorruptTable("grid"))?, "grid")?;
    let etas = c.f64s(
        k.checked_mul(p).ok_or(Error::CorruptTable("coefficients"))?,
        "coefficients",
    )?;
    if c.pos != bytes.len() {
        return Err(Error::CorruptTable("trailing"));
    }
    let table = DriftTable {
        grid,
        etas: Array2::from_shape_vec((k, p), etas).map_err(|_| Error::CorruptTable("coefficients"))?,
        dim,
        schedule,
        ridge,
        descriptor,
    };
    table.validate().map_err(|_| Error::CorruptTable("grid"))?;
    Ok(table)
}

/// Writes to a sibling temporary file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn write_table(table: &DriftTable, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_table(table)?)
}

pub fn read_table(path: impl AsRef<Path>) -> Result<DriftTable> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_table(&bytes)
}
