//! EVGM v1 container.
//!
//! ```text
//! 0..4     magic "EVGM"
//! 4..8     version, u32 LE (= 1)
//! 8..16    header length H, u64 LE
//! 16..16+H UTF-8 JSON header
//!          {fod, origin, cell_size, size, layers}
//! ...      payload: per layer, s1*s2 f32 LE values, row-major, x fastest
//! last 4   CRC32 (IEEE) of the payload, u32 LE
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GridError, GridGeometry, GridMap, LayerCatalog};
use crate::evidence::Fod;

pub const MAGIC: [u8; 4] = *b"EVGM";
pub const FORMAT_VERSION: u32 = 1;

const PREAMBLE: usize = 16;

#[derive(Serialize, Deserialize)]
struct Header {
    fod: Vec<String>,
    origin: [f64; 2],
    cell_size: [f64; 2],
    size: [usize; 2],
    layers: Vec<Vec<String>>,
}

impl Header {
    fn of(grid: &GridMap) -> Self {
        let fod = grid.fod();
        let geometry = grid.geometry();
        Self {
            fod: fod.names().to_vec(),
            origin: geometry.origin(),
            cell_size: geometry.cell_size(),
            size: geometry.size(),
            layers: grid
                .catalog()
                .sets()
                .iter()
                .map(|s| fod.members(*s).into_iter().map(String::from).collect())
                .collect(),
        }
    }
}

pub fn write_to<W: Write>(grid: &GridMap, mut writer: W) -> Result<(), GridError> {
    let header =
        serde_json::to_vec(&Header::of(grid)).map_err(|e| GridError::BadHeader(e.to_string()))?;
    let mut payload = Vec::with_capacity(grid.data().len() * 4);
    for v in grid.data() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    writer.write_all(&MAGIC)?;
    writer.write_all(&FORMAT_VERSION.to_le_bytes())?;
    writer.write_all(&(header.len() as u64).to_le_bytes())?;
    writer.write_all(&header)?;
    writer.write_all(&payload)?;
    writer.write_all(&crc32fast::hash(&payload).to_le_bytes())?;
    writer.flush()?;
    Ok(())
}

pub fn save<P: AsRef<Path>>(grid: &GridMap, path: P) -> Result<(), GridError> {
    let mut bytes = Vec::new();
    write_to(grid, &mut bytes)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_from<R: Read>(mut reader: R) -> Result<GridMap, GridError> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub fn load<P: AsRef<Path>>(path: P) -> Result<GridMap, GridError> {
    decode(&fs::read(path)?)
}

fn decode(bytes: &[u8]) -> Result<GridMap, GridError> {
    if bytes.len() < MAGIC.len() || bytes[..4] != MAGIC {
        return Err(GridError::BadMagic);
    }
    let found = bytes.len() as u64;
    if bytes.len() < PREAMBLE {
        return Err(GridError::TruncatedPayload {
            expected: PREAMBLE as u64,
            found,
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(GridError::VersionUnsupported(version));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let header_end = (PREAMBLE as u64).saturating_add(header_len);
    if header_end > found {
        return Err(GridError::TruncatedPayload {
            expected: header_end,
            found,
        });
    }
    let header_end = header_end as usize;
    let header: Header = serde_json::from_slice(&bytes[PREAMBLE..header_end])
        .map_err(|e| GridError::BadHeader(e.to_string()))?;

    let fod = Fod::new(header.fod)?;
    let geometry = GridGeometry::new(header.origin, header.cell_size, header.size)?;
    let sets = header
        .layers
        .iter()
        .map(|names| fod.set_from_names(names))
        .collect::<Result<Vec<_>, _>>()?;
    let catalog = LayerCatalog::new(&fod, sets)?;

    let values = geometry.cell_count() as u64 * catalog.len() as u64;
    let expected = header_end as u64 + values * 4 + 4;
    if found != expected {
        return Err(GridError::TruncatedPayload { expected, found });
    }
    let payload = &bytes[header_end..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(GridError::ChecksumMismatch { stored, computed });
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    GridMap::from_layers(&fod, geometry, catalog, data)
}
