//! CSV and PGM renderings of grid layers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{GridError, GridMap};
use crate::evidence::HypothesisSet;

/// One row per cell: `x_index,y_index,<layer values...>`.
pub fn write_csv<W: Write>(grid: &GridMap, mut out: W) -> Result<(), GridError> {
    let names: Vec<String> = (0..grid.catalog().len())
        .map(|l| grid.catalog().layer_name(grid.fod(), l))
        .collect();
    writeln!(out, "x_index,y_index,{}", names.join(","))?;
    for cell in grid.geometry().cells() {
        let linear = grid.geometry().linear(cell);
        write!(out, "{},{}", cell.x, cell.y)?;
        for layer in 0..names.len() {
            write!(out, ",{}", grid.value_at(linear, layer))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Binary P5 image of one layer, `round(255 · mass)` per pixel. Image rows
/// follow raster rows, so image row 0 is `y_index` 0.
pub fn write_pgm<W: Write>(
    grid: &GridMap,
    set: HypothesisSet,
    mut out: W,
) -> Result<(), GridError> {
    let raster = grid
        .layer_of(set)
        .ok_or_else(|| GridError::UnknownLayer(grid.fod().label(set, ",")))?;
    let [w, h] = grid.geometry().size();
    write!(out, "P5\n{w} {h}\n255\n")?;
    let pixels: Vec<u8> = raster
        .iter()
        .map(|v| (255.0 * f64::from(*v)).round().clamp(0.0, 255.0) as u8)
        .collect();
    out.write_all(&pixels)?;
    Ok(())
}

/// Writes `grid.csv` into `dir`.
pub fn export_csv<P: AsRef<Path>>(grid: &GridMap, dir: P) -> Result<PathBuf, GridError> {
    let path = dir.as_ref().join("grid.csv");
    let mut out = BufWriter::new(File::create(&path)?);
    write_csv(grid, &mut out)?;
    out.flush()?;
    Ok(path)
}

/// Writes `layer_<name>.pgm` into `dir` for each selected layer, or for
/// every catalog layer when `layers` is `None`.
pub fn export_pgm<P: AsRef<Path>>(
    grid: &GridMap,
    dir: P,
    layers: Option<&[HypothesisSet]>,
) -> Result<Vec<PathBuf>, GridError> {
    let selected: Vec<HypothesisSet> = match layers {
        Some(sets) => {
            for set in sets {
                if grid.catalog().index_of(*set).is_none() {
                    return Err(GridError::UnknownLayer(grid.fod().label(*set, ",")));
                }
            }
            sets.to_vec()
        }
        None => grid.catalog().sets().to_vec(),
    };
    let mut paths = Vec::with_capacity(selected.len());
    for set in selected {
        let name = grid.fod().label(set, "+");
        let path = dir.as_ref().join(format!("layer_{name}.pgm"));
        let mut out = BufWriter::new(File::create(&path)?);
        write_pgm(grid, set, &mut out)?;
        out.flush()?;
        paths.push(path);
    }
    Ok(paths)
}
