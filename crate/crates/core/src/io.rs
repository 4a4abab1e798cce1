//! On-disk formats.
//!
//! * Frames and pressure maps: JSON lines,
//!   `{"rows":R,"cols":C,"t":s,"conductance":[..]}` (or `"pressure"`).
//! * Reconstructions: the frame line plus `m_used`, `residual`, `support`.
//! * Seed tables: `{"master_seed":u32,"seeds":[..]}`.
//! * Measurements: JSON lines `{"t":s,"v":volts,"row":i}`.
//! * Binary matrices: 8-byte magic, `u32` rows, `u32` cols, one `f64`
//!   scalar, then `rows * cols` little-endian `f64`. `SPTSPHI1` holds a
//!   sensing matrix row-major with the supply as scalar. `SPTSMEA1` holds
//!   measurements as `M x 3` rows of `(t, v, row)` with the clock rate as
//!   scalar.
//! * Dictionaries: `SPTSDIC1`, `u32` N, `u32` K, `N * K` `f64` column-major,
//!   then a JSON metadata trailer to end of file.

use std::io::{BufRead, Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dictionary::{Dictionary, DictionaryMeta};
use crate::error::{Error, Result};
use crate::firmware::{SeedTable, SensingMatrix};
use crate::frontend::MeasurementVector;
use crate::recovery::Reconstruction;
use crate::tactile::{GridGeometry, PressureMap, TactileFrame};

pub const SENSING_MAGIC: &[u8; 8] = b"SPTSPHI1";
pub const MEASUREMENT_MAGIC: &[u8; 8] = b"SPTSMEA1";
pub const DICTIONARY_MAGIC: &[u8; 8] = b"SPTSDIC1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameLine {
    rows: usize,
    cols: usize,
    t: f64,
    conductance: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PressureLine {
    rows: usize,
    cols: usize,
    #[serde(default)]
    t: f64,
    pressure: Vec<f64>,
}

#[derive(Serialize)]
struct ReconstructionLine<'a> {
    rows: usize,
    cols: usize,
    t: f64,
    conductance: &'a [f64],
    m_used: usize,
    residual: f64,
    support: &'a [usize],
}

#[derive(Serialize, Deserialize)]
struct MeasurementLine {
    t: f64,
    v: f64,
    row: usize,
}

fn geometry(rows: usize, cols: usize) -> Result<GridGeometry> {
    GridGeometry::new(rows, cols)
}

pub fn write_frame<W: Write>(w: &mut W, frame: &TactileFrame) -> Result<()> {
    let g = frame.geometry();
    let line = FrameLine {
        rows: g.rows,
        cols: g.cols,
        t: frame.timestamp(),
        conductance: frame.conductance().to_vec(),
    };
    serde_json::to_writer(&mut *w, &line)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn write_frames<W: Write>(w: &mut W, frames: &[TactileFrame]) -> Result<()> {
    frames.iter().try_for_each(|f| write_frame(w, f))
}

pub fn read_frames<R: BufRead>(r: R) -> Result<Vec<TactileFrame>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let l: FrameLine = serde_json::from_str(&line)?;
        out.push(TactileFrame::new(geometry(l.rows, l.cols)?, l.conductance, l.t)?);
    }
    Ok(out)
}

pub fn write_pressure<W: Write>(w: &mut W, map: &PressureMap, t: f64) -> Result<()> {
    let g = map.geometry();
    let line = PressureLine {
        rows: g.rows,
        cols: g.cols,
        t,
        pressure: map.pressure().to_vec(),
    };
    serde_json::to_writer(&mut *w, &line)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_pressure_maps<R: BufRead>(r: R) -> Result<Vec<(f64, PressureMap)>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let l: PressureLine = serde_json::from_str(&line)?;
        out.push((l.t, PressureMap::new(geometry(l.rows, l.cols)?, l.pressure)?));
    }
    Ok(out)
}

pub fn write_reconstruction<W: Write>(w: &mut W, recon: &Reconstruction) -> Result<()> {
    let g = recon.frame.geometry();
    let line = ReconstructionLine {
        rows: g.rows,
        cols: g.cols,
        t: recon.frame.timestamp(),
        conductance: recon.frame.conductance(),
        m_used: recon.m_used,
        residual: recon.residual_norm,
        support: &recon.code.indices,
    };
    serde_json::to_writer(&mut *w, &line)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn write_seed_table<W: Write>(w: &mut W, table: &SeedTable) -> Result<()> {
    serde_json::to_writer(&mut *w, table)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_seed_table<R: Read>(r: R) -> Result<SeedTable> {
    Ok(serde_json::from_reader(r)?)
}

pub fn write_measurements<W: Write>(w: &mut W, y: &MeasurementVector) -> Result<()> {
    for ((t, v), row) in y.timestamps().iter().zip(y.values()).zip(y.rows()) {
        serde_json::to_writer(&mut *w, &MeasurementLine { t: *t, v: *v, row })?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_measurements<R: BufRead>(r: R) -> Result<MeasurementVector> {
    let mut values = Vec::new();
    let mut times = Vec::new();
    let mut first = None;
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let l: MeasurementLine = serde_json::from_str(&line)?;
        let start = *first.get_or_insert(l.row);
        if l.row != start + values.len() {
            return Err(Error::Format("measurement rows are not consecutive".into()));
        }
        values.push(l.v);
        times.push(l.t);
    }
    MeasurementVector::new(values, times, first.unwrap_or(0))
}

fn write_container<W: Write>(
    w: &mut W,
    magic: &[u8; 8],
    rows: usize,
    cols: usize,
    scalar: f64,
    values: impl Iterator<Item = f64>,
) -> Result<()> {
    let dim = |d: usize| u32::try_from(d).map_err(|_| Error::Format(format!("dimension {d} too large")));
    w.write_all(magic)?;
    w.write_all(&dim(rows)?.to_le_bytes())?;
    w.write_all(&dim(cols)?.to_le_bytes())?;
    w.write_all(&scalar.to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn expect_magic<R: Read>(r: &mut R, magic: &[u8; 8]) -> Result<()> {
    let mut m = [0u8; 8];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::Format(format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&m)
        )));
    }
    Ok(())
}

/// Row-major weights; the seed table is not part of the container.
pub fn write_sensing_matrix<W: Write>(w: &mut W, phi: &SensingMatrix) -> Result<()> {
    let weights = phi.weights();
    let values = (0..phi.m()).flat_map(|i| (0..phi.n()).map(move |k| weights[(i, k)]));
    write_container(w, SENSING_MAGIC, phi.m(), phi.n(), phi.supply(), values)
}

/// Returns `(weights, supply)`.
pub fn read_sensing_matrix<R: Read>(r: &mut R) -> Result<(DMatrix<f64>, f64)> {
    expect_magic(r, SENSING_MAGIC)?;
    let m = read_u32(r)? as usize;
    let n = read_u32(r)? as usize;
    let supply = read_f64(r)?;
    let mut weights = DMatrix::zeros(m, n);
    for i in 0..m {
        for k in 0..n {
            weights[(i, k)] = read_f64(r)?;
        }
    }
    Ok((weights, supply))
}

pub fn write_measurements_binary<W: Write>(
    w: &mut W,
    y: &MeasurementVector,
    clock_hz: f64,
) -> Result<()> {
    let values = y
        .timestamps()
        .iter()
        .zip(y.values())
        .zip(y.rows())
        .flat_map(|((t, v), row)| [*t, *v, row as f64]);
    write_container(w, MEASUREMENT_MAGIC, y.len(), 3, clock_hz, values)
}

/// Returns the measurements and the clock rate.
pub fn read_measurements_binary<R: Read>(r: &mut R) -> Result<(MeasurementVector, f64)> {
    expect_magic(r, MEASUREMENT_MAGIC)?;
    let m = read_u32(r)? as usize;
    if read_u32(r)? != 3 {
        return Err(Error::Format("measurement container must have 3 columns".into()));
    }
    let clock = read_f64(r)?;
    let mut values = Vec::with_capacity(m);
    let mut times = Vec::with_capacity(m);
    let mut first = 0;
    for i in 0..m {
        times.push(read_f64(r)?);
        values.push(read_f64(r)?);
        let row = read_f64(r)? as usize;
        if i == 0 {
            first = row;
        }
    }
    Ok((MeasurementVector::new(values, times, first)?, clock))
}

pub fn write_dictionary<W: Write>(w: &mut W, d: &Dictionary) -> Result<()> {
    let dim = |v: usize| u32::try_from(v).map_err(|_| Error::Format("dictionary too large".into()));
    w.write_all(DICTIONARY_MAGIC)?;
    w.write_all(&dim(d.n())?.to_le_bytes())?;
    w.write_all(&dim(d.k())?.to_le_bytes())?;
    // nalgebra storage is column-major already
    for v in d.atoms().iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    serde_json::to_writer(&mut *w, d.meta())?;
    Ok(())
}

pub fn read_dictionary<R: Read>(r: &mut R) -> Result<Dictionary> {
    expect_magic(r, DICTIONARY_MAGIC)?;
    let n = read_u32(r)? as usize;
    let k = read_u32(r)? as usize;
    let mut entries = Vec::with_capacity(n * k);
    for _ in 0..n * k {
        entries.push(read_f64(r)?);
    }
    let mut trailer = Vec::new();
    r.read_to_end(&mut trailer)?;
    let meta: DictionaryMeta = serde_json::from_slice(&trailer)?;
    Dictionary::new(DMatrix::from_column_slice(n, k, &entries), meta)
}

/// Each atom rendered on the grid: `atom,row,c0,..,c{cols-1}`.
pub fn write_atoms_csv<W: Write>(w: W, d: &Dictionary, geometry: &GridGeometry) -> Result<()> {
    if geometry.len() != d.n() {
        return Err(Error::Domain("geometry does not match atom length".into()));
    }
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["atom".to_string(), "row".to_string()];
    header.extend((0..geometry.cols).map(|c| format!("c{c}")));
    out.write_record(&header)?;
    for j in 0..d.k() {
        let atom = d.atoms().column(j);
        for r in 0..geometry.rows {
            let mut rec = vec![j.to_string(), r.to_string()];
            rec.extend((0..geometry.cols).map(|c| atom[r * geometry.cols + c].to_string()));
            out.write_record(&rec)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::firmware::assign_seeds;
    use proptest::prelude::*;

    #[test]
    fn frame_line_layout() {
        let f = TactileFrame::new(GridGeometry::new(1, 2).unwrap(), vec![0.5, 1e-6], 0.25).unwrap();
        let mut buf = Vec::new();
        write_frame(&mut buf, &f).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "{\"rows\":1,\"cols\":2,\"t\":0.25,\"conductance\":[0.5,1e-6]}\n"
        );
        assert_eq!(read_frames(&buf[..]).unwrap(), vec![f]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(read_frames(&b"{\"rows\":1,\"cols\":2,\"t\":0,\"conductance\":[1]}\n"[..]).is_err());
        assert!(read_frames(&b"{\"rows\":1,\"cols\":1,\"t\":0,\"conductance\":[1],\"x\":2}\n"[..]).is_err());
        let mut bogus = &b"NOTMAGIC\0\0\0\0"[..];
        assert!(matches!(read_dictionary(&mut bogus), Err(Error::Format(_))));
    }

    #[test]
    fn sensing_header() {
        let phi = SensingMatrix::from_master_seed(0, 3, 2, 3.3).unwrap();
        let mut buf = Vec::new();
        write_sensing_matrix(&mut buf, &phi).unwrap();
        assert_eq!(&buf[..8], b"SPTSPHI1");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(buf[16..24].try_into().unwrap()), 3.3);
        assert_eq!(buf.len(), 24 + 6 * 8);
        // second entry is row 0, pixel 1
        assert_eq!(f64::from_le_bytes(buf[32..40].try_into().unwrap()), phi.weights()[(0, 1)]);
        let (w, s) = read_sensing_matrix(&mut &buf[..]).unwrap();
        assert_eq!(&w, phi.weights());
        assert_eq!(s, 3.3);
    }

    #[test]
    fn seed_table_json() {
        let t = assign_seeds(0, 2).unwrap();
        let mut buf = Vec::new();
        write_seed_table(&mut buf, &t).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap().trim(),
            "{\"master_seed\":0,\"seeds\":[1013904223,1196435762]}"
        );
        assert_eq!(read_seed_table(&buf[..]).unwrap(), t);
    }

    #[test]
    fn measurement_formats() {
        let y = MeasurementVector::new(vec![0.5, -0.25], vec![1.0 / 70_000.0, 2.0 / 70_000.0], 1).unwrap();
        let mut buf = Vec::new();
        write_measurements(&mut buf, &y).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("{\"t\":"));
        assert!(text.lines().nth(1).unwrap().ends_with("\"row\":2}"));
        assert_eq!(read_measurements(&buf[..]).unwrap(), y);

        let mut bin = Vec::new();
        write_measurements_binary(&mut bin, &y, 70_000.0).unwrap();
        assert_eq!(&bin[..8], b"SPTSMEA1");
        let (back, clock) = read_measurements_binary(&mut &bin[..]).unwrap();
        assert_eq!(back, y);
        assert_eq!(clock, 70_000.0);
    }

    #[test]
    fn atoms_csv_shape() {
        let d = Dictionary::from_columns(
            DMatrix::identity(4, 3),
            DictionaryMeta {
                corpus_id: "x".into(),
                corpus_size: 0,
                train_sparsity: 1,
                iterations: 0,
                seed: 0,
                errors: vec![],
            },
        )
        .unwrap();
        let mut buf = Vec::new();
        write_atoms_csv(&mut buf, &d, &GridGeometry::new(2, 2).unwrap()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 2);
        assert_eq!(text.lines().next().unwrap(), "atom,row,c0,c1");
    }

    proptest! {
        #[test]
        fn dictionary_round_trip(n in 1usize..12, k in 1usize..12, seed in 0u64..1000, errs in proptest::collection::vec(0.0f64..1.0, 0..4)) {
            let atoms = DMatrix::from_fn(n, k, |i, j| ((i * 31 + j * 17 + seed as usize) % 13) as f64 + 0.5);
            let meta = DictionaryMeta { corpus_id: format!("c{seed}"), corpus_size: n, train_sparsity: 2, iterations: 3, seed, errors: errs };
            let d = Dictionary::from_columns(atoms, meta).unwrap();
            let mut buf = Vec::new();
            write_dictionary(&mut buf, &d).unwrap();
            prop_assert_eq!(&buf[..8], b"SPTSDIC1");
            let back = read_dictionary(&mut &buf[..]).unwrap();
            prop_assert_eq!(back, d);
        }

        #[test]
        fn frames_round_trip(values in proptest::collection::vec(0.0f64..1e-3, 1..40), t in 0.0f64..10.0) {
            let n = values.len();
            let f = TactileFrame::new(GridGeometry::new(1, n).unwrap(), values, t).unwrap();
            let mut buf = Vec::new();
            write_frame(&mut buf, &f).unwrap();
            prop_assert_eq!(read_frames(&buf[..]).unwrap(), vec![f]);
        }
    }
}
