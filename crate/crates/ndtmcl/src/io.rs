//! Binary persistence for session logs and maps.
//!
//! Both formats are little-endian with a 4-byte magic and a u32
//! version. The session header carries the total point count across
//! all frames so truncation inside the frame stream and silent point
//! loss are distinguishable errors. Writing the same in-memory value
//! twice yields byte-identical files.

use crate::geom::Pose2;
use crate::ndt::{MapConfig, NdtCell, NdtGrid};
use crate::scan::{LabeledPoint, LabeledScan};
use crate::session::{Frame, SessionLog};
use crate::{Error, Result};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{Matrix2, Vector2};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const SESSION_MAGIC: [u8; 4] = *b"NDTS";
pub const MAP_MAGIC: [u8; 4] = *b"NDTM";
pub const SESSION_VERSION: u32 = 1;
pub const MAP_VERSION: u32 = 1;

fn read_magic(r: &mut impl Read, expected: [u8; 4], context: &'static str) -> Result<()> {
    let mut found = [0u8; 4];
    r.read_exact(&mut found)
        .map_err(|_| Error::Truncated { context })?;
    if found != expected {
        return Err(Error::BadMagic { expected, found });
    }
    Ok(())
}

fn read_version(r: &mut impl Read, expected: u32, context: &'static str) -> Result<()> {
    let found = r
        .read_u32::<LittleEndian>()
        .map_err(|_| Error::Truncated { context })?;
    if found != expected {
        return Err(Error::VersionMismatch { expected, found });
    }
    Ok(())
}

fn read_f64(r: &mut impl Read, context: &'static str) -> Result<f64> {
    r.read_f64::<LittleEndian>()
        .map_err(|_| Error::Truncated { context })
}

fn read_u64(r: &mut impl Read, context: &'static str) -> Result<u64> {
    r.read_u64::<LittleEndian>()
        .map_err(|_| Error::Truncated { context })
}

fn read_u32(r: &mut impl Read, context: &'static str) -> Result<u32> {
    r.read_u32::<LittleEndian>()
        .map_err(|_| Error::Truncated { context })
}

fn write_pose(w: &mut impl Write, p: &Pose2) -> Result<()> {
    w.write_f64::<LittleEndian>(p.x)?;
    w.write_f64::<LittleEndian>(p.y)?;
    w.write_f64::<LittleEndian>(p.psi)?;
    Ok(())
}

fn read_pose(r: &mut impl Read, context: &'static str) -> Result<Pose2> {
    Ok(Pose2 {
        x: read_f64(r, context)?,
        y: read_f64(r, context)?,
        psi: read_f64(r, context)?,
    })
}

fn write_string(w: &mut impl Write, s: &str) -> Result<()> {
    w.write_u64::<LittleEndian>(s.len() as u64)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_string(r: &mut impl Read, context: &'static str) -> Result<String> {
    let len = read_u64(r, context)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Truncated { context })?;
    String::from_utf8(buf).map_err(|_| Error::Truncated { context })
}

pub fn write_session(path: &Path, log: &SessionLog) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&SESSION_MAGIC)?;
    w.write_u32::<LittleEndian>(SESSION_VERSION)?;
    w.write_f64::<LittleEndian>(log.frame_rate)?;
    w.write_u64::<LittleEndian>(log.labels.len() as u64)?;
    for &l in &log.labels {
        w.write_u32::<LittleEndian>(l)?;
    }
    write_string(&mut w, &log.spec_echo)?;
    let total_points: u64 = log.frames.iter().map(|f| f.scan.len() as u64).sum();
    w.write_u64::<LittleEndian>(log.frames.len() as u64)?;
    w.write_u64::<LittleEndian>(total_points)?;
    for frame in &log.frames {
        w.write_f64::<LittleEndian>(frame.timestamp)?;
        write_pose(&mut w, &frame.ground_truth)?;
        write_pose(&mut w, &frame.odometry)?;
        w.write_u64::<LittleEndian>(frame.scan.len() as u64)?;
        for p in &frame.scan.points {
            w.write_f64::<LittleEndian>(p.x)?;
            w.write_f64::<LittleEndian>(p.y)?;
            w.write_u32::<LittleEndian>(p.label)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_session(path: &Path) -> Result<SessionLog> {
    let mut r = BufReader::new(File::open(path)?);
    read_magic(&mut r, SESSION_MAGIC, "session header")?;
    read_version(&mut r, SESSION_VERSION, "session header")?;
    let frame_rate = read_f64(&mut r, "session header")?;
    let label_count = read_u64(&mut r, "session header")? as usize;
    let mut labels = Vec::with_capacity(label_count);
    for _ in 0..label_count {
        labels.push(read_u32(&mut r, "session labels")?);
    }
    let spec_echo = read_string(&mut r, "session spec echo")?;
    let frame_count = read_u64(&mut r, "session header")? as usize;
    let declared = read_u64(&mut r, "session header")?;
    let mut frames = Vec::with_capacity(frame_count);
    let mut actual = 0u64;
    for _ in 0..frame_count {
        let timestamp = read_f64(&mut r, "session frame")?;
        let ground_truth = read_pose(&mut r, "session frame")?;
        let odometry = read_pose(&mut r, "session frame")?;
        let point_count = read_u64(&mut r, "session frame")? as usize;
        let mut scan = LabeledScan::new(timestamp);
        scan.points.reserve(point_count);
        for _ in 0..point_count {
            scan.points.push(LabeledPoint {
                x: read_f64(&mut r, "session points")?,
                y: read_f64(&mut r, "session points")?,
                label: read_u32(&mut r, "session points")?,
            });
        }
        actual += point_count as u64;
        frames.push(Frame {
            timestamp,
            ground_truth,
            odometry,
            scan,
        });
    }
    if actual != declared {
        return Err(Error::CountMismatch { declared, actual });
    }
    Ok(SessionLog {
        frame_rate,
        labels,
        spec_echo,
        frames,
    })
}

pub fn write_map(path: &Path, grid: &NdtGrid) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAP_MAGIC)?;
    w.write_u32::<LittleEndian>(MAP_VERSION)?;
    let c = &grid.config;
    w.write_f64::<LittleEndian>(c.resolution)?;
    w.write_f64::<LittleEndian>(c.origin[0])?;
    w.write_f64::<LittleEndian>(c.origin[1])?;
    w.write_f64::<LittleEndian>(c.extent[0])?;
    w.write_f64::<LittleEndian>(c.extent[1])?;
    w.write_u64::<LittleEndian>(c.min_points)?;
    w.write_f64::<LittleEndian>(c.eigen_floor)?;
    w.write_f64::<LittleEndian>(c.p_hit)?;
    w.write_f64::<LittleEndian>(c.p_miss)?;
    w.write_f64::<LittleEndian>(c.log_odds_min)?;
    w.write_f64::<LittleEndian>(c.log_odds_max)?;
    w.write_f64::<LittleEndian>(c.occupancy_threshold)?;
    w.write_f64::<LittleEndian>(c.d1)?;
    w.write_f64::<LittleEndian>(c.d2)?;
    w.write_u64::<LittleEndian>(grid.dropped_points)?;

    // deterministic cell order
    let mut keys: Vec<(i32, i32)> = grid.cells.keys().copied().collect();
    keys.sort();
    w.write_u64::<LittleEndian>(keys.len() as u64)?;
    for key in keys {
        let cell = &grid.cells[&key];
        w.write_i32::<LittleEndian>(key.0)?;
        w.write_i32::<LittleEndian>(key.1)?;
        w.write_u64::<LittleEndian>(cell.count)?;
        w.write_f64::<LittleEndian>(cell.sum.x)?;
        w.write_f64::<LittleEndian>(cell.sum.y)?;
        w.write_f64::<LittleEndian>(cell.outer_sum[(0, 0)])?;
        w.write_f64::<LittleEndian>(cell.outer_sum[(0, 1)])?;
        w.write_f64::<LittleEndian>(cell.outer_sum[(1, 0)])?;
        w.write_f64::<LittleEndian>(cell.outer_sum[(1, 1)])?;
        w.write_f64::<LittleEndian>(cell.log_odds)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_map(path: &Path) -> Result<NdtGrid> {
    let mut r = BufReader::new(File::open(path)?);
    read_magic(&mut r, MAP_MAGIC, "map header")?;
    read_version(&mut r, MAP_VERSION, "map header")?;
    let config = MapConfig {
        resolution: read_f64(&mut r, "map header")?,
        origin: [read_f64(&mut r, "map header")?, read_f64(&mut r, "map header")?],
        extent: [read_f64(&mut r, "map header")?, read_f64(&mut r, "map header")?],
        min_points: read_u64(&mut r, "map header")?,
        eigen_floor: read_f64(&mut r, "map header")?,
        p_hit: read_f64(&mut r, "map header")?,
        p_miss: read_f64(&mut r, "map header")?,
        log_odds_min: read_f64(&mut r, "map header")?,
        log_odds_max: read_f64(&mut r, "map header")?,
        occupancy_threshold: read_f64(&mut r, "map header")?,
        d1: read_f64(&mut r, "map header")?,
        d2: read_f64(&mut r, "map header")?,
    };
    let dropped_points = read_u64(&mut r, "map header")?;
    let cell_count = read_u64(&mut r, "map header")? as usize;
    let mut grid = NdtGrid::new(config);
    grid.dropped_points = dropped_points;
    for _ in 0..cell_count {
        let i = r
            .read_i32::<LittleEndian>()
            .map_err(|_| Error::Truncated { context: "map cell" })?;
        let j = r
            .read_i32::<LittleEndian>()
            .map_err(|_| Error::Truncated { context: "map cell" })?;
        let count = read_u64(&mut r, "map cell")?;
        let sum = Vector2::new(read_f64(&mut r, "map cell")?, read_f64(&mut r, "map cell")?);
        let outer_sum = Matrix2::new(
            read_f64(&mut r, "map cell")?,
            read_f64(&mut r, "map cell")?,
            read_f64(&mut r, "map cell")?,
            read_f64(&mut r, "map cell")?,
        );
        let log_odds = read_f64(&mut r, "map cell")?;
        grid.cells.insert(
            (i, j),
            NdtCell {
                count,
                sum,
                outer_sum,
                log_odds,
            },
        );
    }
    Ok(grid)
}
