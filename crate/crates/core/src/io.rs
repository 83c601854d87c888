//! File formats: `PXVG` occupancy grids, `PXLF` latent trajectories, OBJ
//! meshes and plain-text point clouds.

use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use crate::denoise::{DenoiseError, LatentGrid};
use crate::mesh::TriangleMesh;
use crate::sq::Vec3;
use crate::voxel::{OccupancyGrid, VoxelError};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: io::Error },
    #[error("{context}: {message}")]
    Format { context: String, message: String },
}

impl IoError {
    fn format(context: impl Into<String>, message: impl Into<String>) -> Self {
        IoError::Format { context: context.into(), message: message.into() }
    }
}

fn file_err(path: &Path) -> impl FnOnce(io::Error) -> IoError + '_ {
    move |source| IoError::File { path: path.to_path_buf(), source }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(file_err(path))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    fs::write(path, bytes).map_err(file_err(path))
}

fn header_line<'a>(bytes: &'a [u8], context: &str) -> Result<(&'a str, &'a [u8]), IoError> {
    let nl = bytes
        .iter()
        .take(64)
        .position(|&b| b == b'\n')
        .ok_or_else(|| IoError::format(context, "missing header line"))?;
    let head = std::str::from_utf8(&bytes[..nl]).map_err(|_| IoError::format(context, "header is not text"))?;
    Ok((head, &bytes[nl + 1..]))
}

fn parse_fields(head: &str, magic: &str, count: usize, context: &str) -> Result<Vec<usize>, IoError> {
    let mut it = head.split_ascii_whitespace();
    if it.next() != Some(magic) {
        return Err(IoError::format(context, format!("expected {magic} header")));
    }
    let fields: Vec<usize> = it
        .map(|f| f.parse::<usize>().map_err(|_| IoError::format(context, format!("bad header field '{f}'"))))
        .collect::<Result<_, _>>()?;
    if fields.len() != count || fields[0] != 1 {
        return Err(IoError::format(context, format!("unsupported header '{head}'")));
    }
    Ok(fields)
}

/// `PXVG 1 N\n` then `N³` bytes of 0 or 1, x-fastest.
pub fn encode_pxvg(grid: &OccupancyGrid) -> Vec<u8> {
    let mut out = format!("PXVG 1 {}\n", grid.resolution()).into_bytes();
    out.extend(grid.cells().iter().map(|&c| c as u8));
    out
}

pub fn decode_pxvg(bytes: &[u8]) -> Result<OccupancyGrid, IoError> {
    let ctx = "PXVG";
    let (head, body) = header_line(bytes, ctx)?;
    let n = parse_fields(head, "PXVG", 2, ctx)?[1];
    let cells = body
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            x => Err(IoError::format(ctx, format!("cell byte {x} is not 0 or 1"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    OccupancyGrid::from_cells(n, cells).map_err(|e: VoxelError| IoError::format(ctx, e.to_string()))
}

pub fn write_pxvg(path: &Path, grid: &OccupancyGrid) -> Result<(), IoError> {
    write_file(path, &encode_pxvg(grid))
}

pub fn read_pxvg(path: &Path) -> Result<OccupancyGrid, IoError> {
    decode_pxvg(&read_file(path)?).map_err(|e| with_path(e, path))
}

fn with_path(e: IoError, path: &Path) -> IoError {
    match e {
        IoError::Format { message, .. } => IoError::Format { context: path.display().to_string(), message },
        other => other,
    }
}

/// `PXLF 1 N T\n` then `T + 1` blocks of `N³` little-endian `f32`.
pub fn encode_pxlf(traj: &[LatentGrid]) -> Result<Vec<u8>, IoError> {
    let first = traj.first().ok_or_else(|| IoError::format("PXLF", "empty trajectory"))?;
    let n = first.resolution();
    let mut out = format!("PXLF 1 {} {}\n", n, traj.len() - 1).into_bytes();
    for (t, z) in traj.iter().enumerate() {
        if z.resolution() != n || z.timestep() != t {
            return Err(IoError::format("PXLF", format!("block {t} is out of sequence")));
        }
        for &v in z.values() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_pxlf(bytes: &[u8]) -> Result<Vec<LatentGrid>, IoError> {
    let ctx = "PXLF";
    let (head, body) = header_line(bytes, ctx)?;
    let f = parse_fields(head, "PXLF", 3, ctx)?;
    let (n, t) = (f[1], f[2]);
    let block = n * n * n * 4;
    if body.len() != block * (t + 1) {
        return Err(IoError::format(ctx, format!("expected {} payload bytes, got {}", block * (t + 1), body.len())));
    }
    body.chunks_exact(block)
        .enumerate()
        .map(|(step, chunk)| {
            let vals = chunk
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect();
            LatentGrid::new(n, step, vals).map_err(|e: DenoiseError| IoError::format(ctx, e.to_string()))
        })
        .collect()
}

pub fn write_pxlf(path: &Path, traj: &[LatentGrid]) -> Result<(), IoError> {
    write_file(path, &encode_pxlf(traj)?)
}

pub fn read_pxlf(path: &Path) -> Result<Vec<LatentGrid>, IoError> {
    decode_pxlf(&read_file(path)?).map_err(|e| with_path(e, path))
}

pub fn write_obj(mut w: impl Write, mesh: &TriangleMesh) -> io::Result<()> {
    for v in &mesh.vertices {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for f in &mesh.faces {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

/// OBJ with `v x y z r g b` vertex records, colors in `[0, 1]`.
pub fn save_obj_colored(path: &Path, mesh: &TriangleMesh, colors: &[[f64; 3]]) -> Result<(), IoError> {
    let mut out = String::new();
    for (v, c) in mesh.vertices.iter().zip(colors) {
        out.push_str(&format!("v {} {} {} {:.4} {:.4} {:.4}\n", v.x, v.y, v.z, c[0], c[1], c[2]));
    }
    for f in &mesh.faces {
        out.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    write_file(path, out.as_bytes())
}

pub fn save_obj(path: &Path, mesh: &TriangleMesh) -> Result<(), IoError> {
    let mut buf = Vec::new();
    write_obj(&mut buf, mesh).map_err(file_err(path))?;
    write_file(path, &buf)
}

fn parse_reals<'a>(it: impl Iterator<Item = &'a str>, ctx: &str, line: usize) -> Result<Vec<f64>, IoError> {
    it.map(|t| {
        t.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| IoError::format(ctx, format!("line {line}: bad number '{t}'")))
    })
    .collect()
}

/// Reads `v` and `f` records; polygons are fan-triangulated, texture and
/// normal indices dropped.
pub fn read_obj(r: impl Read, ctx: &str) -> Result<TriangleMesh, IoError> {
    let mut mesh = TriangleMesh::default();
    for (ln, line) in BufReader::new(r).lines().enumerate() {
        let line = line.map_err(|e| IoError::format(ctx, e.to_string()))?;
        let mut it = line.split_ascii_whitespace();
        match it.next() {
            Some("v") => {
                let xs = parse_reals(it.take(3), ctx, ln + 1)?;
                if xs.len() != 3 {
                    return Err(IoError::format(ctx, format!("line {}: vertex needs 3 coordinates", ln + 1)));
                }
                mesh.vertices.push(Vec3::new(xs[0], xs[1], xs[2]));
            }
            Some("f") => {
                let idx = it
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let i: i64 = head
                            .parse()
                            .map_err(|_| IoError::format(ctx, format!("line {}: bad index '{t}'", ln + 1)))?;
                        let nv = mesh.vertices.len() as i64;
                        let resolved = if i < 0 { nv + i } else { i - 1 };
                        if !(0..nv).contains(&resolved) {
                            return Err(IoError::format(ctx, format!("line {}: index {i} out of range", ln + 1)));
                        }
                        Ok(resolved as u32)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if idx.len() < 3 {
                    return Err(IoError::format(ctx, format!("line {}: face needs 3 vertices", ln + 1)));
                }
                for k in 1..idx.len() - 1 {
                    mesh.faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(mesh)
}

pub fn load_obj(path: &Path) -> Result<TriangleMesh, IoError> {
    read_obj(&read_file(path)?[..], &path.display().to_string())
}

/// Points from an OBJ file (`v` records) or whitespace-separated `x y z`
/// lines; `#` starts a comment.
pub fn parse_points(text: &str, ctx: &str) -> Result<Vec<Vec3>, IoError> {
    let mut pts = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut fields: Vec<&str> = line.split(|c: char| c.is_ascii_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
        match fields[0] {
            "v" => fields.remove(0),
            "vn" | "vt" | "f" | "o" | "g" | "s" | "l" | "usemtl" | "mtllib" => continue,
            _ => "",
        };
        let xs = parse_reals(fields.iter().take(3).copied(), ctx, ln + 1)?;
        if xs.len() != 3 {
            return Err(IoError::format(ctx, format!("line {}: expected 3 coordinates", ln + 1)));
        }
        pts.push(Vec3::new(xs[0], xs[1], xs[2]));
    }
    Ok(pts)
}

pub fn load_points(path: &Path) -> Result<Vec<Vec3>, IoError> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|_| IoError::format(path.display().to_string(), "not UTF-8 text"))?;
    parse_points(&text, &path.display().to_string())
}

pub fn write_points(path: &Path, points: &[Vec3]) -> Result<(), IoError> {
    let mut out = String::new();
    for p in points {
        out.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
    }
    write_file(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::{encode, invert, ReferenceDenoiser};

    #[test]
    fn pxvg_round_trip() {
        let mut g = OccupancyGrid::empty(8).unwrap();
        g.set(1, 2, 3, true);
        let bytes = encode_pxvg(&g);
        assert!(bytes.starts_with(b"PXVG 1 8\n"));
        assert_eq!(bytes.len(), 9 + 512);
        assert_eq!(decode_pxvg(&bytes).unwrap(), g);
        assert!(decode_pxvg(&bytes[..100]).is_err());
        assert!(decode_pxvg(b"PXVG 2 8\n").is_err());
    }

    #[test]
    fn pxlf_round_trip_is_lossless() {
        let mut g = OccupancyGrid::empty(8).unwrap();
        g.set(4, 4, 4, true);
        let d = ReferenceDenoiser::new(&encode(&g), 6).unwrap();
        let traj = invert(&encode(&g), &d, 6).unwrap();
        let bytes = encode_pxlf(&traj).unwrap();
        assert!(bytes.starts_with(b"PXLF 1 8 6\n"));
        let back = decode_pxlf(&bytes).unwrap();
        assert!(back.iter().zip(&traj).all(|(a, b)| a.bit_eq(b)));
    }

    #[test]
    fn obj_round_trip() {
        let m = TriangleMesh::cuboid(Vec3::repeat(-0.25), Vec3::repeat(0.25));
        let mut buf = Vec::new();
        write_obj(&mut buf, &m).unwrap();
        assert_eq!(read_obj(&buf[..], "mem").unwrap(), m);
        let quad = read_obj(&b"v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 -1\n"[..], "mem").unwrap();
        assert_eq!(quad.faces, vec![[0, 1, 2], [0, 2, 3]]);
        assert!(read_obj(&b"v 0 0 0\nf 1 2 3\n"[..], "mem").is_err());
    }

    #[test]
    fn point_formats() {
        let pts = parse_points("# header\n0 0 1\n1,2,3\nv 4 5 6\nvn 0 0 1\n", "mem").unwrap();
        assert_eq!(pts, vec![Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 2.0, 3.0), Vec3::new(4.0, 5.0, 6.0)]);
        let err = parse_points("0 0\n", "pts.xyz").unwrap_err().to_string();
        assert!(err.contains("pts.xyz") && err.contains("line 1"));
    }
}
