use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ProjectionError, ProjectionPlane, RasterMap};
use crate::scalar::Real;

/// Metadata written next to the debug graymaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterSidecar {
    pub height: usize,
    pub width: usize,
    pub scale: f64,
    pub offset: [f64; 2],
    pub plane: ProjectionPlane<f64>,
    /// Channel 0 gray level 0 maps to `value_min`, 65535 to `value_max`.
    pub value_min: f64,
    pub value_max: f64,
    pub mask_pixels: usize,
}

fn write_pgm16(path: &Path, h: usize, w: usize, levels: &[u16]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "P5\n{w} {h}\n65535\n")?;
    for &v in levels {
        out.write_all(&v.to_be_bytes())?;
    }
    out.flush()
}

fn write_pgm8(path: &Path, h: usize, w: usize, levels: &[u8]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "P5\n{w} {h}\n255\n")?;
    out.write_all(levels)?;
    out.flush()
}

/// Writes `<stem>.values.pgm` (16-bit), `<stem>.mask.pgm` (8-bit) and
/// `<stem>.json` into `dir`.
pub fn export_debug<T: Real>(
    map: &RasterMap<T>,
    dir: &Path,
    stem: &str,
) -> Result<RasterSidecar, ProjectionError> {
    std::fs::create_dir_all(dir)?;
    let (h, w) = (map.height(), map.width());
    let vals: Vec<f64> = map.values.data().iter().map(|v| v.to_f64_lossless()).collect();
    let inside = vals.iter().zip(&map.mask).filter(|(_, &m)| m != 0).map(|(&v, _)| v);
    let (lo, hi) = inside.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
    let span = if hi > lo { hi - lo } else { 1.0 };
    let levels: Vec<u16> = vals
        .iter()
        .zip(&map.mask)
        .map(|(&v, &m)| {
            if m == 0 {
                0
            } else {
                (((v - lo) / span) * 65535.0).round().clamp(0.0, 65535.0) as u16
            }
        })
        .collect();
    write_pgm16(&dir.join(format!("{stem}.values.pgm")), h, w, &levels)?;
    let mask: Vec<u8> = map.mask.iter().map(|&m| if m != 0 { 255 } else { 0 }).collect();
    write_pgm8(&dir.join(format!("{stem}.mask.pgm")), h, w, &mask)?;
    let p = &map.frame.plane;
    let cast = |a: [T; 3]| a.map(|v| v.to_f64_lossless());
    let sidecar = RasterSidecar {
        height: h,
        width: w,
        scale: map.frame.scale.to_f64_lossless(),
        offset: map.frame.offset.map(|v| v.to_f64_lossless()),
        plane: ProjectionPlane {
            origin: cast(p.origin),
            basis_u: cast(p.basis_u),
            basis_v: cast(p.basis_v),
            normal: cast(p.normal),
        },
        value_min: lo,
        value_max: hi,
        mask_pixels: map.mask_count(),
    };
    let file = std::fs::File::create(dir.join(format!("{stem}.json")))?;
    serde_json::to_writer_pretty(file, &sidecar).map_err(std::io::Error::from)?;
    Ok(sidecar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use crate::projection::{fit_plane, project};

    #[test]
    fn writes_graymaps_and_sidecar() {
        let m = Mesh::new(
            vec![[0.0, 0.0, 0.0], [20.0, 0.0, 0.0], [0.0, 10.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let plane = fit_plane(m.vertices()).unwrap();
        let (map, _) = project(&m, &[0.0, 1.0, 2.0], &plane).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let side = export_debug(&map, dir.path(), "s0").unwrap();
        assert_eq!((side.value_min, side.value_max), (0.0, 2.0));
        let bytes = std::fs::read(dir.path().join("s0.values.pgm")).unwrap();
        assert!(bytes.starts_with(b"P5\n768 384\n65535\n"));
        assert_eq!(bytes.len(), "P5\n768 384\n65535\n".len() + 384 * 768 * 2);
        let mask = std::fs::read(dir.path().join("s0.mask.pgm")).unwrap();
        let ones = mask.iter().skip("P5\n768 384\n255\n".len()).filter(|&&b| b == 255).count();
        assert_eq!(ones, side.mask_pixels);
        let back: RasterSidecar =
            serde_json::from_slice(&std::fs::read(dir.path().join("s0.json")).unwrap()).unwrap();
        assert_eq!(back, side);
    }
}
