//! `.cube` text LUTs.
//!
//! Data lines are written with the red index varying fastest, then green,
//! then blue, which is the order every `.cube` reader expects. The internal
//! layout is red-major (blue fastest), so both directions permute explicitly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lut::Lut3d;
use crate::scalar::Scalar;

/// Renders `lut` with values clamped to `[0, 1]` and six decimals.
pub fn to_cube_string<S: Scalar>(lut: &Lut3d<S>, title: &str) -> String {
    let n = lut.n_bins();
    let mut s = String::with_capacity(n * n * n * 27 + 64);
    if !title.is_empty() {
        let _ = writeln!(s, "TITLE \"{}\"", title.replace('"', "'"));
    }
    let _ = writeln!(s, "LUT_3D_SIZE {n}");
    for b in 0..n {
        for g in 0..n {
            for r in 0..n {
                let c = lut.cell(r, g, b);
                let v = |i: usize| c[i].clamp_unit().to_f64_lossy();
                let _ = writeln!(s, "{:.6} {:.6} {:.6}", v(0), v(1), v(2));
            }
        }
    }
    s
}

pub fn write_cube<S: Scalar>(lut: &Lut3d<S>, title: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_cube_string(lut, title)).map_err(|e| Error::io(path, e))
}

/// Parses a 3D `.cube` file with the default `[0, 1]` domain.
pub fn parse_cube(text: &str) -> Result<Lut3d<f32>> {
    let mut size = None;
    let mut rows: Vec<[f32; 3]> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |what: &str| Error::Format(format!("line {}: {what}", lineno + 1));
        let mut parts = line.split_whitespace();
        let head = parts.next().unwrap_or_default();
        match head {
            "TITLE" => continue,
            "LUT_3D_SIZE" => {
                let n: usize = parts
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| bad("invalid LUT_3D_SIZE"))?;
                if n < 2 || size.is_some() {
                    return Err(bad("invalid or repeated LUT_3D_SIZE"));
                }
                size = Some(n);
            }
            "DOMAIN_MIN" | "DOMAIN_MAX" => {
                let want = if head == "DOMAIN_MIN" { 0.0 } else { 1.0 };
                let vals: Vec<f64> = parts.filter_map(|v| v.parse().ok()).collect();
                if vals.len() != 3 || vals.iter().any(|&v| v != want) {
                    return Err(bad("only the [0, 1] domain is supported"));
                }
            }
            "LUT_1D_SIZE" => return Err(bad("1D LUTs are not supported")),
            _ => {
                let vals: Vec<f32> = line
                    .split_whitespace()
                    .map(|v| v.parse::<f32>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("expected three numbers"))?;
                if vals.len() != 3 || vals.iter().any(|v| !v.is_finite()) {
                    return Err(bad("expected three finite numbers"));
                }
                rows.push([vals[0], vals[1], vals[2]]);
            }
        }
    }
    let n = size.ok_or_else(|| Error::Format("missing LUT_3D_SIZE".into()))?;
    if rows.len() != n * n * n {
        return Err(Error::Format(format!(
            "expected {} data lines, found {}",
            n * n * n,
            rows.len()
        )));
    }
    Lut3d::from_fn(n, |r, g, b| rows[(b * n + g) * n + r])
}

pub fn read_cube(path: impl AsRef<Path>) -> Result<Lut3d<f32>> {
    let path = path.as_ref();
    parse_cube(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_first_and_last_lines() {
        let s = to_cube_string(&Lut3d::<f32>::identity(5).unwrap(), "");
        let data: Vec<&str> = s.lines().skip(1).collect();
        assert_eq!(data[0], "0.000000 0.000000 0.000000");
        assert_eq!(data[1], "0.250000 0.000000 0.000000");
        assert_eq!(data[5], "0.000000 0.250000 0.000000");
        assert_eq!(*data.last().unwrap(), "1.000000 1.000000 1.000000");
    }

    #[test]
    fn permutation_round_trips_an_asymmetric_lut() {
        let lut = Lut3d::<f32>::from_fn(3, |r, g, b| {
            [(r * 9 + g * 3 + b) as f32 / 26.0, g as f32 * 0.1, b as f32 * 0.3]
        })
        .unwrap();
        let back = parse_cube(&to_cube_string(&lut, "t")).unwrap();
        for (a, b) in lut.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn values_are_clamped() {
        let lut = Lut3d::<f32>::constant(2, [1.5, -0.2, 0.5]).unwrap();
        let back = parse_cube(&to_cube_string(&lut, "")).unwrap();
        assert_eq!(back.cell(1, 0, 1), [1.0, 0.0, 0.5]);
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(parse_cube("0 0 0\n").is_err());
        assert!(parse_cube("LUT_3D_SIZE 2\n0 0 0\n").is_err());
        assert!(parse_cube("LUT_3D_SIZE 2\n0 0 x\n").is_err());
        assert!(parse_cube("LUT_1D_SIZE 2\n").is_err());
    }
}
