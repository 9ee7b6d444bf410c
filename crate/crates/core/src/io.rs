//! CSV exchange formats.
//!
//! * fields: header `theta,lambda,value`, one row per node, colatitude-major;
//! * harmonics: header `l,m,re,im`, the field being `Re Σ (re + i·im) Y_lm`
//!   over the listed rows (negative `m` allowed).
//!
//! Numbers are written with 17 significant digits.

use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{QsbError, Result};
use crate::field::ScalarField;
use crate::grid::{Harmonics, SphereGrid};

/// 17 significant digits in scientific notation.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(e: impl std::fmt::Display) -> QsbError {
    QsbError::InvalidField(e.to_string())
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(r)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let h = rdr.headers().map_err(io_err)?;
    if h.iter().ne(expected.iter().copied()) {
        return Err(QsbError::InvalidField(format!(
            "expected header {}, found {}",
            expected.join(","),
            h.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

pub fn write_field_csv<W: Write>(field: &ScalarField, mut w: W) -> std::io::Result<()> {
    let g = field.grid();
    writeln!(w, "theta,lambda,value")?;
    for (k, v) in field.values().iter().enumerate() {
        let (t, l) = g.node(k);
        writeln!(w, "{},{},{}", fmt17(t), fmt17(l), fmt17(*v))?;
    }
    Ok(())
}

/// Reads a field written on `grid`; node coordinates must match the grid.
pub fn read_field_csv<R: Read>(grid: Arc<SphereGrid>, r: R) -> Result<ScalarField> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &["theta", "lambda", "value"])?;
    let mut values = Vec::with_capacity(grid.node_count());
    for (k, rec) in rdr.deserialize::<(f64, f64, f64)>().enumerate() {
        let (t, l, v) = rec.map_err(io_err)?;
        if k >= grid.node_count() {
            return Err(QsbError::InvalidField(format!("more than {} rows", grid.node_count())));
        }
        let (gt, gl) = grid.node(k);
        if (gt - t).abs() > 1e-12 || (gl - l).abs() > 1e-12 {
            return Err(QsbError::InvalidField(format!(
                "row {k} at ({t}, {l}) does not match grid node ({gt}, {gl})"
            )));
        }
        values.push(v);
    }
    if values.len() != grid.node_count() {
        return Err(QsbError::InvalidField(format!(
            "{} rows for a grid of {} nodes",
            values.len(),
            grid.node_count()
        )));
    }
    ScalarField::new(grid, values)
}

pub fn write_harmonics_csv<W: Write>(h: &Harmonics, mut w: W) -> std::io::Result<()> {
    writeln!(w, "l,m,re,im")?;
    for (l, m, re, im) in h.to_complex() {
        writeln!(w, "{l},{m},{},{}", fmt17(re), fmt17(im))?;
    }
    Ok(())
}

/// One `(l, m, re, im)` term.
pub type HarmonicTerm = (usize, i64, f64, f64);

/// Accumulates terms into coefficients up to `degree`.
pub fn harmonics_from_terms(terms: &[HarmonicTerm], degree: usize) -> Result<Harmonics> {
    let mut h = Harmonics::zeros(degree);
    for &(l, m, re, im) in terms {
        if m.unsigned_abs() as usize > l {
            return Err(QsbError::InvalidField(format!("|m| = {} exceeds l = {l}", m.abs())));
        }
        if l > degree {
            return Err(QsbError::InvalidField(format!("degree {l} exceeds grid degree {degree}")));
        }
        if !(re.is_finite() && im.is_finite()) {
            return Err(QsbError::InvalidField(format!("non-finite coefficient at ({l}, {m})")));
        }
        h.add_complex(l, m, re, im);
    }
    Ok(h)
}

pub fn read_harmonics_csv<R: Read>(r: R, degree: usize) -> Result<Harmonics> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &["l", "m", "re", "im"])?;
    let terms = rdr
        .deserialize::<HarmonicTerm>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(io_err)?;
    harmonics_from_terms(&terms, degree)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip_is_bitwise() {
        let g = Arc::new(SphereGrid::new(5).unwrap());
        let f = ScalarField::from_fn(g.clone(), |t, l| (3.0 * t).sin() * l.cos() + 1.0 / 3.0);
        let mut buf = Vec::new();
        write_field_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("theta,lambda,value\n"));
        assert_eq!(text.lines().count(), g.node_count() + 1);
        let back = read_field_csv(g, buf.as_slice()).unwrap();
        assert!(f.values().iter().zip(back.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn field_rejects_wrong_grid() {
        let g = Arc::new(SphereGrid::new(5).unwrap());
        let f = ScalarField::constant(g, 1.0);
        let mut buf = Vec::new();
        write_field_csv(&f, &mut buf).unwrap();
        let other = Arc::new(SphereGrid::new(6).unwrap());
        assert!(read_field_csv(other, buf.as_slice()).is_err());
        assert!(read_field_csv(f.grid().clone(), &b"x,y,z\n"[..]).is_err());
    }

    #[test]
    fn harmonics_round_trip() {
        let mut h = Harmonics::zeros(4);
        h.set(2, 1, 0.25, -0.5);
        h.set(3, 0, 0.1, 0.0);
        let mut buf = Vec::new();
        write_harmonics_csv(&h, &mut buf).unwrap();
        assert_eq!(read_harmonics_csv(buf.as_slice(), 4).unwrap(), h);
    }

    #[test]
    fn negative_m_is_conjugate_symmetric() {
        let a = read_harmonics_csv(&b"l,m,re,im\n2,1,0.3,0.2\n"[..], 4).unwrap();
        // Y_{l,-m} = (-1)^m conj(Y_lm), so this row describes the same field.
        let b = read_harmonics_csv(&b"l,m,re,im\n2,-1,-0.3,0.2\n"[..], 4).unwrap();
        assert_eq!(a, b);
        assert!(read_harmonics_csv(&b"l,m,re,im\n2,3,1,0\n"[..], 4).is_err());
        assert!(read_harmonics_csv(&b"l,m,re,im\n5,0,1,0\n"[..], 4).is_err());
    }
}
