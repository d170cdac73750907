//! Binary raster ("OPFD") and CSV output.

use std::io::{self, Read, Write};

use super::{Ensemble, EvalGrid};
use crate::error::{Error, Result};

pub const OPFD_MAGIC: &[u8; 4] = b"OPFD";
pub const OPFD_VERSION: u16 = 1;

/// Decoded contents of an OPFD raster.
#[derive(Debug, Clone, PartialEq)]
pub struct OpfdData {
    pub version: u16,
    pub m: usize,
    pub dims: Vec<usize>,
    pub n_replicates: usize,
    pub config_hash: u64,
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    /// `[replicate][point][component]`, points row-major.
    pub values: Vec<f64>,
}

/// Writes a lattice ensemble; point lists have no raster layout.
pub fn write_opfd<W: Write>(w: &mut W, ens: &Ensemble, grid: &EvalGrid) -> Result<()> {
    let EvalGrid::Lattice {
        origin,
        spacing,
        dims,
    } = grid
    else {
        return Err(Error::Unsupported(
            "OPFD output needs a lattice evaluation grid".into(),
        ));
    };
    if ens.points.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: ens.points.len(),
        });
    }
    let u32_of = |x: usize, what: &str| {
        u32::try_from(x)
            .map_err(|_| Error::Unsupported(format!("{what} = {x} does not fit the OPFD header")))
    };
    let mut buf = Vec::with_capacity(64 + ens.values.len() * 8);
    buf.extend_from_slice(OPFD_MAGIC);
    buf.extend_from_slice(&OPFD_VERSION.to_le_bytes());
    buf.extend_from_slice(&u32_of(dims.len(), "d")?.to_le_bytes());
    buf.extend_from_slice(&u32_of(ens.m, "m")?.to_le_bytes());
    for &n in dims {
        buf.extend_from_slice(&u32_of(n, "dimension")?.to_le_bytes());
    }
    buf.extend_from_slice(&u32_of(ens.n_replicates, "replicates")?.to_le_bytes());
    buf.extend_from_slice(&ens.config_hash.to_le_bytes());
    for x in origin.iter().chain(spacing) {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    for v in &ens.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::Io("truncated OPFD stream".into()),
        _ => Error::from(e),
    })?;
    Ok(b)
}

pub fn read_opfd<R: Read>(r: &mut R) -> Result<OpfdData> {
    if &take::<4>(r)? != OPFD_MAGIC {
        return Err(Error::Io("not an OPFD stream".into()));
    }
    let version = u16::from_le_bytes(take(r)?);
    if version != OPFD_VERSION {
        return Err(Error::Io(format!("unsupported OPFD version {version}")));
    }
    let d = u32::from_le_bytes(take(r)?) as usize;
    let m = u32::from_le_bytes(take(r)?) as usize;
    let dims = (0..d)
        .map(|_| Ok(u32::from_le_bytes(take(r)?) as usize))
        .collect::<Result<Vec<_>>>()?;
    let n_replicates = u32::from_le_bytes(take(r)?) as usize;
    let config_hash = u64::from_le_bytes(take(r)?);
    let mut f = || Ok::<f64, Error>(f64::from_le_bytes(take(r)?));
    let origin = (0..d).map(|_| f()).collect::<Result<Vec<_>>>()?;
    let spacing = (0..d).map(|_| f()).collect::<Result<Vec<_>>>()?;
    let n = n_replicates * dims.iter().product::<usize>() * m;
    let values = (0..n).map(|_| f()).collect::<Result<Vec<_>>>()?;
    Ok(OpfdData {
        version,
        m,
        dims,
        n_replicates,
        config_hash,
        origin,
        spacing,
        values,
    })
}

/// One row per replicate and point: `replicate,point,t_1..t_d,X_1..X_m`.
pub fn write_csv<W: Write>(w: &mut W, ens: &Ensemble) -> Result<()> {
    let d = ens.points.first().map_or(0, |p| p.len());
    let mut out = io::BufWriter::new(w);
    writeln!(out, "# config_hash=0x{:016x}", ens.config_hash)?;
    let mut header = vec!["replicate".to_string(), "point".to_string()];
    header.extend((1..=d).map(|j| format!("t{j}")));
    header.extend((1..=ens.m).map(|j| format!("X{j}")));
    writeln!(out, "{}", header.join(","))?;
    for r in 0..ens.n_replicates {
        for (k, p) in ens.points.iter().enumerate() {
            write!(out, "{r},{k}")?;
            for x in p {
                write!(out, ",{x:?}")?;
            }
            for i in 0..ens.m {
                write!(out, ",{:?}", ens.value(r, k, i))?;
            }
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> (Ensemble, EvalGrid) {
        let grid = EvalGrid::Lattice {
            origin: vec![0.0, -1.0],
            spacing: vec![0.5, 0.25],
            dims: vec![2, 3],
        };
        let points = grid.points();
        let n = 3 * points.len() * 2;
        let ens = Ensemble {
            points,
            m: 2,
            n_replicates: 3,
            config_hash: 0xdead_beef_0123_4567,
            n_cells: 0,
            values: (0..n).map(|i| i as f64 * 0.1 - 1.0).collect(),
        };
        (ens, grid)
    }

    #[test]
    fn opfd_round_trip() {
        let (ens, grid) = tiny();
        let mut buf = Vec::new();
        write_opfd(&mut buf, &ens, &grid).unwrap();
        assert_eq!(&buf[..4], b"OPFD");
        assert_eq!(
            buf.len(),
            4 + 2 + 4 + 4 + 2 * 4 + 4 + 8 + 4 * 8 + ens.values.len() * 8
        );
        let back = read_opfd(&mut buf.as_slice()).unwrap();
        assert_eq!(back.values, ens.values);
        assert_eq!(back.dims, vec![2, 3]);
        assert_eq!(back.config_hash, ens.config_hash);
        assert_eq!(back.spacing, vec![0.5, 0.25]);
        assert!(read_opfd(&mut &buf[..buf.len() - 1]).is_err());
        assert!(write_opfd(
            &mut Vec::new(),
            &ens,
            &EvalGrid::Points(vec![vec![0.0, 0.0]])
        )
        .is_err());
    }

    #[test]
    fn csv_layout() {
        let (ens, _) = tiny();
        let mut buf = Vec::new();
        write_csv(&mut buf, &ens).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# config_hash=0xdeadbeef01234567");
        assert_eq!(lines[1], "replicate,point,t1,t2,X1,X2");
        assert_eq!(lines.len(), 2 + 3 * 6);
        assert_eq!(lines[2], "0,0,0.0,-1.0,-1.0,-0.9");
    }
}
