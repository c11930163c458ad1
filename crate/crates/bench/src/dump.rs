//! Binary solution dump.
//!
//! ```text
//! header  6 × u64 LE   Nx, Ny, Nz, 0, 0, 0
//! body    5 × Nx·Ny·Nz f64 LE, variables in the order p, u, v, w, T,
//!         each i-fastest over the interior nodes
//! ```

use std::io::{self, Read, Write};

use cavity_core::mesh::{interior_box, FieldSet, Grid3, Var};

pub const HEADER_WORDS: usize = 6;

pub fn write_dump<W: Write>(fields: &FieldSet<f64>, mut w: W) -> io::Result<()> {
    let n = fields.grid().n();
    let header = [n[0] as u64, n[1] as u64, n[2] as u64, 0, 0, 0];
    for h in header {
        w.write_all(&h.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(n.iter().product::<usize>() * 8);
    for var in Var::ALL {
        buf.clear();
        let f = &fields[var];
        interior_box(n).for_each(|i, j, k| buf.extend_from_slice(&f.get(i, j, k).to_le_bytes()));
        w.write_all(&buf)?;
    }
    w.flush()
}

/// Reads a dump back onto a grid with the given physical edge length.
pub fn read_dump<R: Read>(mut r: R, length: f64) -> io::Result<FieldSet<f64>> {
    let mut word = [0u8; 8];
    let mut header = [0u64; HEADER_WORDS];
    for h in header.iter_mut() {
        r.read_exact(&mut word)?;
        *h = u64::from_le_bytes(word);
    }
    let n = [header[0], header[1], header[2]].map(|x| x as usize);
    let grid =
        Grid3::new(n, [length; 3]).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
    let mut fields = FieldSet::new(grid);
    for var in Var::ALL {
        let f = &mut fields[var];
        let mut err = None;
        interior_box(n).for_each(|i, j, k| {
            if err.is_none() {
                match r.read_exact(&mut word) {
                    Ok(()) => f.set(i, j, k, f64::from_le_bytes(word)),
                    Err(e) => err = Some(e),
                }
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    Ok(fields)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_layout_is_exact() {
        let g = Grid3::new([5, 6, 7], [0.05; 3]).unwrap();
        let mut f = FieldSet::new(g);
        f[Var::U].set(2, 2, 2, 1.5);
        f[Var::T].set(6, 7, 8, -2.0);
        let mut bytes = Vec::new();
        write_dump(&f, &mut bytes).unwrap();
        let cells = 5 * 6 * 7;
        assert_eq!(bytes.len(), 8 * (HEADER_WORDS + 5 * cells));
        assert_eq!(&bytes[..8], &5u64.to_le_bytes());
        // first interior node of u sits right after the p block
        let at = 8 * (HEADER_WORDS + cells);
        assert_eq!(&bytes[at..at + 8], &1.5f64.to_le_bytes());
        // last interior node of T is the last word
        assert_eq!(&bytes[bytes.len() - 8..], &(-2.0f64).to_le_bytes());
        let back = read_dump(&bytes[..], 0.05).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn truncated_dump_fails() {
        let g = Grid3::new([5, 5, 5], [0.05; 3]).unwrap();
        let mut bytes = Vec::new();
        write_dump(&FieldSet::new(g), &mut bytes).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(read_dump(&bytes[..], 0.05).is_err());
    }
}
