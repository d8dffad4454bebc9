//! Binary amplitude dumps.
//!
//! Layout: `u32` qubit count (little-endian), one flag byte (`1` = the
//! following floats are little-endian), then `2^n` pairs of `f64` (real,
//! imaginary) in amplitude-index order.

use std::io::{Read, Write};

use crate::{Error, Result, C64};

pub fn write_amplitudes<W: Write>(mut w: W, n_qubits: usize, amps: &[C64]) -> Result<()> {
    if amps.len() != 1 << n_qubits {
        return Err(Error::Shape(format!(
            "{} amplitudes for {n_qubits} qubits",
            amps.len()
        )));
    }
    w.write_all(&(n_qubits as u32).to_le_bytes())?;
    w.write_all(&[1u8])?;
    for a in amps {
        w.write_all(&a.re.to_le_bytes())?;
        w.write_all(&a.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_amplitudes<R: Read>(mut r: R) -> Result<(usize, Vec<C64>)> {
    let mut head = [0u8; 5];
    r.read_exact(&mut head)?;
    let n = u32::from_le_bytes(head[..4].try_into().expect("4 bytes")) as usize;
    if head[4] != 1 {
        return Err(Error::Parse("only little-endian dumps are supported".into()));
    }
    if n > 40 {
        return Err(Error::Parse(format!("implausible qubit count {n}")));
    }
    let mut amps = Vec::with_capacity(1 << n);
    let mut buf = [0u8; 16];
    for _ in 0..1usize << n {
        r.read_exact(&mut buf)?;
        let re = f64::from_le_bytes(buf[..8].try_into().expect("8 bytes"));
        let im = f64::from_le_bytes(buf[8..].try_into().expect("8 bytes"));
        amps.push(C64::new(re, im));
    }
    Ok((n, amps))
}
