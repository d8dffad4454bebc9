use std::io::{Read, Write};

use crate::feedback::{FeedbackContext, MeasurementRecord};
use crate::{Error, Result};

/// One learnable angle row per ancilla outcome, `f(M; W) = W_M`.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularPolicy {
    n_ancilla: usize,
    row_len: usize,
    table: Vec<f64>,
}

impl TabularPolicy {
    pub fn zeros(n_ancilla: usize, row_len: usize) -> Result<Self> {
        if n_ancilla > 20 {
            return Err(Error::Capacity {
                what: "tabular policy ancillas",
                requested: n_ancilla,
                cap: 20,
            });
        }
        Ok(Self {
            n_ancilla,
            row_len,
            table: vec![0.0; row_len << n_ancilla],
        })
    }

    pub fn n_rows(&self) -> usize {
        1 << self.n_ancilla
    }

    pub fn row_len(&self) -> usize {
        self.row_len
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.table[m * self.row_len..(m + 1) * self.row_len]
    }

    pub fn row_mut(&mut self, m: usize) -> &mut [f64] {
        &mut self.table[m * self.row_len..(m + 1) * self.row_len]
    }

    pub fn weights(&self) -> &[f64] {
        &self.table
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.table
    }

    fn check(&self, ctx: FeedbackContext<'_>, m: &MeasurementRecord) -> Result<usize> {
        if m.len() != self.n_ancilla {
            return Err(Error::Initialization(format!(
                "no row for a {}-ancilla outcome in a {}-ancilla table",
                m.len(),
                self.n_ancilla
            )));
        }
        if ctx.u2.n_params() != self.row_len {
            return Err(Error::Shape(format!(
                "rows hold {} angles, feedback circuit takes {}",
                self.row_len,
                ctx.u2.n_params()
            )));
        }
        Ok(m.outcome())
    }

    pub fn eval(&self, ctx: FeedbackContext<'_>, m: &MeasurementRecord) -> Result<Vec<f64>> {
        let idx = self.check(ctx, m)?;
        Ok(self.row(idx).to_vec())
    }

    pub fn backprop(
        &self,
        ctx: FeedbackContext<'_>,
        m: &MeasurementRecord,
        d_angles: &[f64],
        grad: &mut [f64],
    ) -> Result<()> {
        let idx = self.check(ctx, m)?;
        let row = &mut grad[idx * self.row_len..(idx + 1) * self.row_len];
        for (g, d) in row.iter_mut().zip(d_angles) {
            *g += d;
        }
        Ok(())
    }

    /// CSV with header `bitstring,theta_0,…`; character `k` of the bitstring
    /// is ancilla `k`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        let mut header = vec!["bitstring".to_string()];
        header.extend((0..self.row_len).map(|k| format!("theta_{k}")));
        out.write_record(&header)?;
        for m in 0..self.n_rows() {
            let mut rec = vec![(0..self.n_ancilla)
                .map(|k| if m >> k & 1 == 1 { '1' } else { '0' })
                .collect::<String>()];
            rec.extend(self.row(m).iter().map(|x| format!("{x:e}")));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let row_len = rd.headers()?.len().saturating_sub(1);
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut n_ancilla = None;
        for rec in rd.records() {
            let rec = rec?;
            let bits = &rec[0];
            if *n_ancilla.get_or_insert(bits.len()) != bits.len() {
                return Err(Error::Parse("bitstrings differ in length".into()));
            }
            let mut m = 0usize;
            for (k, c) in bits.chars().enumerate() {
                match c {
                    '0' => {}
                    '1' => m |= 1 << k,
                    _ => return Err(Error::Parse(format!("bad bitstring {bits:?}"))),
                }
            }
            let vals = rec
                .iter()
                .skip(1)
                .map(|v| v.parse::<f64>().map_err(|e| Error::Parse(e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            rows.push((m, vals));
        }
        let n_ancilla = n_ancilla.unwrap_or(0);
        let mut p = Self::zeros(n_ancilla, row_len)?;
        if rows.len() != p.n_rows() {
            return Err(Error::Initialization(format!(
                "{} rows for {} outcomes",
                rows.len(),
                p.n_rows()
            )));
        }
        let mut seen = vec![false; p.n_rows()];
        for (m, vals) in rows {
            if std::mem::replace(&mut seen[m], true) || vals.len() != row_len {
                return Err(Error::Parse(format!("duplicate or ragged row for outcome {m}")));
            }
            p.row_mut(m).copy_from_slice(&vals);
        }
        Ok(p)
    }
}
