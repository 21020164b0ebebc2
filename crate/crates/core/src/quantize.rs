//! Optional fixed-point adapter between real-valued gradients and field
//! residues.  Convenience only; the protocol itself never calls this.

use crate::error::Error;
use crate::field::PrimeField;

/// Scale-and-round embedding of reals into the signed residue range
/// `[-(q-1)/2, (q-1)/2]`.
#[derive(Debug, Clone, Copy)]
pub struct Quantizer {
    pub scale: f64,
}

impl Quantizer {
    pub fn new(scale: f64) -> Result<Self, Error> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParams(format!("quantizer scale {scale}")));
        }
        Ok(Self { scale })
    }

    pub fn to_field(&self, x: f64, field: &PrimeField) -> Result<u64, Error> {
        let v = (x * self.scale).round();
        let half = ((field.modulus() - 1) / 2) as f64;
        if !v.is_finite() || v.abs() > half {
            return Err(Error::InvalidParams(format!(
                "{x} does not fit the signed residue range at scale {}",
                self.scale
            )));
        }
        Ok(field.from_signed(v as i64))
    }

    pub fn from_field(&self, r: u64, field: &PrimeField) -> f64 {
        let half = (field.modulus() - 1) / 2;
        let signed = if r > half { r as i64 - field.modulus() as i64 } else { r as i64 };
        signed as f64 / self.scale
    }

    /// Integer ranking key for top-r selection: |x| in scaled units.
    pub fn magnitude_key(&self, x: f64) -> i64 {
        (x.abs() * self.scale).round() as i64
    }
}
