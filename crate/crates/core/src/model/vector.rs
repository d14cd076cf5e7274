use num_complex::Complex64;

use crate::error::{Error, Result};

/// Real parameter vector of even length `2N`.
///
/// Holds both model weights and model differences. The constructor rejects
/// odd lengths and non-finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if !values.len().is_multiple_of(2) {
            return Err(Error::OddLength(values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter vector"));
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `N`, the number of complex symbols this vector packs into.
    pub fn half_dim(&self) -> usize {
        self.0.len() / 2
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub(crate) fn check_len(&self, expected: usize) -> Result<()> {
        if self.len() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected,
                found: self.len(),
            })
        }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &ParameterVector) -> Result<()> {
        other.check_len(self.len())?;
        for (x, y) in self.0.iter_mut().zip(&other.0) {
            *x += a * y;
        }
        Ok(())
    }

    pub fn scaled(&self, a: f64) -> ParameterVector {
        ParameterVector(self.0.iter().map(|v| a * v).collect())
    }

    pub fn sub(&self, other: &ParameterVector) -> Result<ParameterVector> {
        other.check_len(self.len())?;
        Ok(ParameterVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn dot(&self, other: &ParameterVector) -> Result<f64> {
        other.check_len(self.len())?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn dist_sq(&self, other: &ParameterVector) -> Result<f64> {
        other.check_len(self.len())?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }
}

impl AsRef<[f64]> for ParameterVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// `N` complex symbols built from a `2N` real vector: entry `n` carries
/// `v[n] + i v[n + N]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSymbolVector(Vec<Complex64>);

impl ComplexSymbolVector {
    pub fn from_symbols(symbols: Vec<Complex64>) -> Self {
        Self(symbols)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[Complex64] {
        &self.0
    }

    pub fn re(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().map(|c| c.re)
    }

    pub fn im(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().map(|c| c.im)
    }
}

pub fn pack(v: &ParameterVector) -> ComplexSymbolVector {
    let n = v.half_dim();
    let (re, im) = v.as_slice().split_at(n);
    ComplexSymbolVector(
        re.iter()
            .zip(im)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect(),
    )
}

/// Packs a raw slice, rejecting odd lengths.
pub fn pack_slice(values: &[f64]) -> Result<ComplexSymbolVector> {
    if !values.len().is_multiple_of(2) {
        return Err(Error::OddLength(values.len()));
    }
    let n = values.len() / 2;
    Ok(ComplexSymbolVector(
        (0..n)
            .map(|i| Complex64::new(values[i], values[i + n]))
            .collect(),
    ))
}

pub fn unpack(c: &ComplexSymbolVector) -> Result<ParameterVector> {
    let values: Vec<f64> = c.re().chain(c.im()).collect();
    ParameterVector::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pack_reads_halves_as_real_and_imaginary() {
        let v = ParameterVector::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let c = pack(&v);
        assert_eq!(c.re().collect::<Vec<_>>(), vec![1.0, 2.0]);
        assert_eq!(c.im().collect::<Vec<_>>(), vec![3.0, 4.0]);
    }

    #[test]
    fn zero_vector_packs_to_zero_symbols() {
        let c = pack(&ParameterVector::zeros(6).unwrap());
        assert!(c.symbols().iter().all(|s| *s == Complex64::new(0.0, 0.0)));
        assert_eq!(c.len(), 3);
    }

    #[test]
    fn odd_length_is_rejected() {
        assert!(matches!(pack_slice(&[1.0, 2.0, 3.0]), Err(Error::OddLength(3))));
        assert!(matches!(
            ParameterVector::new(vec![0.0; 5]),
            Err(Error::OddLength(5))
        ));
    }

    #[test]
    fn non_finite_entries_are_rejected() {
        assert!(ParameterVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(ParameterVector::new(vec![f64::INFINITY, 0.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn unpack_inverts_pack_bit_exactly(
            half in prop::collection::vec((-1e300f64..1e300, -1e-300f64..1e-300), 0..64)
        ) {
            let values: Vec<f64> = half.iter().map(|p| p.0).chain(half.iter().map(|p| p.1)).collect();
            let v = ParameterVector::new(values).unwrap();
            let back = unpack(&pack(&v)).unwrap();
            prop_assert!(v.as_slice().iter().zip(back.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits()));
            prop_assert_eq!(pack_slice(v.as_slice()).unwrap(), pack(&v));
        }
    }
}
