//! Per-position token distributions decoded from a latent.

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::textio::{expect_header, parse_field, Lines};

const UNIGRAM_HEADER: &str = "unigram v1";
const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// `seq_len x vocab_len` matrix of probabilities; each row is an independent
/// distribution over tokens for one sequence position.
#[derive(Debug, Clone, PartialEq)]
pub struct UnigramMatrix {
    probs: Array2<f64>,
}

impl UnigramMatrix {
    pub fn new(probs: Array2<f64>) -> Result<Self> {
        for (k, row) in probs.rows().into_iter().enumerate() {
            let mut sum = 0.0;
            for &p in row {
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::InvalidUnigram(format!(
                        "row {k} contains invalid probability {p}"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidUnigram(format!(
                    "row {k} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Self { probs })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let l = rows.len();
        let v = rows.first().map(Vec::len).unwrap_or(0);
        let mut probs = Array2::zeros((l, v));
        for (k, row) in rows.iter().enumerate() {
            if row.len() != v {
                return Err(Error::DimensionMismatch {
                    what: "unigram row",
                    expected: v,
                    actual: row.len(),
                });
            }
            for (t, &p) in row.iter().enumerate() {
                probs[[k, t]] = p;
            }
        }
        Self::new(probs)
    }

    /// Uniform distribution at every position.
    pub fn uniform(seq_len: usize, vocab_len: usize) -> Self {
        Self {
            probs: Array2::from_elem((seq_len, vocab_len), 1.0 / vocab_len as f64),
        }
    }

    pub fn seq_len(&self) -> usize {
        self.probs.nrows()
    }

    pub fn vocab_len(&self) -> usize {
        self.probs.ncols()
    }

    pub fn get(&self, position: usize, token: usize) -> f64 {
        self.probs[[position, token]]
    }

    pub fn row(&self, position: usize) -> ArrayView1<'_, f64> {
        self.probs.row(position)
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.probs
    }

    /// Mix every row with the uniform distribution:
    /// `(1 - lambda) p + lambda / V`. Used to keep guidance gradients finite
    /// when all mass sits off-language.
    pub fn smoothed(&self, lambda: f64) -> Self {
        let v = self.vocab_len() as f64;
        let probs = self.probs.mapv(|p| (1.0 - lambda) * p + lambda / v);
        Self { probs }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(UNIGRAM_HEADER);
        out.push('\n');
        out.push_str(&format!("rows {}\n", self.seq_len()));
        out.push_str(&format!("cols {}\n", self.vocab_len()));
        for row in self.probs.rows() {
            out.push_str("row");
            for p in row {
                out.push_str(&format!(" {p}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        expect_header(&mut lines, UNIGRAM_HEADER)?;
        let fields = lines.tagged("rows")?;
        let rows: usize = parse_field(&lines, fields[0], "row count")?;
        let fields = lines.tagged("cols")?;
        let cols: usize = parse_field(&lines, fields[0], "column count")?;
        let mut probs = Array2::zeros((rows, cols));
        for k in 0..rows {
            let fields = lines.tagged("row")?;
            if fields.len() != cols {
                return Err(lines.error(format!(
                    "row {k} has {} entries, expected {cols}",
                    fields.len()
                )));
            }
            for (t, f) in fields.iter().enumerate() {
                probs[[k, t]] = parse_field(&lines, f, "probability")?;
            }
        }
        Self::new(probs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_rows() {
        assert!(UnigramMatrix::from_rows(&[vec![0.5, 0.5]]).is_ok());
        assert!(UnigramMatrix::from_rows(&[vec![0.6, 0.5]]).is_err());
        assert!(UnigramMatrix::from_rows(&[vec![1.5, -0.5]]).is_err());
        assert!(UnigramMatrix::from_rows(&[vec![f64::NAN, 1.0]]).is_err());
    }

    #[test]
    fn uniform_is_valid() {
        let u = UnigramMatrix::uniform(4, 7);
        assert_eq!(u.seq_len(), 4);
        assert_eq!(u.vocab_len(), 7);
        UnigramMatrix::new(u.as_array().clone()).unwrap();
    }

    #[test]
    fn smoothing_keeps_rows_stochastic() {
        let u = UnigramMatrix::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap();
        let s = u.smoothed(1e-6);
        UnigramMatrix::new(s.as_array().clone()).unwrap();
        assert!(s.get(0, 1) > 0.0);
    }

    #[test]
    fn text_round_trip() {
        let u = UnigramMatrix::from_rows(&[
            vec![0.1, 0.7, 0.2, 0.0, 0.0],
            vec![0.3, 0.0, 0.1, 0.1, 0.5],
        ])
        .unwrap();
        let text = u.to_text();
        let back = UnigramMatrix::from_text(&text).unwrap();
        assert_eq!(back, u);
        assert_eq!(back.to_text(), text);
    }
}
