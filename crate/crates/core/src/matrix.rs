use serde::{Deserialize, Serialize};

use crate::error::{usage, Result, TikError};

/// Dense row-major matrix of finite observations (n rows, p columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    n: usize,
    p: usize,
    data: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    names: Option<Vec<String>>,
}

impl DataMatrix {
    pub fn new(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(usage(format!("matrix must be non-empty, got {n}x{p}")));
        }
        if data.len() != n * p {
            return Err(usage(format!(
                "matrix of shape {n}x{p} needs {} values, got {}",
                n * p,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(TikError::Domain(format!(
                "non-finite entry {} at row {}, column {}",
                data[pos],
                pos / p,
                pos % p
            )));
        }
        Ok(Self {
            n,
            p,
            data,
            names: None,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(n * p);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != p {
                return Err(usage(format!(
                    "ragged rows: row {i} has {} values, expected {p}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(n, p, data)
    }

    /// Attach column names; the count must match the number of columns.
    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p {
            return Err(usage(format!(
                "{} column names for {} columns",
                names.len(),
                self.p
            )));
        }
        self.names = Some(names);
        Ok(self)
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.p + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.p)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// Column names, falling back to `x1..xp`.
    pub fn names_or_default(&self) -> Vec<String> {
        match &self.names {
            Some(names) => names.clone(),
            None => (1..=self.p).map(|j| format!("x{j}")).collect(),
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(|r| r.to_vec()).collect()
    }

    /// Build a matrix of the same shape by mapping every cell `(i, j, value)`.
    /// Fails if the mapping produces a non-finite value.
    pub fn map_cells<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize, f64) -> Result<f64>,
    {
        let mut data = Vec::with_capacity(self.data.len());
        for (idx, &v) in self.data.iter().enumerate() {
            data.push(f(idx / self.p, idx % self.p, v)?);
        }
        let mut out = Self::new(self.n, self.p, data)?;
        out.names = self.names.clone();
        Ok(out)
    }
}
