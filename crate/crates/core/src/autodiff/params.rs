//! Flat parameter vectors and their layouts.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::mat::Mat;
use crate::error::{Error, Result};

/// What a block of a flat parameter vector holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Weight,
    Bias,
    LoraA,
    LoraB,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub layer: usize,
    pub kind: BlockKind,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl LayoutEntry {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Ordered list of row-major blocks.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    entries: Vec<LayoutEntry>,
}

impl ParamLayout {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, layer: usize, kind: BlockKind, rows: usize, cols: usize) {
        let offset = self.len();
        self.entries.push(LayoutEntry {
            layer,
            kind,
            rows,
            cols,
            offset,
        });
    }

    pub fn entries(&self) -> &[LayoutEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.last().map_or(0, |e| e.offset + e.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Splits a flat slice into matrices, one per block.
    pub fn unflatten(&self, values: &[f64]) -> Result<Vec<Mat>> {
        if values.len() != self.len() {
            return Err(Error::Shape {
                context: "parameter vector length",
                expected: self.len(),
                found: values.len(),
                offset: Some(values.len().min(self.len())),
            });
        }
        Ok(self
            .entries
            .iter()
            .map(|e| Mat::from_vec(e.rows, e.cols, values[e.offset..e.offset + e.len()].to_vec()))
            .collect())
    }

    /// Concatenates blocks in layout order.
    pub fn flatten(&self, blocks: &[&Mat]) -> Result<Vec<f64>> {
        if blocks.len() != self.entries.len() {
            return Err(Error::Shape {
                context: "parameter block count",
                expected: self.entries.len(),
                found: blocks.len(),
                offset: None,
            });
        }
        let mut out = Vec::with_capacity(self.len());
        for (e, b) in self.entries.iter().zip(blocks) {
            if b.shape() != (e.rows, e.cols) {
                return Err(Error::Shape {
                    context: "parameter block shape",
                    expected: e.len(),
                    found: b.len(),
                    offset: Some(e.offset),
                });
            }
            out.extend_from_slice(b.as_slice());
        }
        Ok(out)
    }

    /// Offset of the first entry where `self` and `other` disagree.
    pub fn first_mismatch(&self, other: &ParamLayout) -> Option<usize> {
        for (a, b) in self.entries.iter().zip(&other.entries) {
            if a != b {
                return Some(a.offset.min(b.offset));
            }
        }
        if self.entries.len() != other.entries.len() {
            return Some(self.len().min(other.len()));
        }
        None
    }
}

/// All trainable scalars of a network in canonical order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub layout: ParamLayout,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, layout: ParamLayout) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::Shape {
                context: "parameter vector length",
                expected: layout.len(),
                found: values.len(),
                offset: Some(values.len().min(layout.len())),
            });
        }
        Ok(Self { values, layout })
    }

    pub fn zeros(layout: ParamLayout) -> Self {
        Self {
            values: alloc::vec![0.0; layout.len()],
            layout,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn blocks(&self) -> Vec<Mat> {
        self.layout
            .unflatten(&self.values)
            .expect("ParamVector invariant: values match layout")
    }

    /// Checks that this vector was laid out as `expected`.
    pub fn expect_layout(&self, expected: &ParamLayout) -> Result<()> {
        match expected.first_mismatch(&self.layout) {
            None => Ok(()),
            Some(offset) => Err(Error::Shape {
                context: "parameter layout",
                expected: expected.len(),
                found: self.layout.len(),
                offset: Some(offset),
            }),
        }
    }
}
