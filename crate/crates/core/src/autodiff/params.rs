use std::collections::HashMap;
use std::sync::Arc;

use super::tape::{Gradients, Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub usize);

#[derive(Clone, Debug, PartialEq)]
pub struct BlockSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl BlockSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Named, ordered parameter blocks packed into one flat array.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Layout {
    blocks: Vec<BlockSpec>,
    by_name: HashMap<String, usize>,
    total: usize,
}

impl Layout {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> BlockId {
        let name = name.into();
        assert!(!self.by_name.contains_key(&name), "duplicate block {name}");
        let id = self.blocks.len();
        self.by_name.insert(name.clone(), id);
        self.blocks.push(BlockSpec {
            name,
            rows,
            cols,
            offset: self.total,
        });
        self.total += rows * cols;
        BlockId(id)
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    pub fn block(&self, id: BlockId) -> &BlockSpec {
        &self.blocks[id.0]
    }

    pub fn find(&self, name: &str) -> Option<BlockId> {
        self.by_name.get(name).copied().map(BlockId)
    }
}

/// Flat parameter storage with a shared layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    layout: Arc<Layout>,
    data: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(layout: Arc<Layout>) -> Self {
        let n = layout.total();
        Self {
            layout,
            data: vec![0.0; n],
        }
    }

    pub fn from_vec(layout: Arc<Layout>, data: Vec<f64>) -> Result<Self> {
        if data.len() != layout.total() {
            return Err(Error::config(format!(
                "parameter vector has {} entries, layout expects {}",
                data.len(),
                layout.total()
            )));
        }
        Ok(Self { layout, data })
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn block(&self, id: BlockId) -> &[f64] {
        &self.data[self.layout.block(id).range()]
    }

    pub fn block_mut(&mut self, id: BlockId) -> &mut [f64] {
        let r = self.layout.block(id).range();
        &mut self.data[r]
    }

    pub fn tensor(&self, id: BlockId) -> Tensor {
        let b = self.layout.block(id);
        Tensor::from_vec(b.rows, b.cols, self.block(id).to_vec())
    }

    /// Split into one tensor per block, in layout order.
    pub fn unpack(&self) -> Vec<Tensor> {
        (0..self.layout.blocks().len())
            .map(|i| self.tensor(BlockId(i)))
            .collect()
    }

    pub fn pack(layout: Arc<Layout>, blocks: &[Tensor]) -> Result<Self> {
        if blocks.len() != layout.blocks().len() {
            return Err(Error::config("block count does not match layout"));
        }
        let mut data = Vec::with_capacity(layout.total());
        for (spec, t) in layout.blocks().iter().zip(blocks) {
            if t.shape() != (spec.rows, spec.cols) {
                return Err(Error::config(format!(
                    "block {} has shape {:?}, expected {}x{}",
                    spec.name,
                    t.shape(),
                    spec.rows,
                    spec.cols
                )));
            }
            data.extend_from_slice(t.data());
        }
        Self::from_vec(layout, data)
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `self += c · other`.
    pub fn axpy(&mut self, c: f64, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// FNV-1a over the raw bit patterns.
    pub fn checksum(&self) -> u64 {
        crate::io::fnv1a64(self.data.iter().flat_map(|v| v.to_le_bytes()))
    }
}

/// Lazily places parameter blocks on a tape and collects their adjoints.
pub struct Binder<'p> {
    params: &'p ParamVector,
    vars: Vec<Option<Var>>,
    trainable: Vec<bool>,
}

impl<'p> Binder<'p> {
    /// Every block is differentiable.
    pub fn new(params: &'p ParamVector) -> Self {
        let n = params.layout().blocks().len();
        Self {
            params,
            vars: vec![None; n],
            trainable: vec![true; n],
        }
    }

    /// Only the listed blocks are differentiable; the rest enter as constants.
    pub fn with_trainable(params: &'p ParamVector, trainable: &[BlockId]) -> Self {
        let mut b = Self::new(params);
        b.trainable.iter_mut().for_each(|t| *t = false);
        for id in trainable {
            b.trainable[id.0] = true;
        }
        b
    }

    pub fn params(&self) -> &'p ParamVector {
        self.params
    }

    pub fn var(&mut self, tape: &mut Tape, id: BlockId) -> Var {
        if let Some(v) = self.vars[id.0] {
            return v;
        }
        let t = self.params.tensor(id);
        let v = if self.trainable[id.0] {
            tape.param(t)
        } else {
            tape.constant(t)
        };
        self.vars[id.0] = Some(v);
        v
    }

    /// Flat gradient in the parameter layout; unbound blocks are zero.
    pub fn collect(&self, grads: &Gradients) -> ParamVector {
        let mut out = ParamVector::zeros(self.params.layout().clone());
        for (i, v) in self.vars.iter().enumerate() {
            if let Some(g) = v.and_then(|v| grads.get(v)) {
                out.block_mut(BlockId(i)).copy_from_slice(g.data());
            }
        }
        out
    }
}
