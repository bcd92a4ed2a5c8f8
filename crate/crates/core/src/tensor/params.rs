use crate::error::{Error, Result};

use super::{Gradients, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
struct Entry {
    name: String,
    tensor: Tensor,
    trainable: bool,
}

/// Named model parameters, in registration order.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: Vec<Entry>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        self.add_with(name, tensor, true)
    }

    pub fn add_with(&mut self, name: impl Into<String>, tensor: Tensor, trainable: bool) -> ParamId {
        self.entries.push(Entry {
            name: name.into(),
            tensor,
            trainable,
        });
        ParamId(self.entries.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].tensor
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].tensor
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.entries[id.0].trainable
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.entries[id.0].trainable = trainable;
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    /// Replaces the values of `id`, keeping its shape.
    pub fn set_values(&mut self, id: ParamId, values: &[f64]) -> Result<()> {
        let t = &mut self.entries[id.0].tensor;
        if values.len() != t.len() {
            return Err(Error::ShapeMismatch {
                op: "set_values",
                left: t.shape().to_vec(),
                right: vec![values.len()],
            });
        }
        t.data_mut().copy_from_slice(values);
        Ok(())
    }

    pub fn num_values(&self) -> usize {
        self.entries.iter().map(|e| e.tensor.len()).sum()
    }
}

/// Lazily binds store parameters onto one tape, at most once each.
pub struct Binder<'s> {
    store: &'s ParamStore,
    bound: Vec<Option<Var>>,
}

impl<'s> Binder<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Binder {
            store,
            bound: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    /// Tape handle for `id`; trainable parameters are gradient-tracked.
    pub fn var(&mut self, tape: &mut Tape, id: ParamId) -> Var {
        if let Some(v) = self.bound[id.0] {
            return v;
        }
        let t = self.store.get(id);
        let v = if self.store.is_trainable(id) {
            tape.param(t)
        } else {
            tape.constant(t)
        };
        self.bound[id.0] = Some(v);
        v
    }

    /// One row of a matrix parameter. Frozen matrices are not copied whole
    /// onto the tape; only the requested row is recorded, as a constant.
    pub fn row(&mut self, tape: &mut Tape, id: ParamId, row: usize) -> Result<Var> {
        if self.store.is_trainable(id) {
            let m = self.var(tape, id);
            tape.row(m, row)
        } else {
            let t = self.store.get(id);
            if t.shape().len() != 2 || row >= t.shape()[0] {
                return Err(Error::ShapeMismatch {
                    op: "row",
                    left: t.shape().to_vec(),
                    right: vec![row],
                });
            }
            tape.constant_vec(t.row(row).to_vec())
        }
    }

    /// Gradients of bound trainable parameters, added into `buffer`.
    pub fn accumulate(&self, grads: &Gradients, buffer: &mut GradBuffer) {
        for (i, slot) in self.bound.iter().enumerate() {
            if let Some(v) = slot {
                if let Some(g) = grads.get(*v) {
                    buffer.grads[i].iter_mut().zip(g).for_each(|(d, s)| *d += s);
                }
            }
        }
    }
}

/// Flat per-parameter gradient accumulator matching a [`ParamStore`].
/// Frozen parameters get an empty slot.
#[derive(Debug, Clone, PartialEq)]
pub struct GradBuffer {
    grads: Vec<Vec<f64>>,
}

impl GradBuffer {
    pub fn zeros_like(store: &ParamStore) -> Self {
        GradBuffer {
            grads: store
                .entries
                .iter()
                .map(|e| vec![0.0; if e.trainable { e.tensor.len() } else { 0 }])
                .collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.grads[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.grads[id.0]
    }

    pub fn add(&mut self, other: &GradBuffer) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            a.iter_mut().zip(b).for_each(|(d, s)| *d += s);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.grads.iter_mut().flatten().for_each(|v| *v *= factor);
    }

    pub fn global_norm(&self) -> f64 {
        self.grads.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Rescales so the global L2 norm is at most `max_norm`. Returns the
    /// norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
        norm
    }

    pub fn is_finite(&self) -> bool {
        self.grads.iter().flatten().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binder_binds_once_and_collects_gradients() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::vector(vec![1.0, 2.0]).unwrap());
        let frozen = store.add_with("f", Tensor::vector(vec![3.0, 4.0]).unwrap(), false);
        let mut tape = Tape::new();
        let mut binder = Binder::new(&store);
        let a = binder.var(&mut tape, w);
        let b = binder.var(&mut tape, w);
        assert_eq!(a, b);
        let f = binder.var(&mut tape, frozen);
        let d = tape.dot(a, f).unwrap();
        let grads = tape.backward(d).unwrap();
        let mut buf = GradBuffer::zeros_like(&store);
        binder.accumulate(&grads, &mut buf);
        assert_eq!(buf.get(w), &[3.0, 4.0]);
        assert!(buf.get(frozen).is_empty());
    }

    #[test]
    fn clipping_bounds_global_norm() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::vector(vec![0.0, 0.0]).unwrap());
        let mut buf = GradBuffer::zeros_like(&store);
        buf.get_mut(w).copy_from_slice(&[30.0, 40.0]);
        let before = buf.clip_global_norm(5.0);
        assert_eq!(before, 50.0);
        assert!((buf.global_norm() - 5.0).abs() < 1e-12);
        assert!((buf.get(w)[0] - 3.0).abs() < 1e-12);
    }
}
