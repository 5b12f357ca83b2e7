use ndarray::Array2;

use crate::scalar::Real;

/// Index of a parameter inside its [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A trainable tensor together with its gradient and Adam moments.
#[derive(Debug, Clone)]
pub struct Parameter<T: Real> {
    pub name: String,
    pub value: Array2<T>,
    pub grad: Array2<T>,
    pub moment1: Array2<T>,
    pub moment2: Array2<T>,
    pub step_count: u64,
}

impl<T: Real> Parameter<T> {
    pub fn new(name: impl Into<String>, value: Array2<T>) -> Self {
        let dim = value.raw_dim();
        Self {
            name: name.into(),
            value,
            grad: Array2::zeros(dim),
            moment1: Array2::zeros(dim),
            moment2: Array2::zeros(dim),
            step_count: 0,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.dim()
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }

    pub fn reset_optimizer_state(&mut self) {
        self.moment1.fill(T::zero());
        self.moment2.fill(T::zero());
        self.step_count = 0;
    }
}

/// Ordered collection of parameters. Order is the serialization order.
#[derive(Debug, Clone, Default)]
pub struct ParamStore<T: Real> {
    params: Vec<Parameter<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array2<T>) -> ParamId {
        self.params.push(Parameter::new(name, value));
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Array2<T> {
        &self.params[id.0].value
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.params.iter_mut()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Total number of scalar entries across all parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(Parameter::len).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(Parameter::zero_grad);
    }

    pub fn reset_optimizer_state(&mut self) {
        self.params
            .iter_mut()
            .for_each(Parameter::reset_optimizer_state);
    }

    /// Adds `grads` into the stored gradients (`+=`).
    pub fn accumulate(&mut self, grads: &Gradients<T>) {
        for (i, g) in grads.slots.iter().enumerate() {
            if let Some(g) = g {
                self.params[i].grad += g;
            }
        }
    }
}

/// Gradients produced by one backward pass, keyed by parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T: Real> {
    slots: Vec<Option<Array2<T>>>,
}

impl<T: Real> Gradients<T> {
    pub(crate) fn new(n_params: usize) -> Self {
        Self {
            slots: vec![None; n_params],
        }
    }

    pub(crate) fn add(&mut self, id: ParamId, g: Array2<T>) {
        match &mut self.slots[id.0] {
            Some(acc) => *acc += &g,
            slot => *slot = Some(g),
        }
    }

    /// `None` when the parameter did not participate in the graph.
    pub fn get(&self, id: ParamId) -> Option<&Array2<T>> {
        self.slots.get(id.0).and_then(Option::as_ref)
    }
}
