use serde::{Deserialize, Serialize};

use super::scalar::Scalar;

/// Name, shape and location of one tensor inside a [`ParamStore`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// A dense tensor: shape plus flat row-major values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    pub shape: Vec<usize>,
    pub values: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    pub fn new(shape: Vec<usize>, values: Vec<F>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            values.len(),
            "tensor value count must equal the product of dims"
        );
        Self { shape, values }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            values: vec![F::zero(); n],
        }
    }
}

/// All learnable tensors of one network, stored contiguously.
///
/// A single flat buffer keeps the optimizer, checkpointing and gradient
/// checks independent of the layer structure.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<F> {
    pub values: Vec<F>,
    specs: Vec<TensorSpec>,
}

impl<F: Scalar> Default for ParamStore<F> {
    fn default() -> Self {
        Self {
            values: Vec::new(),
            specs: Vec::new(),
        }
    }
}

impl<F: Scalar> ParamStore<F> {
    /// Registers a zero-filled tensor and returns its spec.
    pub fn add(&mut self, name: &str, shape: &[usize]) -> TensorSpec {
        assert!(self.spec(name).is_none(), "duplicate tensor {name}");
        let spec = TensorSpec {
            name: name.to_string(),
            shape: shape.to_vec(),
            offset: self.values.len(),
        };
        self.values.resize(self.values.len() + spec.len(), F::zero());
        self.specs.push(spec.clone());
        spec
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn specs(&self) -> &[TensorSpec] {
        &self.specs
    }

    pub fn spec(&self, name: &str) -> Option<&TensorSpec> {
        self.specs.iter().find(|s| s.name == name)
    }

    pub fn get(&self, spec: &TensorSpec) -> &[F] {
        &self.values[spec.range()]
    }

    pub fn get_mut(&mut self, spec: &TensorSpec) -> &mut [F] {
        &mut self.values[spec.range()]
    }

    pub fn tensor(&self, name: &str) -> Option<Tensor<F>> {
        self.spec(name)
            .map(|s| Tensor::new(s.shape.clone(), self.get(s).to_vec()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn cast<G: Scalar>(&self) -> ParamStore<G> {
        ParamStore {
            values: self.values.iter().map(|v| G::of(v.as_f64())).collect(),
            specs: self.specs.clone(),
        }
    }
}
