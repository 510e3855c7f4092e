use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::Parameters;
use crate::error::{Error, Result};

/// Affine layer computing `x · w + b` on row-major batches.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `fan_in × fan_out`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            w: Array2::zeros((fan_in, fan_out)),
            b: Array1::zeros(fan_out),
        }
    }

    /// Uniform in `[-a, a]` with `a = sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn init<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let a = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
        let dist = Uniform::new_inclusive(-a, a).expect("finite bound");
        let w = Array2::from_shape_simple_fn((fan_in, fan_out), || dist.sample(rng));
        Self {
            w,
            b: Array1::zeros(fan_out),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.w.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.w.ncols()
    }
}

/// Multi-layer perceptron with ReLU between layers and no activation on the
/// output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Values saved by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input to each layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of every hidden layer (all but the last).
    pre: Vec<Array2<f64>>,
}

impl MlpCache {
    /// Smallest absolute hidden pre-activation seen, or infinity for a
    /// single-layer net.
    pub fn min_abs_preactivation(&self) -> f64 {
        self.pre
            .iter()
            .flat_map(|z| z.iter())
            .fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least input and output dims");
        let layers = dims.windows(2).map(|w| Dense::init(w[0], w[1], rng)).collect();
        Self { layers }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least input and output dims");
        let layers = dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Self { layers }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.dims())
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.in_dim()];
        dims.extend(self.layers.iter().map(Dense::fan_out));
        dims
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().fan_out()
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, MlpCache)> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut a = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = a.dot(&layer.w) + &layer.b;
            inputs.push(a);
            if l == last {
                return Ok((z, MlpCache { inputs, pre }));
            }
            a = z.mapv(relu);
            pre.push(z);
        }
        unreachable!("loop returns on the last layer")
    }

    /// Forward pass without keeping activations.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut a = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = a.dot(&layer.w) + &layer.b;
            a = if l == last { z } else { z.mapv(relu) };
        }
        Ok(a)
    }

    /// Gradient of the cached forward computation given `d_out = dL/d(output)`.
    /// Returns `dL/dx` and the parameter gradients.
    ///
    /// The ReLU subgradient at exactly 0 is 0.
    pub fn backward(&self, cache: &MlpCache, d_out: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Mlp)> {
        let batch = cache.inputs[0].nrows();
        if d_out.dim() != (batch, self.out_dim()) {
            return Err(Error::Shape(format!(
                "backward expected d_out of shape ({batch}, {}), got {:?}",
                self.out_dim(),
                d_out.dim()
            )));
        }
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        let mut dz = d_out.to_owned();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let w = cache.inputs[l].t().dot(&dz);
            let b = dz.sum_axis(Axis(0));
            let da = dz.dot(&layer.w.t());
            grads.push(Dense { w, b });
            if l == 0 {
                grads.reverse();
                return Ok((da, Mlp { layers: grads }));
            }
            dz = da;
            dz.zip_mut_with(&cache.pre[l - 1], |g, &z| {
                if z <= 0.0 {
                    *g = 0.0;
                }
            });
        }
        unreachable!("loop returns on the first layer")
    }

    fn check_input(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.in_dim() {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.in_dim()
            )));
        }
        Ok(())
    }
}

impl Parameters for Mlp {
    fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    l.w.as_slice().expect("standard layout"),
                    l.b.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.w.as_slice_mut().expect("standard layout"),
                    l.b.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }
}

#[inline]
fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Straightforward per-row re-evaluation used as an independent reference.
    fn naive_forward(m: &Mlp, x: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), m.out_dim()));
        for r in 0..x.nrows() {
            let mut a: Vec<f64> = x.row(r).to_vec();
            for (l, layer) in m.layers.iter().enumerate() {
                let mut z = vec![0.0; layer.fan_out()];
                for (o, zo) in z.iter_mut().enumerate() {
                    *zo = layer.b[o];
                    for (i, ai) in a.iter().enumerate() {
                        *zo += ai * layer.w[[i, o]];
                    }
                }
                if l + 1 < m.layers.len() {
                    z.iter_mut().for_each(|v| *v = v.max(0.0));
                }
                a = z;
            }
            for (o, v) in a.into_iter().enumerate() {
                out[[r, o]] = v;
            }
        }
        out
    }

    #[test]
    fn identity_layer() {
        let mut m = Mlp::zeros(&[2, 2]);
        m.layers[0].w = Array2::eye(2);
        let (y, _) = m.forward(array![[1.0, -1.0]].view()).unwrap();
        assert_eq!(y, array![[1.0, -1.0]]);
    }

    #[test]
    fn zero_weights_give_bias() {
        let mut m = Mlp::zeros(&[3, 2]);
        m.layers[0].b = array![0.5, -2.0];
        let (y, _) = m.forward(array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]].view()).unwrap();
        assert_eq!(y, array![[0.5, -2.0], [0.5, -2.0]]);
    }

    #[test]
    fn matches_naive_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = Mlp::new(&[4, 3, 2], &mut rng);
        let x = Array2::from_shape_fn((5, 4), |(i, j)| ((i * 4 + j) as f64 * 0.37).sin());
        let (y, _) = m.forward(x.view()).unwrap();
        let reference = naive_forward(&m, &x);
        for (a, b) in y.iter().zip(reference.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(m.predict(x.view()).unwrap(), y);
    }

    #[test]
    fn linear_backward_is_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Mlp::new(&[3, 2], &mut rng);
        let x = array![[1.0, 2.0, 3.0]];
        let (_, cache) = m.forward(x.view()).unwrap();
        let (dx, g) = m.backward(&cache, array![[1.0, 0.0]].view()).unwrap();
        assert_eq!(g.layers[0].w, array![[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]);
        assert_eq!(g.layers[0].b, array![1.0, 0.0]);
        assert_eq!(dx, m.layers[0].w.column(0).insert_axis(Axis(0)));
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let mut m = Mlp::zeros(&[1, 1, 1]);
        m.layers[0].w[[0, 0]] = 1.0;
        m.layers[1].w[[0, 0]] = 1.0;
        let (_, cache) = m.forward(array![[0.0]].view()).unwrap();
        let (dx, g) = m.backward(&cache, array![[1.0]].view()).unwrap();
        assert_eq!(dx[[0, 0]], 0.0);
        assert_eq!(g.layers[0].w[[0, 0]], 0.0);
        assert_eq!(g.layers[0].b[0], 0.0);
    }

    #[test]
    fn dim_mismatch() {
        let m = Mlp::zeros(&[3, 2]);
        assert!(matches!(
            m.forward(array![[1.0, 2.0]].view()),
            Err(Error::Shape(_))
        ));
        let (_, cache) = m.forward(array![[1.0, 2.0, 3.0]].view()).unwrap();
        assert!(matches!(
            m.backward(&cache, array![[1.0, 2.0, 3.0]].view()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn init_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Mlp::new(&[10, 6], &mut rng);
        let a = (6.0f64 / 16.0).sqrt();
        assert!(m.layers[0].w.iter().all(|v| v.abs() <= a));
        assert!(m.layers[0].b.iter().all(|&v| v == 0.0));
    }
}
