use super::{ParamStore, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl Adam {
    pub fn new(params: &ParamStore, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    /// One bias-corrected update in the direction of `-grads`.
    pub fn update(&mut self, params: &mut ParamStore, grads: &[Tensor]) {
        assert_eq!(grads.len(), params.len());
        self.step += 1;
        let t = self.step as f64;
        let c1 = 1.0 - self.beta1.powf(t);
        let c2 = 1.0 - self.beta2.powf(t);
        for (i, p) in params.tensors_mut().iter_mut().enumerate() {
            let (m, v) = (&mut self.m[i].data, &mut self.v[i].data);
            for (k, w) in p.data.iter_mut().enumerate() {
                let g = grads[i].data[k];
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g * g;
                *w -= self.lr * (m[k] / c1) / ((v[k] / c2).sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let mut p = ParamStore::new();
        p.insert("w", Tensor::row(vec![1.0, -2.0, 0.5]));
        let mut adam = Adam::new(&p, 0.01);
        let g = vec![Tensor::row(vec![3.0, -0.1, 0.0])];
        adam.update(&mut p, &g);
        let w = &p.tensors()[0].data;
        assert!((w[0] - 0.99).abs() < 1e-9);
        assert!((w[1] + 1.99).abs() < 1e-9);
        assert_eq!(w[2], 0.5);
    }

    #[test]
    fn minimises_quadratic() {
        let mut p = ParamStore::new();
        p.insert("w", Tensor::row(vec![4.0, -3.0]));
        let mut adam = Adam::new(&p, 0.05);
        for _ in 0..2000 {
            let g: Vec<f64> = p.tensors()[0].data.iter().map(|w| 2.0 * (w - 1.0)).collect();
            adam.update(&mut p, &[Tensor::row(g)]);
        }
        for w in &p.tensors()[0].data {
            assert!((w - 1.0).abs() < 1e-3);
        }
    }
}
