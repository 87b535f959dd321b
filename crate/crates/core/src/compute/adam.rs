use super::{ComputeError, Tensor};

/// Bias-corrected Adam moments for a list of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    /// Updates refused because of a non-finite gradient.
    pub skipped: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &[Tensor], lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            skipped: 0,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }
}

/// One Adam descent step. A non-finite gradient leaves everything but the
/// `skipped` counter untouched.
pub fn adam_step(params: &mut [Tensor], grads: &[Tensor], state: &mut AdamState) -> Result<(), ComputeError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(ComputeError::Shape(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
        if p.shape() != g.shape() || p.shape() != m.shape() {
            return Err(ComputeError::Shape(format!("adam: {:?} vs {:?}", p.shape(), g.shape())));
        }
    }
    if !grads.iter().all(Tensor::is_finite) {
        state.skipped += 1;
        return Err(ComputeError::NonFiniteGradient);
    }
    state.step += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for i in 0..params.len() {
        let g = grads[i].data();
        let m = state.m[i].data_mut();
        for (mj, &gj) in m.iter_mut().zip(g) {
            *mj = b1 * *mj + (1.0 - b1) * gj;
        }
        let v = state.v[i].data_mut();
        for (vj, &gj) in v.iter_mut().zip(g) {
            *vj = b2 * *vj + (1.0 - b2) * gj * gj;
        }
        let (m, v) = (state.m[i].data(), state.v[i].data());
        for (j, p) in params[i].data_mut().iter_mut().enumerate() {
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            *p -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}

/// Rescales `grads` in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = grads.iter().map(Tensor::squared_norm).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            g.data_mut().iter_mut().for_each(|x| *x *= s);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = vec![Tensor::vector(vec![1.0, -2.0])];
        let mut st = AdamState::new(&p, 3e-4);
        adam_step(&mut p, &[Tensor::zeros(&[2])], &mut st).unwrap();
        assert_eq!(p[0].data(), &[1.0, -2.0]);
    }

    #[test]
    fn first_step_magnitude_is_lr() {
        let mut p = vec![Tensor::scalar(0.0)];
        let mut st = AdamState::new(&p, 3e-4);
        adam_step(&mut p, &[Tensor::scalar(0.2)], &mut st).unwrap();
        let expected = 3e-4 * 0.2 / (0.2 + 1e-8);
        assert!((p[0].data()[0] + expected).abs() < 1e-15);
    }

    #[test]
    fn constant_gradient_does_not_grow_updates() {
        let mut p = vec![Tensor::scalar(0.0)];
        let mut st = AdamState::new(&p, 3e-4);
        let g = [Tensor::scalar(0.2)];
        adam_step(&mut p, &g, &mut st).unwrap();
        let first = p[0].data()[0].abs();
        adam_step(&mut p, &g, &mut st).unwrap();
        let second = (p[0].data()[0].abs() - first).abs();
        assert!(second <= first + 1e-12);
    }

    #[test]
    fn zero_lr_is_identity() {
        let mut p = vec![Tensor::vector(vec![0.3, 0.7])];
        let mut st = AdamState::new(&p, 0.0);
        for _ in 0..5 {
            adam_step(&mut p, &[Tensor::vector(vec![1.0, -4.0])], &mut st).unwrap();
        }
        assert_eq!(p[0].data(), &[0.3, 0.7]);
    }

    #[test]
    fn non_finite_gradient_is_skipped() {
        let mut p = vec![Tensor::scalar(1.0)];
        let mut st = AdamState::new(&p, 0.1);
        let err = adam_step(&mut p, &[Tensor::scalar(f64::NAN)], &mut st).unwrap_err();
        assert_eq!(err, ComputeError::NonFiniteGradient);
        assert_eq!((st.step, st.skipped), (0, 1));
        assert_eq!(p[0].data(), &[1.0]);
    }

    #[test]
    fn clipping() {
        let mut g = vec![Tensor::vector(vec![3.0, 4.0])];
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        assert!((g[0].squared_norm() - 1.0).abs() < 1e-12);
    }
}
