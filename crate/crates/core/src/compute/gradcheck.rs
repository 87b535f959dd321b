use super::{ComputeError, Tape, Tensor, Var};

/// Worst disagreement between tape gradients and central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// (parameter index, flat coordinate) of the worst entry.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
}

/// Compares `backward` against central differences with step `h` on every
/// coordinate of every parameter. `f` must build a scalar on the given tape
/// from the parameter handles and be deterministic.
///
/// Relative error uses the denominator `max(|analytic|, |numeric|, 1e-8)`.
pub fn check_gradients<E, F>(f: F, params: &[Tensor], h: f64) -> Result<GradCheckReport, E>
where
    E: From<ComputeError>,
    F: Fn(&mut Tape, &[Var]) -> Result<Var, E>,
{
    let eval = |ps: &[Tensor]| -> Result<f64, E> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.param(p.clone())).collect();
        let out = f(&mut tape, &vars)?;
        tape.value(out).item().ok_or_else(|| ComputeError::Grad("output is not scalar".into()).into())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let analytic = tape.backward(out)?.collect(&tape, &vars);

    let mut report =
        GradCheckReport { max_rel_error: 0.0, worst: (0, 0), analytic: 0.0, numeric: 0.0, coordinates: 0 };
    let mut work: Vec<Tensor> = params.to_vec();
    for (pi, p) in params.iter().enumerate() {
        for j in 0..p.len() {
            let x = p.data()[j];
            work[pi].data_mut()[j] = x + h;
            let up = eval(&work)?;
            work[pi].data_mut()[j] = x - h;
            let down = eval(&work)?;
            work[pi].data_mut()[j] = x;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[pi].data()[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            report.coordinates += 1;
            if rel > report.max_rel_error || !rel.is_finite() {
                report = GradCheckReport { max_rel_error: rel, worst: (pi, j), analytic: a, numeric, ..report };
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_form_is_exact() {
        let a = Tensor::matrix(2, 2, vec![2.0, 0.5, 0.5, 1.0]).unwrap();
        let x = Tensor::vector(vec![0.3, -1.2]);
        let report = check_gradients::<ComputeError, _>(
            |t, v| {
                let am = t.constant(a.clone());
                let ax = t.matmul(v[0], am)?;
                let xax = t.mul(ax, v[0])?;
                Ok(t.sum(xax))
            },
            &[x],
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-9, "{report:?}");
    }

    #[test]
    fn sigmoid_chain() {
        let report = check_gradients::<ComputeError, _>(
            |t, v| {
                let mut y = v[0];
                for _ in 0..5 {
                    y = t.sigmoid(y);
                }
                Ok(t.sum(y))
            },
            &[Tensor::vector(vec![0.4, -2.0, 1.5])],
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }

    #[test]
    fn corrupted_adjoint_is_caught() {
        // cube with a wrong derivative (2x^2 instead of 3x^2)
        let report = check_gradients::<ComputeError, _>(
            |t, v| {
                let y = t.elementwise(v[0], |x| (x * x * x, 2.0 * x * x));
                Ok(t.sum(y))
            },
            &[Tensor::vector(vec![0.7, -1.1])],
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_error > 1e-2);
    }
}
