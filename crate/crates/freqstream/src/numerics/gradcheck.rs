use crate::error::{Error, Result};
use crate::numerics::graph::{Graph, NodeId};
use crate::numerics::tensor::Tensor;

/// Compare the tape's analytic gradient of a scalar-valued function
/// against central finite differences.
///
/// `build` receives a fresh graph and one leaf per input tensor and must
/// return the scalar output node. Returns the maximum over all components
/// of `|analytic - numeric| / max(1, |analytic|, |numeric|)`.
pub fn grad_check<F>(build: F, inputs: &[Tensor], eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::InvalidArgument(format!(
            "grad_check eps must lie in [1e-7, 1e-3], got {}",
            eps
        )));
    }

    let eval = |xs: &[Tensor], with_grad: bool| -> Result<(f64, Option<Vec<Vec<f64>>>)> {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = xs
            .iter()
            .map(|t| g.leaf(t))
            .collect::<Result<_>>()?;
        let out = build(&mut g, &ids)?;
        let (r, c) = g.shape(out);
        if r * c != 1 {
            return Err(Error::InvalidArgument(format!(
                "grad_check requires a scalar function, got {}x{}",
                r, c
            )));
        }
        let value = g.value(out)[0];
        if !value.is_finite() {
            return Err(Error::NonFinite("grad_check: function value".into()));
        }
        if with_grad {
            g.backward(out)?;
            let grads = ids.iter().map(|&id| g.grad(id).to_vec()).collect();
            Ok((value, Some(grads)))
        } else {
            Ok((value, None))
        }
    };

    let (_, analytic) = eval(inputs, true)?;
    let analytic = analytic.unwrap();

    let mut probe: Vec<Tensor> = inputs.to_vec();
    let mut max_err = 0.0f64;
    for (ti, t) in inputs.iter().enumerate() {
        for j in 0..t.numel() {
            let orig = probe[ti].data[j];
            probe[ti].data[j] = orig + eps;
            let (fp, _) = eval(&probe, false)?;
            probe[ti].data[j] = orig - eps;
            let (fm, _) = eval(&probe, false)?;
            probe[ti].data[j] = orig;
            let numeric = (fp - fm) / (2.0 * eps);
            if !numeric.is_finite() {
                return Err(Error::NonFinite(format!(
                    "grad_check: finite difference at tensor {}, component {}",
                    ti, j
                )));
            }
            let a = analytic[ti][j];
            let err = (a - numeric).abs() / 1.0f64.max(a.abs()).max(numeric.abs());
            if err > max_err {
                max_err = err;
            }
        }
    }
    Ok(max_err)
}
