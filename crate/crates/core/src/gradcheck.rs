//! Finite-difference gradient verification.

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Relative error with the floor used throughout the verification suite:
/// |a - n| / max(|a|, |n|, 1e-8).
pub fn relative_error<F: Scalar>(a: F, n: F) -> F {
    let floor = F::from(1e-8).unwrap();
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

/// Compare reverse-mode gradients against central finite differences.
///
/// `build` reconstructs the forward computation from leaf vars on a fresh
/// graph and must return a scalar loss. Gradients are checked for every
/// input marked `requires_grad`; the returned value is the maximum relative
/// error over all checked coordinates.
pub fn grad_check<F, B>(build: B, inputs: &[Tensor<F>], eps: F) -> Result<F>
where
    F: Scalar,
    B: Fn(&mut Graph<F>, &[Var]) -> Result<Var>,
{
    let forward = |tensors: &[Tensor<F>]| -> Result<(Graph<F>, Vec<Var>, Var)> {
        let mut g = Graph::new();
        let vars: Vec<Var> = tensors.iter().map(|t| g.leaf(t.clone())).collect();
        let loss = build(&mut g, &vars)?;
        if !g.value(loss).is_scalar() {
            return Err(Error::NonScalarSeed {
                shape: g.value(loss).shape().to_vec(),
            });
        }
        Ok((g, vars, loss))
    };

    let (mut g, vars, loss) = forward(inputs)?;
    g.backward(loss)?;
    let analytic: Vec<Option<Vec<F>>> = vars
        .iter()
        .map(|&v| g.grad(v).map(|s| s.to_vec()))
        .collect();

    let eval = |tensors: &[Tensor<F>]| -> Result<F> {
        let (g, _, loss) = forward(tensors)?;
        Ok(g.value(loss).data()[0])
    };

    let mut max_rel = F::zero();
    let mut work: Vec<Tensor<F>> = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        if !input.requires_grad() {
            continue;
        }
        let analytic = analytic[i].as_ref().cloned().unwrap_or_else(|| {
            // gradient never reached this input: treated as all-zero
            vec![F::zero(); input.numel()]
        });
        for j in 0..input.numel() {
            let orig = work[i].data()[j];
            work[i].data_mut()[j] = orig + eps;
            let f_plus = eval(&work)?;
            work[i].data_mut()[j] = orig - eps;
            let f_minus = eval(&work)?;
            work[i].data_mut()[j] = orig;
            let numeric = (f_plus - f_minus) / (eps + eps);
            let rel = relative_error(analytic[j], numeric);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    Ok(max_rel)
}
