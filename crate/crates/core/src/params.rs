//! Named parameter tensors, shared by the optimizer, checkpointing and
//! gradient checks.

use crate::tensor::Matrix;

pub type ParamVisitor<'a> = dyn FnMut(&str, &Matrix) + 'a;
pub type ParamVisitorMut<'a> = dyn FnMut(&str, &mut Matrix) + 'a;

/// A fixed, ordered collection of named tensors.
pub trait Parameters {
    fn visit(&self, f: &mut ParamVisitor<'_>);

    fn visit_mut(&mut self, f: &mut ParamVisitorMut<'_>);

    fn num_params(&self) -> usize {
        let mut total = 0;
        self.visit(&mut |_, m| total += m.len());
        total
    }

    fn names(&self) -> Vec<String> {
        let mut names = Vec::new();
        self.visit(&mut |name, _| names.push(name.to_owned()));
        names
    }

    fn sum_squares(&self) -> f64 {
        let mut total = 0.0;
        self.visit(&mut |_, m| total += m.sum_squares());
        total
    }

    fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |_, m| ok &= m.all_finite());
        ok
    }

    fn scale(&mut self, factor: f64) {
        self.visit_mut(&mut |_, m| m.scale(factor));
    }
}

/// Bias tensors are exempt from weight decay.
pub fn is_bias(name: &str) -> bool {
    name.ends_with("bias")
}
