//! Central finite-difference checks for analytic gradients.

use crate::error::Result;

use super::model::Model;

pub const DEFAULT_STEP: f64 = 1e-5;

/// Gradients below this magnitude are compared absolutely; central
/// differences carry roughly `eps * |L| / h` of rounding noise.
pub const ABS_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ABS_FLOOR)
}

/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate.
pub fn numeric_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// Worst error over every compared parameter.
    pub params: f64,
    /// Worst error over the compared input coordinates.
    pub inputs: f64,
    pub checked: usize,
    /// Coordinates whose `±h` stencil crossed a ReLU kink or changed a pooling
    /// winner; the difference quotient there does not estimate the derivative.
    pub skipped: usize,
}

impl GradCheck {
    pub fn worst(&self) -> f64 {
        self.params.max(self.inputs)
    }
}

/// Compares backprop against central differences of `L = upstream . model(x)`
/// for every parameter and every input coordinate. Coordinates whose stencil
/// leaves the linear region of the base point are counted in `skipped`.
pub fn check_model(model: &Model, input: &[f64], upstream: &[f64], h: f64) -> Result<GradCheck> {
    let mut m = model.clone();
    m.forward(input)?;
    let mut grads = m.zero_gradients();
    let input_grad = m.backward_accumulate(upstream, &mut grads)?;
    let (_, base) = m.predict_with_signature(input)?;
    // objective and whether the probe stayed in the base point's region
    let probe = |m: &Model, x: &[f64]| -> (f64, bool) {
        let (y, sig) = m.predict_with_signature(x).expect("shapes checked by the analytic pass");
        let same = sig == base;
        (y.iter().zip(upstream).map(|(a, b)| a * b).sum(), same)
    };

    let (mut worst_param, mut worst_input): (f64, f64) = (0.0, 0.0);
    let (mut checked, mut skipped) = (0, 0);
    for (t, g) in grads.tensors.iter().enumerate() {
        for (j, &analytic) in g.iter().enumerate() {
            let orig = m.params()[t][j];
            m.params_mut()[t][j] = orig + h;
            let (up, up_same) = probe(&m, input);
            m.params_mut()[t][j] = orig - h;
            let (down, down_same) = probe(&m, input);
            m.params_mut()[t][j] = orig;
            if up_same && down_same {
                worst_param = worst_param.max(relative_error(analytic, (up - down) / (2.0 * h)));
                checked += 1;
            } else {
                skipped += 1;
            }
        }
    }
    let mut x = input.to_vec();
    for (i, &analytic) in input_grad.iter().enumerate() {
        x[i] = input[i] + h;
        let (up, up_same) = probe(&m, &x);
        x[i] = input[i] - h;
        let (down, down_same) = probe(&m, &x);
        x[i] = input[i];
        if up_same && down_same {
            worst_input = worst_input.max(relative_error(analytic, (up - down) / (2.0 * h)));
            checked += 1;
        } else {
            skipped += 1;
        }
    }
    Ok(GradCheck {
        params: worst_param,
        inputs: worst_input,
        checked,
        skipped,
    })
}
