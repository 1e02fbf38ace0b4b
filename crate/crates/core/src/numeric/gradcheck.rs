use super::{NumericError, Tape, Tensor, Var};

/// Magnitude below which gradient entries are compared absolutely.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    /// `max |a − n| / max(|a|, |n|, 1e-6)` over every checked entry.
    pub max_rel_err: f64,
    /// (input index, flat entry index) of the worst entry.
    pub worst: (usize, usize),
    pub n_checked: usize,
    /// Entries whose `±h` evaluations changed the sign of some ReLU input
    /// relative to the unperturbed point. Their differences straddle a kink
    /// and say nothing about the derivative.
    pub kinks_crossed: usize,
}

/// Compares tape gradients of the scalar `f(inputs)` against central
/// differences with step `h`, entry by entry over all inputs.
pub fn gradient_check<F>(inputs: &[Tensor], h: f64, f: F) -> Result<GradCheck, NumericError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, NumericError>,
{
    let eval = |xs: &[Tensor]| -> Result<(f64, u64), NumericError> {
        let mut tape = Tape::new();
        let vars = xs.iter().map(|x| tape.constant(x.clone())).collect::<Result<Vec<_>, _>>()?;
        let loss = f(&mut tape, &vars)?;
        Ok((tape.value(loss)?.item(), tape.relu_signs()))
    };
    let mut tape = Tape::new();
    let vars = inputs.iter().map(|x| tape.param(x.clone())).collect::<Result<Vec<_>, _>>()?;
    let loss = f(&mut tape, &vars)?;
    tape.backward(loss)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, x)| Ok(tape.grad(v)?.cloned().unwrap_or_else(|| Tensor::zeros(x.rows(), x.cols()))))
        .collect::<Result<_, NumericError>>()?;

    let mut work = inputs.to_vec();
    let signs = tape.relu_signs();
    let mut report = GradCheck { max_rel_err: 0.0, worst: (0, 0), n_checked: 0, kinks_crossed: 0 };
    for (i, a) in analytic.iter().enumerate() {
        for j in 0..a.len() {
            let orig = work[i].data()[j];
            work[i].data_mut()[j] = orig + h;
            let (up, s_up) = eval(&work)?;
            work[i].data_mut()[j] = orig - h;
            let (down, s_down) = eval(&work)?;
            report.kinks_crossed += usize::from(s_up != signs || s_down != signs);
            work[i].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let an = a.data()[j];
            let err = (an - numeric).abs() / an.abs().max(numeric.abs()).max(REL_FLOOR);
            if err > report.max_rel_err || report.n_checked == 0 {
                report.max_rel_err = err;
                report.worst = (i, j);
            }
            report.n_checked += 1;
        }
    }
    Ok(report)
}
