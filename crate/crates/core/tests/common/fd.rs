//! Central finite differences against tape gradients.

use jtvae::tensor::{ParamStore, Tape, Tensor, Var};

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
/// Gradients smaller than this are compared relative to it, which bounds
/// the absolute error by `TOLERANCE * FLOOR` where round-off dominates.
pub const FLOOR: f64 = 1e-5;
/// Entries checked per parameter matrix, spread evenly over it.
pub const ENTRIES: usize = 12;

#[derive(Debug, Clone)]
pub struct GradCheck {
    pub checked: usize,
    pub worst: f64,
    pub worst_at: String,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.worst <= TOLERANCE
    }
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

fn picks(len: usize) -> Vec<usize> {
    if len <= ENTRIES {
        (0..len).collect()
    } else {
        (0..ENTRIES)
            .map(|k| k * len / ENTRIES + (k % 3))
            .map(|i| i.min(len - 1))
            .collect()
    }
}

/// Checks the scalar `f(tape, x)` against central differences, both for
/// the named parameters and for every entry of the input row `x`.
pub fn check(
    store: &ParamStore,
    names: &[&str],
    input: &[f64],
    f: impl Fn(&mut Tape, Var) -> Var,
) -> GradCheck {
    let eval = |s: &ParamStore, x: &[f64]| {
        let mut tape = Tape::new(s);
        let xv = tape.input(Tensor::row(x.to_vec()));
        let out = f(&mut tape, xv);
        tape.scalar(out)
    };
    let mut tape = Tape::new(store);
    let xv = tape.input(Tensor::row(input.to_vec()));
    let out = f(&mut tape, xv);
    let grads = tape.backward(out).expect("scalar output");

    let mut report = GradCheck {
        checked: 0,
        worst: 0.0,
        worst_at: String::new(),
    };
    let mut record = |what: String, analytic: f64, numeric: f64| {
        let e = rel_err(analytic, numeric);
        report.checked += 1;
        if e > report.worst || report.worst_at.is_empty() {
            report.worst = e;
            report.worst_at = format!("{what}: analytic {analytic:e} numeric {numeric:e}");
        }
    };

    for name in names {
        let id = store
            .id(name)
            .unwrap_or_else(|| panic!("no parameter {name}"));
        let len = store.value(id).data.len();
        for k in picks(len) {
            let analytic = grads.param(id).map_or(0.0, |g| g.data[k]);
            let mut plus = store.clone();
            plus.get_mut(id).value.data[k] += STEP;
            let mut minus = store.clone();
            minus.get_mut(id).value.data[k] -= STEP;
            let numeric = (eval(&plus, input) - eval(&minus, input)) / (2.0 * STEP);
            record(format!("{name}[{k}]"), analytic, numeric);
        }
    }
    for k in 0..input.len() {
        let analytic = grads.wrt(xv).map_or(0.0, |g| g.data[k]);
        let (mut plus, mut minus) = (input.to_vec(), input.to_vec());
        plus[k] += STEP;
        minus[k] -= STEP;
        let numeric = (eval(store, &plus) - eval(store, &minus)) / (2.0 * STEP);
        record(format!("input[{k}]"), analytic, numeric);
    }
    report
}
