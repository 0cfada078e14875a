//! Reverse-mode differentiation on a dynamic tape: a small GRU-like
//! expression, its gradient, and a central-difference check of one entry.

use jtvae::tensor::{ParamStore, Tape, Tensor};

fn loss(store: &ParamStore) -> jtvae::Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new(store);
    let x = tape.input(Tensor::row(vec![0.5, -1.0, 2.0]));
    let (w, u) = (tape.p("W"), tape.p("U"));
    let gate = tape.linear(x, u)?;
    let gate = tape.sigmoid(gate);
    let h = tape.linear(x, w)?;
    let h = tape.tanh(h);
    let out = tape.mul(gate, h)?;
    let out = tape.sum_all(out);
    let grads = tape.backward(out)?;
    let id = store.id("W").expect("W");
    Ok((
        tape.scalar(out),
        grads.param(id).expect("W is used").data.clone(),
    ))
}

fn main() -> jtvae::Result<()> {
    let mut store = ParamStore::new();
    store.add(
        "W",
        Tensor::from_vec(2, 3, vec![0.1, -0.2, 0.3, 0.4, 0.0, -0.5])?,
    );
    store.add(
        "U",
        Tensor::from_vec(2, 3, vec![-0.3, 0.2, 0.1, 0.0, 0.6, -0.1])?,
    );
    let (value, grad) = loss(&store)?;
    println!("loss={value:.6}");
    println!("dW={grad:.6?}");

    let h = 1e-6;
    let id = store.id("W").expect("W");
    let mut plus = store.clone();
    plus.get_mut(id).value.data[0] += h;
    let mut minus = store.clone();
    minus.get_mut(id).value.data[0] -= h;
    let fd = (loss(&plus)?.0 - loss(&minus)?.0) / (2.0 * h);
    println!("dW[0] analytic={:.9} central difference={fd:.9}", grad[0]);
    Ok(())
}
