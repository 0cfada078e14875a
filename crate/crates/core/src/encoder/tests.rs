use super::*;
use crate::juncture::{assign_labels, build_vocabulary, decompose, Vocabulary};
use crate::model::{Model, ModelDims};
use crate::molgraph::parse_smiles;
use crate::tensor::ParamStore;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

fn dims() -> ModelDims {
    ModelDims {
        hidden: 5,
        latent_tree: 3,
        latent_graph: 3,
        depth: 2,
    }
}

fn model(vocab: Vocabulary, seed: u64) -> Model {
    Model::new(dims(), vocab, seed)
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// W (out×in) · x
fn apply(store: &ParamStore, name: &str, x: &[f64]) -> Vec<f64> {
    let w = store.value(store.id(name).unwrap());
    assert_eq!(w.cols, x.len());
    (0..w.rows)
        .map(|r| w.row_slice(r).iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn vadd(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

#[test]
fn single_atom_graph() {
    let m = model(Vocabulary::from_labels(["C"]), 1);
    let g = parse_smiles("C").unwrap();
    let mut tape = Tape::new(&m.params);
    let (h, hg) = encode_graph(&mut tape, &g, 3).unwrap();
    let x = atom_features(&g, 0);
    let expected: Vec<f64> = apply(&m.params, "U1g", &x).into_iter().map(relu).collect();
    assert_eq!(tape.value(h).data, expected);
    assert_eq!(tape.value(hg).data, expected);
}

#[test]
fn zero_weights_give_zero_graph_state() {
    let mut m = model(Vocabulary::from_labels(["CC"]), 1);
    m.params.zero_values();
    let g = parse_smiles("CC(=O)O").unwrap();
    let mut tape = Tape::new(&m.params);
    let (_, hg) = encode_graph(&mut tape, &g, 3).unwrap();
    assert!(tape.value(hg).data.iter().all(|&x| x == 0.0));
}

#[test]
fn path_graph_two_rounds_matches_hand_unrolled() {
    let m = model(Vocabulary::from_labels(["CC"]), 5);
    let g = parse_smiles("CCO").unwrap();
    let s = &m.params;
    let ring = g.ring_bonds();
    let x: Vec<[f64; ATOM_FDIM]> = (0..3).map(|i| atom_features(&g, i)).collect();
    let xb: Vec<[f64; BOND_FDIM]> = (0..2).map(|b| bond_features(&g, b, &ring)).collect();
    // bond 0: 0-1, bond 1: 1-2
    let base = |u: usize, b: usize| vadd(&apply(s, "W1g", &x[u]), &apply(s, "W2g", &xb[b]));
    let step = |u: usize, b: usize, incoming: &[f64]| -> Vec<f64> {
        vadd(&base(u, b), &apply(s, "W3g", incoming))
            .into_iter()
            .map(relu)
            .collect()
    };
    let zero = vec![0.0; 5];
    // t = 1
    let n01 = step(0, 0, &zero);
    let n10 = step(1, 0, &zero);
    let n12 = step(1, 1, &zero);
    let n21 = step(2, 1, &zero);
    // t = 2: ν_uv sums ν_wu for w ∈ N(u) \ v
    let m01 = step(0, 0, &zero);
    let m10 = step(1, 0, &n21);
    let m12 = step(1, 1, &n01);
    let m21 = step(2, 1, &zero);
    let _ = (n10, n12);
    let h = |u: usize, inc: Vec<f64>| -> Vec<f64> {
        vadd(&apply(s, "U1g", &x[u]), &apply(s, "U2g", &inc))
            .into_iter()
            .map(relu)
            .collect()
    };
    let h0 = h(0, m10.clone());
    let h1 = h(1, vadd(&m01, &m21));
    let h2 = h(2, m12.clone());
    let mut tape = Tape::new(s);
    let (hv, _) = encode_graph(&mut tape, &g, 2).unwrap();
    let got = &tape.value(hv).data;
    let want: Vec<f64> = [h0, h1, h2].concat();
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn graph_state_is_permutation_invariant() {
    let m = model(Vocabulary::from_labels(["CC"]), 9);
    let g = parse_smiles("CC(=O)Nc1ccc(O)cc1").unwrap();
    let n = g.num_atoms();
    let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
    let p = g.permuted(&perm);
    let mut tape = Tape::new(&m.params);
    let (_, a) = encode_graph(&mut tape, &g, 3).unwrap();
    let (_, b) = encode_graph(&mut tape, &p, 3).unwrap();
    for (x, y) in tape.value(a).data.iter().zip(&tape.value(b).data) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn single_node_tree_root_state() {
    let m = model(Vocabulary::from_labels(["C1CCCCC1"]), 2);
    let t = TreeGraph::new(vec![0], &[], 0);
    let mut tape = Tape::new(&m.params);
    let enc = encode_tree(&mut tape, &t, Phase::Both).unwrap();
    assert!(enc.messages.is_empty());
    let emb = m
        .params
        .value(m.params.id("emb").unwrap())
        .row_slice(0)
        .to_vec();
    let want: Vec<f64> = apply(&m.params, "Wo", &emb).into_iter().map(relu).collect();
    assert_eq!(tape.value(enc.h_root).data, want);
}

#[test]
fn zero_parameters_give_zero_messages() {
    let mut m = model(Vocabulary::from_labels(["CC", "CO"]), 2);
    m.params.zero_values();
    let t = TreeGraph::new(vec![0, 1, 0, 1], &[(0, 1), (1, 2), (1, 3)], 0);
    let mut tape = Tape::new(&m.params);
    let enc = encode_tree(&mut tape, &t, Phase::Both).unwrap();
    assert_eq!(enc.messages.len(), 6);
    for v in enc.messages.values() {
        assert!(tape.value(*v).data.iter().all(|&x| x == 0.0));
    }
}

#[test]
fn three_node_path_schedule() {
    let m = model(Vocabulary::from_labels(["CC"]), 3);
    let t = TreeGraph::new(vec![0, 0, 0], &[(0, 1), (1, 2)], 0);
    let mut tape = Tape::new(&m.params);
    let enc = encode_tree(&mut tape, &t, Phase::Both).unwrap();
    assert_eq!(enc.schedule.len(), 4);
    let mut uniq = enc.schedule.clone();
    uniq.sort();
    uniq.dedup();
    assert_eq!(uniq.len(), 4);
    for (pos, &(i, j)) in enc.schedule.iter().enumerate() {
        for &k in &t.adjacency[i] {
            if k != j {
                let before = enc.schedule[..pos].contains(&(k, i));
                assert!(before, "m_{i}{j} computed before m_{k}{i}");
            }
        }
    }
    let bottom = encode_tree(&mut tape, &t, Phase::BottomUp).unwrap();
    assert_eq!(bottom.schedule, [(2, 1), (1, 0)]);
    // h_root only needs bottom-up messages
    assert_eq!(tape.value(bottom.h_root).data, tape.value(enc.h_root).data);
}

#[test]
fn real_tree_encodes() {
    let corpus: Vec<_> = ["CC(=O)Nc1ccc(O)cc1"]
        .iter()
        .map(|s| parse_smiles(s).unwrap())
        .collect();
    let v = build_vocabulary(&corpus).unwrap();
    let jt = decompose(&corpus[0]).unwrap();
    let ids = assign_labels(&jt, &v).unwrap();
    let m = model(v, 4);
    let mut tape = Tape::new(&m.params);
    let enc = encode_tree(&mut tape, &TreeGraph::from_junction(&jt, &ids), Phase::Both).unwrap();
    assert_eq!(enc.messages.len(), 2 * jt.edges.len());
    assert!(enc.h_nodes.iter().all(Option::is_some));
}

#[test]
fn kl_closed_form_values() {
    let store = ParamStore::new();
    let mut tape = Tape::new(&store);
    let mu = tape.input(Tensor::row(vec![0.0, 0.0]));
    let lv = tape.input(Tensor::row(vec![0.0, 0.0]));
    let k = kl_divergence(&mut tape, mu, lv).unwrap();
    assert_eq!(tape.scalar(k), 0.0);
    let mu = tape.input(Tensor::row(vec![1.0]));
    let lv = tape.input(Tensor::row(vec![0.0]));
    let k = kl_divergence(&mut tape, mu, lv).unwrap();
    assert!((tape.scalar(k) - 0.5).abs() < 1e-15);
}

/// ∫ p log(p/q) by composite Simpson over ±12σ.
fn kl_quadrature(mu: f64, lv: f64) -> f64 {
    let sd = (0.5 * lv).exp();
    let (lo, hi) = (mu - 12.0 * sd, mu + 12.0 * sd);
    let n = 20_000;
    let h = (hi - lo) / n as f64;
    let log_p =
        |x: f64| -0.5 * ((x - mu) / sd).powi(2) - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
    let log_q = |x: f64| -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln();
    let f = |x: f64| log_p(x).exp() * (log_p(x) - log_q(x));
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        let x = lo + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

#[test]
fn kl_matches_quadrature() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
    let store = ParamStore::new();
    for _ in 0..20 {
        let mu_v: f64 = rng.random_range(-2.0..2.0);
        let lv_v: f64 = rng.random_range(-2.0..2.0);
        let mut tape = Tape::new(&store);
        let mu = tape.input(Tensor::scalar(mu_v));
        let lv = tape.input(Tensor::scalar(lv_v));
        let k = kl_divergence(&mut tape, mu, lv).unwrap();
        let q = kl_quadrature(mu_v, lv_v);
        assert!(
            (tape.scalar(k) - q).abs() < 1e-3,
            "{mu_v} {lv_v}: {} vs {q}",
            tape.scalar(k)
        );
    }
}

#[test]
fn reparameterization_modes() {
    let store = ParamStore::new();
    let mut tape = Tape::new(&store);
    let mu = tape.input(Tensor::row(vec![0.3, -1.2]));
    let lv = tape.input(Tensor::row(vec![0.5, 0.1]));
    let z = reparameterize::<Xoshiro256PlusPlus>(&mut tape, mu, lv, None).unwrap();
    assert_eq!(tape.value(z).data, vec![0.3, -1.2]);

    let mut r1 = Xoshiro256PlusPlus::seed_from_u64(5);
    let mut r2 = Xoshiro256PlusPlus::seed_from_u64(5);
    let a = reparameterize(&mut tape, mu, lv, Some(&mut r1)).unwrap();
    let b = reparameterize(&mut tape, mu, lv, Some(&mut r2)).unwrap();
    assert_eq!(tape.value(a).data, tape.value(b).data);

    // a huge negative log-variance clamps to -10, leaving z within e^-5 scale of μ
    let raw = tape.input(Tensor::row(vec![-1e6, -1e6]));
    let clamped = tape.clamp(raw, LOGVAR_RANGE.0, LOGVAR_RANGE.1);
    let z = reparameterize(&mut tape, mu, clamped, Some(&mut r1)).unwrap();
    for (x, m) in tape.value(z).data.iter().zip([0.3, -1.2]) {
        assert!((x - m).abs() < 0.05);
    }
}

#[test]
fn reparameterization_monte_carlo_mean() {
    let store = ParamStore::new();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(99);
    let lv_vals = [0.4, -0.7, 1.1];
    let n = 10_000;
    let mut sums = [0.0; 3];
    for _ in 0..n {
        let mut tape = Tape::new(&store);
        let mu = tape.input(Tensor::row(vec![1.0, -2.0, 0.5]));
        let lv = tape.input(Tensor::row(lv_vals.to_vec()));
        let z = reparameterize(&mut tape, mu, lv, Some(&mut rng)).unwrap();
        let d = tape.sub(z, mu).unwrap();
        for (s, x) in sums.iter_mut().zip(&tape.value(d).data) {
            *s += x;
        }
    }
    for (s, lv) in sums.iter().zip(lv_vals) {
        let sd = (0.5 * lv).exp();
        assert!((s / n as f64).abs() < 3.0 * sd / (n as f64).sqrt());
    }
}
