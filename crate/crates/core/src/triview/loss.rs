//! The three contrastive objectives and their exact gradients.
//!
//! Node-level and area-level losses are symmetric InfoNCE over cosine
//! similarity: the same row in the other view is the positive, every
//! other row is a negative, and both anchor directions are averaged.
//! Membership loss scores node-hyperedge pairs with the bilinear
//! discriminator `D(w, d) = w^T B d`; for each real membership the
//! negatives are the hyperedges the node does not belong to. All
//! softmax denominators use the max-shifted log-sum-exp.
//!
//! Every loss is `-log` of a probability, hence non-negative. The cosine
//! of two zero vectors is defined as 0 so fully masked (zero-embedded)
//! rows keep the losses finite.

use super::model::{matmul, ModelGrads, ModelParams};
use super::TriViewConfig;
use ndarray::{Array2, ArrayView1};

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(u: ArrayView1<f64>, v: ArrayView1<f64>) -> f64 {
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    u.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>() / (nu * nv)
}

/// L2-normalize rows; zero rows stay zero. Returns the norms too.
fn normalize_rows(m: &Array2<f64>) -> (Array2<f64>, Vec<f64>) {
    let mut out = m.clone();
    let mut norms = Vec::with_capacity(m.nrows());
    for mut row in out.rows_mut() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        }
        norms.push(norm);
    }
    (out, norms)
}

/// Max-shifted log-sum-exp.
fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Symmetric InfoNCE over the cosine matrix of two row sets.
fn symmetric_infonce(a: &Array2<f64>, b: &Array2<f64>, tau: f64) -> f64 {
    symmetric_infonce_impl(a, b, tau, None)
}

/// As [`symmetric_infonce`], also producing `d(loss)/d(a)` and
/// `d(loss)/d(b)` when a gradient sink is supplied.
fn symmetric_infonce_impl(
    a: &Array2<f64>,
    b: &Array2<f64>,
    tau: f64,
    grads: Option<(&mut Array2<f64>, &mut Array2<f64>)>,
) -> f64 {
    assert_eq!(a.dim(), b.dim(), "views must have matching shapes");
    assert!(tau > 0.0, "temperature must be positive");
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    let (a_hat, a_norms) = normalize_rows(a);
    let (b_hat, b_norms) = normalize_rows(b);
    // s[(i, k)] = cos(a_i, b_k)
    let s = matmul(&a_hat, &b_hat.t().to_owned());

    let mut loss = 0.0;
    for i in 0..n {
        let row: Vec<f64> = (0..n).map(|k| s[(i, k)] / tau).collect();
        let col: Vec<f64> = (0..n).map(|k| s[(k, i)] / tau).collect();
        loss += logsumexp(&row) - s[(i, i)] / tau;
        loss += logsumexp(&col) - s[(i, i)] / tau;
    }
    loss /= 2.0 * n as f64;

    if let Some((da, db)) = grads {
        // d(loss)/d(s) = (P + Q^T - 2I) / (2 n tau) with P the row softmax
        // of s/tau and Q the row softmax of s^T/tau.
        let mut ds = Array2::zeros((n, n));
        for i in 0..n {
            let row: Vec<f64> = (0..n).map(|k| s[(i, k)] / tau).collect();
            let lse = logsumexp(&row);
            for k in 0..n {
                ds[(i, k)] += (row[k] - lse).exp();
            }
            let col: Vec<f64> = (0..n).map(|k| s[(k, i)] / tau).collect();
            let lse = logsumexp(&col);
            for k in 0..n {
                ds[(k, i)] += (col[k] - lse).exp();
            }
            ds[(i, i)] -= 2.0;
        }
        let scale = 1.0 / (2.0 * n as f64 * tau);
        ds.mapv_inplace(|v| v * scale);

        let da_hat = matmul(&ds, &b_hat);
        let db_hat = matmul(&ds.t().to_owned(), &a_hat);
        backprop_row_normalization(&a_hat, &a_norms, &da_hat, da);
        backprop_row_normalization(&b_hat, &b_norms, &db_hat, db);
    }
    loss
}

/// Pull gradients through `u_hat = u / |u|`; zero rows get zero gradient.
fn backprop_row_normalization(
    hat: &Array2<f64>,
    norms: &[f64],
    d_hat: &Array2<f64>,
    out: &mut Array2<f64>,
) {
    for i in 0..hat.nrows() {
        if norms[i] == 0.0 {
            continue;
        }
        let dot = d_hat
            .row(i)
            .iter()
            .zip(hat.row(i).iter())
            .map(|(a, b)| a * b)
            .sum::<f64>();
        for j in 0..hat.ncols() {
            out[(i, j)] += (d_hat[(i, j)] - dot * hat[(i, j)]) / norms[i];
        }
    }
}

/// Node-level contrastive loss between the two views' node projections.
pub fn node_loss(w1: &Array2<f64>, w2: &Array2<f64>, tau_n: f64) -> f64 {
    symmetric_infonce(w1, w2, tau_n)
}

/// Area-level contrastive loss between the two views' hyperedge
/// projections.
pub fn area_loss(d1: &Array2<f64>, d2: &Array2<f64>, tau_g: f64) -> f64 {
    symmetric_infonce(d1, d2, tau_g)
}

/// Membership contrast over a single incidence matrix, covering both
/// view directions: anchors `(W1, D2)` and `(W2, D1)`.
///
/// Normalized by `2K`, or by the total number of scored pairs when
/// `normalize_by_memberships` is set.
#[allow(clippy::too_many_arguments)]
pub fn membership_loss(
    w1: &Array2<f64>,
    w2: &Array2<f64>,
    d1: &Array2<f64>,
    d2: &Array2<f64>,
    h: &Array2<u8>,
    discriminator: &Array2<f64>,
    tau_m: f64,
    normalize_by_memberships: bool,
) -> f64 {
    membership_loss_per_view(w1, w2, d1, d2, h, h, discriminator, tau_m, normalize_by_memberships)
}

/// Membership contrast where each direction uses its own incidence
/// matrix: `h2` for `(W1, D2)` and `h1` for `(W2, D1)`. Training passes
/// the masked per-view matrices here; with `h1 = h2` this reduces to
/// [`membership_loss`].
#[allow(clippy::too_many_arguments)]
pub fn membership_loss_per_view(
    w1: &Array2<f64>,
    w2: &Array2<f64>,
    d1: &Array2<f64>,
    d2: &Array2<f64>,
    h1: &Array2<u8>,
    h2: &Array2<u8>,
    discriminator: &Array2<f64>,
    tau_m: f64,
    normalize_by_memberships: bool,
) -> f64 {
    let (loss, _ones) = membership_forward_backward(
        w1,
        w2,
        d1,
        d2,
        h1,
        h2,
        discriminator,
        tau_m,
        normalize_by_memberships,
        None,
    );
    loss
}

struct MembershipGradSink<'a> {
    dw1: &'a mut Array2<f64>,
    dw2: &'a mut Array2<f64>,
    dd1: &'a mut Array2<f64>,
    dd2: &'a mut Array2<f64>,
    db: &'a mut Array2<f64>,
}

/// Shared forward/backward for the membership loss. Returns the loss and
/// the number of scored membership pairs.
#[allow(clippy::too_many_arguments)]
fn membership_forward_backward(
    w1: &Array2<f64>,
    w2: &Array2<f64>,
    d1: &Array2<f64>,
    d2: &Array2<f64>,
    h1: &Array2<u8>,
    h2: &Array2<u8>,
    discriminator: &Array2<f64>,
    tau_m: f64,
    normalize_by_memberships: bool,
    mut grads: Option<MembershipGradSink<'_>>,
) -> (f64, usize) {
    assert!(tau_m > 0.0, "temperature must be positive");
    let k = d1.nrows();
    if k == 0 || w1.nrows() == 0 {
        return (0.0, 0);
    }
    let ones1: usize = h1.iter().filter(|&&v| v == 1).count();
    let ones2: usize = h2.iter().filter(|&&v| v == 1).count();
    let total_pairs = ones1 + ones2;
    let norm = if normalize_by_memberships {
        if total_pairs == 0 {
            return (0.0, 0);
        }
        1.0 / total_pairs as f64
    } else {
        1.0 / (2.0 * k as f64)
    };

    let mut loss = 0.0;
    // Direction (W1 -> D2) over h2, then (W2 -> D1) over h1.
    for (w, d, h, first_is_node) in [(w1, d2, h2, true), (w2, d1, h1, false)] {
        // t[(i, j)] = w_i^T B d_j
        let wb = matmul(w, discriminator);
        let t = matmul(&wb, &d.t().to_owned());
        let mut dt: Option<Array2<f64>> = grads.as_ref().map(|_| Array2::zeros(t.dim()));
        for i in 0..w.nrows() {
            let negatives: Vec<usize> = (0..k).filter(|&j| h[(i, j)] == 0).collect();
            for j in 0..k {
                if h[(i, j)] != 1 {
                    continue;
                }
                let pos = t[(i, j)] / tau_m;
                let mut logits = Vec::with_capacity(negatives.len() + 1);
                logits.push(pos);
                logits.extend(negatives.iter().map(|&jn| t[(i, jn)] / tau_m));
                let lse = logsumexp(&logits);
                loss += lse - pos;
                if let Some(dt) = dt.as_mut() {
                    dt[(i, j)] += ((pos - lse).exp() - 1.0) / tau_m;
                    for &jn in &negatives {
                        dt[(i, jn)] += (t[(i, jn)] / tau_m - lse).exp() / tau_m;
                    }
                }
            }
        }
        if let (Some(dt), Some(sink)) = (dt, grads.as_mut()) {
            // t = (w B) d^T: dw += (dt d) B^T, dB += w^T (dt d), dd += dt^T (w B)
            let dt_d = matmul(&dt, d);
            let dw = matmul(&dt_d, &discriminator.t().to_owned());
            let db = matmul(&w.t().to_owned(), &dt_d);
            let dd = matmul(&dt.t().to_owned(), &wb);
            *sink.db += &db;
            if first_is_node {
                *sink.dw1 += &dw;
                *sink.dd2 += &dd;
            } else {
                *sink.dw2 += &dw;
                *sink.dd1 += &dd;
            }
        }
    }
    loss *= norm;
    if let Some(sink) = grads.as_mut() {
        for m in [
            &mut *sink.dw1,
            &mut *sink.dw2,
            &mut *sink.dd1,
            &mut *sink.dd2,
            &mut *sink.db,
        ] {
            m.mapv_inplace(|v| v * norm);
        }
    }
    (loss, total_pairs)
}

/// The combined objective `L = L_n + alpha_g * L_g + alpha_m * L_m`.
pub fn total_loss(l_n: f64, l_g: f64, l_m: f64, alpha_g: f64, alpha_m: f64) -> f64 {
    l_n + alpha_g * l_g + alpha_m * l_m
}

/// The four embedding matrices and two masked incidence matrices of one
/// view pair.
pub struct BatchInputs<'a> {
    /// Node embeddings per view, `N x d`.
    pub node_embed_1: &'a Array2<f64>,
    pub node_embed_2: &'a Array2<f64>,
    /// Hyperedge embeddings per view, `K x d`.
    pub edge_embed_1: &'a Array2<f64>,
    pub edge_embed_2: &'a Array2<f64>,
    /// Masked incidence per view, `N x K`.
    pub incidence_1: &'a Array2<u8>,
    pub incidence_2: &'a Array2<u8>,
}

/// The individual loss terms of one forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub node: f64,
    pub area: f64,
    pub membership: f64,
    pub total: f64,
}

/// Full forward pass, optionally with gradients for every trainable
/// parameter.
pub fn forward_backward(
    inputs: &BatchInputs<'_>,
    params: &ModelParams,
    config: &TriViewConfig,
    want_grads: bool,
) -> (LossParts, Option<ModelGrads>) {
    let (d, d_p) = params.dims();

    let fwd_n1 = params.node_head.forward(inputs.node_embed_1);
    let fwd_n2 = params.node_head.forward(inputs.node_embed_2);
    let fwd_e1 = params.edge_head.forward(inputs.edge_embed_1);
    let fwd_e2 = params.edge_head.forward(inputs.edge_embed_2);
    let (w1, w2) = (&fwd_n1.output, &fwd_n2.output);
    let (d1, d2) = (&fwd_e1.output, &fwd_e2.output);

    if !want_grads {
        let l_n = node_loss(w1, w2, config.tau_n);
        let l_g = area_loss(d1, d2, config.tau_g);
        let l_m = membership_loss_per_view(
            w1,
            w2,
            d1,
            d2,
            inputs.incidence_1,
            inputs.incidence_2,
            &params.discriminator,
            config.tau_m,
            config.normalize_by_memberships,
        );
        let total = total_loss(l_n, l_g, l_m, config.alpha_g, config.alpha_m);
        return (
            LossParts {
                node: l_n,
                area: l_g,
                membership: l_m,
                total,
            },
            None,
        );
    }

    let n = w1.nrows();
    let k = d1.nrows();
    let mut dw1 = Array2::zeros((n, d_p));
    let mut dw2 = Array2::zeros((n, d_p));
    let mut dd1 = Array2::zeros((k, d_p));
    let mut dd2 = Array2::zeros((k, d_p));

    let l_n = symmetric_infonce_impl(w1, w2, config.tau_n, Some((&mut dw1, &mut dw2)));

    let mut dd1_area = Array2::zeros((k, d_p));
    let mut dd2_area = Array2::zeros((k, d_p));
    let l_g = symmetric_infonce_impl(d1, d2, config.tau_g, Some((&mut dd1_area, &mut dd2_area)));
    dd1 += &(&dd1_area * config.alpha_g);
    dd2 += &(&dd2_area * config.alpha_g);

    let mut dw1_mem = Array2::zeros((n, d_p));
    let mut dw2_mem = Array2::zeros((n, d_p));
    let mut dd1_mem = Array2::zeros((k, d_p));
    let mut dd2_mem = Array2::zeros((k, d_p));
    let mut db = Array2::zeros((d_p, d_p));
    let (l_m, _) = membership_forward_backward(
        w1,
        w2,
        d1,
        d2,
        inputs.incidence_1,
        inputs.incidence_2,
        &params.discriminator,
        config.tau_m,
        config.normalize_by_memberships,
        Some(MembershipGradSink {
            dw1: &mut dw1_mem,
            dw2: &mut dw2_mem,
            dd1: &mut dd1_mem,
            dd2: &mut dd2_mem,
            db: &mut db,
        }),
    );
    dw1 += &(&dw1_mem * config.alpha_m);
    dw2 += &(&dw2_mem * config.alpha_m);
    dd1 += &(&dd1_mem * config.alpha_m);
    dd2 += &(&dd2_mem * config.alpha_m);
    db.mapv_inplace(|v| v * config.alpha_m);

    let mut grads = ModelGrads::zeros(d, d_p);
    params
        .node_head
        .backward_into(inputs.node_embed_1, &fwd_n1, &dw1, &mut grads.node_head);
    params
        .node_head
        .backward_into(inputs.node_embed_2, &fwd_n2, &dw2, &mut grads.node_head);
    params
        .edge_head
        .backward_into(inputs.edge_embed_1, &fwd_e1, &dd1, &mut grads.edge_head);
    params
        .edge_head
        .backward_into(inputs.edge_embed_2, &fwd_e2, &dd2, &mut grads.edge_head);
    grads.discriminator = db;

    let total = total_loss(l_n, l_g, l_m, config.alpha_g, config.alpha_m);
    (
        LossParts {
            node: l_n,
            area: l_g,
            membership: l_m,
            total,
        },
        Some(grads),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        let mut m = Array2::zeros((rows, cols));
        for v in m.iter_mut() {
            *v = 2.0 * rng.random::<f64>() - 1.0;
        }
        m
    }

    #[test]
    fn cosine_reference_values() {
        let u = array![1.0, 2.0];
        let v = array![2.0, 1.0];
        assert!((cosine(u.view(), v.view()) - 0.8).abs() < 1e-15);
        assert!((cosine(u.view(), u.view()) - 1.0).abs() < 1e-15);
        let w = array![-2.0, 1.0];
        assert!(cosine(u.view(), w.view()).abs() < 1e-15);
        let z = array![0.0, 0.0];
        assert_eq!(cosine(z.view(), u.view()), 0.0);
        assert_eq!(cosine(z.view(), z.view()), 0.0);
    }

    #[test]
    fn single_row_infonce_is_zero() {
        let w = array![[0.3, -0.7, 0.2]];
        assert_eq!(node_loss(&w, &w, 0.07), 0.0);
        assert_eq!(area_loss(&w, &w, 0.07), 0.0);
    }

    #[test]
    fn infonce_is_swap_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(5, 4, &mut rng);
        let b = random_matrix(5, 4, &mut rng);
        let forward = node_loss(&a, &b, 0.07);
        let swapped = node_loss(&b, &a, 0.07);
        assert!((forward - swapped).abs() < 1e-12);
    }

    #[test]
    fn losses_are_non_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let w1 = random_matrix(4, 3, &mut rng);
            let w2 = random_matrix(4, 3, &mut rng);
            assert!(node_loss(&w1, &w2, 0.07) >= 0.0);
            let d1 = random_matrix(2, 3, &mut rng);
            let d2 = random_matrix(2, 3, &mut rng);
            assert!(area_loss(&d1, &d2, 0.07) >= 0.0);
            let h = array![[1u8, 0], [0, 1], [1, 1], [0, 1]];
            let b = Array2::eye(3);
            assert!(membership_loss(&w1, &w2, &d1, &d2, &h, &b, 0.07, false) >= 0.0);
        }
    }

    #[test]
    fn membership_with_no_negatives_is_zero() {
        // One node in the single hyperedge: the negative set is empty.
        let w = array![[0.5, 0.5]];
        let d = array![[0.2, -0.4]];
        let h = array![[1u8]];
        let b = Array2::eye(2);
        assert_eq!(membership_loss(&w, &w, &d, &d, &h, &b, 0.07, false), 0.0);
    }

    #[test]
    fn non_membership_pairs_do_not_contribute() {
        // h = 0 everywhere: outer indicator wipes out the sum.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w1 = random_matrix(3, 2, &mut rng);
        let w2 = random_matrix(3, 2, &mut rng);
        let d1 = random_matrix(2, 2, &mut rng);
        let d2 = random_matrix(2, 2, &mut rng);
        let h = Array2::<u8>::zeros((3, 2));
        let b = Array2::eye(2);
        assert_eq!(membership_loss(&w1, &w2, &d1, &d2, &h, &b, 0.07, false), 0.0);
    }

    #[test]
    fn total_loss_is_the_stated_combination() {
        assert_eq!(total_loss(0.5, 0.3, 0.2, 1.0, 1.0), 1.0);
        assert_eq!(total_loss(0.7, 0.3, 0.2, 0.0, 0.0), 0.7);
        assert_eq!(total_loss(0.5, 0.25, 0.1, 2.0, 3.0), 0.5 + 0.5 + 0.3);
    }

    #[test]
    fn common_permutation_leaves_infonce_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = random_matrix(6, 4, &mut rng);
        let b = random_matrix(6, 4, &mut rng);
        let perm = [3usize, 0, 5, 1, 4, 2];
        let pa = permute_rows(&a, &perm);
        let pb = permute_rows(&b, &perm);
        let original = node_loss(&a, &b, 0.07);
        let permuted = node_loss(&pa, &pb, 0.07);
        assert!((original - permuted).abs() < 1e-9, "{original} vs {permuted}");
    }

    #[test]
    fn positive_row_scaling_preserves_infonce_but_not_membership() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let w1 = random_matrix(4, 3, &mut rng);
        let w2 = random_matrix(4, 3, &mut rng);
        let mut scaled = w1.clone();
        for (i, factor) in [2.0, 0.5, 7.0, 1.3].iter().enumerate() {
            for v in scaled.row_mut(i) {
                *v *= factor;
            }
        }
        let original = node_loss(&w1, &w2, 0.07);
        let rescaled = node_loss(&scaled, &w2, 0.07);
        assert!((original - rescaled).abs() < 1e-9);

        let d1 = random_matrix(2, 3, &mut rng);
        let d2 = random_matrix(2, 3, &mut rng);
        let h = array![[1u8, 0], [0, 1], [1, 0], [0, 1]];
        let b = Array2::eye(3);
        let mem_original = membership_loss(&w1, &w2, &d1, &d2, &h, &b, 0.07, false);
        let mem_scaled = membership_loss(&scaled, &w2, &d1, &d2, &h, &b, 0.07, false);
        assert!(
            (mem_original - mem_scaled).abs() > 1e-6,
            "bilinear membership loss must be scale sensitive: {mem_original} vs {mem_scaled}"
        );
    }

    fn permute_rows(m: &Array2<f64>, perm: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros(m.dim());
        for (dst, &src) in perm.iter().enumerate() {
            out.row_mut(dst).assign(&m.row(src));
        }
        out
    }
}
