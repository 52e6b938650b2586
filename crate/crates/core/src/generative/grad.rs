use super::{Layout, RnnParams, B_N, B_OUT, B_R, B_Z, U_N, U_R, U_Z, W_N, W_OUT, W_R, W_Z};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Gradient of the mean negative log-likelihood over `batch`.
pub fn gradient<T: Real>(params: &RnnParams<T>, batch: &[&[u8]]) -> Result<Vec<T>> {
    if batch.is_empty() {
        return Err(Error::Validation("gradient of an empty batch".into()));
    }
    let w = T::one() / T::lit(batch.len() as f64);
    let weighted: Vec<(&[u8], T)> = batch.iter().map(|&s| (s, w)).collect();
    Ok(gradient_weighted(params, &weighted)?.1)
}

/// `Σ_i w_i NLL(s_i)` and its gradient.
pub fn gradient_weighted<T: Real>(
    params: &RnnParams<T>,
    batch: &[(&[u8], T)],
) -> Result<(T, Vec<T>)> {
    let mut grad = vec![T::zero(); params.len()];
    let mut loss = T::zero();
    for &(seq, w) in batch {
        params.check_sequence(seq)?;
        loss += w * accumulate(params, seq, w, &mut grad);
    }
    Ok((loss, grad))
}

/// Adds `w * dNLL(seq)/dθ` into `grad`; returns `NLL(seq)`.
fn accumulate<T: Real>(params: &RnnParams<T>, seq: &[u8], w: T, grad: &mut [T]) -> T {
    let Layout { h: hs, k, .. } = params.layout();
    let layout = params.layout();
    let tokens = k + 1;
    let caches = params.run(seq);
    let nll = caches
        .iter()
        .zip(seq)
        .fold(T::zero(), |acc, (c, &a)| acc - c.probs[a as usize].ln());

    let w_out = params.group(W_OUT);
    let u_z = params.group(U_Z);
    let u_r = params.group(U_R);
    let u_n = params.group(U_N);

    let mut dh_next = vec![T::zero(); hs];
    let mut da_z = vec![T::zero(); hs];
    let mut da_r = vec![T::zero(); hs];
    let mut da_n = vec![T::zero(); hs];
    for (c, &a) in caches.iter().zip(seq).rev() {
        let mut dh = dh_next.clone();

        // output layer
        let (g_wo, g_bo) = (layout.offsets[W_OUT], layout.offsets[B_OUT]);
        for o in 0..k {
            let mut d = c.probs[o];
            if o == a as usize {
                d -= T::one();
            }
            let d = d * w;
            grad[g_bo + o] += d;
            let row = &mut grad[g_wo + o * hs..g_wo + (o + 1) * hs];
            for (g, x) in row.iter_mut().zip(&c.h) {
                *g += d * *x;
            }
            for (dhi, wi) in dh.iter_mut().zip(&w_out[o * hs..(o + 1) * hs]) {
                *dhi += d * *wi;
            }
        }

        // h = (1 - z) h_prev + z n
        for i in 0..hs {
            let dz = dh[i] * (c.n[i] - c.h_prev[i]);
            da_z[i] = dz * c.z[i] * (T::one() - c.z[i]);
            let dn = dh[i] * c.z[i];
            da_n[i] = dn * (T::one() - c.n[i] * c.n[i]);
            dh_next[i] = dh[i] * (T::one() - c.z[i]);
        }

        // candidate: n = tanh(W_n x + U_n (r ⊙ h_prev) + b_n)
        let mut dq = vec![T::zero(); hs];
        for i in 0..hs {
            let d = da_n[i];
            if d == T::zero() {
                continue;
            }
            let row = &u_n[i * hs..(i + 1) * hs];
            for j in 0..hs {
                dq[j] += d * row[j];
            }
        }
        for i in 0..hs {
            da_r[i] = dq[i] * c.h_prev[i] * c.r[i] * (T::one() - c.r[i]);
            dh_next[i] += dq[i] * c.r[i];
        }
        let q: Vec<T> = c.r.iter().zip(&c.h_prev).map(|(x, y)| *x * *y).collect();

        for (g_w, g_u, g_b, da, input, u) in [
            (W_Z, U_Z, B_Z, &da_z, &c.h_prev, u_z),
            (W_R, U_R, B_R, &da_r, &c.h_prev, u_r),
            (W_N, U_N, B_N, &da_n, &q, u_n),
        ] {
            let (ow, ou, ob) = (
                layout.offsets[g_w],
                layout.offsets[g_u],
                layout.offsets[g_b],
            );
            for i in 0..hs {
                let d = da[i];
                grad[ow + i * tokens + c.token] += d;
                grad[ob + i] += d;
                let row = &mut grad[ou + i * hs..ou + (i + 1) * hs];
                for (g, x) in row.iter_mut().zip(input.iter()) {
                    *g += d * *x;
                }
            }
            // the candidate's recurrent input is r ⊙ h_prev, handled through dq above
            if g_u != U_N {
                for i in 0..hs {
                    let d = da[i];
                    for (dj, uij) in dh_next.iter_mut().zip(&u[i * hs..(i + 1) * hs]) {
                        *dj += d * *uij;
                    }
                }
            }
        }
    }
    nll
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generative::forward;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn nll(p: &RnnParams<f64>, seq: &[u8]) -> f64 {
        forward(p, seq).unwrap().1
    }

    #[test]
    fn matches_finite_differences_in_every_group() {
        let seq = [2u8, 0, 3, 1];
        for seed in 0..3 {
            let p = RnnParams::<f64>::random(5, 4, 0.7, seed).unwrap();
            let g = gradient(&p, &[&seq]).unwrap();
            for name in crate::generative::PARAM_GROUPS {
                let r = p.group_range(name).unwrap();
                for idx in [r.start, (r.start + r.end) / 2, r.end - 1] {
                    let step = 1e-5;
                    let mut plus = p.clone();
                    plus.as_flat_mut()[idx] += step;
                    let mut minus = p.clone();
                    minus.as_flat_mut()[idx] -= step;
                    let fd = (nll(&plus, &seq) - nll(&minus, &seq)) / (2.0 * step);
                    let err = (fd - g[idx]).abs() / fd.abs().max(g[idx].abs()).max(1e-8);
                    assert!(
                        err < 1e-4 || (fd - g[idx]).abs() < 1e-8,
                        "{name}[{idx}]: {fd} vs {}",
                        g[idx]
                    );
                }
            }
        }
    }

    #[test]
    fn batch_gradient_is_mean() {
        let p = RnnParams::<f64>::random(4, 6, 0.5, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let seqs: Vec<Vec<u8>> = (0..5)
            .map(|_| (0..3).map(|_| rng.gen_range(0..6)).collect())
            .collect();
        let refs: Vec<&[u8]> = seqs.iter().map(|s| s.as_slice()).collect();
        let batch = gradient(&p, &refs).unwrap();
        let mut mean = vec![0.0; p.len()];
        for s in &refs {
            for (m, g) in mean.iter_mut().zip(gradient(&p, &[s]).unwrap()) {
                *m += g / 5.0;
            }
        }
        for (a, b) in batch.iter().zip(&mean) {
            assert!((a - b).abs() < 1e-12);
        }
        let s: &[u8] = &seqs[0];
        let twice = gradient(&p, &[s, s]).unwrap();
        for (a, b) in twice.iter().zip(gradient(&p, &[s]).unwrap()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(gradient(&p, &[]).is_err());
    }

    #[test]
    fn weighted_loss_is_weighted_nll() {
        let p = RnnParams::<f64>::random(4, 4, 0.5, 4).unwrap();
        let (a, b): (&[u8], &[u8]) = (&[0, 1], &[3, 3]);
        let (loss, _) = gradient_weighted(&p, &[(a, 0.25), (b, 0.75)]).unwrap();
        assert!((loss - (0.25 * nll(&p, a) + 0.75 * nll(&p, b))).abs() < 1e-12);
    }
}
