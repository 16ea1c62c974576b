//! Low-level kernels acting on column-major `d x d` buffers and on vectors.
//!
//! A local operator on qubits `qs` is a `2^k x 2^k` row-major matrix whose
//! local index carries qubit `qs[t]` in bit `t`.

use num_complex::Complex64 as C;

/// Offsets of the `2^k` local basis states, and the mask of the touched bits.
pub(crate) fn local_offsets(qs: &[usize]) -> (Vec<usize>, usize) {
    let k = qs.len();
    let mut offs = vec![0usize; 1 << k];
    for (r, o) in offs.iter_mut().enumerate() {
        for (t, &q) in qs.iter().enumerate() {
            if (r >> t) & 1 == 1 {
                *o |= 1 << q;
            }
        }
    }
    let mask = qs.iter().fold(0usize, |m, &q| m | (1 << q));
    (offs, mask)
}

/// Apply `u` to every vector `data[base + i * stride]`, `i in 0..d`, for each base in `bases`.
fn apply_strided(data: &mut [C], d: usize, qs: &[usize], u: &[C], bases: impl Iterator<Item = usize>, stride: usize) {
    let (offs, mask) = local_offsets(qs);
    let m = offs.len();
    let mut buf = vec![C::new(0.0, 0.0); m];
    for base in bases {
        for i0 in 0..d {
            if i0 & mask != 0 {
                continue;
            }
            for r in 0..m {
                buf[r] = data[base + (i0 | offs[r]) * stride];
            }
            for r in 0..m {
                let row = &u[r * m..(r + 1) * m];
                let mut acc = C::new(0.0, 0.0);
                for c in 0..m {
                    acc += row[c] * buf[c];
                }
                data[base + (i0 | offs[r]) * stride] = acc;
            }
        }
    }
}

/// `psi <- U psi` on a statevector.
pub(crate) fn apply_vec(psi: &mut [C], qs: &[usize], u: &[C]) {
    let d = psi.len();
    if qs.len() == 1 {
        let q = qs[0];
        let bit = 1usize << q;
        let (a, b, c, e) = (u[0], u[1], u[2], u[3]);
        for i in 0..d {
            if i & bit == 0 {
                let x = psi[i];
                let y = psi[i | bit];
                psi[i] = a * x + b * y;
                psi[i | bit] = c * x + e * y;
            }
        }
        return;
    }
    apply_strided(psi, d, qs, u, std::iter::once(0), 1);
}

/// `rho <- U rho U^dagger` on a column-major buffer.
pub(crate) fn conjugate(rho: &mut [C], d: usize, qs: &[usize], u: &[C]) {
    // left: every column is a vector
    if qs.len() == 1 {
        let bit = 1usize << qs[0];
        let (a, b, c, e) = (u[0], u[1], u[2], u[3]);
        for col in rho.chunks_mut(d) {
            for i in 0..d {
                if i & bit == 0 {
                    let x = col[i];
                    let y = col[i | bit];
                    col[i] = a * x + b * y;
                    col[i | bit] = c * x + e * y;
                }
            }
        }
        // right: columns j and j|bit mix with conj(U)
        let (a, b, c, e) = (a.conj(), b.conj(), c.conj(), e.conj());
        for j in 0..d {
            if j & bit != 0 {
                continue;
            }
            let (lo, hi) = rho.split_at_mut((j | bit) * d);
            let x = &mut lo[j * d..j * d + d];
            let y = &mut hi[..d];
            for i in 0..d {
                let (xv, yv) = (x[i], y[i]);
                x[i] = a * xv + b * yv;
                y[i] = c * xv + e * yv;
            }
        }
        return;
    }
    apply_strided(rho, d, qs, u, (0..d).map(|j| j * d), 1);
    let uc: Vec<C> = u.iter().map(|z| z.conj()).collect();
    apply_strided(rho, d, qs, &uc, 0..d, d);
}

/// Superoperator of a Kraus set on `k` qubits, indexed `[(r', c'), (r, c)]`
/// with block index `r * 2^k + c`.
pub(crate) fn superop(kraus: &[Vec<C>], m: usize) -> Vec<C> {
    let mm = m * m;
    let mut s = vec![C::new(0.0, 0.0); mm * mm];
    for k in kraus {
        for rp in 0..m {
            for cp in 0..m {
                for r in 0..m {
                    let a = k[rp * m + r];
                    if a == C::new(0.0, 0.0) {
                        continue;
                    }
                    for c in 0..m {
                        s[(rp * m + cp) * mm + r * m + c] += a * k[cp * m + c].conj();
                    }
                }
            }
        }
    }
    s
}

/// Apply a local superoperator to every `2^k x 2^k` block of `rho`.
pub(crate) fn apply_superop(rho: &mut [C], d: usize, qs: &[usize], s: &[C]) {
    let (offs, mask) = local_offsets(qs);
    let m = offs.len();
    let mm = m * m;
    let mut buf = vec![C::new(0.0, 0.0); mm];
    for j0 in 0..d {
        if j0 & mask != 0 {
            continue;
        }
        for i0 in 0..d {
            if i0 & mask != 0 {
                continue;
            }
            for r in 0..m {
                for c in 0..m {
                    buf[r * m + c] = rho[(j0 | offs[c]) * d + (i0 | offs[r])];
                }
            }
            for r in 0..m {
                for c in 0..m {
                    let row = &s[(r * m + c) * mm..(r * m + c + 1) * mm];
                    let mut acc = C::new(0.0, 0.0);
                    for t in 0..mm {
                        acc += row[t] * buf[t];
                    }
                    rho[(j0 | offs[c]) * d + (i0 | offs[r])] = acc;
                }
            }
        }
    }
}

/// `rho <- (1-p) rho + p * I_S / d_S (x) Tr_S rho` over the qubits in `qs`.
pub(crate) fn global_depolarize(rho: &mut [C], d: usize, qs: &[usize], p: f64) {
    if p == 0.0 {
        return;
    }
    let (offs, mask) = local_offsets(qs);
    let ds = offs.len() as f64;
    for j0 in 0..d {
        if j0 & mask != 0 {
            continue;
        }
        for i0 in 0..d {
            if i0 & mask != 0 {
                continue;
            }
            let mut tr = C::new(0.0, 0.0);
            for &o in &offs {
                tr += rho[(j0 | o) * d + (i0 | o)];
            }
            for &oc in &offs {
                for &or in &offs {
                    rho[(j0 | oc) * d + (i0 | or)] *= 1.0 - p;
                }
            }
            for &o in &offs {
                rho[(j0 | o) * d + (i0 | o)] += tr * (p / ds);
            }
        }
    }
}
