/// Bessel functions of the first kind `J_0(x) … J_{n_max}(x)` for `x ≥ 0`,
/// by Miller's backward recurrence normalized with `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_j_sequence(x: f64, n_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    assert!(x > 0.0 && x.is_finite(), "bessel_j_sequence needs finite x >= 0");
    let mut start = n_max.max(x.ceil() as usize) + 40 + (10.0 * x.sqrt()) as usize;
    if start % 2 == 1 {
        start += 1;
    }
    let mut j_next = 0.0f64;
    let mut j_cur = 1e-300f64;
    let mut norm = 0.0f64;
    for k in (1..=start).rev() {
        let j_prev = 2.0 * k as f64 / x * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        // j_cur now holds the unnormalized J_{k-1}
        let idx = k - 1;
        if idx <= n_max {
            out[idx] = j_cur;
        }
        if idx % 2 == 0 && idx > 0 {
            norm += 2.0 * j_cur;
        }
        if j_cur.abs() > 1e250 {
            let s = 1e-250;
            j_cur *= s;
            j_next *= s;
            norm *= s;
            for v in out.iter_mut().skip(idx) {
                *v *= s;
            }
        }
    }
    norm += j_cur;
    for v in &mut out {
        *v /= norm;
    }
    out
}
