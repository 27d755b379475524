//! Invariant factors from the determinantal-divisor definition: d_k is the
//! gcd of all k×k minors and s_k = d_k / d_{k−1}.

fn det(m: &[Vec<i128>]) -> i128 {
    // Bareiss fraction-free elimination; every division is exact.
    let n = m.len();
    let mut a = m.to_vec();
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&r| a[r][k] != 0) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    if n < k {
        return Vec::new();
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

pub fn invariant_factors(a: &[Vec<i64>]) -> Vec<i128> {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut factors = Vec::new();
    let mut prev = 1i128;
    for k in 1..=rows.min(cols) {
        let mut d = 0i128;
        for r in subsets(rows, k) {
            for c in subsets(cols, k) {
                let m: Vec<Vec<i128>> = r.iter().map(|&i| c.iter().map(|&j| a[i][j] as i128).collect()).collect();
                d = gcd(d, det(&m));
            }
        }
        if d == 0 {
            break;
        }
        factors.push(d / prev);
        prev = d;
    }
    factors
}
