//! Dense 3×3 helpers. Factor order is always (E, P, T).

pub type Mat3 = [[f64; 3]; 3];
pub type Vec3 = [f64; 3];

pub const E: usize = 0;
pub const P: usize = 1;
pub const T: usize = 2;

pub const FACTOR_NAMES: [&str; 3] = ["E", "P", "T"];

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn zeros() -> Mat3 {
    [[0.0; 3]; 3]
}

pub fn matmul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = zeros();
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn transpose(a: &Mat3) -> Mat3 {
    let mut out = zeros();
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

pub fn add(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = *a;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] += b[i][j];
        }
    }
    out
}

/// `a · M a`
pub fn quad_form(m: &Mat3, a: &Vec3) -> f64 {
    (0..3)
        .map(|i| a[i] * (0..3).map(|j| m[i][j] * a[j]).sum::<f64>())
        .sum()
}

pub fn max_abs_diff(a: &Mat3, b: &Mat3) -> f64 {
    let mut m = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

/// Fills the lower triangle from the upper one.
pub fn mirror_upper(mut a: Mat3) -> Mat3 {
    for i in 0..3 {
        for j in 0..i {
            a[i][j] = a[j][i];
        }
    }
    a
}
