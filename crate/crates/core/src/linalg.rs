//! Strided dense matrix views and a checked GEMM over `matrixmultiply`.

/// Read-only strided view: element `(i, j)` lives at `i * rs + j * cs`.
#[derive(Clone, Copy)]
pub struct MatRef<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
    pub cs: usize,
}

pub struct MatMut<'a> {
    pub data: &'a mut [f64],
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
    pub cs: usize,
}

fn extent(rows: usize, cols: usize, rs: usize, cs: usize) -> usize {
    if rows == 0 || cols == 0 {
        0
    } else {
        (rows - 1) * rs + (cols - 1) * cs + 1
    }
}

impl<'a> MatRef<'a> {
    /// Row-major `rows × cols` view with row stride `ld`.
    pub fn new(data: &'a [f64], rows: usize, cols: usize, ld: usize) -> Self {
        MatRef {
            data,
            rows,
            cols,
            rs: ld,
            cs: 1,
        }
    }

    pub fn t(self) -> Self {
        MatRef {
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
            ..self
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.rs + j * self.cs]
    }
}

impl<'a> MatMut<'a> {
    pub fn new(data: &'a mut [f64], rows: usize, cols: usize, ld: usize) -> Self {
        MatMut {
            data,
            rows,
            cols,
            rs: ld,
            cs: 1,
        }
    }
}

/// `c = alpha * a · b + beta * c`. With `beta == 0` the prior contents of
/// `c` are ignored.
pub fn gemm(alpha: f64, a: MatRef<'_>, b: MatRef<'_>, beta: f64, c: MatMut<'_>) {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    assert_eq!(a.rows, c.rows, "output rows differ");
    assert_eq!(b.cols, c.cols, "output cols differ");
    assert!(extent(a.rows, a.cols, a.rs, a.cs) <= a.data.len());
    assert!(extent(b.rows, b.cols, b.rs, b.cs) <= b.data.len());
    assert!(extent(c.rows, c.cols, c.rs, c.cs) <= c.data.len());
    if c.rows == 0 || c.cols == 0 {
        return;
    }
    if a.cols == 0 {
        for i in 0..c.rows {
            for j in 0..c.cols {
                let x = &mut c.data[i * c.rs + j * c.cs];
                *x = if beta == 0.0 { 0.0 } else { beta * *x };
            }
        }
        return;
    }
    // SAFETY: the extents asserted above keep every strided access inside
    // the borrowed slices; `c` is uniquely borrowed.
    unsafe {
        matrixmultiply::dgemm(
            a.rows,
            a.cols,
            b.cols,
            alpha,
            a.data.as_ptr(),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr(),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.data.as_mut_ptr(),
            c.rs as isize,
            c.cs as isize,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: MatRef<'_>, b: MatRef<'_>) -> alloc::vec::Vec<f64> {
        let mut out = alloc::vec![0.0; a.rows * b.cols];
        for i in 0..a.rows {
            for j in 0..b.cols {
                for k in 0..a.cols {
                    out[i * b.cols + j] += a.get(i, k) * b.get(k, j);
                }
            }
        }
        out
    }

    #[test]
    fn matches_naive_with_transposes() {
        let a: alloc::vec::Vec<f64> = (0..12).map(|x| x as f64 * 0.5 - 2.0).collect();
        let b: alloc::vec::Vec<f64> = (0..12).map(|x| (x as f64).sin()).collect();
        // a: 3x4, b stored 3x4 used as b^T (4x3)
        let am = MatRef::new(&a, 3, 4, 4);
        let bt = MatRef::new(&b, 3, 4, 4).t();
        let mut c = alloc::vec![0.0; 9];
        gemm(1.0, am, bt, 0.0, MatMut::new(&mut c, 3, 3, 3));
        let expect = naive(am, bt);
        for (x, y) in c.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-12);
        }
        gemm(1.0, am, bt, 1.0, MatMut::new(&mut c, 3, 3, 3));
        for (x, y) in c.iter().zip(&expect) {
            assert!((x - 2.0 * y).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_inner_dimension() {
        let mut c = alloc::vec![5.0; 4];
        gemm(1.0, MatRef::new(&[], 2, 0, 0), MatRef::new(&[], 0, 2, 2), 0.0, MatMut::new(&mut c, 2, 2, 2));
        assert_eq!(c, [0.0; 4]);
    }
}
