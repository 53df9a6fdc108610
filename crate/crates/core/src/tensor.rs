//! Dense third-order complex tensors with the multilinear operations the
//! decomposition needs: axis-3 slices, transpose-free mode contraction, and
//! rank-k factor products. Contraction applies no conjugation; adjoints are
//! the caller's job and appear explicitly at call sites.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, Array3};
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    data: Array3<Complex64>,
}

impl Tensor3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Tensor3 {
            data: Array3::zeros(dims),
        }
    }

    pub fn from_array(data: Array3<Complex64>) -> Self {
        Tensor3 { data }
    }

    pub fn dims(&self) -> [usize; 3] {
        let (a, b, c) = self.data.dim();
        [a, b, c]
    }

    pub fn data(&self) -> &Array3<Complex64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array3<Complex64> {
        &mut self.data
    }

    /// The matrix T[.,.,index].
    pub fn slice3(&self, index: usize) -> Result<Array2<Complex64>> {
        let [_, _, n3] = self.dims();
        if index >= n3 {
            return Err(Error::ShapeMismatch {
                op: "slice3",
                detail: format!("axis-3 index {index} out of range {n3}"),
            });
        }
        // The axis-2 view strides over the slab dimension; copy into
        // row-major order so the slice can feed LAPACK directly.
        let view = self.data.index_axis(ndarray::Axis(2), index);
        Ok(Array2::from_shape_fn(view.dim(), |(i, j)| view[[i, j]]))
    }

    /// Multilinear contraction without conjugation:
    /// out[a,b,c] = sum_{i,j,l} T[i,j,l] xa[i,a] xb[j,b] xc[l,c].
    pub fn contract(
        &self,
        xa: &Array2<Complex64>,
        xb: &Array2<Complex64>,
        xc: &Array2<Complex64>,
    ) -> Result<Tensor3> {
        let [n1, n2, n3] = self.dims();
        if xa.nrows() != n1 || xb.nrows() != n2 || xc.nrows() != n3 {
            return Err(Error::ShapeMismatch {
                op: "contract",
                detail: format!(
                    "tensor {n1}x{n2}x{n3} vs factors {}x{}, {}x{}, {}x{}",
                    xa.nrows(),
                    xa.ncols(),
                    xb.nrows(),
                    xb.ncols(),
                    xc.nrows(),
                    xc.ncols()
                ),
            });
        }
        let (a, b, c) = (xa.ncols(), xb.ncols(), xc.ncols());
        let mut out = Array3::<Complex64>::zeros((a, b, c));
        for l in 0..n3 {
            let slab = self.data.index_axis(ndarray::Axis(2), l);
            // xa^T F_l xb, then spread across output slices weighted by xc.
            let g = xa.t().dot(&slab).dot(xb);
            for i3 in 0..c {
                let w = xc[[l, i3]];
                if w != Complex64::new(0.0, 0.0) {
                    let mut dst = out.index_axis_mut(ndarray::Axis(2), i3);
                    dst.zip_mut_with(&g, |d, &s| *d += w * s);
                }
            }
        }
        Ok(Tensor3::from_array(out))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Flat binary layout: four little-endian u64 (n1, n2, n3, n1*n2*n3),
    /// then re/im doubles in row-major (n1, n2, n3) order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let [n1, n2, n3] = self.dims();
        for v in [n1 as u64, n2 as u64, n3 as u64, (n1 * n2 * n3) as u64] {
            w.write_all(&v.to_le_bytes())?;
        }
        for z in self.data.iter() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut header = [0u64; 4];
        for h in header.iter_mut() {
            r.read_exact(&mut word)?;
            *h = u64::from_le_bytes(word);
        }
        let [n1, n2, n3, count] = header.map(|v| v as usize);
        if n1 * n2 * n3 != count {
            return Err(Error::Parse(format!(
                "tensor header inconsistent: {n1}x{n2}x{n3} != {count} entries"
            )));
        }
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut word)?;
            let re = f64::from_le_bytes(word);
            r.read_exact(&mut word)?;
            let im = f64::from_le_bytes(word);
            data.push(Complex64::new(re, im));
        }
        let arr = Array3::from_shape_vec((n1, n2, n3), data)
            .map_err(|e| Error::Parse(format!("tensor shape: {e}")))?;
        Ok(Tensor3::from_array(arr))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_binary(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_binary(std::io::BufReader::new(f))
    }
}

/// Rank-<=k product: out[i1,i2,i3] = sum_n a[i1,n] b[i2,n] c[i3,n].
pub fn factor_product(
    a: &Array2<Complex64>,
    b: &Array2<Complex64>,
    c: &Array2<Complex64>,
) -> Result<Tensor3> {
    let k = a.ncols();
    if b.ncols() != k || c.ncols() != k {
        return Err(Error::ShapeMismatch {
            op: "factor_product",
            detail: format!("column counts {} / {} / {}", k, b.ncols(), c.ncols()),
        });
    }
    let (n1, n2, n3) = (a.nrows(), b.nrows(), c.nrows());
    let mut out = Array3::<Complex64>::zeros((n1, n2, n3));
    for i3 in 0..n3 {
        let mut dst = out.index_axis_mut(ndarray::Axis(2), i3);
        for n in 0..k {
            let w = c[[i3, n]];
            if w == Complex64::new(0.0, 0.0) {
                continue;
            }
            for i1 in 0..n1 {
                let aw = a[[i1, n]] * w;
                for i2 in 0..n2 {
                    dst[[i1, i2]] += aw * b[[i2, n]];
                }
            }
        }
    }
    Ok(Tensor3::from_array(out))
}
