//! Truncated tensor algebra over `R^p` and exact signatures of
//! piecewise-linear paths.
//!
//! A path `X: [0,1] -> R^p` of bounded variation has a signature: the graded
//! sequence of its iterated integrals. Level `d` collects one coefficient per
//! word `(i_1, ..., i_d)` over the alphabet `{1..p}`. For a piecewise-linear
//! path the signature is computed exactly by concatenating the tensor
//! exponentials of the segment increments (Chen's identity), so no quadrature
//! is involved anywhere in this module.
//!
//! Coefficients are stored densely per level, words in lexicographic order
//! within each level and levels concatenated in ascending degree. Every
//! flattened vector produced downstream (design matrices, CSV dumps) uses
//! this order.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SigError {
    #[error("ambient dimension must be at least 1")]
    ZeroDimension,
    #[error("coefficient count for p = {p}, order {order} overflows usize")]
    DimensionOverflow { p: usize, order: usize },
    #[error("path signatures need truncation order >= 1")]
    ZeroOrder,
    #[error(
        "tensor shape mismatch: left is (p = {left_p}, order = {left_order}), \
         right is (p = {right_p}, order = {right_order})"
    )]
    ShapeMismatch {
        left_p: usize,
        left_order: usize,
        right_p: usize,
        right_order: usize,
    },
    #[error("a discrete path needs at least two samples, got {0}")]
    TooFewSamples(usize),
    #[error("got {values} value rows but {times} sample times")]
    SampleCountMismatch { values: usize, times: usize },
    #[error("sample times must be finite and strictly increasing")]
    BadTimes,
    #[error("path values must all be finite")]
    NonFiniteValue,
    #[error("word letter {letter} outside alphabet 1..={p}")]
    LetterOutOfRange { letter: usize, p: usize },
    #[error("word length {len} exceeds truncation order {order}")]
    WordTooLong { len: usize, order: usize },
}

/// Number of coefficients of a signature truncated at `order`:
/// `sum_{d=0}^{order} p^d`.
pub fn sig_dim(p: usize, order: usize) -> Result<usize, SigError> {
    if p == 0 {
        return Err(SigError::ZeroDimension);
    }
    let mut total: usize = 0;
    let mut level: usize = 1;
    for d in 0..=order {
        total = total
            .checked_add(level)
            .ok_or(SigError::DimensionOverflow { p, order })?;
        if d < order {
            level = level
                .checked_mul(p)
                .ok_or(SigError::DimensionOverflow { p, order })?;
        }
    }
    Ok(total)
}

/// A multi-index `(i_1, ..., i_d)` with letters in `{1..p}`, labelling one
/// signature coefficient. The empty word labels the constant level-0 term.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    letters: Vec<usize>,
}

impl Word {
    pub fn new(letters: Vec<usize>) -> Self {
        Word { letters }
    }

    pub fn empty() -> Self {
        Word { letters: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[usize] {
        &self.letters
    }

    /// Flat offset of this word inside its level block:
    /// `sum_j (i_j - 1) p^(d-j)`, the base-`p` value of the shifted letters.
    pub fn offset(&self, p: usize) -> Result<usize, SigError> {
        let mut offset = 0usize;
        for &letter in &self.letters {
            if letter == 0 || letter > p {
                return Err(SigError::LetterOutOfRange { letter, p });
            }
            offset = offset * p + (letter - 1);
        }
        Ok(offset)
    }

    /// Inverse of [`Word::offset`] for a word of length `len`.
    pub fn from_offset(p: usize, len: usize, mut offset: usize) -> Self {
        let mut letters = vec![0usize; len];
        for slot in letters.iter_mut().rev() {
            *slot = offset % p + 1;
            offset /= p;
        }
        Word { letters }
    }
}

impl std::fmt::Display for Word {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (j, letter) in self.letters.iter().enumerate() {
            if j > 0 {
                write!(f, ",")?;
            }
            write!(f, "{letter}")?;
        }
        write!(f, ")")
    }
}

/// An element of the truncated tensor algebra `T^D((R^p))`: one dense
/// coefficient block per level `0..=D`, block `d` holding `p^d` entries in
/// lexicographic word order.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedTensor {
    p: usize,
    order: usize,
    levels: Vec<Vec<f64>>,
}

impl TruncatedTensor {
    /// The unit of the algebra: level 0 equals 1, all higher levels zero.
    pub fn identity(p: usize, order: usize) -> Result<Self, SigError> {
        if p == 0 {
            return Err(SigError::ZeroDimension);
        }
        sig_dim(p, order)?;
        let mut levels = Vec::with_capacity(order + 1);
        let mut size = 1usize;
        for d in 0..=order {
            let mut block = vec![0.0; size];
            if d == 0 {
                block[0] = 1.0;
            }
            levels.push(block);
            size *= p;
        }
        Ok(TruncatedTensor { p, order, levels })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn level(&self, d: usize) -> &[f64] {
        &self.levels[d]
    }

    /// Coefficient of a single word.
    pub fn coeff(&self, word: &Word) -> Result<f64, SigError> {
        if word.len() > self.order {
            return Err(SigError::WordTooLong {
                len: word.len(),
                order: self.order,
            });
        }
        let offset = word.offset(self.p)?;
        Ok(self.levels[word.len()][offset])
    }

    /// All coefficients as one vector: levels ascending, words lexicographic
    /// within each level. Length is `sig_dim(p, order)`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.levels.iter().map(Vec::len).sum());
        for block in &self.levels {
            out.extend_from_slice(block);
        }
        out
    }

    /// Euclidean inner product of two tensors over all stored coefficients.
    pub fn dot(&self, other: &TruncatedTensor) -> Result<f64, SigError> {
        check_shapes(self, other)?;
        let mut acc = 0.0;
        for (a, b) in self.levels.iter().zip(&other.levels) {
            for (x, y) in a.iter().zip(b) {
                acc += x * y;
            }
        }
        Ok(acc)
    }
}

fn check_shapes(a: &TruncatedTensor, b: &TruncatedTensor) -> Result<(), SigError> {
    if a.p != b.p || a.order != b.order {
        return Err(SigError::ShapeMismatch {
            left_p: a.p,
            left_order: a.order,
            right_p: b.p,
            right_order: b.order,
        });
    }
    Ok(())
}

/// Truncated tensor exponential of a single increment: the signature of one
/// linear segment. The coefficient of word `(i_1, ..., i_d)` is
/// `prod_j delta[i_j] / d!`.
pub fn tensor_exp(increment: &[f64], order: usize) -> Result<TruncatedTensor, SigError> {
    let p = increment.len();
    if p == 0 {
        return Err(SigError::ZeroDimension);
    }
    if increment.iter().any(|v| !v.is_finite()) {
        return Err(SigError::NonFiniteValue);
    }
    sig_dim(p, order)?;
    let mut levels = Vec::with_capacity(order + 1);
    levels.push(vec![1.0]);
    for d in 1..=order {
        let prev = &levels[d - 1];
        let mut block = Vec::with_capacity(prev.len() * p);
        let inv = 1.0 / d as f64;
        for &head in prev {
            for &delta in increment {
                block.push(head * delta * inv);
            }
        }
        levels.push(block);
    }
    Ok(TruncatedTensor {
        p,
        order,
        levels,
    })
}

/// Product in the truncated tensor algebra: level `d` of the result is
/// `sum_{j=0}^{d} a_j (x) b_{d-j}`, degrees above the truncation discarded.
pub fn tensor_mul(
    a: &TruncatedTensor,
    b: &TruncatedTensor,
) -> Result<TruncatedTensor, SigError> {
    check_shapes(a, b)?;
    let p = a.p;
    let mut result = TruncatedTensor::identity(p, a.order)?;
    for d in 0..=a.order {
        let block = &mut result.levels[d];
        block.iter_mut().for_each(|c| *c = 0.0);
        for j in 0..=d {
            let left = &a.levels[j];
            let right = &b.levels[d - j];
            let stride = right.len();
            // (u (x) v) lands at offset(u) * p^{|v|} + offset(v).
            for (iu, &cu) in left.iter().enumerate() {
                if cu == 0.0 {
                    continue;
                }
                let base = iu * stride;
                for (iv, &cv) in right.iter().enumerate() {
                    block[base + iv] += cu * cv;
                }
            }
        }
    }
    Ok(result)
}

/// A `p`-dimensional path observed at strictly increasing sample times and
/// interpolated linearly between them. Row `j` of `values` is the position at
/// `times[j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePath {
    values: DMatrix<f64>,
    times: Vec<f64>,
}

impl DiscretePath {
    pub fn new(values: DMatrix<f64>, times: Vec<f64>) -> Result<Self, SigError> {
        let n = values.nrows();
        if n < 2 {
            return Err(SigError::TooFewSamples(n));
        }
        if values.ncols() == 0 {
            return Err(SigError::ZeroDimension);
        }
        if times.len() != n {
            return Err(SigError::SampleCountMismatch {
                values: n,
                times: times.len(),
            });
        }
        if times.iter().any(|t| !t.is_finite())
            || times.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(SigError::BadTimes);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SigError::NonFiniteValue);
        }
        Ok(DiscretePath { values, times })
    }

    /// Builds a path on the uniform grid `0, 1/(n-1), ..., 1`.
    pub fn with_uniform_times(values: DMatrix<f64>) -> Result<Self, SigError> {
        let n = values.nrows();
        if n < 2 {
            return Err(SigError::TooFewSamples(n));
        }
        let step = 1.0 / (n - 1) as f64;
        let times = (0..n).map(|j| j as f64 * step).collect();
        DiscretePath::new(values, times)
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    fn increment(&self, j: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|c| self.values[(j + 1, c)] - self.values[(j, c)])
            .collect()
    }
}

/// Exact truncated signature of the piecewise-linear interpolant: the left
/// fold of [`tensor_mul`] over the [`tensor_exp`] of consecutive increments.
/// Sample times are irrelevant here; only the ordered values matter.
pub fn path_signature(path: &DiscretePath, order: usize) -> Result<TruncatedTensor, SigError> {
    if order == 0 {
        return Err(SigError::ZeroOrder);
    }
    let mut sig = TruncatedTensor::identity(path.dim(), order)?;
    for j in 0..path.n_samples() - 1 {
        let segment = tensor_exp(&path.increment(j), order)?;
        sig = tensor_mul(&sig, &segment)?;
    }
    Ok(sig)
}

/// Preprocessing that defeats the signature's invariances.
///
/// `add_basepoint` prepends a zero observation so the signature sees the
/// path's level, not just its increments. `add_time` appends the sample time
/// as an extra coordinate so the signature depends on the parametrization.
/// When both are requested the zero row is prepended first and carries
/// time-coordinate value 0, while the original rows keep their own sample
/// times in the new channel. The prepended sample time is extrapolated one
/// step backwards to keep the time grid strictly increasing.
pub fn augment_path(path: &DiscretePath, add_basepoint: bool, add_time: bool) -> DiscretePath {
    if !add_basepoint && !add_time {
        return path.clone();
    }
    let n = path.n_samples();
    let p = path.dim();
    let rows = n + usize::from(add_basepoint);
    let cols = p + usize::from(add_time);
    let mut values = DMatrix::zeros(rows, cols);
    let mut times = Vec::with_capacity(rows);
    if add_basepoint {
        let t0 = path.times[0];
        let step = path.times[1] - t0;
        times.push(t0 - step);
        // Basepoint row stays all-zero, including the time channel.
    }
    let base = usize::from(add_basepoint);
    for j in 0..n {
        times.push(path.times[j]);
        for c in 0..p {
            values[(base + j, c)] = path.values[(j, c)];
        }
        if add_time {
            values[(base + j, p)] = path.times[j];
        }
    }
    DiscretePath { values, times }
}

/// All interleavings of `u` and `v` that preserve the internal order of each,
/// with multiplicity (entries may repeat).
pub fn shuffle_product(u: &Word, v: &Word) -> Vec<Word> {
    fn rec(u: &[usize], v: &[usize], acc: &mut Vec<usize>, out: &mut Vec<Word>) {
        if u.is_empty() {
            let mut letters = acc.clone();
            letters.extend_from_slice(v);
            out.push(Word::new(letters));
            return;
        }
        if v.is_empty() {
            let mut letters = acc.clone();
            letters.extend_from_slice(u);
            out.push(Word::new(letters));
            return;
        }
        acc.push(u[0]);
        rec(&u[1..], v, acc, out);
        acc.pop();
        acc.push(v[0]);
        rec(u, &v[1..], acc, out);
        acc.pop();
    }
    let mut out = Vec::new();
    rec(u.letters(), v.letters(), &mut Vec::new(), &mut out);
    out
}
