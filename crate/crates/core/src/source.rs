//! Word streams fed to the counting kernels.
//!
//! Kernels are generic over [`WordSource`] so that intersection and union
//! cardinalities run through the same code as plain counts, combining the
//! two inputs word by word as they are loaded instead of materializing an
//! AND/OR array first.

/// How a source derives each word from its backing slices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Combine {
    /// The words of `first()` as they are.
    Identity,
    /// `first()[i] & second()[i]`
    And,
    /// `first()[i] | second()[i]`
    Or,
}

/// A read-only, indexable stream of 64-bit words.
pub trait WordSource: Copy {
    const COMBINE: Combine;

    fn first(&self) -> &[u64];

    /// Second operand; equal to `first()` for [`Combine::Identity`].
    fn second(&self) -> &[u64];

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Word at `i`. Callers guarantee `i < len()`.
    fn word(&self, i: usize) -> u64;

    /// `N` consecutive words starting at `i`.
    #[inline(always)]
    fn lanes<const N: usize>(&self, i: usize) -> [u64; N] {
        std::array::from_fn(|k| self.word(i + k))
    }
}

/// A plain bitset.
#[derive(Clone, Copy, Debug)]
pub struct Words<'a>(pub &'a [u64]);

/// Word-wise `a & b`. Both slices have the same length.
#[derive(Clone, Copy, Debug)]
pub struct AndWords<'a> {
    pub(crate) a: &'a [u64],
    pub(crate) b: &'a [u64],
}

/// Word-wise `a | b`. Both slices have the same length.
#[derive(Clone, Copy, Debug)]
pub struct OrWords<'a> {
    pub(crate) a: &'a [u64],
    pub(crate) b: &'a [u64],
}

impl<'a> AndWords<'a> {
    /// Panics if the lengths differ; public entry points check first.
    pub fn new(a: &'a [u64], b: &'a [u64]) -> Self {
        assert_eq!(a.len(), b.len());
        Self { a, b }
    }
}

impl<'a> OrWords<'a> {
    pub fn new(a: &'a [u64], b: &'a [u64]) -> Self {
        assert_eq!(a.len(), b.len());
        Self { a, b }
    }
}

impl WordSource for Words<'_> {
    const COMBINE: Combine = Combine::Identity;

    fn first(&self) -> &[u64] {
        self.0
    }

    fn second(&self) -> &[u64] {
        self.0
    }

    #[inline(always)]
    fn len(&self) -> usize {
        self.0.len()
    }

    #[inline(always)]
    fn word(&self, i: usize) -> u64 {
        self.0[i]
    }
}

impl WordSource for AndWords<'_> {
    const COMBINE: Combine = Combine::And;

    fn first(&self) -> &[u64] {
        self.a
    }

    fn second(&self) -> &[u64] {
        self.b
    }

    #[inline(always)]
    fn len(&self) -> usize {
        self.a.len()
    }

    #[inline(always)]
    fn word(&self, i: usize) -> u64 {
        self.a[i] & self.b[i]
    }
}

impl WordSource for OrWords<'_> {
    const COMBINE: Combine = Combine::Or;

    fn first(&self) -> &[u64] {
        self.a
    }

    fn second(&self) -> &[u64] {
        self.b
    }

    #[inline(always)]
    fn len(&self) -> usize {
        self.a.len()
    }

    #[inline(always)]
    fn word(&self, i: usize) -> u64 {
        self.a[i] | self.b[i]
    }
}
