//! Arithmetic in the finite field F_{p^m}.
//!
//! Elements are represented as polynomials over F_p of degree < m, reduced
//! modulo a monic irreducible modulus of degree m.  A value is stored as its
//! digit vector `[c_0, c_1, ..., c_{m-1}]` (coefficient of X^i at position i,
//! low degree first), always of length exactly m with digits in `0..p`.
//!
//! Every element carries a shared handle to its [`FqCtx`], which fixes the
//! characteristic `p`, the extension degree `m`, and the modulus.  Mixing
//! elements from different contexts is a programming error and panics.
//!
//! Two derived operations matter for the rest of the engine:
//!
//! * `pth_root` / `pe_root`: the Frobenius x ↦ x^p is a field automorphism of
//!   F_{p^m}, so every element has a unique p-th root, namely x^{p^{m-1}}.
//! * [`lucas_binomial`]: binomial coefficients mod p via the digit-wise
//!   product rule C(n, k) ≡ ∏ C(n_i, k_i) mod p over base-p digits.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Errors from field-context construction.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FieldError {
    #[error("characteristic {0} is not prime")]
    NonPrime(u32),
    #[error("extension degree must be at least 1, got {0}")]
    ZeroDegree(u32),
    #[error("modulus must be monic of degree {expected}, got degree {got}")]
    BadModulusDegree { expected: u32, got: u32 },
    #[error("modulus digit {digit} out of range for characteristic {p}")]
    ModulusDigitRange { digit: u32, p: u32 },
    #[error("modulus is reducible over F_{p}")]
    ReducibleModulus { p: u32 },
}

/// Shared description of a finite field F_{p^m}.
#[derive(Debug, PartialEq, Eq)]
pub struct FqCtx {
    p: u32,
    m: u32,
    /// Monic modulus, length m+1, low degree first, leading digit 1.
    modulus: Vec<u32>,
}

impl FqCtx {
    /// Builds the field F_{p^m} with an explicit monic irreducible modulus
    /// (length m+1, low degree first).
    pub fn with_modulus(p: u32, m: u32, modulus: Vec<u32>) -> Result<Arc<Self>, FieldError> {
        if !is_prime(p) {
            return Err(FieldError::NonPrime(p));
        }
        if m == 0 {
            return Err(FieldError::ZeroDegree(m));
        }
        if modulus.len() != m as usize + 1 || *modulus.last().unwrap() != 1 {
            return Err(FieldError::BadModulusDegree {
                expected: m,
                got: modulus.len().saturating_sub(1) as u32,
            });
        }
        if let Some(&digit) = modulus.iter().find(|&&d| d >= p) {
            return Err(FieldError::ModulusDigitRange { digit, p });
        }
        if !is_irreducible(&modulus, p) {
            return Err(FieldError::ReducibleModulus { p });
        }
        Ok(Arc::new(FqCtx { p, m, modulus }))
    }

    /// Builds F_{p^m} with the default modulus: the first monic irreducible
    /// X^m + Σ c_i X^i found by counting the constant-to-top digit vector
    /// `(c_0, ..., c_{m-1})` as a base-p integer from 0 upward.  This makes
    /// serialized instances reproducible without spelling the modulus out.
    pub fn new(p: u32, m: u32) -> Result<Arc<Self>, FieldError> {
        if !is_prime(p) {
            return Err(FieldError::NonPrime(p));
        }
        if m == 0 {
            return Err(FieldError::ZeroDegree(m));
        }
        let total = (p as u64).pow(m);
        for n in 0..total {
            let mut modulus = Vec::with_capacity(m as usize + 1);
            let mut rest = n;
            for _ in 0..m {
                modulus.push((rest % p as u64) as u32);
                rest /= p as u64;
            }
            modulus.push(1);
            if is_irreducible(&modulus, p) {
                return Ok(Arc::new(FqCtx { p, m, modulus }));
            }
        }
        unreachable!("an irreducible polynomial of every degree exists over F_p")
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// The modulus digits, low degree first, length m+1.
    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    /// Number of field elements p^m.
    pub fn size(&self) -> u64 {
        (self.p as u64).pow(self.m)
    }

    /// The zero element.
    pub fn zero(self: &Arc<Self>) -> Fq {
        Fq {
            digits: vec![0; self.m as usize],
            ctx: Arc::clone(self),
        }
    }

    /// The multiplicative identity.
    pub fn one(self: &Arc<Self>) -> Fq {
        self.from_u32(1)
    }

    /// Embeds an integer via reduction mod p into the prime subfield.
    pub fn from_u32(self: &Arc<Self>, n: u32) -> Fq {
        let mut digits = vec![0; self.m as usize];
        digits[0] = n % self.p;
        Fq {
            digits,
            ctx: Arc::clone(self),
        }
    }

    /// Builds an element from its digit vector (low degree first).  Shorter
    /// vectors are zero-padded; digits are reduced mod p.  Vectors longer
    /// than m are rejected.
    pub fn from_digits(self: &Arc<Self>, digits: &[u32]) -> Option<Fq> {
        if digits.len() > self.m as usize {
            return None;
        }
        let mut v = vec![0; self.m as usize];
        for (i, &d) in digits.iter().enumerate() {
            v[i] = d % self.p;
        }
        Some(Fq {
            digits: v,
            ctx: Arc::clone(self),
        })
    }

    /// Enumerates all field elements in the deterministic digit-counting
    /// order: the element with digits `(c_0, ..., c_{m-1})` appears at index
    /// Σ c_i p^i.  Index 0 is zero, index 1 is one.
    pub fn elements(self: &Arc<Self>) -> impl Iterator<Item = Fq> + '_ {
        let ctx = Arc::clone(self);
        (0..self.size()).map(move |n| {
            let mut digits = Vec::with_capacity(ctx.m as usize);
            let mut rest = n;
            for _ in 0..ctx.m {
                digits.push((rest % ctx.p as u64) as u32);
                rest /= ctx.p as u64;
            }
            Fq {
                digits,
                ctx: Arc::clone(&ctx),
            }
        })
    }
}

/// An element of F_{p^m}.
#[derive(Clone, PartialEq, Eq)]
pub struct Fq {
    digits: Vec<u32>,
    ctx: Arc<FqCtx>,
}

impl fmt::Debug for Fq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fq{:?}", self.digits)
    }
}

impl fmt::Display for Fq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ctx.m == 1 {
            write!(f, "{}", self.digits[0])
        } else {
            write!(
                f,
                "[{}]",
                self.digits
                    .iter()
                    .map(|d| d.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            )
        }
    }
}

impl Fq {
    pub fn ctx(&self) -> &Arc<FqCtx> {
        &self.ctx
    }

    /// Digit vector, low degree first, length m.
    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    pub fn is_zero(&self) -> bool {
        self.digits.iter().all(|&d| d == 0)
    }

    pub fn is_one(&self) -> bool {
        self.digits[0] == 1 && self.digits[1..].iter().all(|&d| d == 0)
    }

    fn check_ctx(&self, other: &Fq) {
        assert!(
            self.ctx == other.ctx,
            "mixed field contexts: F_{}^{} vs F_{}^{}",
            self.ctx.p,
            self.ctx.m,
            other.ctx.p,
            other.ctx.m
        );
    }

    pub fn add(&self, other: &Fq) -> Fq {
        self.check_ctx(other);
        let p = self.ctx.p;
        let digits = self
            .digits
            .iter()
            .zip(&other.digits)
            .map(|(&a, &b)| (a + b) % p)
            .collect();
        Fq {
            digits,
            ctx: Arc::clone(&self.ctx),
        }
    }

    pub fn neg(&self) -> Fq {
        let p = self.ctx.p;
        let digits = self.digits.iter().map(|&a| (p - a) % p).collect();
        Fq {
            digits,
            ctx: Arc::clone(&self.ctx),
        }
    }

    pub fn sub(&self, other: &Fq) -> Fq {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Fq) -> Fq {
        self.check_ctx(other);
        let p = self.ctx.p as u64;
        let m = self.ctx.m as usize;
        // Schoolbook product, then reduction modulo the monic modulus.
        let mut prod = vec![0u64; 2 * m - 1];
        for (i, &a) in self.digits.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in other.digits.iter().enumerate() {
                prod[i + j] = (prod[i + j] + a as u64 * b as u64) % p;
            }
        }
        for k in (m..2 * m - 1).rev() {
            let c = prod[k];
            if c == 0 {
                continue;
            }
            prod[k] = 0;
            // X^k = X^{k-m} * (X^m) = -X^{k-m} * (modulus - X^m)
            for (i, &md) in self.ctx.modulus[..m].iter().enumerate() {
                let sub = c * md as u64 % p;
                prod[k - m + i] = (prod[k - m + i] + p - sub) % p;
            }
        }
        Fq {
            digits: prod[..m].iter().map(|&d| d as u32).collect(),
            ctx: Arc::clone(&self.ctx),
        }
    }

    /// Raises to a nonnegative power by square-and-multiply.
    pub fn pow(&self, mut n: u64) -> Fq {
        let mut base = self.clone();
        let mut acc = self.ctx.one();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            n >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self) -> Option<Fq> {
        if self.is_zero() {
            return None;
        }
        // x^{p^m - 2}: cheap and correct at this field size.
        Some(self.pow(self.ctx.size() - 2))
    }

    /// The unique p-th root (inverse Frobenius): x^{p^{m-1}}.
    pub fn pth_root(&self) -> Fq {
        let p = self.ctx.p as u64;
        let m = self.ctx.m;
        self.pow(p.pow(m - 1))
    }

    /// The unique p^e-th root, by iterating the p-th root e times.
    pub fn pe_root(&self, e: u32) -> Fq {
        let mut acc = self.clone();
        for _ in 0..e {
            acc = acc.pth_root();
        }
        acc
    }
}

/// Binomial coefficient C(n, k) modulo the prime p, computed digit-wise:
/// C(n, k) ≡ ∏ C(n_i, k_i) mod p over the base-p digits n_i, k_i.
pub fn lucas_binomial(n: u64, k: u64, p: u32) -> u32 {
    assert!(is_prime(p), "lucas_binomial requires a prime modulus");
    if k > n {
        return 0;
    }
    let p64 = p as u64;
    let mut n = n;
    let mut k = k;
    let mut acc = 1u64;
    while k > 0 || n > 0 {
        let nd = n % p64;
        let kd = k % p64;
        if kd > nd {
            return 0;
        }
        acc = acc * small_binomial(nd as u32, kd as u32, p) as u64 % p64;
        n /= p64;
        k /= p64;
    }
    acc as u32
}

/// C(n, k) mod p for digits 0 <= k <= n < p, by the Pascal recurrence.
fn small_binomial(n: u32, k: u32, p: u32) -> u32 {
    let mut row = vec![0u64; n as usize + 1];
    row[0] = 1;
    for i in 1..=n as usize {
        for j in (1..=i).rev() {
            row[j] = (row[j] + row[j - 1]) % p as u64;
        }
    }
    row[k as usize] as u32
}

/// Primality by trial division (desk-scale characteristics).
pub fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u32;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Irreducibility of a monic polynomial over F_p by trial division against
/// every monic polynomial of degree 1..=deg/2.
fn is_irreducible(modulus: &[u32], p: u32) -> bool {
    let deg = modulus.len() - 1;
    if deg == 0 {
        return false;
    }
    if deg == 1 {
        return true;
    }
    for d in 1..=deg / 2 {
        let count = (p as u64).pow(d as u32);
        for n in 0..count {
            let mut div = Vec::with_capacity(d + 1);
            let mut rest = n;
            for _ in 0..d {
                div.push((rest % p as u64) as u32);
                rest /= p as u64;
            }
            div.push(1);
            if poly_divides(&div, modulus, p) {
                return false;
            }
        }
    }
    true
}

/// Whether monic `div` divides `poly` exactly over F_p.
fn poly_divides(div: &[u32], poly: &[u32], p: u32) -> bool {
    let p = p as u64;
    let mut rem: Vec<u64> = poly.iter().map(|&c| c as u64).collect();
    let dd = div.len() - 1;
    while rem.len() > dd {
        let lead = *rem.last().unwrap();
        let pos = rem.len() - 1 - dd;
        if lead != 0 {
            for (i, &c) in div.iter().enumerate() {
                let sub = lead * c as u64 % p;
                rem[pos + i] = (rem[pos + i] + p - sub) % p;
            }
        }
        rem.pop();
    }
    rem.iter().all(|&c| c == 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_modulus_is_deterministic() {
        // F_4: x^2, x^2+1=(x+1)^2, x^2+x=x(x+1) are reducible; x^2+x+1 is the
        // first irreducible in counting order.
        let f4 = FqCtx::new(2, 2).unwrap();
        assert_eq!(f4.modulus(), &[1, 1, 1]);
        // F_9: x^2 reducible, x^2+1 irreducible (-1 is a non-residue mod 3).
        let f9 = FqCtx::new(3, 2).unwrap();
        assert_eq!(f9.modulus(), &[1, 0, 1]);
    }

    #[test]
    fn reducible_modulus_rejected() {
        // x^2 + 1 = (x+1)^2 over F_2.
        assert_eq!(
            FqCtx::with_modulus(2, 2, vec![1, 0, 1]).unwrap_err(),
            FieldError::ReducibleModulus { p: 2 }
        );
    }

    #[test]
    fn non_prime_characteristic_rejected() {
        assert_eq!(FqCtx::new(4, 1).unwrap_err(), FieldError::NonPrime(4));
        assert_eq!(FqCtx::new(1, 1).unwrap_err(), FieldError::NonPrime(1));
    }

    #[test]
    fn f4_multiplication_table() {
        // In F_4 = F_2[t]/(t^2+t+1): t * t = t + 1, t * (t+1) = 1.
        let f4 = FqCtx::new(2, 2).unwrap();
        let t = f4.from_digits(&[0, 1]).unwrap();
        let t1 = f4.from_digits(&[1, 1]).unwrap();
        assert_eq!(t.mul(&t), t1);
        assert_eq!(t.mul(&t1), f4.one());
        assert_eq!(t.inv().unwrap(), t1);
    }

    #[test]
    fn frobenius_root_roundtrip_all_elements() {
        for (p, m) in [(2, 1), (2, 2), (3, 1), (3, 2), (5, 2)] {
            let ctx = FqCtx::new(p, m).unwrap();
            for x in ctx.elements() {
                let r = x.pth_root();
                assert_eq!(r.pow(p as u64), x, "p-th root failed in F_{p}^{m}");
            }
        }
    }

    #[test]
    fn pe_root_undoes_pe_power() {
        let f9 = FqCtx::new(3, 2).unwrap();
        for x in f9.elements() {
            let y = x.pow(9); // p^e with e = 2
            assert_eq!(y.pe_root(2), x);
        }
    }

    #[test]
    fn inverse_works_for_all_nonzero() {
        for (p, m) in [(2, 2), (3, 2), (5, 1)] {
            let ctx = FqCtx::new(p, m).unwrap();
            for x in ctx.elements().skip(1) {
                assert_eq!(x.mul(&x.inv().unwrap()), ctx.one());
            }
        }
    }

    #[test]
    fn lucas_small_values() {
        // C(4, 2) = 6 ≡ 0 mod 2, ≡ 0 mod 3, ≡ 1 mod 5.
        assert_eq!(lucas_binomial(4, 2, 2), 0);
        assert_eq!(lucas_binomial(4, 2, 3), 0);
        assert_eq!(lucas_binomial(4, 2, 5), 1);
        // C(p^e, j) ≡ 0 mod p for 0 < j < p^e.
        for j in 1..8 {
            assert_eq!(lucas_binomial(8, j, 2), 0);
        }
        for j in 1..9 {
            assert_eq!(lucas_binomial(9, j, 3), 0);
        }
        assert_eq!(lucas_binomial(8, 0, 2), 1);
        assert_eq!(lucas_binomial(8, 8, 2), 1);
    }

    #[test]
    fn element_enumeration_order_is_stable() {
        let f4 = FqCtx::new(2, 2).unwrap();
        let order: Vec<Vec<u32>> = f4.elements().map(|x| x.digits().to_vec()).collect();
        assert_eq!(
            order,
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![1, 1]],
            "digit-counting order: 0, 1, t, t+1"
        );
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn field_axioms_f4(a in 0u64..4, b in 0u64..4, c in 0u64..4) {
                let ctx = FqCtx::new(2, 2).unwrap();
                let els: Vec<Fq> = ctx.elements().collect();
                let (x, y, z) = (&els[a as usize], &els[b as usize], &els[c as usize]);
                prop_assert_eq!(x.add(y), y.add(x));
                prop_assert_eq!(x.mul(y), y.mul(x));
                prop_assert_eq!(x.add(&y.add(z)), x.add(y).add(z));
                prop_assert_eq!(x.mul(&y.mul(z)), x.mul(y).mul(z));
                prop_assert_eq!(x.mul(&y.add(z)), x.mul(y).add(&x.mul(z)));
            }

            #[test]
            fn frobenius_is_additive_f9(a in 0u64..9, b in 0u64..9) {
                let ctx = FqCtx::new(3, 2).unwrap();
                let els: Vec<Fq> = ctx.elements().collect();
                let (x, y) = (&els[a as usize], &els[b as usize]);
                prop_assert_eq!(x.add(y).pow(3), x.pow(3).add(&y.pow(3)));
            }
        }
    }
}
