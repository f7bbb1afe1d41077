//! Hash families: Carter–Wegman affine maps over a prime field, keyed
//! pseudorandom vertex maps, and 4-wise independent polynomial hashing over
//! GF(2^w).

use std::sync::Arc;

use rand::Rng;

/// `z -> (a z + b) mod p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CwHash {
    pub a: u64,
    pub b: u64,
    pub p: u64,
}

impl CwHash {
    pub fn new(a: u64, b: u64, p: u64) -> Self {
        debug_assert!(a < p && b < p);
        CwHash { a, b, p }
    }

    #[inline]
    pub fn eval(&self, z: u64) -> u64 {
        ((self.a as u128 * z as u128 + self.b as u128) % self.p as u128) as u64
    }
}

#[inline]
pub fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1 % p;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, p);
        }
        base = mul_mod(base, base, p);
        exp >>= 1;
    }
    acc
}

/// Inverse modulo a prime `p`; `a` must be nonzero mod `p`.
pub fn inv_mod(a: u64, p: u64) -> u64 {
    debug_assert!(a % p != 0);
    pow_mod(a, p - 2, p)
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A seeded map `V -> [range)`, standing in for a uniformly random function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeyedHash {
    key: u64,
    range: u64,
}

impl KeyedHash {
    pub fn new(key: u64, range: u64) -> Self {
        assert!(range > 0);
        KeyedHash { key, range }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, range: u64) -> Self {
        Self::new(rng.gen(), range)
    }

    #[inline]
    pub fn eval(&self, x: u32) -> u64 {
        let h = splitmix64(self.key ^ splitmix64(x as u64));
        ((h as u128 * self.range as u128) >> 64) as u64
    }

    pub fn range(&self) -> u64 {
        self.range
    }
}

/// Carry-less product of two polynomials over GF(2) of degree < 64.
fn clmul(a: u64, b: u64) -> u128 {
    let mut acc = 0u128;
    let mut a = a as u128;
    let mut b = b;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        a <<= 1;
        b >>= 1;
    }
    acc
}

fn degree(x: u128) -> i32 {
    127 - x.leading_zeros() as i32
}

fn poly_mod(mut x: u128, f: u128) -> u128 {
    let df = degree(f);
    while x != 0 && degree(x) >= df {
        x ^= f << (degree(x) - df);
    }
    x
}

fn poly_gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let r = poly_mod(a, b);
        a = b;
        b = r;
    }
    a
}

/// Ben-Or irreducibility test for a degree-`w` polynomial with the leading
/// bit set.
fn is_irreducible(f: u128, w: u32) -> bool {
    let mut xp: u128 = 0b10; // x^(2^i) mod f
    for _ in 1..=w / 2 {
        xp = poly_mod(clmul(xp as u64, xp as u64), f);
        if poly_gcd(f, xp ^ 0b10) != 1 {
            return false;
        }
    }
    true
}

fn smallest_irreducible(w: u32) -> u64 {
    let top = 1u128 << w;
    (0..top)
        .map(|low| top | low)
        .find(|&f| is_irreducible(f, w))
        .expect("irreducible polynomials exist in every degree") as u64
}

const TABLE_MAX_WIDTH: u32 = 20;

/// Arithmetic in GF(2^w), `1 <= w <= 62`. Widths up to 20 use log/exp tables.
#[derive(Debug)]
pub struct Gf2w {
    w: u32,
    modulus: u64,
    log: Vec<u32>,
    exp: Vec<u64>,
}

impl Gf2w {
    pub fn new(w: u32) -> Self {
        assert!((1..=62).contains(&w), "field width {w} unsupported");
        let modulus = smallest_irreducible(w);
        let mut f = Gf2w {
            w,
            modulus,
            log: Vec::new(),
            exp: Vec::new(),
        };
        if w <= TABLE_MAX_WIDTH {
            f.build_tables();
        }
        f
    }

    pub fn width(&self) -> u32 {
        self.w
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn size(&self) -> u64 {
        1 << self.w
    }

    fn slow_mul(&self, a: u64, b: u64) -> u64 {
        poly_mod(clmul(a, b), self.modulus as u128) as u64
    }

    fn build_tables(&mut self) {
        let order = self.size() - 1;
        let mut factors = vec![];
        let mut m = order;
        let mut d = 2;
        while d * d <= m {
            if m % d == 0 {
                factors.push(d);
                while m % d == 0 {
                    m /= d;
                }
            }
            d += 1;
        }
        if m > 1 {
            factors.push(m);
        }
        let pow = |g: u64, mut e: u64| {
            let (mut acc, mut base) = (1u64, g);
            while e > 0 {
                if e & 1 == 1 {
                    acc = self.slow_mul(acc, base);
                }
                base = self.slow_mul(base, base);
                e >>= 1;
            }
            acc
        };
        let gen = (2..self.size())
            .find(|&g| factors.iter().all(|&q| pow(g, order / q) != 1))
            .unwrap_or(1);
        let mut exp = vec![0u64; 2 * order as usize];
        let mut log = vec![0u32; self.size() as usize];
        let mut x = 1u64;
        for i in 0..order as usize {
            exp[i] = x;
            exp[i + order as usize] = x;
            log[x as usize] = i as u32;
            x = self.slow_mul(x, gen);
        }
        self.exp = exp;
        self.log = log;
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        if a == 0 || b == 0 {
            return 0;
        }
        if self.exp.is_empty() {
            return self.slow_mul(a, b);
        }
        self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
    }

    /// Discrete log of a nonzero element when tables exist.
    #[inline]
    fn log_of(&self, a: u64) -> Option<u32> {
        (!self.exp.is_empty() && a != 0).then(|| self.log[a as usize])
    }

    #[inline]
    fn exp_of(&self, l: usize) -> u64 {
        self.exp[l]
    }
}

/// `x -> low bits of (c3 x^3 + c2 x^2 + c1 x + c0)` over GF(2^w).
#[derive(Clone, Debug)]
pub struct FourIndepHash {
    field: Arc<Gf2w>,
    coeffs: [u64; 4],
    log_coeffs: [Option<u32>; 4],
    out_bits: u32,
}

impl FourIndepHash {
    pub fn new(field: Arc<Gf2w>, coeffs: [u64; 4], out_bits: u32) -> Self {
        assert!(out_bits <= field.width());
        let mask = field.size() - 1;
        let coeffs = coeffs.map(|c| c & mask);
        let log_coeffs = coeffs.map(|c| field.log_of(c));
        FourIndepHash {
            field,
            coeffs,
            log_coeffs,
            out_bits,
        }
    }

    pub fn random<R: Rng + ?Sized>(field: Arc<Gf2w>, out_bits: u32, rng: &mut R) -> Self {
        let mask = field.size() - 1;
        let coeffs = [(); 4].map(|_| rng.gen::<u64>() & mask);
        Self::new(field, coeffs, out_bits)
    }

    /// The full field value before truncation.
    #[inline]
    pub fn eval_full(&self, x: u64) -> u64 {
        let f = &self.field;
        let [c0, c1, c2, c3] = self.coeffs;
        f.mul(f.mul(f.mul(c3, x) ^ c2, x) ^ c1, x) ^ c0
    }

    #[inline]
    pub fn eval(&self, x: u64) -> u64 {
        self.eval_full(x) & self.out_mask()
    }

    #[inline]
    fn out_mask(&self) -> u64 {
        (1u64 << self.out_bits) - 1
    }

    pub fn out_bits(&self) -> u32 {
        self.out_bits
    }

    pub fn seed_bits(&self) -> u64 {
        4 * self.field.width() as u64
    }

    /// Whether `u` and `v` collide, given their precomputed [`PairPowers`].
    /// Uses that the truncated values agree iff the low bits of
    /// `h(u) xor h(v)` vanish; the constant term cancels.
    #[inline]
    pub fn collides(&self, pp: &PairPowers) -> bool {
        let f = &self.field;
        let mut d = 0u64;
        if let Some(logs) = &pp.logs {
            for (lc, l) in self.log_coeffs[1..].iter().zip(logs) {
                if let (Some(lc), Some(l)) = (lc, l) {
                    d ^= f.exp_of(*lc as usize + *l as usize);
                }
            }
        } else {
            for (c, x) in self.coeffs[1..].iter().zip(&pp.diffs) {
                d ^= f.mul(*c, *x);
            }
        }
        d & self.out_mask() == 0
    }
}

/// `(u ^ v, u^2 ^ v^2, u^3 ^ v^3)` in GF(2^w), plus their logs when the
/// field is tabulated.
#[derive(Clone, Debug)]
pub struct PairPowers {
    diffs: [u64; 3],
    logs: Option<[Option<u32>; 3]>,
}

impl PairPowers {
    pub fn new(field: &Gf2w, u: u64, v: u64) -> Self {
        let pw = |x: u64| {
            let x2 = field.mul(x, x);
            [x, x2, field.mul(x2, x)]
        };
        let (a, b) = (pw(u), pw(v));
        let diffs = [a[0] ^ b[0], a[1] ^ b[1], a[2] ^ b[2]];
        let logs = (!field.exp.is_empty()).then(|| diffs.map(|d| field.log_of(d)));
        PairPowers { diffs, logs }
    }
}
