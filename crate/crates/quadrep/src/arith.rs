//! Small exact integer helpers shared by the enumeration and sieve code.

/// Floor square root of a `u128`, exact. Newton from a float seed.
pub fn isqrt_u128(v: u128) -> u128 {
    if v == 0 {
        return 0;
    }
    let mut x = (v as f64).sqrt() as u128 + 1;
    loop {
        let y = (x + v / x) / 2;
        if y >= x {
            break;
        }
        x = y;
    }
    // float seed can land one off on either side
    while x * x > v {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= v {
        x += 1;
    }
    x
}

/// Exact square root of a `u128`, or `None` if not a perfect square.
pub fn exact_sqrt_u128(v: u128) -> Option<u128> {
    let r = isqrt_u128(v);
    (r * r == v).then_some(r)
}

/// Sieve of Eratosthenes up to and including `limit`.
pub fn primes_up_to(limit: i64) -> Vec<i64> {
    if limit < 2 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut sieve = vec![true; n + 1];
    sieve[0] = false;
    sieve[1] = false;
    let mut p = 2usize;
    while p * p <= n {
        if sieve[p] {
            let mut m = p * p;
            while m <= n {
                sieve[m] = false;
                m += p;
            }
        }
        p += 1;
    }
    (2..=n).filter(|&i| sieve[i]).map(|i| i as i64).collect()
}

/// True when no square of a prime divides `x`.
pub fn is_squarefree(mut x: i64) -> bool {
    let mut p = 2i64;
    while p * p <= x {
        if x % p == 0 {
            x /= p;
            if x % p == 0 {
                return false;
            }
        }
        p += 1;
    }
    true
}
