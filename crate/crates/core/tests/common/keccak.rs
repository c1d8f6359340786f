//! Keccak-256 written from the permutation definition, used to check the
//! library's hashing. Round constants come from the LFSR and rotation
//! offsets from the (x, y) walk rather than from tables.

fn rc_bit(t: usize) -> u64 {
    if t.is_multiple_of(255) {
        return 1;
    }
    let mut r: u16 = 1;
    for _ in 0..t % 255 {
        r <<= 1;
        if r & 0x100 != 0 {
            r ^= 0x171;
        }
    }
    (r & 1) as u64
}

fn round_constants() -> [u64; 24] {
    let mut out = [0u64; 24];
    for (ir, rc) in out.iter_mut().enumerate() {
        for j in 0..7 {
            *rc |= rc_bit(j + 7 * ir) << ((1usize << j) - 1);
        }
    }
    out
}

fn rotation_offsets() -> [[u32; 5]; 5] {
    let mut r = [[0u32; 5]; 5];
    let (mut x, mut y) = (1usize, 0usize);
    for t in 0..24u32 {
        r[x][y] = ((t + 1) * (t + 2) / 2) % 64;
        let nx = y;
        let ny = (2 * x + 3 * y) % 5;
        x = nx;
        y = ny;
    }
    r
}

fn permute(a: &mut [[u64; 5]; 5]) {
    let rc = round_constants();
    let rot = rotation_offsets();
    for round_constant in rc {
        // theta
        let mut c = [0u64; 5];
        for x in 0..5 {
            c[x] = a[x][0] ^ a[x][1] ^ a[x][2] ^ a[x][3] ^ a[x][4];
        }
        for x in 0..5 {
            let d = c[(x + 4) % 5] ^ c[(x + 1) % 5].rotate_left(1);
            for lane in a[x].iter_mut() {
                *lane ^= d;
            }
        }
        // rho and pi
        let mut b = [[0u64; 5]; 5];
        for x in 0..5 {
            for y in 0..5 {
                b[y][(2 * x + 3 * y) % 5] = a[x][y].rotate_left(rot[x][y]);
            }
        }
        // chi
        for x in 0..5 {
            for y in 0..5 {
                a[x][y] = b[x][y] ^ (!b[(x + 1) % 5][y] & b[(x + 2) % 5][y]);
            }
        }
        // iota
        a[0][0] ^= round_constant;
    }
}

pub fn keccak256(data: &[u8]) -> [u8; 32] {
    const RATE: usize = 136;
    let mut msg = data.to_vec();
    msg.push(0x01);
    while !msg.len().is_multiple_of(RATE) {
        msg.push(0);
    }
    *msg.last_mut().unwrap() |= 0x80;

    let mut a = [[0u64; 5]; 5];
    for block in msg.chunks(RATE) {
        for (i, lane) in block.chunks(8).enumerate() {
            let v = u64::from_le_bytes(lane.try_into().unwrap());
            a[i % 5][i / 5] ^= v;
        }
        permute(&mut a);
    }
    let mut out = [0u8; 32];
    for i in 0..4 {
        out[i * 8..i * 8 + 8].copy_from_slice(&a[i % 5][i / 5].to_le_bytes());
    }
    out
}

pub fn selector(signature: &str) -> [u8; 4] {
    keccak256(signature.as_bytes())[..4].try_into().unwrap()
}

pub fn selector_u32(signature: &str) -> u32 {
    u32::from_be_bytes(selector(signature))
}

/// keccak-256(label) - 1, as a 32-byte big-endian word.
pub fn slot_minus_one(label: &str) -> [u8; 32] {
    let mut h = keccak256(label.as_bytes());
    for b in h.iter_mut().rev() {
        let (v, borrow) = b.overflowing_sub(1);
        *b = v;
        if !borrow {
            break;
        }
    }
    h
}
