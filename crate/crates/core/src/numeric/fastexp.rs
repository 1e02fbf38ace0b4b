//! Branch-free `exp` for non-positive arguments, written so the compiler
//! can vectorize loops over it.

use std::f64::consts::LOG2_E;

const LN2_HI: f64 = 6.931_471_803_691_238_164_9e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
/// 1.5 · 2⁵²: adding it rounds to an integer held in the low mantissa bits.
const SHIFT: f64 = 6_755_399_441_055_744.0;

/// Fused only when the target has FMA; the software fallback is far slower
/// than a separate multiply and add.
#[inline(always)]
fn fmadd(a: f64, b: f64, c: f64) -> f64 {
    if cfg!(target_feature = "fma") {
        a.mul_add(b, c)
    } else {
        a * b + c
    }
}

/// `eˣ` for `x ≤ 0`, to a few ulp. Arguments below −708 are clamped there.
/// The degree-13 Taylor polynomial on `|r| ≤ ln 2 / 2` is evaluated in
/// Estrin form to keep the dependency chain short.
#[inline(always)]
pub(crate) fn exp_nonpos(x: f64) -> f64 {
    let x = if x < -708.0 { -708.0 } else { x };
    let t = fmadd(x, LOG2_E, SHIFT);
    let k = t - SHIFT;
    let r = fmadd(-k, LN2_LO, fmadd(-k, LN2_HI, x));
    let r2 = r * r;
    let r4 = r2 * r2;
    let r8 = r4 * r4;
    let p01 = r + 1.0;
    let p23 = fmadd(r, 1.0 / 6.0, 0.5);
    let p45 = fmadd(r, 1.0 / 120.0, 1.0 / 24.0);
    let p67 = fmadd(r, 1.0 / 5_040.0, 1.0 / 720.0);
    let p89 = fmadd(r, 1.0 / 362_880.0, 1.0 / 40_320.0);
    let pab = fmadd(r, 1.0 / 39_916_800.0, 1.0 / 3_628_800.0);
    let pcd = fmadd(r, 1.0 / 6_227_020_800.0, 1.0 / 479_001_600.0);
    let lo = fmadd(fmadd(p67, r2, p45), r4, fmadd(p23, r2, p01));
    let hi = fmadd(pcd, r4, fmadd(pab, r2, p89));
    let p = fmadd(hi, r8, lo);
    let ki = t.to_bits().wrapping_sub(SHIFT.to_bits()) as i64;
    p * f64::from_bits(((ki + 1023) as u64) << 52)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_std_exp() {
        let mut worst = 0.0f64;
        for i in 0..=200_000 {
            let x = -708.0 * i as f64 / 200_000.0;
            let (a, b) = (exp_nonpos(x), x.exp());
            worst = worst.max(((a - b) / b).abs());
        }
        assert!(worst < 1e-14, "{worst}");
        assert_eq!(exp_nonpos(0.0), 1.0);
        assert!(exp_nonpos(-1e9) < 1e-300);
    }
}
