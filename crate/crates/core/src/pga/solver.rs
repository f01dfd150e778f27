use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{solve_checked, DenseMatrix};
use crate::pga::kernel::PgaKernel;
use crate::scalar::{cimag, cis, cone, czero, Real};

/// Largest condition number accepted for the scattering systems.
pub const MAX_CONDITION: f64 = 1e12;

/// Side the incident photon comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Incidence {
    #[default]
    FromLeft,
    FromRight,
}

/// Output of an analytic solve. `u_plus`/`u_minus` are velocity corrected,
/// so `|t|^2 + |r|^2 + |u_+|^2 + |u_-|^2 = 1` expresses flux conservation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringAmplitudes<T> {
    pub t: Complex<T>,
    pub r: Complex<T>,
    pub u_plus: Complex<T>,
    pub u_minus: Complex<T>,
    /// Right-moving amplitude `R_j` in region `j` (left of kernel site `j`,
    /// `j = S` is right of the last site).
    pub region_right: Vec<Complex<T>>,
    pub region_left: Vec<Complex<T>>,
    /// Photon amplitude at the kernel sites, `P+_{R+L}(n)`.
    pub p_plus: Vec<Complex<T>>,
    /// Jump of the right-moving amplitude at the kernel sites, `P-(n)`.
    pub p_minus: Vec<Complex<T>>,
    pub sites: Vec<i64>,
    pub photon_velocity: T,
    pub doublon_velocity: T,
    pub flux_residual: T,
}

impl<T: Real> ScatteringAmplitudes<T> {
    pub fn transmission(&self) -> T {
        self.t.norm_sqr()
    }
    pub fn reflection(&self) -> T {
        self.r.norm_sqr()
    }
    pub fn forward_doublon(&self) -> T {
        self.u_plus.norm_sqr()
    }
    pub fn backward_doublon(&self) -> T {
        self.u_minus.norm_sqr()
    }
    /// `1 - (|t|^2 + |r|^2 + |u_+|^2 + |u_-|^2)`.
    pub fn emitter_proxy(&self) -> T {
        T::one()
            - (self.transmission() + self.reflection() + self.forward_doublon()
                + self.backward_doublon())
    }
}

/// Signed flux balance `v_k (|t|^2 + |r|^2) + v_K (|u_+|^2 + |u_-|^2) - v_k`
/// written with the uncorrected doublon amplitudes.
pub fn flux_check<T: Real>(amps: &ScatteringAmplitudes<T>) -> T {
    let vk = amps.photon_velocity;
    let vd = amps.doublon_velocity;
    let corr = vd / vk;
    let raw = (amps.u_plus.norm_sqr() + amps.u_minus.norm_sqr()) / corr;
    vk * (amps.t.norm_sqr() + amps.r.norm_sqr()) + vd * raw - vk
}

/// Effective interaction `W(n, n')` mediated by the doublon continuum.
fn interaction_matrix<T: Real>(k: &PgaKernel<T>) -> DenseMatrix<T> {
    let s = k.sites.len();
    let kr = k.resonant_momentum;
    let half = T::lit(0.5);
    let pref = -cimag::<T>() / k.doublon_velocity;
    let mut w = DenseMatrix::zeros(s);
    for i in 0..s {
        for j in 0..s {
            let d = T::from_i64(k.sites[i] - k.sites[j]).unwrap();
            let v = if i > j {
                k.forward[i].conj() * k.forward[j] * cis(kr * d * half)
            } else if i < j {
                k.backward[i].conj() * k.backward[j] * cis(-kr * d * half)
            } else {
                cone::<T>() * ((k.forward[i].norm_sqr() + k.backward[i].norm_sqr()) * half)
            };
            w.set(i, j, pref * v);
        }
    }
    w
}

fn doublon_outputs<T: Real>(k: &PgaKernel<T>, c0: &[Complex<T>]) -> (Complex<T>, Complex<T>) {
    let half = T::lit(0.5);
    let kr = k.resonant_momentum;
    let pref = -cimag::<T>() / k.doublon_velocity;
    let corr = (k.doublon_velocity / k.photon_velocity).sqrt();
    let mut up = czero();
    let mut um = czero();
    for (i, &n) in k.sites.iter().enumerate() {
        let x = T::from_i64(n).unwrap() * kr * half;
        up += cis(-x) * k.forward[i] * c0[i];
        um += cis(x) * k.backward[i] * c0[i];
    }
    (pref * up * corr, pref * um * corr)
}

fn finish<T: Real>(
    k: &PgaKernel<T>,
    t: Complex<T>,
    r: Complex<T>,
    c0: Vec<Complex<T>>,
    jumps: Vec<Complex<T>>,
    region_right: Vec<Complex<T>>,
    region_left: Vec<Complex<T>>,
) -> ScatteringAmplitudes<T> {
    let (u_plus, u_minus) = doublon_outputs(k, &c0);
    let mut amps = ScatteringAmplitudes {
        t,
        r,
        u_plus,
        u_minus,
        region_right,
        region_left,
        p_plus: c0,
        p_minus: jumps,
        sites: k.sites.clone(),
        photon_velocity: k.photon_velocity,
        doublon_velocity: k.doublon_velocity,
        flux_residual: T::zero(),
    };
    amps.flux_residual = flux_check(&amps);
    amps
}

/// Momentum-space (Lippmann-Schwinger) formulation: solves
/// `(1 - G_1 W) C = psi_in` on the kernel sites with the exact lattice
/// propagator `G_1(m) = -(i / v_k) e^{i k0 |m|}`.
pub fn solve_momentum_space<T: Real>(
    kernel: &PgaKernel<T>,
    incidence: Incidence,
) -> Result<ScatteringAmplitudes<T>> {
    let s = kernel.sites.len();
    let k0 = kernel.k0;
    let vk = kernel.photon_velocity;
    let g1 = -cimag::<T>() / vk;
    let w = interaction_matrix(kernel);
    let dir = match incidence {
        Incidence::FromLeft => T::one(),
        Incidence::FromRight => -T::one(),
    };
    let x = |i: usize| T::from_i64(kernel.sites[i]).unwrap();
    let mut a = DenseMatrix::identity(s);
    for i in 0..s {
        for l in 0..s {
            let g = g1 * cis(k0 * (x(i) - x(l)).abs());
            for j in 0..s {
                let v = g * w.get(l, j);
                a.add(i, j, -v);
            }
        }
    }
    let rhs: Vec<Complex<T>> = (0..s).map(|i| cis(dir * k0 * x(i))).collect();
    let c0 = solve_checked(&a, &rhs, T::lit(MAX_CONDITION))?;
    let src = w.matvec(&c0);
    let mut t = cone::<T>();
    let mut r = czero::<T>();
    for i in 0..s {
        t += g1 * cis(-dir * k0 * x(i)) * src[i];
        r += g1 * cis(dir * k0 * x(i)) * src[i];
    }
    // Region amplitudes from the cumulative sums of the sources.
    let mut right = vec![czero(); s + 1];
    let mut left = vec![czero(); s + 1];
    let (mut acc_r, mut acc_l) = match incidence {
        Incidence::FromLeft => (cone::<T>(), czero::<T>()),
        Incidence::FromRight => (czero::<T>(), cone::<T>()),
    };
    right[0] = acc_r;
    for i in 0..s {
        acc_r += g1 * cis(-k0 * x(i)) * src[i];
        right[i + 1] = acc_r;
    }
    left[s] = acc_l;
    for i in (0..s).rev() {
        acc_l += g1 * cis(k0 * x(i)) * src[i];
        left[i] = acc_l;
    }
    let jumps: Vec<Complex<T>> = src.iter().map(|v| g1 * v).collect();
    Ok(finish(kernel, t, r, c0, jumps, right, left))
}

/// Real-space formulation: piecewise plane waves `R_j e^{ikn} + L_j e^{-ikn}`
/// between kernel sites, matched by the jump conditions
/// `(R_{j+1} - R_j) e^{ik n_j} = (L_j - L_{j+1}) e^{-ik n_j} = -(i/v_k) sum W phi`
/// with the photon amplitude at a kernel site the average of both sides.
/// Unknowns are `R_1..R_S` and `L_0..L_{S-1}`; the incident wave fixes
/// `R_0 = 1, L_S = 0` (or the mirror image for incidence from the right).
pub fn solve_real_space<T: Real>(
    kernel: &PgaKernel<T>,
    incidence: Incidence,
) -> Result<ScatteringAmplitudes<T>> {
    let s = kernel.sites.len();
    let k0 = kernel.k0;
    let vk = kernel.photon_velocity;
    let g1 = -cimag::<T>() / vk;
    let w = interaction_matrix(kernel);
    let half = T::lit(0.5);
    let x = |i: usize| T::from_i64(kernel.sites[i]).unwrap();
    let (r0, ls) = match incidence {
        Incidence::FromLeft => (cone::<T>(), czero::<T>()),
        Incidence::FromRight => (czero::<T>(), cone::<T>()),
    };
    // Unknown layout: R_j (j = 1..=S) at index j - 1, L_j (j = 0..S-1) at S + j.
    let ri = |j: usize| j - 1;
    let li = |j: usize| s + j;
    let n = 2 * s;
    let mut a = DenseMatrix::zeros(n);
    let mut b = vec![czero(); n];
    // phi_l as a linear form over unknowns plus a constant.
    let phi_terms = |l: usize| -> (Vec<(usize, Complex<T>)>, Complex<T>) {
        let e_p = cis(k0 * x(l)) * half;
        let e_m = cis(-k0 * x(l)) * half;
        let mut terms = Vec::with_capacity(4);
        let mut constant = czero();
        if l == 0 {
            constant += r0 * e_p;
        } else {
            terms.push((ri(l), e_p));
        }
        terms.push((ri(l + 1), e_p));
        terms.push((li(l), e_m));
        if l + 1 == s {
            constant += ls * e_m;
        } else {
            terms.push((li(l + 1), e_m));
        }
        (terms, constant)
    };
    let phis: Vec<_> = (0..s).map(phi_terms).collect();
    for j in 0..s {
        // Row j: (R_{j+1} - R_j) e^{ik n_j} - g1 sum_l W_jl phi_l = 0.
        // Row S + j: (L_j - L_{j+1}) e^{-ik n_j} - g1 sum_l W_jl phi_l = 0.
        let ep = cis(k0 * x(j));
        let em = cis(-k0 * x(j));
        let row_r = j;
        let row_l = s + j;
        a.add(row_r, ri(j + 1), ep);
        if j == 0 {
            b[row_r] += r0 * ep;
        } else {
            a.add(row_r, ri(j), -ep);
        }
        a.add(row_l, li(j), em);
        if j + 1 == s {
            b[row_l] += ls * em;
        } else {
            a.add(row_l, li(j + 1), -em);
        }
        for (l, (terms, constant)) in phis.iter().enumerate() {
            let coef = g1 * w.get(j, l);
            for &(col, v) in terms {
                a.add(row_r, col, -coef * v);
                a.add(row_l, col, -coef * v);
            }
            b[row_r] += coef * constant;
            b[row_l] += coef * constant;
        }
    }
    let sol = solve_checked(&a, &b, T::lit(MAX_CONDITION))?;
    let mut right = vec![r0; s + 1];
    let mut left = vec![ls; s + 1];
    for j in 1..=s {
        right[j] = sol[ri(j)];
    }
    for j in 0..s {
        left[j] = sol[li(j)];
    }
    let c0: Vec<Complex<T>> = (0..s)
        .map(|l| {
            (right[l] + right[l + 1]) * cis(k0 * x(l)) * half
                + (left[l] + left[l + 1]) * cis(-k0 * x(l)) * half
        })
        .collect();
    let jumps: Vec<Complex<T>> = (0..s)
        .map(|j| (right[j + 1] - right[j]) * cis(k0 * x(j)))
        .collect();
    let (t, r) = match incidence {
        Incidence::FromLeft => (right[s], left[0]),
        Incidence::FromRight => (left[0], right[s]),
    };
    Ok(finish(kernel, t, r, c0, jumps, right, left))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::band::doublon_shape;
    use crate::lattice::{EmitterSpec, LatticeSpec};
    use crate::pga::kernel::build_kernel;
    use std::f64::consts::PI;

    fn lattice() -> LatticeSpec<f64> {
        LatticeSpec::new(200, 1.0, 6.0).unwrap()
    }

    fn rga(g: f64, phi: f64) -> EmitterSpec<f64> {
        EmitterSpec::giant(100, -6.633, &[(-1, g, -phi), (0, g, 0.0), (1, g, phi)]).unwrap()
    }

    #[test]
    fn small_atom_matches_closed_form() {
        let lat = lattice();
        let e = EmitterSpec::small_atom(100, 0.4, -6.633);
        let k = build_kernel(&e, PI / 2.0, &lat, 0).unwrap();
        let u0 = doublon_shape(k.resonant_momentum, &lat).unwrap().normalization;
        let gamma = 2.0 * 0.16 * u0 * u0 / (k.photon_velocity * k.doublon_velocity);
        for a in [
            solve_real_space(&k, Incidence::FromLeft).unwrap(),
            solve_momentum_space(&k, Incidence::FromLeft).unwrap(),
        ] {
            assert!((a.transmission() - 1.0 / (1.0 + gamma).powi(2)).abs() < 1e-12);
            assert!((a.reflection() - (gamma / (1.0 + gamma)).powi(2)).abs() < 1e-12);
            let u = gamma / (1.0 + gamma).powi(2);
            assert!((a.forward_doublon() - u).abs() < 1e-12);
            assert!((a.backward_doublon() - u).abs() < 1e-12);
        }
    }

    #[test]
    fn formulations_agree_and_conserve_flux() {
        let lat = lattice();
        for (g, phi) in [(0.3, 0.1 * PI), (0.5, -0.2 * PI), (0.8, 0.7)] {
            for cutoff in [0, 3, 6] {
                let k = build_kernel(&rga(g, phi), PI / 2.0, &lat, cutoff).unwrap();
                for inc in [Incidence::FromLeft, Incidence::FromRight] {
                    let a = solve_real_space(&k, inc).unwrap();
                    let b = solve_momentum_space(&k, inc).unwrap();
                    assert!((a.t - b.t).norm() < 1e-10);
                    assert!((a.r - b.r).norm() < 1e-10);
                    assert!((a.u_plus - b.u_plus).norm() < 1e-10);
                    assert!((a.u_minus - b.u_minus).norm() < 1e-10);
                    for (x, y) in a.region_left.iter().zip(&b.region_left) {
                        assert!((x - y).norm() < 1e-10);
                    }
                    assert!(a.flux_residual.abs() < 1e-10);
                    assert!(b.flux_residual.abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn reference_values() {
        // Values from an independent dense implementation of the same model.
        let lat = lattice();
        let k = build_kernel(&rga(0.3, 0.1 * PI), PI / 2.0, &lat, 3).unwrap();
        let a = solve_real_space(&k, Incidence::FromLeft).unwrap();
        assert!((a.transmission() - 0.3276641275030527).abs() < 1e-9);
        assert!((a.reflection() - 0.0012098073951841957).abs() < 1e-9);
        assert!((a.forward_doublon() - 0.6705861945001038).abs() < 1e-9);
        assert!((a.backward_doublon() - 0.0005398706016645179).abs() < 1e-9);
    }

    #[test]
    fn mirror_image_swaps_channels() {
        let lat = lattice();
        let e = EmitterSpec::giant(100, -6.633, &[(-2, 0.4, 0.3), (0, 0.2, -1.1), (1, 0.5, 2.0)]).unwrap();
        let m = e.reflected(&lat);
        let k = build_kernel(&e, PI / 2.0, &lat, 3).unwrap();
        let km = build_kernel(&m, PI / 2.0, &lat, 3).unwrap();
        let a = solve_real_space(&k, Incidence::FromRight).unwrap();
        let b = solve_real_space(&km, Incidence::FromLeft).unwrap();
        assert!((a.transmission() - b.transmission()).abs() < 1e-10);
        assert!((a.reflection() - b.reflection()).abs() < 1e-10);
        assert!((a.forward_doublon() - b.backward_doublon()).abs() < 1e-10);
        assert!((a.backward_doublon() - b.forward_doublon()).abs() < 1e-10);
    }

    #[test]
    fn flux_check_detects_corruption() {
        let lat = lattice();
        let k = build_kernel(&rga(0.3, 0.1), PI / 2.0, &lat, 3).unwrap();
        let mut a = solve_real_space(&k, Incidence::FromLeft).unwrap();
        a.t *= 1.01;
        assert!(flux_check(&a).abs() > 1e-3);
    }

    #[test]
    fn band_edge_is_rejected() {
        let lat = lattice();
        let e = EmitterSpec::small_atom(100, 0.4, -4.6);
        assert!(matches!(
            build_kernel(&e, 1e-4, &lat, 3),
            Err(crate::Error::SingularSystem { .. })
        ));
    }
}
