//! One-shot trusted initialization: encode the model into per-database
//! storage, sample the permutations, build every database's noisy reversing
//! matrices, then hand off immutable state.
//!
//! Storage noise is a polynomial in `alpha_n` whose coefficients are sampled
//! once per subpacket (and parameter, for uncoded storage) and evaluated at
//! every database's `alpha_n`; the decode systems require this sharing.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::Error;
use crate::field::FieldConfig;
use crate::linalg::Matrix;
use crate::perm::{
    build_noisy_inter, build_noisy_within, combine_case3, combine_case4, sample_inter_noise,
    sample_within_noise, NoiseMode, NoisyReversingMatrix, PermutationSet,
};
use crate::scheme::{CaseId, ModelState, SchemeParams};

/// Everything one database holds: encoded storage, its noisy matrices, and
/// the popularity counters driving downlink selection.
#[derive(Debug, Clone)]
pub struct DatabaseState {
    pub index: usize,
    /// Real-ordered symbols: `P*ell` for uncoded cases, `P` for coded ones.
    pub storage: Vec<u64>,
    pub within: Vec<NoisyReversingMatrix>,
    pub inter: Option<NoisyReversingMatrix>,
    /// Cached combination of within and inter matrices (two-stage cases).
    pub combined: Option<Matrix>,
    /// Write counts per permuted (segment, subpacket), reset every round.
    pub popularity: BTreeMap<(usize, usize), u64>,
}

/// Encode the model into each database's storage vector.
///
/// Uncoded (cases 1/3): symbol (s, k, n) = W / (f_k - alpha_n) + noise
/// polynomial in alpha_n.  Coded (cases 2/4): symbol (s, n) =
/// sum_i alpha_n^{-i} W_i + noise polynomial.
pub fn encode_storage<R: Rng>(
    model: &ModelState,
    params: &SchemeParams,
    cfg: &FieldConfig,
    mode: NoiseMode,
    rng: &mut R,
) -> Result<Vec<Vec<u64>>, Error> {
    let field = cfg.field();
    let n_db = params.n_databases;
    let ell = params.ell;
    let deg = params.case.storage_noise_degree(ell);
    let q = field.modulus();
    let sample = |rng: &mut R| -> Vec<u64> {
        match mode {
            NoiseMode::Random => (0..=deg).map(|_| rng.gen_range(0..q)).collect(),
            NoiseMode::Zero => vec![0; deg + 1],
        }
    };
    let mut out = vec![Vec::with_capacity(params.storage_len()); n_db];
    for seg in 0..params.b_segments {
        for sub in 0..params.seg() {
            if params.case.coded() {
                let z = sample(rng);
                for (n, st) in out.iter_mut().enumerate() {
                    let alpha = cfg.alpha(n);
                    let mut sym = 0u64;
                    for (i, &w) in model.subpacket(seg, sub).iter().enumerate() {
                        sym = field.add(sym, field.mul(field.inv_pow(alpha, i as u64 + 1)?, w));
                    }
                    for (j, &c) in z.iter().enumerate() {
                        sym = field.add(sym, field.mul(field.pow(alpha, j as u64), c));
                    }
                    st.push(sym);
                }
            } else {
                for k in 0..ell {
                    let z = sample(rng);
                    let w = model.param(seg, sub, k);
                    for (n, st) in out.iter_mut().enumerate() {
                        let alpha = cfg.alpha(n);
                        let mut sym = field.mul(cfg.cauchy(k, n), w);
                        for (j, &c) in z.iter().enumerate() {
                            sym = field.add(sym, field.mul(field.pow(alpha, j as u64), c));
                        }
                        st.push(sym);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Build every database's matrices for a given permutation set, sharing one
/// noise matrix per permutation across all databases.
pub fn build_matrices<R: Rng>(
    ps: &PermutationSet,
    params: &SchemeParams,
    cfg: &FieldConfig,
    mode: NoiseMode,
    rng: &mut R,
) -> Result<Vec<(Vec<NoisyReversingMatrix>, Option<NoisyReversingMatrix>, Option<Matrix>)>, Error>
{
    let case = params.case;
    let within_noise: Vec<Matrix> = (0..params.b_segments)
        .map(|_| sample_within_noise(case, cfg, params.seg(), mode, rng))
        .collect();
    let inter_noise = if case.two_stage() {
        Some(sample_inter_noise(case, cfg, params.b_segments, mode, rng)?)
    } else {
        None
    };
    let mut out = Vec::with_capacity(params.n_databases);
    for n in 0..params.n_databases {
        let within: Vec<NoisyReversingMatrix> = ps
            .within
            .iter()
            .zip(within_noise.iter())
            .map(|(p, z)| build_noisy_within(case, p, n, cfg, z))
            .collect::<Result<_, _>>()?;
        let (inter, combined) = if case.two_stage() {
            let p_hat = ps.inter.as_ref().expect("two-stage permutation set");
            let z = inter_noise.as_ref().expect("two-stage noise");
            let inter = build_noisy_inter(case, p_hat, n, cfg, z)?;
            let combined = match case {
                CaseId::Case3 => combine_case3(&within, &inter, params, cfg)?,
                CaseId::Case4 => combine_case4(&within, &inter, params, cfg)?,
                _ => unreachable!(),
            };
            (Some(inter), Some(combined))
        } else {
            (None, None)
        };
        out.push((within, inter, combined));
    }
    Ok(out)
}

/// Full initialization with a caller-supplied permutation set (used by the
/// fixture tests); `initialize` samples the set itself.
pub fn initialize_with<R: Rng>(
    model: &ModelState,
    params: &SchemeParams,
    cfg: &FieldConfig,
    ps: PermutationSet,
    mode: NoiseMode,
    rng: &mut R,
) -> Result<(Vec<DatabaseState>, PermutationSet), Error> {
    let storage = encode_storage(model, params, cfg, mode, rng)?;
    let matrices = build_matrices(&ps, params, cfg, mode, rng)?;
    let databases = storage
        .into_iter()
        .zip(matrices)
        .enumerate()
        .map(|(index, (storage, (within, inter, combined)))| DatabaseState {
            index,
            storage,
            within,
            inter,
            combined,
            popularity: BTreeMap::new(),
        })
        .collect();
    Ok((databases, ps))
}

pub fn initialize<R: Rng>(
    model: &ModelState,
    params: &SchemeParams,
    cfg: &FieldConfig,
    mode: NoiseMode,
    rng: &mut R,
) -> Result<(Vec<DatabaseState>, PermutationSet), Error> {
    let ps = PermutationSet::sample(params, rng);
    initialize_with(model, params, cfg, ps, mode, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::PrimeField;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_model_zero_noise_gives_zero_storage() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for case in CaseId::ALL {
            let params = SchemeParams::new(case, case.min_n(), 12, 3, 3, 3, 8191).unwrap();
            let cfg = params.field_config().unwrap();
            let model = ModelState::zeros(&params);
            let st = encode_storage(&model, &params, &cfg, NoiseMode::Zero, &mut rng).unwrap();
            assert_eq!(st.len(), params.n_databases);
            for db in st {
                assert_eq!(db.len(), params.storage_len());
                assert!(db.iter().all(|&x| x == 0));
            }
        }
    }

    #[test]
    fn case1_symbol_direct_evaluation() {
        // ell=1, q=13, W=3, noise coeffs (1, 2), alpha=5, f=1:
        // 3/(1-5) + 1 + 2*5 = 3*inv(9) + 11 in F_13.
        let field = PrimeField::new(13).unwrap();
        let expected = field.add(field.mul(3, field.inv(field.sub(1, 5)).unwrap()), 11);
        let byhand = field.add(field.mul(3, field.inv(9).unwrap()), 11);
        assert_eq!(expected, byhand);
        // 3 * inv(9) = 3 * 3 = 9; 9 + 11 = 20 = 7 mod 13.
        assert_eq!(expected, 7);
    }

    #[test]
    fn coded_storage_is_decodable_per_subpacket() {
        // Cases 2/4: the N stored symbols of one subpacket satisfy the
        // decode layout directly.
        use crate::linalg::{solve_mixed_vandermonde, DecodeLayout, Matrix};
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for case in [CaseId::Case2, CaseId::Case4] {
            for n_db in [case.min_n(), case.min_n() + if case == CaseId::Case2 { 3 } else { 5 }] {
                let params = SchemeParams::new(case, n_db, 12, 3, 3, 3, 8191).unwrap();
                let cfg = params.field_config().unwrap();
                let model = ModelState::random(&params, &mut rng);
                let st =
                    encode_storage(&model, &params, &cfg, NoiseMode::Random, &mut rng).unwrap();
                // The raw storage symbols span fewer unknowns than the full
                // answer polynomial, so a square subsystem over the first
                // `width` databases suffices.
                let layout = DecodeLayout::NegativePowers {
                    ell: params.ell,
                    degree: case.storage_noise_degree(params.ell),
                };
                let width = layout.width();
                let m = Matrix::from_rows(
                    (0..width).map(|n| layout.row(&cfg, n).unwrap()).collect(),
                )
                .unwrap();
                for s in 0..params.p_subpackets {
                    let rhs: Vec<u64> = (0..width).map(|n| st[n][s]).collect();
                    let sol = solve_mixed_vandermonde(&m, &rhs, cfg.field()).unwrap();
                    let seg = s / params.seg();
                    let sub = s % params.seg();
                    // Leading ell unknowns are W_ell .. W_1.
                    let mut got: Vec<u64> = sol[..params.ell].to_vec();
                    got.reverse();
                    assert_eq!(got, model.subpacket(seg, sub));
                }
            }
        }
    }

    #[test]
    fn uncoded_storage_symbol_matches_polynomial_form() {
        // Case 1 with zero noise: symbol is exactly W / (f_k - alpha_n).
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let params = SchemeParams::new(CaseId::Case1, 6, 12, 3, 3, 3, 8191).unwrap();
        let cfg = params.field_config().unwrap();
        let model = ModelState::random(&params, &mut rng);
        let st = encode_storage(&model, &params, &cfg, NoiseMode::Zero, &mut rng).unwrap();
        let field = cfg.field();
        for n in 0..6 {
            for s in 0..12 {
                for k in 0..2 {
                    let w = model.param(s / 4, s % 4, k);
                    assert_eq!(st[n][s * 2 + k], field.mul(w, cfg.cauchy(k, n)));
                }
            }
        }
    }

    #[test]
    fn initialize_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for case in CaseId::ALL {
            let params = SchemeParams::new(case, case.min_n(), 12, 3, 3, 3, 8191).unwrap();
            let cfg = params.field_config().unwrap();
            let model = ModelState::zeros(&params);
            let (dbs, ps) =
                initialize(&model, &params, &cfg, NoiseMode::Random, &mut rng).unwrap();
            assert_eq!(dbs.len(), params.n_databases);
            assert_eq!(ps.within.len(), 3);
            assert_eq!(ps.inter.is_some(), case.two_stage());
            for db in &dbs {
                assert_eq!(db.storage.len(), params.storage_len());
                assert_eq!(db.within.len(), 3);
                assert_eq!(db.combined.is_some(), case.two_stage());
                if let Some(c) = &db.combined {
                    let expect = if case.coded() {
                        params.p_subpackets
                    } else {
                        params.model_len()
                    };
                    assert_eq!(c.rows(), expect);
                }
            }
        }
    }

    #[test]
    fn single_symbol_distribution_hides_model() {
        // q=5, ell=1, one subpacket: over exhaustive noise the stored symbol
        // is uniform and identical for every W.
        let field = PrimeField::new(5).unwrap();
        let alpha = 3u64;
        for case in CaseId::ALL {
            let deg = case.storage_noise_degree(1);
            for w in 0..5u64 {
                let mut hist = [0usize; 5];
                let total = 5usize.pow(deg as u32 + 1);
                for mut code in 0..total {
                    let mut sym = if case.coded() {
                        field.mul(field.inv(alpha).unwrap(), w)
                    } else {
                        field.mul(field.inv(field.sub(1, alpha)).unwrap(), w)
                    };
                    for j in 0..=deg {
                        let c = (code % 5) as u64;
                        code /= 5;
                        sym = field.add(sym, field.mul(field.pow(alpha, j as u64), c));
                    }
                    hist[sym as usize] += 1;
                }
                assert!(hist.iter().all(|&c| c == total / 5), "{case} W={w}");
            }
        }
    }
}
