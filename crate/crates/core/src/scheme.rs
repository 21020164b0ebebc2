//! Scheme parameters shared by every module: the protocol case, the database
//! count, the segmentation layout and the derived subpacketization.

use rand::Rng;

use crate::error::Error;
use crate::field::{FieldConfig, PrimeField};

/// The four protocol variants.
///
/// Cases 1 and 3 replicate each model parameter at every database (uncoded
/// storage); cases 2 and 4 store one polynomial evaluation per subpacket
/// (MDS-coded storage).  Cases 3 and 4 add an inter-segment permutation on
/// top of the within-segment ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum CaseId {
    Case1,
    Case2,
    Case3,
    Case4,
}

impl CaseId {
    pub fn from_u8(v: u8) -> Result<Self, Error> {
        match v {
            1 => Ok(CaseId::Case1),
            2 => Ok(CaseId::Case2),
            3 => Ok(CaseId::Case3),
            4 => Ok(CaseId::Case4),
            _ => Err(Error::InvalidCase(v)),
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            CaseId::Case1 => 1,
            CaseId::Case2 => 2,
            CaseId::Case3 => 3,
            CaseId::Case4 => 4,
        }
    }

    /// MDS-coded storage (one symbol per subpacket per database)?
    pub fn coded(self) -> bool {
        matches!(self, CaseId::Case2 | CaseId::Case4)
    }

    /// Does this case permute segment indices as well?
    pub fn two_stage(self) -> bool {
        matches!(self, CaseId::Case3 | CaseId::Case4)
    }

    pub const ALL: [CaseId; 4] = [CaseId::Case1, CaseId::Case2, CaseId::Case3, CaseId::Case4];

    fn admissibility(self) -> (usize, usize, &'static str) {
        // (divisor, offset, rule text): N = divisor * ell + offset.
        match self {
            CaseId::Case1 => (2, 2, "N = 2*ell + 2"),
            CaseId::Case2 => (3, 1, "N = 3*ell + 1"),
            CaseId::Case3 => (2, 4, "N = 2*ell + 4"),
            CaseId::Case4 => (5, 1, "N = 5*ell + 1"),
        }
    }

    /// Derive the subpacketization `ell` from the database count, or reject
    /// an inadmissible `N`.
    pub fn subpacketization(self, n: usize) -> Result<usize, Error> {
        let (div, off, rule) = self.admissibility();
        if n > off && (n - off).is_multiple_of(div) {
            Ok((n - off) / div)
        } else {
            Err(Error::InadmissibleN { case: self.as_u8(), n, rule })
        }
    }

    /// Smallest admissible database count (`ell = 1`, except case 1 where the
    /// acceptance settings use `N = 6`, `ell = 2`; minimal here means
    /// smallest N with `ell >= 1`).
    pub fn min_n(self) -> usize {
        let (div, off, _) = self.admissibility();
        div + off
    }

    /// Highest power of `alpha_n` appearing in an answer polynomial; together
    /// with the `ell` unknowns this fixes the decode-system size.
    pub fn decode_degree(self, ell: usize) -> usize {
        match self {
            CaseId::Case1 => ell + 1,
            CaseId::Case2 => 2 * ell,
            CaseId::Case3 => ell + 3,
            CaseId::Case4 => 4 * ell,
        }
    }

    /// Degree of the per-parameter storage noise polynomial.
    pub fn storage_noise_degree(self, ell: usize) -> usize {
        match self {
            CaseId::Case1 => ell,
            CaseId::Case2 => ell,
            CaseId::Case3 => ell + 1,
            CaseId::Case4 => 2 * ell,
        }
    }
}

impl std::fmt::Display for CaseId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "case {}", self.as_u8())
    }
}

/// All protocol constants for one instance.  `pr` and `pr_prime` are the
/// uplink/downlink sparse subpacket counts (`P*r` and `P*r'` as integers).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SchemeParams {
    pub case: CaseId,
    pub n_databases: usize,
    pub p_subpackets: usize,
    pub b_segments: usize,
    pub pr: usize,
    pub pr_prime: usize,
    pub q: u64,
    pub ell: usize,
}

impl SchemeParams {
    pub fn new(
        case: CaseId,
        n_databases: usize,
        p_subpackets: usize,
        b_segments: usize,
        pr: usize,
        pr_prime: usize,
        q: u64,
    ) -> Result<Self, Error> {
        let ell = case.subpacketization(n_databases)?;
        if b_segments == 0 || b_segments >= p_subpackets {
            return Err(Error::InvalidParams(format!(
                "need 1 <= B < P, got B={b_segments} P={p_subpackets}"
            )));
        }
        if !p_subpackets.is_multiple_of(b_segments) {
            return Err(Error::InvalidB(b_segments));
        }
        if pr == 0 || pr > p_subpackets {
            return Err(Error::InvalidParams(format!("Pr={pr} outside 1..=P")));
        }
        if pr_prime == 0 || pr_prime > p_subpackets {
            return Err(Error::InvalidParams(format!("Pr'={pr_prime} outside 1..=P")));
        }
        // Field must fit the default constants.
        PrimeField::new(q)?;
        if (ell + n_databases + 1) as u64 > q {
            return Err(Error::InvalidParams(format!("q={q} too small for ell+N+1")));
        }
        Ok(Self { case, n_databases, p_subpackets, b_segments, pr, pr_prime, q, ell })
    }

    /// Build from fractional sparsification rates; `P*r` and `P*r'` must be
    /// (numerically) positive integers.
    pub fn from_rates(
        case: CaseId,
        n_databases: usize,
        p_subpackets: usize,
        b_segments: usize,
        r: f64,
        r_prime: f64,
        q: u64,
    ) -> Result<Self, Error> {
        let to_count = |rate: f64, name: &str| -> Result<usize, Error> {
            let x = rate * p_subpackets as f64;
            let rounded = x.round();
            if !(x - rounded).abs().le(&1e-9) || rounded < 1.0 {
                return Err(Error::InvalidParams(format!(
                    "P*{name} = {x} is not a positive integer"
                )));
            }
            Ok(rounded as usize)
        };
        let pr = to_count(r, "r")?;
        let pr_prime = to_count(r_prime, "r'")?;
        Self::new(case, n_databases, p_subpackets, b_segments, pr, pr_prime, q)
    }

    /// Subpackets per segment.
    pub fn seg(&self) -> usize {
        self.p_subpackets / self.b_segments
    }

    /// Model length in field symbols.
    pub fn model_len(&self) -> usize {
        self.p_subpackets * self.ell
    }

    /// Stored data symbols per database (excludes matrices).
    pub fn storage_len(&self) -> usize {
        if self.case.coded() { self.p_subpackets } else { self.model_len() }
    }

    pub fn field_config(&self) -> Result<FieldConfig, Error> {
        FieldConfig::with_defaults(self.q, self.ell, self.n_databases)
    }

    /// Global subpacket id of `(segment, subpacket)`.
    pub fn global_id(&self, segment: usize, subpacket: usize) -> usize {
        segment * self.seg() + subpacket
    }
}

/// The plaintext model: `P * ell` field symbols, indexed by
/// (segment, subpacket-within-segment, parameter).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelState {
    pub w: Vec<u64>,
    ell: usize,
    seg: usize,
}

impl ModelState {
    pub fn zeros(params: &SchemeParams) -> Self {
        Self { w: vec![0; params.model_len()], ell: params.ell, seg: params.seg() }
    }

    pub fn random<R: Rng>(params: &SchemeParams, rng: &mut R) -> Self {
        let mut m = Self::zeros(params);
        for x in m.w.iter_mut() {
            *x = rng.gen_range(0..params.q);
        }
        m
    }

    pub fn from_values(params: &SchemeParams, w: Vec<u64>) -> Result<Self, Error> {
        if w.len() != params.model_len() {
            return Err(Error::DimensionMismatch(format!(
                "model length {} != P*ell = {}",
                w.len(),
                params.model_len()
            )));
        }
        Ok(Self { w, ell: params.ell, seg: params.seg() })
    }

    #[inline]
    fn base(&self, segment: usize, subpacket: usize) -> usize {
        (segment * self.seg + subpacket) * self.ell
    }

    /// The `ell` parameters of one subpacket.
    pub fn subpacket(&self, segment: usize, subpacket: usize) -> &[u64] {
        let b = self.base(segment, subpacket);
        &self.w[b..b + self.ell]
    }

    pub fn param(&self, segment: usize, subpacket: usize, k: usize) -> u64 {
        self.w[self.base(segment, subpacket) + k]
    }

    pub fn add_delta(&mut self, field: &PrimeField, segment: usize, subpacket: usize, delta: &[u64]) {
        let b = self.base(segment, subpacket);
        for (k, d) in delta.iter().enumerate() {
            self.w[b + k] = field.add(self.w[b + k], *d);
        }
    }
}
