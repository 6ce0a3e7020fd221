//! Lattice topology, physical parameters and the truncated-Wigner drift.
//!
//! Frequencies are measured in units of the loss rate, so `gamma` is 1 for
//! every physical run; it is kept as a field so that the damping term can be
//! switched off in deterministic checks.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    /// 1D array of `L` sites with periodic wrap.
    Ring,
    /// 2D `L x L` square lattice with periodic wrap in both directions.
    Torus,
}

impl LatticeKind {
    pub fn coordination(self) -> usize {
        match self {
            LatticeKind::Ring => 2,
            LatticeKind::Torus => 4,
        }
    }
}

impl std::fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LatticeKind::Ring => f.write_str("ring"),
            LatticeKind::Torus => f.write_str("torus"),
        }
    }
}

/// Periodic lattice with a flat neighbor table.
///
/// Sites of the torus are indexed row-major: site `(x, y)` has index
/// `y * L + x`. Each site lists exactly `z` neighbor entries. For the
/// wrapped small lattices (`L < 3`) entries may repeat, so a bond is
/// counted with its multiplicity and the hopping field `J * sum(nn)` still
/// sees `z` neighbors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeSpec {
    kind: LatticeKind,
    size: usize,
    neighbors: Vec<usize>,
}

impl LatticeSpec {
    /// Builds a periodic lattice, rejecting `L < 3` where the wrap would
    /// double-count bonds.
    pub fn new(kind: LatticeKind, size: usize) -> Result<Self> {
        if size < 3 {
            return Err(Error::InvalidLattice(format!(
                "{kind} with L = {size}: periodic wrap needs L >= 3 (use LatticeSpec::wrapped for small clusters)"
            )));
        }
        Ok(Self::build(kind, size))
    }

    /// Like [`LatticeSpec::new`] but also accepts `L = 1, 2`. Repeated
    /// neighbor entries are kept, so a `2 x 1` ring couples its two sites
    /// with total strength `zJ` and a single site sees `zJ` as a detuning
    /// shift.
    pub fn wrapped(kind: LatticeKind, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidLattice("L must be positive".into()));
        }
        Ok(Self::build(kind, size))
    }

    pub fn ring(size: usize) -> Result<Self> {
        Self::new(LatticeKind::Ring, size)
    }

    pub fn torus(size: usize) -> Result<Self> {
        Self::new(LatticeKind::Torus, size)
    }

    fn build(kind: LatticeKind, l: usize) -> Self {
        let z = kind.coordination();
        let n = match kind {
            LatticeKind::Ring => l,
            LatticeKind::Torus => l * l,
        };
        let mut neighbors = Vec::with_capacity(n * z);
        for site in 0..n {
            match kind {
                LatticeKind::Ring => {
                    neighbors.push((site + 1) % l);
                    neighbors.push((site + l - 1) % l);
                }
                LatticeKind::Torus => {
                    let (x, y) = (site % l, site / l);
                    neighbors.push(y * l + (x + 1) % l);
                    neighbors.push(y * l + (x + l - 1) % l);
                    neighbors.push(((y + 1) % l) * l + x);
                    neighbors.push(((y + l - 1) % l) * l + x);
                }
            }
        }
        Self { kind, size: l, neighbors }
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    /// Linear size `L`.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn n_sites(&self) -> usize {
        self.neighbors.len() / self.coordination()
    }

    pub fn coordination(&self) -> usize {
        self.kind.coordination()
    }

    pub fn neighbors(&self, site: usize) -> &[usize] {
        let z = self.coordination();
        &self.neighbors[site * z..(site + 1) * z]
    }

    /// Directed neighbor pairs `(j, j')`, one per neighbor-table entry.
    pub fn directed_bonds(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let z = self.coordination();
        self.neighbors.iter().enumerate().map(move |(k, &nb)| (k / z, nb))
    }

    /// Site label as `(x, y)`; `y` is always 0 on a ring.
    pub fn coords(&self, site: usize) -> (usize, usize) {
        match self.kind {
            LatticeKind::Ring => (site, 0),
            LatticeKind::Torus => (site % self.size, site / self.size),
        }
    }
}

/// Physical constants, all in units of `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelParams {
    pub delta: f64,
    pub u: f64,
    pub f: f64,
    pub j_hop: f64,
    pub gamma: f64,
    pub z: usize,
}

impl ModelParams {
    /// Parameters for a lattice with the hopping given as the product `zJ`.
    pub fn for_lattice(lattice: &LatticeSpec, delta: f64, u: f64, f: f64, zj: f64) -> Result<Self> {
        let z = lattice.coordination();
        let p = Self { delta, u, f, j_hop: zj / z as f64, gamma: 1.0, z };
        p.validate()?;
        Ok(p)
    }

    pub fn zj(&self) -> f64 {
        self.z as f64 * self.j_hop
    }

    pub fn with_drive(mut self, f: f64) -> Self {
        self.f = f;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.delta, self.u, self.f, self.j_hop, self.gamma].iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidParams("all parameters must be finite".into()));
        }
        if self.gamma <= 0.0 {
            return Err(Error::InvalidParams(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.u < 0.0 {
            return Err(Error::InvalidParams(format!("U must be non-negative, got {}", self.u)));
        }
        if self.f < 0.0 {
            return Err(Error::InvalidParams(format!("F must be non-negative, got {}", self.f)));
        }
        if self.z == 0 {
            return Err(Error::InvalidParams("coordination number must be positive".into()));
        }
        Ok(())
    }

    /// Validates the parameters together with the lattice they run on.
    pub fn check_lattice(&self, lattice: &LatticeSpec) -> Result<()> {
        self.validate()?;
        if self.z != lattice.coordination() {
            return Err(Error::InvalidParams(format!(
                "z = {} does not match lattice coordination {}",
                self.z,
                lattice.coordination()
            )));
        }
        Ok(())
    }
}

/// One trajectory's field amplitudes at a time point.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
}

impl FieldState {
    pub fn new(amplitudes: Vec<Complex64>, time: f64) -> Self {
        Self { amplitudes, time }
    }

    pub fn homogeneous(lattice: &LatticeSpec, alpha: Complex64) -> Self {
        Self { amplitudes: vec![alpha; lattice.n_sites()], time: 0.0 }
    }

    pub fn check(&self, lattice: &LatticeSpec) -> Result<()> {
        if self.amplitudes.len() != lattice.n_sites() {
            return Err(Error::SiteMismatch { expected: lattice.n_sites(), got: self.amplitudes.len() });
        }
        match self.amplitudes.iter().position(|a| !(a.re.is_finite() && a.im.is_finite())) {
            Some(site) => Err(Error::NonFinite { site }),
            None => Ok(()),
        }
    }

    /// Site-averaged `|alpha_j|^2`.
    pub fn mean_population(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() / self.amplitudes.len() as f64
    }
}

/// Which nonlinear term the deterministic drift uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DriftKind {
    /// Truncated-Wigner drift, interaction `U (|alpha|^2 - 1)`.
    #[default]
    Wigner,
    /// Gross-Pitaevskii mean-field drift, interaction `U |alpha|^2`.
    MeanField,
}

impl DriftKind {
    #[inline]
    pub(crate) fn offset(self) -> f64 {
        match self {
            DriftKind::Wigner => 1.0,
            DriftKind::MeanField => 0.0,
        }
    }
}

/// Writes the deterministic part of `d alpha_j / dt` into `out`:
///
/// `[i(Delta - U(|a_j|^2 - c)) - gamma/2] a_j + i J sum_nn a_j' - i F`
///
/// with `c = 1` for the Wigner drift and `c = 0` for mean field. No
/// validation is done here; this is the integrator's inner loop.
#[inline]
pub fn drift_into(
    params: &ModelParams,
    lattice: &LatticeSpec,
    kind: DriftKind,
    amplitudes: &[Complex64],
    out: &mut [Complex64],
) {
    let c = kind.offset();
    let half_gamma = 0.5 * params.gamma;
    let z = lattice.coordination();
    for (site, (o, &a)) in out.iter_mut().zip(amplitudes).enumerate() {
        let mut nn = Complex64::new(0.0, 0.0);
        for &k in &lattice.neighbors[site * z..(site + 1) * z] {
            nn += amplitudes[k];
        }
        let freq = params.delta - params.u * (a.norm_sqr() - c);
        // (i freq - gamma/2) a + i (J nn - F)
        let lin = Complex64::new(-half_gamma, freq) * a;
        *o = lin + Complex64::new(-(params.j_hop * nn.im), params.j_hop * nn.re - params.f);
    }
}

/// Checked drift of a full state.
pub fn drift(params: &ModelParams, lattice: &LatticeSpec, state: &FieldState, kind: DriftKind) -> Result<Vec<Complex64>> {
    state.check(lattice)?;
    let mut out = vec![Complex64::new(0.0, 0.0); lattice.n_sites()];
    drift_into(params, lattice, kind, &state.amplitudes, &mut out);
    if let Some(site) = out.iter().position(|d| !(d.re.is_finite() && d.im.is_finite())) {
        return Err(Error::NonFinite { site });
    }
    Ok(out)
}
