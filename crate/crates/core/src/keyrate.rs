//! Key-rate mathematics: binary entropy, the asymptotic conference key rate,
//! the finite-key length with sampling corrections, and optimisation of the
//! security budget.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, invalid, Result};

/// Binary Shannon entropy in bits, with `h(0) = h(1) = 0`.
pub fn entropy_h(x: f64) -> Result<f64> {
    check_probability("entropy argument", x)?;
    Ok(h(x))
}

#[inline]
pub(crate) fn h(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
    }
}

/// Entropy of an error rate that may have been pushed past 1/2 by a
/// statistical correction; saturates at one bit.
#[inline]
fn h_capped(x: f64) -> f64 {
    if x >= 0.5 {
        1.0
    } else {
        h(x.max(0.0))
    }
}

/// Asymptotic key rate `1 - h(Q_X) - h(QBER)` per round. Can be negative.
pub fn akr(q_x: f64, qber: f64) -> Result<f64> {
    for (name, v) in [("Q_X", q_x), ("QBER", qber)] {
        if !(0.0..=0.5).contains(&v) {
            return Err(invalid(format!("{name} = {v} outside [0, 0.5]")));
        }
    }
    Ok(1.0 - h(q_x) - h(qber))
}

/// Sampling-without-replacement correction
/// `sqrt((n + m)(m + 1) / (8 n m^2) * ln(1/eps))`.
pub fn xi(n: u64, m: u64, eps: f64) -> Result<f64> {
    if n == 0 || m == 0 {
        return Err(invalid(format!("xi needs n, m >= 1 (n = {n}, m = {m})")));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(invalid(format!("xi needs eps in (0, 1], got {eps}")));
    }
    Ok(xi_real(n as f64, m as f64, eps))
}

#[inline]
fn xi_real(n: f64, m: f64, eps: f64) -> f64 {
    ((n + m) * (m + 1.0) / (8.0 * n * m * m) * (1.0 / eps).ln()).sqrt()
}

/// Failure probabilities of the protocol stages.
///
/// The parameter-estimation failure enters squared:
/// `eps_pe^2 = (N - 1) eps_z + eps_x`, and the total is
/// `eps_tot = eps_ec + eps_pa + 2 eps_pe`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityBudget {
    pub eps_tot: f64,
    pub eps_ec: f64,
    pub eps_pa: f64,
    pub eps_z: f64,
    pub eps_x: f64,
    pub parties: usize,
}

impl SecurityBudget {
    /// Build from the four stage parameters; `eps_tot` is derived.
    pub fn new(eps_ec: f64, eps_pa: f64, eps_z: f64, eps_x: f64, parties: usize) -> Result<Self> {
        if parties < 2 {
            return Err(invalid(format!("need at least 2 parties, got {parties}")));
        }
        let eps_pe = ((parties - 1) as f64 * eps_z + eps_x).sqrt();
        let b = Self {
            eps_tot: eps_ec + eps_pa + 2.0 * eps_pe,
            eps_ec,
            eps_pa,
            eps_z,
            eps_x,
            parties,
        };
        b.validate()?;
        Ok(b)
    }

    /// Spend `eps_tot` as given: whatever `eps_ec` and `eps_pa` leave goes to
    /// parameter estimation, and `z_share` of `eps_pe^2` is assigned to the
    /// `(N - 1)` Z-basis tests.
    pub fn from_total(eps_tot: f64, eps_ec: f64, eps_pa: f64, z_share: f64, parties: usize) -> Result<Self> {
        if parties < 2 {
            return Err(invalid(format!("need at least 2 parties, got {parties}")));
        }
        if !(z_share > 0.0 && z_share < 1.0) {
            return Err(invalid(format!("z_share must lie in (0, 1), got {z_share}")));
        }
        let eps_pe = (eps_tot - eps_ec - eps_pa) / 2.0;
        if eps_pe <= 0.0 {
            return Err(invalid(format!(
                "eps_ec + eps_pa = {} leaves nothing of eps_tot = {eps_tot}",
                eps_ec + eps_pa
            )));
        }
        let pe2 = eps_pe * eps_pe;
        let b = Self {
            eps_tot,
            eps_ec,
            eps_pa,
            eps_z: z_share * pe2 / (parties - 1) as f64,
            eps_x: (1.0 - z_share) * pe2,
            parties,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn eps_pe(&self) -> f64 {
        ((self.parties - 1) as f64 * self.eps_z + self.eps_x).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eps_tot", self.eps_tot),
            ("eps_ec", self.eps_ec),
            ("eps_pa", self.eps_pa),
            ("eps_z", self.eps_z),
            ("eps_x", self.eps_x),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(invalid(format!("{name} = {v} outside (0, 1)")));
            }
        }
        let composed = self.eps_ec + self.eps_pa + 2.0 * self.eps_pe();
        if ((composed - self.eps_tot) / self.eps_tot).abs() > 1e-9 {
            return Err(invalid(format!(
                "eps_tot = {} but stages compose to {composed}",
                self.eps_tot
            )));
        }
        Ok(())
    }
}

/// How the error-correction cost is charged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "bits")]
pub enum Leakage {
    /// Shannon limit `n h(QBER^m + 2 xi_Z)`.
    Shannon,
    /// Bits actually disclosed (syndromes plus verification tags).
    Realized(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateInputs {
    pub rounds: u64,
    pub n: u64,
    pub m: u64,
    pub p: f64,
    pub q_x_m: f64,
    pub qber_m: f64,
    pub parties: usize,
    pub leakage: Leakage,
}

impl RateInputs {
    /// Inputs for `rounds` rounds of which `m` were type-2; `n = L - 2m`.
    pub fn new(rounds: u64, m: u64, p: f64, q_x_m: f64, qber_m: f64, parties: usize) -> Result<Self> {
        if 2 * m > rounds {
            return Err(invalid(format!("2m = {} exceeds L = {rounds}", 2 * m)));
        }
        let r = Self {
            rounds,
            n: rounds - 2 * m,
            m,
            p,
            q_x_m,
            qber_m,
            parties,
            leakage: Leakage::Shannon,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn with_leakage(mut self, leakage: Leakage) -> Self {
        self.leakage = leakage;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n + 2 * self.m != self.rounds {
            return Err(invalid(format!(
                "n = {} is not L - 2m = {} - 2*{}",
                self.n, self.rounds, self.m
            )));
        }
        if self.n == 0 || self.m == 0 {
            return Err(invalid("finite-key length needs n >= 1 and m >= 1"));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(invalid(format!("p = {} outside (0, 1)", self.p)));
        }
        for (name, v) in [("Q_X^m", self.q_x_m), ("QBER^m", self.qber_m)] {
            if !(0.0..=0.5).contains(&v) {
                return Err(invalid(format!("{name} = {v} outside [0, 0.5]")));
            }
        }
        if self.parties < 2 {
            return Err(invalid("need at least 2 parties"));
        }
        Ok(())
    }
}

/// Result of the finite-key length formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteKey {
    /// Privacy amplification output length, before removing the pre-shared
    /// schedule bits.
    pub secret_bits: u64,
    /// `ceil(L h(p))` bits owed back to the pre-shared key pool.
    pub preshared_bits: u64,
    /// Net key-growing output, `secret_bits - preshared_bits` (0 if negative).
    pub net_bits: u64,
    /// Unfloored `l / L` including the `-h(p)` term; may be negative.
    pub fraction: f64,
    pub xi_x: f64,
    pub xi_z: f64,
    /// Bits charged for error correction.
    pub ec_bits: f64,
    pub feasible: bool,
    pub diagnostic: Option<String>,
}

struct Terms {
    secret: f64,
    xi_x: f64,
    xi_z: f64,
    ec_bits: f64,
}

#[allow(clippy::too_many_arguments)]
fn secret_terms(n: f64, m: f64, q_x: f64, qber: f64, leak: Option<f64>, b: &SecurityBudget) -> Terms {
    let xi_x = xi_real(n, m, b.eps_x);
    let xi_z = xi_real(n, m, b.eps_z);
    let ec_bits = leak.unwrap_or_else(|| n * h_capped(qber + 2.0 * xi_z));
    let nm1 = (b.parties - 1) as f64;
    let secret = n * (1.0 - h_capped(q_x + 2.0 * xi_x))
        - ec_bits
        - (2.0 * nm1 / b.eps_ec).log2()
        - 2.0 * ((1.0 - 2.0 * nm1 * b.eps_pe()) / (2.0 * b.eps_pa)).log2();
    Terms { secret, xi_x, xi_z, ec_bits }
}

/// Finite-key length for the given statistics and budget.
///
/// Negative lengths are reported as zero with `feasible = false` and a
/// diagnostic rather than as errors, since sweeps routinely cross the
/// feasibility boundary.
pub fn finite_key_length(inputs: &RateInputs, budget: &SecurityBudget) -> Result<FiniteKey> {
    inputs.validate()?;
    budget.validate()?;
    if inputs.parties != budget.parties {
        return Err(invalid(format!(
            "inputs describe {} parties, budget {}",
            inputs.parties, budget.parties
        )));
    }
    let leak = match inputs.leakage {
        Leakage::Shannon => None,
        Leakage::Realized(bits) => Some(bits as f64),
    };
    let t = secret_terms(
        inputs.n as f64,
        inputs.m as f64,
        inputs.q_x_m,
        inputs.qber_m,
        leak,
        budget,
    );
    let l = inputs.rounds as f64;
    let preshared = (l * h(inputs.p)).ceil();
    let secret_bits = t.secret.max(0.0).floor() as u64;
    let preshared_bits = preshared as u64;
    let net_bits = secret_bits.saturating_sub(preshared_bits);
    let diagnostic = if secret_bits == 0 {
        Some(format!("finite-key length is negative ({:.1} bits)", t.secret))
    } else if net_bits == 0 {
        Some(format!(
            "{secret_bits} secret bits do not cover the {preshared_bits} pre-shared bits"
        ))
    } else {
        None
    };
    Ok(FiniteKey {
        secret_bits,
        preshared_bits,
        net_bits,
        fraction: (t.secret - l * h(inputs.p)) / l,
        xi_x: t.xi_x,
        xi_z: t.xi_z,
        ec_bits: t.ec_bits,
        feasible: net_bits > 0,
        diagnostic,
    })
}

/// Output of [`optimize_budget`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizedBudget {
    pub p: f64,
    pub budget: SecurityBudget,
    pub key: FiniteKey,
    /// Continuous objective (net bits) at the optimum.
    pub objective: f64,
    pub feasible: bool,
}

/// Search-space point: type-2 fraction, `log10(eps_ec / eps_tot)`,
/// `log10(eps_pa / eps_tot)` and the logit of the Z share of `eps_pe^2`.
#[derive(Debug, Clone, Copy)]
struct Point([f64; 4]);

const LOG_EPS_RANGE: (f64, f64) = (-30.0, -1e-4);
const LOGIT_RANGE: (f64, f64) = (-15.0, 15.0);
const RESTART_SEEDS: [u64; 5] = [11, 23, 37, 41, 53];

struct Problem {
    rounds: f64,
    q_x: f64,
    qber: f64,
    parties: usize,
    eps_tot: f64,
    p_range: (f64, f64),
}

impl Problem {
    fn budget(&self, x: &Point) -> Option<SecurityBudget> {
        let [_, a, b, s] = x.0;
        let eps_ec = self.eps_tot * 10f64.powf(a);
        let eps_pa = self.eps_tot * 10f64.powf(b);
        let share = 1.0 / (1.0 + (-s).exp());
        SecurityBudget::from_total(self.eps_tot, eps_ec, eps_pa, share, self.parties).ok()
    }

    /// Net key bits as a smooth function of the search point.
    fn objective(&self, x: &Point) -> f64 {
        let p = x.0[0];
        let Some(b) = self.budget(x) else {
            return f64::NEG_INFINITY;
        };
        let m = p * self.rounds;
        let n = self.rounds - 2.0 * m;
        if m < 1.0 || n < 1.0 {
            return f64::NEG_INFINITY;
        }
        secret_terms(n, m, self.q_x, self.qber, None, &b).secret - self.rounds * h(p)
    }

    fn range(&self, coord: usize) -> (f64, f64) {
        match coord {
            0 => self.p_range,
            1 | 2 => LOG_EPS_RANGE,
            _ => LOGIT_RANGE,
        }
    }
}

/// Golden-section maximisation of `f` on `[lo, hi]`.
fn golden_max(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..80 {
        if (hi - lo).abs() < 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

fn coordinate_ascent(problem: &Problem, mut x: Point) -> (Point, f64) {
    let mut best = problem.objective(&x);
    for _ in 0..200 {
        let before = best;
        for coord in 0..4 {
            let (lo, hi) = problem.range(coord);
            let (arg, val) = golden_max(lo, hi, |v| {
                let mut y = x;
                y.0[coord] = v;
                problem.objective(&y)
            });
            if val > best {
                best = val;
                x.0[coord] = arg;
            }
        }
        if best.is_finite() && before.is_finite() && (best - before).abs() <= 1e-9 * best.abs().max(1.0) {
            break;
        }
    }
    (x, best)
}

/// Choose `p` and the split of `eps_tot` that maximise the net finite-key
/// length for preliminary noise estimates.
///
/// Coordinate ascent with golden-section line searches over `p`, the
/// log-domain EC/PA parameters and the logit of the Z/X split, restarted from
/// five fixed pseudo-random points. The result is deterministic.
pub fn optimize_budget(
    prelim_qx: f64,
    prelim_qber: f64,
    rounds: u64,
    parties: usize,
    eps_tot: f64,
) -> Result<OptimizedBudget> {
    akr(prelim_qx, prelim_qber)?;
    if !(eps_tot > 0.0 && eps_tot < 1.0) {
        return Err(invalid(format!("eps_tot = {eps_tot} outside (0, 1)")));
    }
    if parties < 2 {
        return Err(invalid("need at least 2 parties"));
    }
    if rounds < 8 {
        return Err(invalid(format!("{rounds} rounds is too few to optimise over")));
    }
    let l = rounds as f64;
    let problem = Problem {
        rounds: l,
        q_x: prelim_qx,
        qber: prelim_qber,
        parties,
        eps_tot,
        p_range: (1.0 / l, 0.45),
    };

    let mut best: Option<(Point, f64)> = None;
    for seed in RESTART_SEEDS {
        let mut rng = crate::rng::from_seed(seed);
        let (plo, phi) = problem.p_range;
        // Start p log-uniformly so small-p optima are reachable for huge L.
        let p0 = (plo.ln() + rng.random::<f64>() * (phi.ln() - plo.ln())).exp();
        let start = Point([
            p0,
            rng.random_range(-12.0..-1.0),
            rng.random_range(-12.0..-1.0),
            rng.random_range(-3.0..3.0),
        ]);
        let (x, v) = coordinate_ascent(&problem, start);
        if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
            best = Some((x, v));
        }
    }
    let (x, objective) = best.expect("at least one restart");
    let budget = problem
        .budget(&x)
        .ok_or_else(|| invalid("optimizer left the feasible budget region"))?;
    let p = x.0[0];
    let m = ((p * l).round() as u64).clamp(1, (rounds - 1) / 2);
    let inputs = RateInputs::new(rounds, m, p, prelim_qx, prelim_qber, parties)?;
    let key = finite_key_length(&inputs, &budget)?;
    Ok(OptimizedBudget {
        p,
        budget,
        feasible: objective > 0.0 && key.feasible,
        key,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn entropy_values() {
        assert_eq!(entropy_h(0.5).unwrap(), 1.0);
        assert_eq!(entropy_h(0.0).unwrap(), 0.0);
        assert_eq!(entropy_h(1.0).unwrap(), 0.0);
        // 40-digit reference: 0.09377790984777164709...
        assert!((entropy_h(0.012).unwrap() - 0.093_777_909_847_771_65).abs() < 1e-15);
        assert!(entropy_h(-0.1).is_err());
        assert!(entropy_h(1.5).is_err());
    }

    #[test]
    fn akr_values() {
        assert_eq!(akr(0.0, 0.0).unwrap(), 1.0);
        // 1 - h(0.05) - h(0.0159) = 0.59584774204122303806
        assert!((akr(0.05, 0.0159).unwrap() - 0.595_847_742_041_223).abs() < 1e-13);
        assert!(akr(0.5, 0.1).unwrap() <= 0.0);
        assert!(akr(0.6, 0.0).is_err());
    }

    #[test]
    fn xi_values() {
        assert_eq!(xi(100, 10, 1.0).unwrap(), 0.0);
        // 0.0068213384198113696230 by 40-digit evaluation.
        let v = xi(4_040_000, 50_100, 1e-8).unwrap();
        assert!((v - 0.006_821_338_419_811_37).abs() < 1e-15, "{v}");
        assert!(xi(100, 20, 1e-3).unwrap() < xi(100, 10, 1e-3).unwrap());
        assert!(xi(0, 10, 0.1).is_err());
        assert!(xi(10, 10, 0.0).is_err());
    }

    #[test]
    fn budget_composition() {
        let b = SecurityBudget::from_total(1.8e-8, 1e-13, 1e-10, 0.5, 4).unwrap();
        let composed = b.eps_ec + b.eps_pa + 2.0 * b.eps_pe();
        assert!((composed - 1.8e-8).abs() < 1e-20);
        assert!(SecurityBudget::from_total(1e-8, 6e-9, 6e-9, 0.5, 4).is_err());
        let again = SecurityBudget::new(b.eps_ec, b.eps_pa, b.eps_z, b.eps_x, 4).unwrap();
        assert!((again.eps_tot - b.eps_tot).abs() < 1e-20);
    }

    #[test]
    fn negative_key_is_zero_not_error() {
        let inputs = RateInputs::new(10_000, 100, 0.01, 0.2, 0.2, 4).unwrap();
        let b = SecurityBudget::from_total(1e-6, 1e-9, 1e-9, 0.5, 4).unwrap();
        let k = finite_key_length(&inputs, &b).unwrap();
        assert_eq!(k.secret_bits, 0);
        assert_eq!(k.net_bits, 0);
        assert!(!k.feasible);
        assert!(k.diagnostic.is_some());
    }

    #[test]
    fn noiseless_large_l_approaches_one_minus_hp() {
        let b = SecurityBudget::from_total(1e-8, 1e-10, 1e-10, 0.5, 4).unwrap();
        let p = 0.01;
        let l = 100_000_000_000_000u64;
        let m = (p * l as f64) as u64;
        let k = finite_key_length(&RateInputs::new(l, m, p, 0.0, 0.0, 4).unwrap(), &b).unwrap();
        let expected = (1.0 - 2.0 * p) - h(p);
        assert!((k.fraction - expected).abs() < 1e-3, "{} vs {expected}", k.fraction);
    }

    #[test]
    fn realized_leakage_is_charged_verbatim() {
        let b = SecurityBudget::from_total(1.8e-8, 1e-13, 1e-10, 0.5, 4).unwrap();
        let base = RateInputs::new(1_000_000, 20_000, 0.02, 0.03, 0.01, 4).unwrap();
        let a = finite_key_length(&base.with_leakage(Leakage::Realized(100_000)), &b).unwrap();
        let c = finite_key_length(&base.with_leakage(Leakage::Realized(150_000)), &b).unwrap();
        assert_eq!(a.ec_bits, 100_000.0);
        assert!((a.secret_bits as i64 - c.secret_bits as i64 - 50_000).abs() <= 1);
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, v) = golden_max(-3.0, 5.0, |x| -(x - 1.25) * (x - 1.25) + 2.0);
        assert!((x - 1.25).abs() < 1e-6);
        assert!((v - 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn akr_is_symmetric(a in 0.0f64..0.5, b in 0.0f64..0.5) {
            prop_assert!((akr(a, b).unwrap() - akr(b, a).unwrap()).abs() < 1e-14);
        }

        #[test]
        fn finite_key_never_beats_asymptotic(
            qx in 0.0f64..0.2, qb in 0.0f64..0.1,
            log_l in 3.0f64..9.0, p in 0.001f64..0.3,
        ) {
            let l = 10f64.powf(log_l) as u64;
            let m = ((p * l as f64) as u64).max(1);
            prop_assume!(2 * m < l);
            let b = SecurityBudget::from_total(1e-6, 1e-9, 1e-9, 0.5, 4).unwrap();
            let k = finite_key_length(&RateInputs::new(l, m, p, qx, qb, 4).unwrap(), &b).unwrap();
            let bound = l as f64 * akr(qx, qb).unwrap();
            prop_assert!((k.net_bits as f64) <= bound.max(0.0));
            prop_assert!((k.secret_bits as f64) <= bound.max(0.0));
        }
    }
}
