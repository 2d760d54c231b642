//! Finite-population check of the continuum model: `n` agents draw efforts
//! from `p`, draw performances from `F_e`, and the top `⌊k n⌋` win.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{solve_cutoff, CsfProfile, PerformanceFamily};
use crate::error::{Error, Result};
use crate::measures::EffortMeasure;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(rename = "family")]
    pub fam: PerformanceFamily,
    pub p: EffortMeasure,
    pub k: f64,
    #[serde(default = "one")]
    pub replications: usize,
}

fn one() -> usize {
    1
}

impl SimConfig {
    pub fn winners(&self) -> usize {
        (self.k * self.n as f64).floor() as usize
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.replications == 0 {
            return Err(Error::domain("n and replications must be positive"));
        }
        if !(self.k > 0.0 && self.k < 1.0) {
            return Err(Error::domain(format!(
                "budget fraction k must lie in (0, 1), got {}",
                self.k
            )));
        }
        if self.winners() == 0 {
            return Err(Error::domain(format!(
                "floor(k n) = 0 for k = {}, n = {}",
                self.k, self.n
            )));
        }
        let mass = self.p.total_mass();
        if mass <= self.k {
            return Err(Error::BudgetNotBinding { mass, k: self.k });
        }
        Ok(())
    }
}

/// One population draw.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replication {
    /// Agents at each atom, in atom order.
    pub participants: Vec<usize>,
    pub winners_by_atom: Vec<usize>,
    pub winners: usize,
    /// Midpoint between the lowest winning and highest losing performance.
    pub cutoff: f64,
}

impl Replication {
    pub fn rate(&self, atom: usize) -> Option<f64> {
        let n = self.participants[atom];
        (n > 0).then(|| self.winners_by_atom[atom] as f64 / n as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomStat {
    pub atom_e: f64,
    pub mass: f64,
    /// Winners over participants, pooled across replications.
    #[serde(rename = "empirical_W")]
    pub empirical_w: f64,
    #[serde(rename = "model_W")]
    pub model_w: f64,
    /// `|empirical_W - model_W|`.
    pub abs_err: f64,
    /// Mean over replications of the per-replication absolute error.
    pub mean_rep_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub n: usize,
    pub k: f64,
    pub seed: u64,
    pub atoms: Vec<AtomStat>,
    pub model_cutoff: f64,
    pub mean_cutoff: f64,
    /// Mean over atoms of `mean_rep_err`.
    pub mean_abs_err: f64,
    pub replications: Vec<Replication>,
}

/// Draws one population with its own random stream.
pub fn replicate(
    fam: &PerformanceFamily,
    p: &EffortMeasure,
    k: f64,
    n: usize,
    seed: u64,
    index: u64,
) -> Replication {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let atoms = p.atoms();
    let cum: Vec<f64> = atoms
        .iter()
        .scan(0.0, |acc, a| {
            *acc += a.mass;
            Some(*acc)
        })
        .collect();
    let m = (k * n as f64).floor() as usize;

    // (performance, tie rank, atom); atom == usize::MAX marks non-participants
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.shuffle(&mut rng);
    let mut agents: Vec<(f64, u32, usize)> = Vec::with_capacity(n);
    let mut participants = vec![0; atoms.len()];
    for rank in order {
        let u: f64 = rng.gen();
        let atom = cum.partition_point(|c| *c <= u);
        if atom < atoms.len() {
            participants[atom] += 1;
            agents.push((
                fam.sample_performance(atoms[atom].effort, &mut rng),
                rank,
                atom,
            ));
        }
    }
    let better =
        |a: &(f64, u32, usize), b: &(f64, u32, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    let take = m.min(agents.len());
    let mut winners_by_atom = vec![0; atoms.len()];
    let cutoff = if take == 0 {
        f64::INFINITY
    } else {
        if take < agents.len() {
            agents.select_nth_unstable_by(take, better);
        }
        let (win, rest) = agents.split_at(take);
        for a in win {
            winners_by_atom[a.2] += 1;
        }
        let low_win = win.iter().map(|a| a.0).fold(f64::INFINITY, f64::min);
        match rest.first() {
            // after select_nth the first remaining element is the best loser
            Some(l) => 0.5 * (low_win + l.0),
            None => low_win,
        }
    };
    Replication {
        participants,
        winners_by_atom,
        winners: take,
        cutoff,
    }
}

/// Runs `cfg.replications` populations in parallel, stream `i` for
/// replication `i`, and compares per-atom win rates with the model.
pub fn simulate(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let p = if cfg.p.is_atomic() {
        cfg.p.clone()
    } else {
        cfg.p.discretize()
    };
    let profile = CsfProfile::new(&cfg.fam, &p, cfg.k)?;
    let model_cutoff = solve_cutoff(&cfg.fam, &p, cfg.k)?.s;
    let reps: Vec<Replication> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|i| replicate(&cfg.fam, &p, cfg.k, cfg.n, cfg.seed, i))
        .collect();
    let mut atoms = Vec::with_capacity(p.atoms().len());
    for (j, a) in p.atoms().iter().enumerate() {
        let model = profile.win_probability(a.effort)?;
        let (won, seen) = reps.iter().fold((0usize, 0usize), |(w, s), r| {
            (w + r.winners_by_atom[j], s + r.participants[j])
        });
        let empirical = if seen > 0 {
            won as f64 / seen as f64
        } else {
            f64::NAN
        };
        let errs: Vec<f64> = reps
            .iter()
            .filter_map(|r| r.rate(j))
            .map(|w| (w - model).abs())
            .collect();
        let mean_rep_err = errs.iter().sum::<f64>() / errs.len().max(1) as f64;
        atoms.push(AtomStat {
            atom_e: a.effort,
            mass: a.mass,
            empirical_w: empirical,
            model_w: model,
            abs_err: (empirical - model).abs(),
            mean_rep_err,
        });
    }
    let mean_cutoff = reps.iter().map(|r| r.cutoff).sum::<f64>() / reps.len() as f64;
    let mean_abs_err = atoms.iter().map(|a| a.mean_rep_err).sum::<f64>() / atoms.len() as f64;
    Ok(SimResult {
        n: cfg.n,
        k: cfg.k,
        seed: cfg.seed,
        atoms,
        model_cutoff,
        mean_cutoff,
        mean_abs_err,
        replications: reps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// Mean over replications of the largest per-atom absolute error.
    pub mean_err: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `ln mean_err` against `ln n`.
    pub slope: f64,
}

pub const DEFAULT_SIZES: [usize; 4] = [100, 1_000, 10_000, 100_000];

/// Win-rate error against population size, `cfg.n` replaced by each of `sizes`.
pub fn convergence_table(cfg: &SimConfig, sizes: &[usize]) -> Result<ConvergenceTable> {
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let res = simulate(&SimConfig { n, ..cfg.clone() })?;
        let model: Vec<f64> = res.atoms.iter().map(|a| a.model_w).collect();
        let errs: Vec<f64> = res
            .replications
            .iter()
            .map(|r| {
                (0..model.len())
                    .filter_map(|j| r.rate(j).map(|w| (w - model[j]).abs()))
                    .fold(0.0, f64::max)
            })
            .collect();
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        let var =
            errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (errs.len().max(2) - 1) as f64;
        rows.push(ConvergenceRow {
            n,
            mean_err: mean,
            sd: var.sqrt(),
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.mean_err > 0.0)
        .map(|r| ((r.n as f64).ln(), r.mean_err.ln()))
        .collect();
    let slope = if pts.len() >= 2 {
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    } else {
        f64::NAN
    };
    Ok(ConvergenceTable { rows, slope })
}

pub fn write_convergence_csv<W: std::io::Write>(out: W, table: &ConvergenceTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "mean_err", "sd"])?;
    for r in &table.rows {
        w.write_record([
            r.n.to_string(),
            format!("{:.14e}", r.mean_err),
            format!("{:.14e}", r.sd),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_atoms_csv<W: std::io::Write>(out: W, res: &SimResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["atom_e", "empirical_W", "model_W", "abs_err"])?;
    for a in &res.atoms {
        w.write_record(
            [a.atom_e, a.empirical_w, a.model_w, a.abs_err].map(|x| format!("{x:.14e}")),
        )?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::NoiseDistribution;

    fn cfg(p: EffortMeasure, n: usize, reps: usize) -> SimConfig {
        SimConfig {
            n,
            seed: 11,
            fam: PerformanceFamily::additive(NoiseDistribution::normal()),
            p,
            k: 0.3,
            replications: reps,
        }
    }

    #[test]
    fn dirac_rate_is_exact() {
        for n in [7, 100, 1001] {
            let res = simulate(&cfg(EffortMeasure::dirac(1.0).unwrap(), n, 3)).unwrap();
            let m = (0.3 * n as f64).floor();
            assert_eq!(res.atoms[0].empirical_w, m / n as f64);
            assert!(res.atoms[0].abs_err <= 1.0 / n as f64);
        }
    }

    #[test]
    fn mixture_agrees_with_model() {
        let p = EffortMeasure::from_atoms([(1.0, 0.5), (2.0, 0.5)]).unwrap();
        let res = simulate(&cfg(p, 20_000, 8)).unwrap();
        for r in &res.replications {
            assert_eq!(r.winners, 6000);
        }
        for a in &res.atoms {
            assert!(a.abs_err < 0.02, "{a:?}");
        }
        assert!(res.atoms[1].empirical_w >= res.atoms[0].empirical_w);
        assert!((res.mean_cutoff - res.model_cutoff).abs() < 0.05);
    }

    #[test]
    fn non_participants_never_win() {
        let p = EffortMeasure::from_atoms([(1.0, 0.4)]).unwrap();
        let res = simulate(&cfg(p, 5000, 2)).unwrap();
        for r in &res.replications {
            assert_eq!(r.winners_by_atom[0], r.winners);
            assert!(r.participants[0] < 5000);
        }
    }

    #[test]
    fn reproducible_and_seed_sensitive() {
        let p = EffortMeasure::from_atoms([(1.0, 0.5), (2.0, 0.5)]).unwrap();
        let a = simulate(&cfg(p.clone(), 3000, 4)).unwrap();
        let b = simulate(&cfg(p.clone(), 3000, 4)).unwrap();
        assert_eq!(a, b);
        let c = simulate(&SimConfig {
            seed: 12,
            ..cfg(p, 3000, 4)
        })
        .unwrap();
        assert_ne!(a.replications, c.replications);
    }

    #[test]
    fn rejects_slack_budget() {
        let p = EffortMeasure::from_atoms([(1.0, 0.2)]).unwrap();
        assert!(matches!(
            simulate(&cfg(p, 100, 1)),
            Err(Error::BudgetNotBinding { .. })
        ));
        assert!(simulate(&cfg(EffortMeasure::dirac(1.0).unwrap(), 3, 1)).is_err());
    }

    #[test]
    fn config_json() {
        let js = r#"{"n": 100, "seed": 3, "k": 0.3, "replications": 2,
                     "family": {"noise": {"kind": "normal"}},
                     "p": {"atoms": [[1.0, 0.5], [2.0, 0.5]], "segments": []}}"#;
        let c: SimConfig = serde_json::from_str(js).unwrap();
        assert!(c.fam.is_additive());
        assert_eq!(c.winners(), 30);
    }
}
