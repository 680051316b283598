//! Report bundle: cardinality, track, PHD, divergence and cost tables plus
//! free-form notes, each stamped with the density-spec hash and numerical settings.

use std::fs;
use std::path::Path;

use lmo_core::approx::{
    approx_delta_glmb, approx_liid, approx_lmb, approx_lp, integral_cost, DensityKind,
};
use lmo_core::divergence::{kld, kld_decompose, KldConfig, KldDecomposition, KldEstimate, PythagoreanCheck};
use lmo_core::labelspace::POISSON_TAIL;
use lmo_core::lmo::{Factorized, LabeledDensity};
use lmo_core::LmoDensity;

use crate::error::{io, CliError};
use crate::format::{sig6, Csv};
use crate::spec::DensitySpec;

pub const DEFAULT_PHD_RANGE: (f64, f64) = (-10.0, 26.0);
pub const DEFAULT_PHD_POINTS: usize = 721;

const HASH_PREFIX: &str = "spec_sha256: ";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportConfig {
    pub kld: KldConfig,
    pub skip_kld: bool,
    /// PHD grid range, `DEFAULT_PHD_RANGE` when unset.
    pub phd_range: Option<(f64, f64)>,
    pub phd_points: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            kld: KldConfig::default(),
            skip_kld: false,
            phd_range: None,
            phd_points: DEFAULT_PHD_POINTS,
        }
    }
}

/// Named text files, in write order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub spec_hash: String,
    pub files: Vec<(String, String)>,
}

impl ReportBundle {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t.as_str())
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(io(dir))?;
        for (name, text) in &self.files {
            let path = dir.join(name);
            fs::write(&path, text).map_err(io(&path))?;
        }
        Ok(())
    }

    /// Compares against a bundle on disk: the density-spec hashes must agree, then
    /// every file must be byte-identical.
    pub fn compare(&self, dir: &Path) -> Result<(), CliError> {
        let found = bundle_spec_hash(dir)?;
        if found != self.spec_hash {
            return Err(CliError::HashMismatch {
                expected: self.spec_hash.clone(),
                found,
            });
        }
        let mut differing = Vec::new();
        for (name, text) in &self.files {
            match fs::read(dir.join(name)) {
                Ok(bytes) if bytes == text.as_bytes() => {}
                _ => differing.push(name.clone()),
            }
        }
        if differing.is_empty() {
            Ok(())
        } else {
            Err(CliError::BundleMismatch(differing))
        }
    }
}

/// Spec hash recorded in a bundle's `notes.txt`.
pub fn bundle_spec_hash(dir: &Path) -> Result<String, CliError> {
    let path = dir.join("notes.txt");
    let text = fs::read_to_string(&path).map_err(io(&path))?;
    text.lines()
        .find_map(|l| l.strip_prefix(HASH_PREFIX))
        .map(|h| h.trim().to_string())
        .ok_or_else(|| CliError::Spec(format!("{} has no spec hash", path.display())))
}

fn provenance(hash: &str, cfg: &ReportConfig) -> Vec<String> {
    let k = &cfg.kld;
    vec![
        format!("spec_sha256: {hash}"),
        format!(
            "seed: {}; grid_points: {}; grid_points_3d: {}; span: {}; mc_samples: {}; mc: {}",
            k.seed,
            k.grid_points,
            k.grid_points_3d,
            sig6(k.span),
            k.mc_samples,
            if k.allow_mc { "on" } else { "off" }
        ),
    ]
}

struct Approximations {
    dglmb: lmo_core::approx::DeltaGlmbDensity,
    lmb: lmo_core::approx::LmbDensity,
    lp: Option<lmo_core::approx::LpDensity>,
    liid: lmo_core::approx::LiidDensity,
}

pub fn build_report(spec: &DensitySpec, cfg: &ReportConfig) -> Result<ReportBundle, CliError> {
    let prepared = spec.prepare()?;
    let pi = prepared.build()?;
    let hash = spec.sha256();
    let head = provenance(&hash, cfg);
    let approx = Approximations {
        dglmb: approx_delta_glmb(&pi)?,
        lmb: approx_lmb(&pi)?,
        lp: if pi.mean_cardinality() > 0.0 {
            Some(approx_lp(&pi)?)
        } else {
            None
        },
        liid: approx_liid(&pi)?,
    };

    let mut notes = vec![format!("{HASH_PREFIX}{hash}")];
    notes.push(head[1].clone());
    notes.push(format!(
        "labels: {}; state_dim: {}",
        pi.space().len(),
        pi.state_dim()
    ));
    if let Some(total) = prepared.renormalized_from {
        notes.push(format!("weights renormalized from total {}", sig6(total)));
    }
    if prepared.repairs.is_empty() {
        notes.push("no covariance repairs".into());
    }
    for r in &prepared.repairs {
        notes.push(r.to_string());
    }

    let mut files = vec![
        ("cardinality.csv".to_string(), cardinality_csv(&pi, &approx, &head, &mut notes)),
        ("tracks.csv".to_string(), tracks_csv(&pi, &approx, &head)),
    ];
    if pi.state_dim() == 1 {
        files.push(("phd.csv".to_string(), phd_csv(&pi, &approx, &head, cfg, &mut notes)?));
    } else {
        notes.push("phd.csv skipped: PHD curves are tabulated for state_dim = 1 only".into());
    }
    if cfg.skip_kld {
        notes.push("kld.csv skipped on request".into());
    } else {
        files.push(("kld.csv".to_string(), kld_csv(&pi, &approx, &head, cfg, &mut notes)?));
    }
    files.push(("cost.csv".to_string(), cost_csv(&pi, &head)?));
    let mut text = String::new();
    for line in &notes {
        text.push_str(line);
        text.push('\n');
    }
    files.push(("notes.txt".to_string(), text));
    Ok(ReportBundle {
        spec_hash: hash,
        files,
    })
}

fn cardinality_csv(
    pi: &LmoDensity,
    a: &Approximations,
    head: &[String],
    notes: &mut Vec<String>,
) -> String {
    let rho = pi.cardinality();
    let dglmb = a.dglmb.cardinality();
    let liid = a.liid.cardinality().clone();
    let lmb = a.lmb.cardinality();
    let pois = a.lp.as_ref().map(|lp| lp.cardinality());
    let n_max = pois.as_ref().map_or(0, |p| p.max_n()).max(pi.space().len());
    let mut lines = head.to_vec();
    match (&a.lp, &pois) {
        (Some(lp), Some(p)) => {
            lines.push(format!(
                "rho_pois: Poisson({}) truncated where the tail drops below {POISSON_TAIL:e}; column sums to {}",
                sig6(lp.rate()),
                p.total()
            ));
            notes.push(format!(
                "labeled Poisson: rate {}, cardinality truncated at n = {}, mass on the label space {}",
                sig6(lp.rate()),
                p.max_n(),
                sig6(lp.label_space_mass())
            ));
        }
        _ => {
            lines.push("rho_pois: undefined for a zero PHD mass".into());
            notes.push("labeled Poisson approximation undefined: PHD mass is zero".into());
        }
    }
    let mut csv = Csv::new(&lines, &["n", "rho", "rho_dglmb", "rho_liid", "rho_lmb", "rho_pois"]);
    for n in 0..=n_max {
        csv.row([
            n.to_string(),
            sig6(rho.get(n)),
            sig6(dglmb.get(n)),
            sig6(liid.get(n)),
            sig6(lmb.get(n)),
            pois.as_ref().map_or_else(|| "nan".into(), |p| sig6(p.get(n))),
        ]);
    }
    csv.finish()
}

fn tracks_csv(pi: &LmoDensity, a: &Approximations, head: &[String]) -> String {
    let d = pi.state_dim();
    let mut cols = vec!["label".to_string(), "existence".into(), "components".into()];
    cols.extend((1..=d).map(|i| format!("mean_{i}")));
    cols.extend((1..=d).map(|i| format!("var_{i}")));
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut csv = Csv::new(head, &cols);
    for t in a.lmb.tracks() {
        let mut row = vec![
            pi.space().name(t.label).to_string(),
            sig6(t.existence),
            t.spatial.len().to_string(),
        ];
        match (t.spatial.mean(), t.spatial.covariance()) {
            (Some(m), Some(c)) => {
                row.extend(m.iter().map(|&v| sig6(v)));
                row.extend((0..d).map(|i| sig6(c[(i, i)])));
            }
            _ => row.extend((0..2 * d).map(|_| "nan".to_string())),
        }
        csv.row(row);
    }
    csv.finish()
}

fn phd_csv(
    pi: &LmoDensity,
    a: &Approximations,
    head: &[String],
    cfg: &ReportConfig,
    notes: &mut Vec<String>,
) -> Result<String, CliError> {
    let v = pi.unlabeled_phd()?;
    let (lo, hi) = cfg.phd_range.unwrap_or(DEFAULT_PHD_RANGE);
    if !(lo < hi) || cfg.phd_points < 2 {
        return Err(CliError::Spec(format!(
            "invalid PHD grid [{lo}, {hi}] with {} points",
            cfg.phd_points
        )));
    }
    notes.push(format!(
        "phd.csv grid: [{}, {}] with {} points",
        sig6(lo),
        sig6(hi),
        cfg.phd_points
    ));
    if let Some(b) = v.bounds(8.0) {
        if b[0].0 < lo || b[0].1 > hi {
            notes.push(format!(
                "phd.csv grid does not cover every component mean +/- 8 sd ([{}, {}])",
                sig6(b[0].0),
                sig6(b[0].1)
            ));
        }
    }
    let labels: Vec<_> = pi.space().labels().collect();
    let labeled = labels
        .iter()
        .map(|&l| pi.labeled_phd(l))
        .collect::<Result<Vec<_>, _>>()?;
    let spatial_lmb: Vec<_> = a.lmb.tracks().iter().map(|t| &t.spatial).collect();
    let pooled = a.liid.spatial();

    let mut cols = vec!["x".to_string()];
    cols.extend(labels.iter().map(|&l| format!("v_{}", pi.space().name(l))));
    cols.push("v".into());
    cols.extend(labels.iter().map(|&l| format!("p_lmb_{}", pi.space().name(l))));
    cols.push("p_pooled".into());
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut lines = head.to_vec();
    lines.push("v_<label>: labeled PHD (shared by the original, delta-GLMB and LMB densities)".into());
    lines.push("v: unlabeled PHD (shared by the original, LP and LIID densities)".into());
    lines.push("p_lmb_<label>: LMB spatial density; p_pooled: v / <v,1> used by LP and LIID".into());
    let mut csv = Csv::new(&lines, &cols);
    let step = (hi - lo) / (cfg.phd_points - 1) as f64;
    for i in 0..cfg.phd_points {
        let x = if i + 1 == cfg.phd_points { hi } else { lo + step * i as f64 };
        let mut row = vec![sig6(x)];
        for m in &labeled {
            row.push(sig6(m.evaluate(&[x])?));
        }
        row.push(sig6(v.evaluate(&[x])?));
        for p in &spatial_lmb {
            row.push(sig6(p.evaluate(&[x])?));
        }
        row.push(sig6(pooled.evaluate(&[x])?));
        csv.row(row);
    }
    Ok(csv.finish())
}

fn kld_csv(
    pi: &LmoDensity,
    a: &Approximations,
    head: &[String],
    cfg: &ReportConfig,
    notes: &mut Vec<String>,
) -> Result<String, CliError> {
    let k = &cfg.kld;
    let mut entries: Vec<(&str, &dyn Factorized)> = vec![
        ("delta-GLMB", &a.dglmb),
        ("LMB", &a.lmb),
    ];
    if let Some(lp) = &a.lp {
        entries.push(("LP", lp));
    }
    entries.push(("LIID", &a.liid));

    let mut csv = Csv::new(
        head,
        &[
            "approximation",
            "kld",
            "error_bound",
            "method",
            "c_omega",
            "c_p",
            "c_p_error_bound",
            "infinite_stratum",
        ],
    );
    let mut results: Vec<(&str, KldEstimate, KldDecomposition)> = Vec::new();
    for (name, g) in entries {
        let est = kld(pi, g, k)?;
        let dec = kld_decompose(pi, g, k)?;
        let infinite = est
            .infinite_stratum
            .or(dec.omega_infinite)
            .map_or_else(String::new, |s| pi.space().display_set(s).replace(',', " "));
        csv.row([
            name.to_string(),
            sig6(est.value),
            sig6(est.error_bound),
            est.method.to_string(),
            sig6(dec.c_omega),
            sig6(dec.c_p.value),
            sig6(dec.c_p.error_bound),
            infinite,
        ]);
        results.push((name, est, dec));
    }

    for (name, est, _) in &results {
        if let Some(s) = est.infinite_stratum {
            notes.push(format!(
                "D_KL(original; {name}) is infinite: the approximation vanishes on stratum {} where the original has mass",
                pi.space().display_set(s)
            ));
        }
    }
    let c_p: Vec<String> = results
        .iter()
        .map(|(name, _, dec)| format!("{name} {}", sig6(dec.c_p.value)))
        .collect();
    notes.push(format!("C(P) by approximation (reported, not asserted): {}", c_p.join(", ")));

    let dglmb_lmo = a.dglmb.to_lmo()?;
    let between = kld(&dglmb_lmo, &a.lmb, k)?;
    let pi_lmb = results[1].1.clone();
    let pi_dglmb = results[0].1.clone();
    let check = PythagoreanCheck::new(pi_lmb, pi_dglmb, between);
    notes.push(format!(
        "projection identity: D(original;LMB) - D(original;delta-GLMB) - D(delta-GLMB;LMB) = {} (bound {}, {})",
        sig6(check.residual),
        sig6(check.error_bound),
        if check.holds() { "holds" } else { "exceeds bound" }
    ));
    Ok(csv.finish())
}

fn cost_csv(pi: &LmoDensity, head: &[String]) -> Result<String, CliError> {
    let n = pi.space().len();
    let mut cols = vec!["density".to_string()];
    cols.extend((1..=n).map(|k| format!("X^{k}")));
    cols.push("total".into());
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut csv = Csv::new(head, &cols);
    for kind in DensityKind::ALL {
        let c = integral_cost(kind, n)?;
        let mut row = vec![kind.name().to_string()];
        row.extend(c.counts.iter().map(|v| v.to_string()));
        row.push(c.total().to_string());
        csv.row(row);
    }
    Ok(csv.finish())
}
