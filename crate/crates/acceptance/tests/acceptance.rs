//! End-to-end acceptance checks. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

use std::f64::consts::FRAC_PI_4;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use cellflow::channel::{channel_flux, channel_flux_closed_power};
use cellflow::experiments::{cmd_regime_table, cmd_sweep_amplitude, RunConfig, SweepModel, SweepOutcome};
use cellflow::fem::{Diagnostics, GradientForm, KktBackend, PicardOptions};
use cellflow::homogenize::{CellProblem, OperatorSample, PermeabilityTensor, POWER_DELTA_REG};
use cellflow::mesh::{CellSpec, InclusionShape};
use cellflow::rheology::{conjugate_exponent, CarreauParams, ViscosityLaw};

/// Nonlinear cell solves run on this E1 resolution to keep the suite within minutes.
const COARSE: (f64, usize) = (0.16, 4);
/// The channel flow does not depend on x', so a coarse lateral mesh with fine layers suffices.
const CHANNEL: (f64, usize) = (0.25, 8);

type Outcome = Result<(bool, String), String>;

#[derive(Default)]
struct Hygiene {
    runs: usize,
    divergence: f64,
    pressure_mean: f64,
    energy: f64,
    failures: Vec<String>,
}

impl Hygiene {
    fn record(&mut self, d: &Diagnostics) {
        self.runs += 1;
        self.divergence = self.divergence.max(d.divergence_norm);
        self.pressure_mean = self.pressure_mean.max(d.pressure_mean.abs());
        self.energy = self.energy.max(d.energy_mismatch);
    }

    fn tensor(&mut self, t: &PermeabilityTensor) {
        t.diagnostics.iter().for_each(|d| self.record(d));
    }

    fn sample(&mut self, s: &OperatorSample) {
        self.record(&s.diagnostics);
    }

    fn sweep(&mut self, s: &SweepOutcome) {
        for rec in &s.records {
            match (&rec.diagnostics, &rec.error) {
                (Some(d), None) => self.record(d),
                (_, Some(e)) => self.failures.push(format!("r={} f1={}: {e}", rec.r, rec.f1)),
                (None, None) => self.failures.push(format!("r={} f1={}: no diagnostics", rec.r, rec.f1)),
            }
        }
    }
}

struct Suite {
    hygiene: Hygiene,
    picard: PicardOptions,
    tensors: Vec<(String, PermeabilityTensor)>,
    coarse_e1: Option<CellProblem>,
}

impl Suite {
    fn tensor(&mut self, label: &str, shape: InclusionShape, form: GradientForm) -> Result<PermeabilityTensor, String> {
        let cell = CellProblem::new(&CellSpec::new(shape)).map_err(|e| e.to_string())?;
        let t = cell.tensor(form, KktBackend::Ldlt).map_err(|e| e.to_string())?;
        self.hygiene.tensor(&t);
        self.tensors.push((format!("{label} {form:?}"), t.clone()));
        Ok(t)
    }

    fn e1(&mut self) -> Result<&CellProblem, String> {
        if self.coarse_e1.is_none() {
            let spec = CellSpec::new(e(1)).with_resolution(COARSE.0, COARSE.1);
            self.coarse_e1 = Some(CellProblem::new(&spec).map_err(|e| e.to_string())?);
        }
        Ok(self.coarse_e1.as_ref().unwrap())
    }

    fn operator(&mut self, law: &ViscosityLaw, xi: [f64; 2]) -> Result<[f64; 2], String> {
        let opts = self.picard;
        let s = self.e1()?.operator(law, xi, &opts).map_err(|e| {
            self.hygiene.failures.push(format!("{law:?} xi={xi:?}: {e}"));
            e.to_string()
        })?;
        self.hygiene.sample(&s);
        Ok(s.u)
    }
}

fn e(k: usize) -> InclusionShape {
    InclusionShape::preset(&format!("E{k}")).unwrap()
}

fn e2_rotated() -> InclusionShape {
    InclusionShape::Ellipse {
        semi_major: 0.3,
        semi_minor: 0.1,
        angle: FRAC_PI_4,
    }
}

fn rel(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

fn err<E: ToString>(e: E) -> String {
    e.to_string()
}

fn out_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name)
}

fn no_obstacle_tensor(s: &mut Suite) -> Outcome {
    let start = Instant::now();
    let t = s.tensor("NONE", InclusionShape::Empty, GradientForm::Full)?;
    let secs = start.elapsed().as_secs_f64();
    let tol = 0.01 / 12.0;
    let ok = (t.a[0][0] - 1.0 / 12.0).abs() <= tol
        && (t.a[1][1] - 1.0 / 12.0).abs() <= tol
        && t.a[0][1].abs() <= tol
        && t.a[1][0].abs() <= tol
        && secs < 60.0;
    Ok((
        ok,
        format!(
            "A = [[{:.6}, {:.2e}], [{:.2e}, {:.6}]] vs 1/12 = {:.6}, {secs:.1} s",
            t.a[0][0],
            t.a[0][1],
            t.a[1][0],
            t.a[1][1],
            1.0 / 12.0
        ),
    ))
}

fn reference_tensors(s: &mut Suite) -> Outcome {
    // (label, shape, entry, reference, tolerance)
    let cases: [(&str, InclusionShape, &[(usize, usize)], f64, f64); 5] = [
        ("E1", e(1), &[(0, 0), (1, 1)], 0.0698, 0.05),
        ("E2", e(2), &[(0, 0)], 0.0547, 0.05),
        ("E2", e(2), &[(1, 1)], 0.0211, 0.05),
        ("E4", e(4), &[(0, 0), (1, 1)], 0.01533, 0.05),
        ("E2 rotated pi/4", e2_rotated(), &[(0, 1), (1, 0)], 0.00963, 0.10),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    let mut cache: Vec<(String, PermeabilityTensor, PermeabilityTensor)> = Vec::new();
    for (label, shape, entries, want, tol) in cases {
        if !cache.iter().any(|(l, ..)| l == label) {
            let full = s.tensor(label, shape, GradientForm::Full)?;
            let sym = s.tensor(label, shape, GradientForm::Symmetric)?;
            cache.push((label.to_string(), full, sym));
        }
        let (_, full, sym) = cache.iter().find(|(l, ..)| l == label).unwrap();
        for &(i, j) in entries {
            let (f, g) = (full.a[i][j], sym.a[i][j]);
            let pass = rel(f, want) <= tol;
            ok &= pass;
            detail.push(format!(
                "{label} A{}{} = {f:.5} vs {want} ({:+.1}%{}; symmetric-gradient cell problem {g:.5}, {:+.1}%)",
                i + 1,
                j + 1,
                100.0 * (f - want) / want,
                if pass { "" } else { " out of tolerance" },
                100.0 * (g - want) / want,
            ));
        }
    }
    Ok((ok, detail.join("; ")))
}

fn reciprocity(s: &mut Suite) -> Outcome {
    if s.tensors.is_empty() {
        return Err("no tensors computed".into());
    }
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for (_, t) in &s.tensors {
        let ratio = t.symmetry_gap() / t.norm();
        worst = worst.max(ratio);
        ok &= t.symmetry_gap() <= 1e-8 * t.norm();
    }
    Ok((ok, format!("{} tensors, max |A12 - A21| / |A| = {worst:.2e}", s.tensors.len())))
}

fn channel_validation(s: &mut Suite) -> Outcome {
    let spec = CellSpec::new(InclusionShape::Empty).with_resolution(CHANNEL.0, CHANNEL.1);
    let cell = CellProblem::new(&spec).map_err(err)?;
    let mut cases: Vec<(String, ViscosityLaw, f64, f64)> = Vec::new();
    for lambda in [1.0, 100.0] {
        for r in [1.7, 2.6] {
            let law = ViscosityLaw::carreau(1.0, 1e-3, lambda, r).map_err(err)?;
            for xi in [0.1, 1.0] {
                let want = channel_flux(&law, xi).map_err(err)?;
                cases.push((format!("Carreau lambda={lambda} r={r} xi={xi}"), law, xi, want));
            }
        }
    }
    for r in [2.3, 3.0] {
        let law = ViscosityLaw::power_law(1.0, r, POWER_DELTA_REG).map_err(err)?;
        let rc = conjugate_exponent(r);
        let closed = 1.0 / (2f64.powf(rc / 2.0) * (rc + 1.0));
        if rel(channel_flux_closed_power(r, 1.0), closed) > 1e-12 {
            return Err(format!("power-law closed form disagrees at r={r}"));
        }
        cases.push((format!("power r={r} xi=1"), law, 1.0, closed));
    }
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    for (label, law, xi, want) in &cases {
        let start = Instant::now();
        let sample = cell.operator(law, [*xi, 0.0], &s.picard);
        let secs = start.elapsed().as_secs_f64();
        let sample = match sample {
            Ok(v) => v,
            Err(e) => {
                s.hygiene.failures.push(format!("{label}: {e}"));
                return Ok((false, format!("{label}: {e}")));
            }
        };
        s.hygiene.sample(&sample);
        let dev = rel(sample.u[0], *want);
        worst = worst.max(dev);
        slowest = slowest.max(secs);
        ok &= dev <= 0.02 && secs < 120.0;
    }
    Ok((
        ok,
        format!(
            "{} solves, max relative deviation {:.3}%, slowest {slowest:.1} s",
            cases.len(),
            100.0 * worst
        ),
    ))
}

fn power_homogeneity(s: &mut Suite) -> Outcome {
    let r = 2.3;
    let law = ViscosityLaw::power_law(1.0, r, POWER_DELTA_REG).map_err(err)?;
    let xi = [0.6, 0.3];
    let base = s.operator(&law, xi)?;
    let scale = conjugate_exponent(r) - 1.0;
    let mut ok = true;
    let mut detail = Vec::new();
    for t in [2.0, 10.0] {
        let u = s.operator(&law, [t * xi[0], t * xi[1]])?;
        let want = [t.powf(scale) * base[0], t.powf(scale) * base[1]];
        let dev = (u[0] - want[0]).hypot(u[1] - want[1]) / want[0].hypot(want[1]);
        ok &= dev <= 0.01;
        detail.push(format!("t={t}: {:.4}%", 100.0 * dev));
    }
    Ok((ok, detail.join(", ")))
}

fn monotonicity(s: &mut Suite) -> Outcome {
    // five fixed forcings give ten distinct pairs
    let points: Vec<[f64; 2]> = [(0.25, 0.0), (0.5, 1.1), (1.0, 2.3), (1.5, 3.9), (2.0, 5.2)]
        .iter()
        .map(|&(m, a): &(f64, f64)| [m * a.cos(), m * a.sin()])
        .collect();
    let laws = [
        ("Carreau lambda=100 r=1.7", ViscosityLaw::carreau(1.0, 1e-3, 100.0, 1.7).map_err(err)?),
        ("power r=3", ViscosityLaw::power_law(1.0, 3.0, POWER_DELTA_REG).map_err(err)?),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (label, law) in &laws {
        let us = points
            .iter()
            .map(|&xi| s.operator(law, xi))
            .collect::<Result<Vec<_>, _>>()?;
        let mut min = f64::INFINITY;
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                let d = (us[i][0] - us[j][0]) * (points[i][0] - points[j][0])
                    + (us[i][1] - us[j][1]) * (points[i][1] - points[j][1]);
                min = min.min(d);
            }
        }
        ok &= min > 0.0;
        detail.push(format!("{label}: min product {min:.3e} over 10 pairs"));
    }
    Ok((ok, detail.join("; ")))
}

fn coarse_config(name: &str, model: SweepModel, r_values: Vec<f64>) -> RunConfig {
    let mut cfg = RunConfig {
        cell: CellSpec::new(e(1)).with_resolution(COARSE.0, COARSE.1),
        law: CarreauParams {
            eta0: 1.0,
            eta_inf: 1e-3,
            lambda: 100.0,
            r: 2.0,
        },
        gamma: 1.0,
        ..RunConfig::default()
    };
    cfg.amplitude_sweep.model = model;
    cfg.amplitude_sweep.r_values = r_values;
    cfg.output.dir = out_dir(name);
    cfg
}

fn curve(s: &SweepOutcome, r: f64) -> Result<Vec<(f64, f64)>, String> {
    s.curve(r)
        .iter()
        .map(|rec| rec.v1.map(|v| (rec.f1, v)).ok_or_else(|| format!("r={r} f1={} failed", rec.f1)))
        .collect()
}

fn second_differences(c: &[(f64, f64)]) -> Vec<f64> {
    c.windows(3).map(|w| w[2].1 - 2.0 * w[1].1 + w[0].1).collect()
}

fn carreau_sweep(s: &mut Suite) -> Outcome {
    let rs = vec![1.7, 2.0, 2.3, 2.6];
    let cfg = coarse_config("carreau_sweep", SweepModel::CarreauOperator, rs.clone());
    let out = cmd_sweep_amplitude(&cfg).map_err(err)?;
    s.hygiene.sweep(&out);
    let curves = rs.iter().map(|&r| curve(&out, r)).collect::<Result<Vec<_>, _>>()?;
    let at_one: Vec<f64> = curves
        .iter()
        .map(|c| c.iter().find(|(f, _)| *f == 1.0).map(|p| p.1).ok_or("grid lacks f1 = 1"))
        .collect::<Result<_, _>>()?;
    let decreasing = at_one.windows(2).all(|w| w[1] < w[0]);
    let d_thin = second_differences(&curves[0]);
    let d_thick = second_differences(&curves[3]);
    let convex = d_thin.iter().all(|&d| d > 0.0);
    let concave = d_thick.iter().all(|&d| d < 0.0);
    Ok((
        decreasing && convex && concave,
        format!(
            "V1(f1=1) = {:.5?}; r=1.7 second differences in [{:.2e}, {:.2e}]; r=2.6 in [{:.2e}, {:.2e}]",
            at_one,
            d_thin.iter().cloned().fold(f64::INFINITY, f64::min),
            d_thin.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            d_thick.iter().cloned().fold(f64::INFINITY, f64::min),
            d_thick.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        ),
    ))
}

fn power_crossing(s: &mut Suite) -> Outcome {
    let cfg = coarse_config("power_crossing", SweepModel::PowerOperator, vec![2.0, 2.3]);
    let out = cmd_sweep_amplitude(&cfg).map_err(err)?;
    s.hygiene.sweep(&out);
    let (a, b) = (curve(&out, 2.0)?, curve(&out, 2.3)?);
    let diff: Vec<(f64, f64)> = a.iter().zip(&b).map(|(p, q)| (p.0, p.1 - q.1)).collect();
    let mut crossings = Vec::new();
    for w in diff.windows(2) {
        let ((f0, d0), (f1, d1)) = (w[0], w[1]);
        if d0 == 0.0 {
            crossings.push(f0);
        } else if d0 * d1 < 0.0 {
            crossings.push(f0 + (f1 - f0) * d0 / (d0 - d1));
        }
    }
    if diff.last().is_some_and(|p| p.1 == 0.0) {
        crossings.push(diff.last().unwrap().0);
    }
    let ok = crossings.len() == 1 && crossings[0] > 0.2 && crossings[0] < 0.6;
    Ok((ok, format!("crossings at f1 = {crossings:.4?}")))
}

fn regime_table(_: &mut Suite) -> Outcome {
    let eta0 = "Linear 2D Darcy's law (viscosity eta0)";
    let expected = [
        [eta0, eta0, eta0],
        ["Non-linear 2D Darcy's law (Carreau type)", eta0, "Non-linear 2D Darcy's law (Carreau type)"],
        [
            "Linear 2D Darcy's law (viscosity eta_inf)",
            eta0,
            "Non-linear 2D Darcy's law (power law type)",
        ],
    ];
    let mut cfg = RunConfig::default();
    cfg.output.dir = out_dir("regime_table");
    let (table, _) = cmd_regime_table(&cfg).map_err(err)?;
    let labels = table.labels();
    let matched = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .filter(|&(i, j)| labels.get(i).and_then(|row| row.get(j)) == Some(&expected[i][j]))
        .count();
    Ok((matched == 9, format!("{matched}/9 cells match")))
}

fn hygiene(s: &mut Suite) -> Outcome {
    let h = &s.hygiene;
    let ok = h.failures.is_empty()
        && h.runs > 0
        && h.divergence <= 1e-8
        && h.pressure_mean <= 1e-10
        && h.energy <= 1e-6;
    let mut detail = format!(
        "{} solves: max |Bu| {:.2e}, max |pressure mean| {:.2e}, max energy gap {:.2e}, {} unconverged",
        h.runs,
        h.divergence,
        h.pressure_mean,
        h.energy,
        h.failures.len()
    );
    if let Some(first) = h.failures.first() {
        detail.push_str(&format!(" (first: {first})"));
    }
    Ok((ok, detail))
}

fn main() -> ExitCode {
    faer::set_global_parallelism(faer::Par::Seq);
    let mut suite = Suite {
        hygiene: Hygiene::default(),
        picard: PicardOptions {
            tol_rel: 1e-8,
            ..PicardOptions::default()
        },
        tensors: Vec::new(),
        coarse_e1: None,
    };
    let criteria: [(&str, fn(&mut Suite) -> Outcome); 10] = [
        ("no-obstacle Newtonian tensor", no_obstacle_tensor),
        ("reference permeability tensors", reference_tensors),
        ("discrete reciprocity", reciprocity),
        ("nonlinear channel validation", channel_validation),
        ("power-law homogeneity", power_homogeneity),
        ("monotonicity", monotonicity),
        ("Carreau amplitude sweep shape", carreau_sweep),
        ("power-law curve crossing", power_crossing),
        ("regime table", regime_table),
        ("solver hygiene", hygiene),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = run(&mut suite).unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!ok);
        println!(
            "[{}] {:2} {name}: {detail} [{:.0} s]",
            if ok { "PASS" } else { "FAIL" },
            k + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
