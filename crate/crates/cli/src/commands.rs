use std::path::PathBuf;

use nalgebra::Vector3;
use vsim_core::constants::UEV_IN_MHZ;
use vsim_core::ensemble::{
    contrast_vs_modulation, contrast_vs_power, contrast_vs_temperature, odmr_spectrum_with_pl, peak_and_fwhm, ple_grid, ple_scan, sub_ensemble_fraction, EnsembleCurve,
    TemperatureModel,
};
use vsim_core::scenario::{LaserMode, Scenario};
use vsim_core::sensing::{sensitivity_report, write_timeseries_binary};
use vsim_core::spin::{build_hamiltonian, eigenlevels, hyperfine_satellites, spin_lines, LineKind, SpinProjection, DEFAULT_WEIGHT_FLOOR};
use vsim_core::{Result, SimError};

use crate::output::{timestamp, Cell, OutputDir, Table};
use crate::{Cli, Command, Format, GlobalArgs, ModeArg};

const DEFAULTS_ENV: &str = "VSIM_ODMR_DEFAULTS";

fn default_scenario(mode: LaserMode) -> Result<Scenario> {
    match std::env::var_os(DEFAULTS_ENV) {
        Some(dir) => {
            let file = match mode {
                LaserMode::Resonant => "resonant.default",
                LaserMode::Broadband => "offresonant.default",
            };
            Scenario::load(&PathBuf::from(dir).join(file))
        }
        None => Ok(match mode {
            LaserMode::Resonant => Scenario::resonant_default(),
            LaserMode::Broadband => Scenario::offresonant_default(),
        }),
    }
}

/// The scenario for this run: the config file, or the shipped default for
/// `mode`, with command-line overrides applied and re-validated.
pub fn load(g: &GlobalArgs, mode: LaserMode) -> Result<Scenario> {
    let mut sc = match &g.config {
        Some(p) => Scenario::load(p)?,
        None => default_scenario(mode)?,
    };
    if let Some(s) = g.seed {
        sc.sensing.seed = s;
    }
    if let Some(q) = g.quadrature {
        sc.ensemble.quadrature = q;
    }
    sc.validate()?;
    Ok(sc)
}

pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    if let Some(n) = g.jobs {
        if n == 0 {
            return Err(SimError::Schema {
                key: "--jobs".into(),
                message: "expected a thread count ≥ 1".into(),
            });
        }
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let started = timestamp();
    let base_mode = match cli.command {
        Command::OdmrSpectrum { mode: ModeArg::Broadband } => LaserMode::Broadband,
        _ => LaserMode::Resonant,
    };
    let sc = load(g, base_mode)?;
    let hash = sc.hash();
    let mut out = OutputDir::create(&g.out)?;
    let tables = match &cli.command {
        Command::OdmrSpectrum { mode } => odmr_spectrum(&sc, *mode)?,
        Command::PowerSweep => power_sweep(&sc)?,
        Command::PleScan => ple(&sc)?,
        Command::ModSweep => {
            let c = contrast_vs_modulation(&sc, &sc.sweeps.mod_spans_ghz)?;
            vec![Table::from_curves("mod_sweep", &hash, &[&c])]
        }
        Command::TempSweep => {
            let tm = TemperatureModel::from_scenario(&sc)?;
            let c = contrast_vs_temperature(&sc, &sc.sweeps.temperatures_k, &tm)?;
            vec![Table::from_curves("temp_sweep", &hash, &[&c])]
        }
        Command::Sensitivity { timeseries, inject } => sensitivity(&sc, *timeseries, *inject, &mut out)?,
        Command::Fraction { hom_uev, inh_uev } => fraction(&hash, *hom_uev, *inh_uev)?,
        Command::Transitions => transitions(&sc)?,
    };
    for t in &tables {
        out.table(t, g.format == Format::Json, g.gnuplot)?;
    }
    out.write("scenario.toml", sc.to_toml().as_bytes())?;
    out.finish(cli.command.name(), &hash, sc.sensing.seed, started)
}

fn odmr_spectrum(sc: &Scenario, mode: ModeArg) -> Result<Vec<Table>> {
    let modes: &[LaserMode] = match mode {
        ModeArg::Resonant => &[LaserMode::Resonant],
        ModeArg::Broadband => &[LaserMode::Broadband],
        ModeArg::Both => &[LaserMode::Resonant, LaserMode::Broadband],
    };
    let mut curves: Vec<EnsembleCurve> = Vec::new();
    let mut pl = Vec::new();
    for &m in modes {
        let mut msc = sc.clone();
        msc.laser.mode = m;
        let (mut c, off) = odmr_spectrum_with_pl(&msc)?;
        c.series[0].name = format!("contrast_{}", m.name());
        c.metadata.remove("mode");
        c.metadata.remove("pl_off_per_s");
        pl.push((m, off, msc.laser_power(m)));
        curves.push(c);
    }
    let refs: Vec<&EnsembleCurve> = curves.iter().collect();
    let mut t = Table::from_curves("odmr_spectrum", &sc.hash(), &refs);
    for (m, off, p) in pl {
        t = t.meta(&format!("pl_off_{}_per_s", m.name()), format!("{off:e}")).meta(&format!("laser_power_{}_w", m.name()), format!("{p:e}"));
    }
    Ok(vec![t])
}

fn power_sweep(sc: &Scenario) -> Result<Vec<Table>> {
    let (c, pl) = contrast_vs_power(sc, &sc.power_grid_w())?;
    let mut t = Table::from_curves("power_sweep", &sc.hash(), &[&c, &pl]);
    t.log_axes = (true, false);
    Ok(vec![t])
}

fn ple(sc: &Scenario) -> Result<Vec<Table>> {
    let grid = ple_grid(sc);
    let c = ple_scan(sc, &grid, sc.sweeps.ple_power_w)?;
    let (peak, fwhm) = peak_and_fwhm(&grid, &c.series[0].values)?;
    Ok(vec![Table::from_curves("ple_scan", &sc.hash(), &[&c]).meta("peak_nm", peak).meta("fwhm_nm", fwhm)])
}

fn sensitivity(sc: &Scenario, timeseries: bool, inject: Option<f64>, out: &mut OutputDir) -> Result<Vec<Table>> {
    let mut sc = sc.clone();
    if let Some(a) = inject {
        sc.sensing.inject_amplitude_t = a;
        sc.validate()?;
    }
    let hash = sc.hash();
    let report = sensitivity_report(&sc)?;
    let columns = [
        "mode",
        "laser_power_w",
        "alpha_per_hz",
        "operating_freq_mhz",
        "contrast_at_operating",
        "photon_rate_per_s",
        "measured_nt_per_rthz",
        "shot_limit_nt_per_rthz",
        "seed",
        "injected_nt",
        "recovered_nt",
    ];
    let mut summary = Table::new("sensitivity", &hash, columns.iter().map(|s| s.to_string()).collect())
        .meta("band_low_hz", report.band_low_hz)
        .meta("band_high_hz", report.band_high_hz);
    for m in &report.modes {
        summary.rows.push(vec![
            Cell::Text(m.mode.clone()),
            Cell::Num(m.laser_power_w),
            Cell::Num(m.alpha_per_hz),
            Cell::Num(m.operating_freq_mhz),
            Cell::Num(m.contrast_at_operating),
            Cell::Num(m.photon_rate_per_s),
            Cell::Num(m.measured_t_per_rthz * 1e9),
            Cell::Num(m.shot_limit_t_per_rthz * 1e9),
            Cell::Num(m.seed as f64),
            Cell::Num(m.injected_amplitude_t * 1e9),
            Cell::Num(m.recovered_amplitude_t.unwrap_or(0.0) * 1e9),
        ]);
    }

    let mut cols = vec!["freq_hz".to_string()];
    cols.extend(report.modes.iter().map(|m| format!("asd_{}_t_per_rthz", m.mode)));
    let mut asd = Table::new("asd", &hash, cols)
        .meta("segments", report.spectra[0].segments)
        .meta("df_hz", report.spectra[0].df_hz);
    asd.log_axes = (true, true);
    for (k, f) in report.spectra[0].freqs_hz.iter().enumerate().skip(1) {
        let mut row = vec![Cell::Num(*f)];
        row.extend(report.spectra.iter().map(|s| Cell::Num(s.values[k])));
        asd.rows.push(row);
    }

    if timeseries {
        for (m, ts) in report.modes.iter().zip(&report.traces) {
            let mut buf = Vec::new();
            write_timeseries_binary(ts, &mut buf)?;
            out.write(&format!("field_{}.bin", m.mode), &buf)?;
        }
    }
    Ok(vec![summary, asd])
}

fn fraction(hash: &str, hom_uev: f64, inh_uev: f64) -> Result<Vec<Table>> {
    let f = sub_ensemble_fraction(hom_uev, inh_uev)?;
    let mut t = Table::new(
        "fraction",
        hash,
        ["gamma_hom_uev", "gamma_inh_uev", "fraction", "percent"].iter().map(|s| s.to_string()).collect(),
    )
    .meta("convention", "gamma_hom * g(0), g the unit-area Gaussian of FWHM gamma_inh")
    .meta("gamma_hom_mhz", hom_uev * UEV_IN_MHZ);
    t.rows.push(vec![Cell::Num(hom_uev), Cell::Num(inh_uev), Cell::Num(f), Cell::Num(100.0 * f)]);
    Ok(vec![t])
}

fn kind_name(k: LineKind) -> &'static str {
    match k {
        LineKind::Main => "main",
        LineKind::SatelliteUp => "satellite_up",
        LineKind::SatelliteDown => "satellite_down",
    }
}

fn transitions(sc: &Scenario) -> Result<Vec<Table>> {
    let z = sc.zeeman();
    let axis = sc.drive_axis();
    let table = hyperfine_satellites(&spin_lines(&z, None, &axis, DEFAULT_WEIGHT_FLOOR)?, &sc.hyperfine())?;
    let levels = eigenlevels(&build_hamiltonian(&z, None)?)?;
    let mut zero = z.clone();
    zero.b_field = Vector3::zeros();
    let zf = eigenlevels(&build_hamiltonian(&zero, None)?)?;
    let split = zf.energies[zf.level_of(SpinProjection::PLUS_3_2)] - zf.energies[zf.level_of(SpinProjection::PLUS_1_2)];

    let columns = ["label_i", "label_j", "frequency_mhz", "dipole_weight", "kind"];
    let mut t = Table::new("transitions", &sc.hash(), columns.iter().map(|s| s.to_string()).collect())
        .meta("zero_field_splitting_mhz", split.abs())
        .meta("b_mt", format!("{:?}", sc.field.b_mt));
    for (e, l) in levels.energies.iter().zip(levels.labels) {
        t = t.meta(&format!("level_{l}_mhz"), e);
    }
    for l in &table.lines {
        t.rows.push(vec![
            Cell::Text(l.label_i.to_string()),
            Cell::Text(l.label_j.to_string()),
            Cell::Num(l.frequency_mhz),
            Cell::Num(l.dipole_weight),
            Cell::Text(kind_name(l.kind).into()),
        ]);
    }
    Ok(vec![t])
}
