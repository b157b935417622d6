//! Fixed-schema summary tables.

use super::write::CsvText;
use crate::mcmc::{DiagnosticRow, PosteriorSamples, SummaryRow};
use crate::scenarios::TotalRow;
use crate::simgen::{CoverageRow, FailureRow, IntervalRow, RmseRow};

/// `region,species,median,lo95,hi95` from the regional totals `R[i,k]`.
pub fn county_estimates_csv(samples: &PosteriorSamples) -> CsvText {
    let mut out = CsvText::new(&["region", "species", "median", "lo95", "hi95"]);
    let dims = samples.layout.dims;
    for k in 0..dims.n_regions {
        for i in 0..dims.n_species {
            let r = SummaryRow::from_values("", &samples.column(samples.layout.region_total(i, k)));
            out.row()
                .int(k as u64)
                .int(i as u64)
                .real(r.median)
                .real(r.lo95)
                .real(r.hi95)
                .end();
        }
    }
    out
}

pub fn totals_csv(rows: &[TotalRow]) -> CsvText {
    let mut out = CsvText::new(&["configuration", "species", "median", "lo95", "hi95"]);
    for r in rows {
        out.row()
            .text(&r.configuration)
            .int(r.species as u64)
            .real(r.median)
            .real(r.lo95)
            .real(r.hi95)
            .end();
    }
    out
}

pub fn parameters_csv(rows: &[SummaryRow]) -> CsvText {
    let mut out = CsvText::new(&["name", "mean", "median", "lo95", "hi95"]);
    for r in rows {
        out.row().text(&r.name).real(r.mean).real(r.median).real(r.lo95).real(r.hi95).end();
    }
    out
}

pub fn diagnostics_csv(rows: &[(usize, DiagnosticRow)]) -> CsvText {
    let mut out = CsvText::new(&["scenario", "name", "rhat", "ess", "degenerate", "flagged"]);
    for (scenario, r) in rows {
        out.row()
            .int(*scenario as u64)
            .text(&r.name)
            .real(r.rhat)
            .real(r.ess)
            .flag(r.degenerate)
            .flag(r.flagged)
            .end();
    }
    out
}

pub fn rmse_csv(rows: &[RmseRow]) -> CsvText {
    let mut out = CsvText::new(&["dataset", "retention", "species", "rmse"]);
    for r in rows {
        out.row()
            .int(r.dataset as u64)
            .real(r.retention)
            .int(r.species as u64)
            .real(r.rmse)
            .end();
    }
    out
}

pub fn coverage_csv(rows: &[CoverageRow]) -> CsvText {
    let mut out = CsvText::new(&[
        "dataset",
        "retention",
        "n_parameters",
        "n_covered",
        "fraction",
        "totals_covered",
        "n_totals",
    ]);
    for r in rows {
        out.row()
            .int(r.dataset as u64)
            .real(r.retention)
            .int(r.n_parameters as u64)
            .int(r.n_covered as u64)
            .real(r.fraction)
            .int(r.totals_covered as u64)
            .int(r.n_totals as u64)
            .end();
    }
    out
}

/// `dataset,retention,name,truth,median,lo95,hi95`; used for totals and correlations.
pub fn intervals_csv(rows: &[IntervalRow]) -> CsvText {
    let mut out = CsvText::new(&["dataset", "retention", "name", "truth", "median", "lo95", "hi95"]);
    for r in rows {
        out.row()
            .int(r.dataset as u64)
            .real(r.retention)
            .text(&r.name)
            .real(r.truth)
            .real(r.median)
            .real(r.lo95)
            .real(r.hi95)
            .end();
    }
    out
}

pub fn failures_csv(rows: &[FailureRow]) -> CsvText {
    let mut out = CsvText::new(&["dataset", "retention", "message"]);
    for r in rows {
        out.row().int(r.dataset as u64).real(r.retention).text(&r.message).end();
    }
    out
}
