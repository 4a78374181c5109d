//! Report emitters: JSON result, CSV summaries, graph export, and the
//! null-sample histogram plot.
//!
//! The JSON report is the single source of truth; the CSV summary renders
//! its numbers through the same serializer so both files agree byte for
//! byte.

use serde::{Deserialize, Serialize};

use crate::community::CommunityResult;
use crate::error::{Error, Result};
use crate::mapper::MapperGraph;
use crate::nulltest::NullTestResult;
use crate::simulation::{DgpKind, DgpSpec, ScenarioResult};

/// Renders a float exactly as it appears in the JSON report.
fn json_number(v: f64) -> String {
    serde_json::to_string(&v).unwrap_or_else(|_| "null".into())
}

fn optional_number(v: Option<f64>) -> String {
    v.map(json_number).unwrap_or_default()
}

/// The full result as pretty-printed JSON with a trailing newline.
pub fn report_json(result: &NullTestResult) -> Result<String> {
    let mut s = serde_json::to_string_pretty(result)?;
    s.push('\n');
    Ok(s)
}

/// One-row summary: community count, observed dissociation, permutation
/// z, structured-null z, and the Monte Carlo p-value. Empty cells stand
/// for statistics the run did not produce.
pub fn summary_csv(result: &NullTestResult) -> String {
    let k = result.observed.communities.n_communities;
    let d_obs = json_number(result.all.d_obs);
    let z_perm = optional_number(result.permutation.as_ref().map(|p| p.z));
    let z_str = optional_number(result.all.z);
    let p_hat = json_number(result.all.p_hat);
    format!("k,d_obs,z_perm,z_str,p_hat\n{k},{d_obs},{z_perm},{z_str},{p_hat}\n")
}

/// Point id to community index, one row per input point; unassigned
/// points get an empty community cell.
pub fn communities_csv(row_ids: &[String], communities: &CommunityResult) -> Result<String> {
    if row_ids.len() != communities.point_community.len() {
        return Err(Error::InvalidParameter(format!(
            "{} row ids for {} point assignments",
            row_ids.len(),
            communities.point_community.len()
        )));
    }
    let mut out = String::from("id,community\n");
    for (id, c) in row_ids.iter().zip(&communities.point_community) {
        let cell = c.map(|c| c.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{}\n", csv_escape(id), cell));
    }
    Ok(out)
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Graph export: vertices with their cover-cell tags and member point
/// ids, edges, and the community overlay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapperReport {
    pub n_points: usize,
    pub n_vertices: usize,
    pub n_edges: usize,
    pub vertices: Vec<MapperReportVertex>,
    pub edges: Vec<(usize, usize)>,
    pub n_communities: usize,
    pub modularity: Option<f64>,
    /// Community of each input point in row order; null when the point
    /// sits in no vertex.
    pub point_community: Vec<Option<usize>>,
    pub row_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapperReportVertex {
    pub id: usize,
    /// Grid index of the cover cell the vertex came from.
    pub cell: Vec<usize>,
    pub community: usize,
    /// Member point ids.
    pub points: Vec<String>,
}

pub fn mapper_report(
    graph: &MapperGraph,
    communities: &CommunityResult,
    row_ids: &[String],
) -> Result<MapperReport> {
    if row_ids.len() != graph.n_points {
        return Err(Error::InvalidParameter(format!(
            "{} row ids for a graph over {} points",
            row_ids.len(),
            graph.n_points
        )));
    }
    let vertices = graph
        .vertices
        .iter()
        .map(|v| MapperReportVertex {
            id: v.id,
            cell: v.cell.clone(),
            community: communities.vertex_community[v.id],
            points: v.points.iter().map(|&i| row_ids[i].clone()).collect(),
        })
        .collect();
    Ok(MapperReport {
        n_points: graph.n_points,
        n_vertices: graph.n_vertices(),
        n_edges: graph.n_edges(),
        vertices,
        edges: graph.edges.clone(),
        n_communities: communities.n_communities,
        modularity: communities.modularity,
        point_community: communities.point_community.clone(),
        row_ids: row_ids.to_vec(),
    })
}

/// One row of the simulation sweep table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioRow {
    pub distribution: String,
    pub p: usize,
    pub b: usize,
    pub r: usize,
    pub mean_z: f64,
    pub rejection_rate: f64,
}

impl ScenarioRow {
    pub fn new(label: Option<&str>, spec: &DgpSpec, result: &ScenarioResult) -> Self {
        Self {
            distribution: label
                .map(str::to_string)
                .unwrap_or_else(|| dgp_label(&spec.kind)),
            p: spec.p,
            b: result.b,
            r: result.r,
            mean_z: result.mean_z,
            rejection_rate: result.rejection_rate,
        }
    }
}

/// Human-readable family label for the sweep table.
pub fn dgp_label(kind: &DgpKind) -> String {
    match kind {
        DgpKind::Spherical => "spherical".into(),
        DgpKind::CorrelatedBlock { rho } => format!("correlated_block(rho={rho})"),
        DgpKind::MultivariateT { df } => format!("multivariate_t(df={df})"),
        DgpKind::Skewed => "skewed".into(),
        DgpKind::AllfeatureMixture { delta, rho } => {
            format!("allfeature_mixture(delta={delta},rho={rho})")
        }
        DgpKind::SparseMixture {
            delta,
            rho,
            k_shifted,
        } => format!("sparse_mixture(delta={delta},rho={rho},k={k_shifted})"),
        DgpKind::HeteroCovMixture { rho } => format!("hetero_cov_mixture(rho={rho})"),
    }
}

pub fn scenario_csv(rows: &[ScenarioRow]) -> String {
    let mut out = String::from("distribution,p,b,r,mean_z,rejection_rate\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            csv_escape(&row.distribution),
            row.p,
            row.b,
            row.r,
            json_number(row.mean_z),
            json_number(row.rejection_rate),
        ));
    }
    out
}

/// A self-contained SVG histogram of the null samples with the observed
/// value marked by a vertical line. Presentation only; the numbers live
/// in the JSON report.
pub fn histogram_svg(null_samples: &[f64], d_obs: f64) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const ML: f64 = 50.0;
    const MR: f64 = 20.0;
    const MT: f64 = 20.0;
    const MB: f64 = 45.0;
    let plot_w = W - ML - MR;
    let plot_h = H - MT - MB;

    let mut lo = d_obs;
    let mut hi = d_obs;
    for &v in null_samples {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(hi > lo) {
        hi = lo + 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let n_bins = 30usize.min(null_samples.len().max(1));
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    for &v in null_samples {
        let idx = (((v - lo) / width) as usize).min(n_bins - 1);
        counts[idx] += 1;
    }
    let max_count = counts.iter().copied().max().unwrap_or(0).max(1);

    let x_of = |v: f64| ML + (v - lo) / (hi - lo) * plot_w;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));
    for (i, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let x = x_of(lo + i as f64 * width);
        let bar_w = plot_w / n_bins as f64;
        let bar_h = plot_h * c as f64 / max_count as f64;
        let y = MT + plot_h - bar_h;
        svg.push_str(&format!(
            "  <rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{bar_w:.2}\" height=\"{bar_h:.2}\" \
             fill=\"#7aa6c2\" stroke=\"#3c6e91\" stroke-width=\"0.5\"/>\n"
        ));
    }
    // Axes.
    svg.push_str(&format!(
        "  <line x1=\"{ML}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        MT + plot_h,
        W - MR,
        MT + plot_h
    ));
    svg.push_str(&format!(
        "  <line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        MT + plot_h
    ));
    svg.push_str(&format!(
        "  <text x=\"{ML}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{lo:.3}</text>\n",
        H - MB + 18.0
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{hi:.3}</text>\n",
        W - MR,
        H - MB + 18.0
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">null samples (n={}, max bin {max_count})</text>\n",
        ML + plot_w / 2.0,
        H - 8.0,
        null_samples.len()
    ));
    // Observed marker.
    let xo = x_of(d_obs);
    svg.push_str(&format!(
        "  <line x1=\"{xo:.2}\" y1=\"{MT}\" x2=\"{xo:.2}\" y2=\"{:.2}\" stroke=\"#c0392b\" \
         stroke-width=\"2\" stroke-dasharray=\"6,3\"/>\n",
        MT + plot_h
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"#c0392b\">observed = {d_obs:.4}</text>\n",
        xo + 6.0,
        MT + 14.0
    ));
    svg.push_str("</svg>\n");
    svg
}
