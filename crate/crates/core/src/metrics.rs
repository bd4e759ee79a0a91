//! Pre/post comparison metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{AttributionMap, RuleSet, Snapshot};
use crate::gnn::LossReport;
use crate::graph::{edge_symmetric_difference, EdgeSet, ForgetSet, Graph, NodeId};

/// Residual attribution in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub pct: f64,
    /// Surviving attribution summed to zero; `pct` is reported as 0.
    pub degenerate: bool,
}

/// `100 · Σ_{v∈F} att_v / Σ_{u∈surviving} att_u`.
pub fn residual_attribution(att: &AttributionMap, f: &ForgetSet, surviving: &[NodeId]) -> Residual {
    let num: f64 = f.nodes().iter().map(|&v| att.get(v)).sum();
    let den: f64 = surviving.iter().map(|&u| att.get(u)).sum();
    if den == 0.0 {
        return Residual {
            pct: 0.0,
            degenerate: true,
        };
    }
    Residual {
        pct: 100.0 * num / den,
        degenerate: false,
    }
}

/// Mean absolute attribution change over all `n` original nodes.
pub fn heatmap_shift(pre: &AttributionMap, post: &AttributionMap, n: usize) -> Result<f64> {
    if pre.len() != n || post.len() != n {
        return Err(Error::arg(format!(
            "attribution domains differ: pre {}, post {}, n {n}",
            pre.len(),
            post.len()
        )));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let total: f64 = pre
        .values()
        .iter()
        .zip(post.values())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(total / n as f64)
}

/// Mean absolute attribution change over the forget set.
pub fn esd(pre: &AttributionMap, post: &AttributionMap, f: &ForgetSet) -> Result<f64> {
    if f.is_empty() {
        return Err(Error::arg(
            "explainability score deviation needs a nonempty forget set",
        ));
    }
    let total: f64 = f
        .nodes()
        .iter()
        .map(|&v| (pre.get(v) - post.get(v)).abs())
        .sum();
    Ok(total / f.len() as f64)
}

pub fn ged_delta(proxy_pre: &EdgeSet, proxy_post: &EdgeSet) -> usize {
    edge_symmetric_difference(proxy_pre, proxy_post)
}

/// Rules lost between the two surrogates; negative when the post tree grew.
pub fn grs(rules_pre: &RuleSet, rules_post: &RuleSet) -> i64 {
    rules_pre.len() as i64 - rules_post.len() as i64
}

/// Pair counts behind [`mi_auc`]: members scoring above a non-member
/// (lower loss), and tied pairs.
pub fn auc_pair_counts(member: &[f64], nonmember: &[f64]) -> (u64, u64) {
    let mut sorted = nonmember.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut wins = 0u64;
    let mut ties = 0u64;
    for &l in member {
        let below = sorted.partition_point(|&x| x < l);
        let upto = sorted.partition_point(|&x| x <= l);
        wins += (sorted.len() - upto) as u64;
        ties += (upto - below) as u64;
    }
    (wins, ties)
}

/// ROC-AUC of the loss-threshold attack (score = −loss, members positive),
/// with half credit for ties.
pub fn mi_auc(member: &LossReport, nonmember: &LossReport) -> Result<f64> {
    if member.is_empty() || nonmember.is_empty() {
        return Err(Error::arg(format!(
            "membership pools must be nonempty (members {}, non-members {})",
            member.len(),
            nonmember.len()
        )));
    }
    if let Some(l) = member
        .losses
        .iter()
        .chain(&nonmember.losses)
        .find(|l| l.is_nan())
    {
        return Err(Error::arg(format!("loss {l} is not comparable")));
    }
    let (wins, ties) = auc_pair_counts(&member.losses, &nonmember.losses);
    let pairs = member.len() as u64 * nonmember.len() as u64;
    Ok((2 * wins + ties) as f64 / (2 * pairs) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    #[serde(rename = "ra_pre_pct")]
    pub ra_pre: f64,
    #[serde(rename = "ra_post_pct")]
    pub ra_post: f64,
    pub hs: f64,
    pub esd: f64,
    pub ged_delta: usize,
    pub grs: i64,
    pub mi_auc_pre: f64,
    pub mi_auc_post: f64,
}

impl MetricVector {
    /// Checks the documented value ranges.
    pub fn check_ranges(&self) -> Result<()> {
        let checks = [
            ("ra_pre_pct", self.ra_pre, 0.0, 100.0),
            ("ra_post_pct", self.ra_post, 0.0, 100.0),
            ("hs", self.hs, 0.0, f64::INFINITY),
            ("esd", self.esd, 0.0, f64::INFINITY),
            ("mi_auc_pre", self.mi_auc_pre, 0.0, 1.0),
            ("mi_auc_post", self.mi_auc_post, 0.0, 1.0),
        ];
        for (name, v, lo, hi) in checks {
            if !(v >= lo && v <= hi) {
                return Err(Error::integrity(format!(
                    "{name} = {v} outside [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

/// Conditions noted while scoring that do not invalidate the vector.
pub const FLAG_EMPTY_FORGET_SET: &str = "empty-forget-set";
pub const FLAG_RA_PRE_DEGENERATE: &str = "ra-pre-degenerate-denominator";
pub const FLAG_RA_POST_DEGENERATE: &str = "ra-post-degenerate-denominator";

/// Scores a pre/post snapshot pair. RA_pre divides by the nodes present
/// when the pre snapshot was taken, RA_post by the nodes of `graph_post`.
pub fn compute_all(
    pre: &Snapshot,
    post: &Snapshot,
    f: &ForgetSet,
    graph_post: &Graph,
) -> Result<MetricVector> {
    compute_all_flagged(pre, post, f, graph_post).map(|(m, _)| m)
}

/// [`compute_all`] plus the flags raised on the way. With an empty forget
/// set ESD is reported as 0.
pub fn compute_all_flagged(
    pre: &Snapshot,
    post: &Snapshot,
    f: &ForgetSet,
    graph_post: &Graph,
) -> Result<(MetricVector, Vec<&'static str>)> {
    if pre.digest != post.digest {
        return Err(Error::integrity(format!(
            "snapshots belong to different runs (digest {} vs {})",
            pre.digest, post.digest
        )));
    }
    let mut flags = Vec::new();
    let ra_pre = residual_attribution(&pre.attribution, f, &pre.present);
    let ra_post = residual_attribution(&post.attribution, f, &graph_post.present_nodes());
    if ra_pre.degenerate {
        flags.push(FLAG_RA_PRE_DEGENERATE);
    }
    if ra_post.degenerate {
        flags.push(FLAG_RA_POST_DEGENERATE);
    }
    let esd = if f.is_empty() {
        flags.push(FLAG_EMPTY_FORGET_SET);
        0.0
    } else {
        esd(&pre.attribution, &post.attribution, f)?
    };
    let m = MetricVector {
        ra_pre: ra_pre.pct,
        ra_post: ra_post.pct,
        hs: heatmap_shift(&pre.attribution, &post.attribution, graph_post.num_nodes())?,
        esd,
        ged_delta: ged_delta(&pre.proxy, &post.proxy),
        grs: grs(&pre.rules, &post.rules),
        mi_auc_pre: mi_auc(&pre.member_losses, &pre.nonmember_losses)?,
        mi_auc_post: mi_auc(&post.member_losses, &post.nonmember_losses)?,
    };
    Ok((m, flags))
}
