//! Depth-limited CART surrogate fit to model predictions.
//!
//! Splits minimize weighted Gini impurity. Candidate thresholds are midpoints
//! between consecutive distinct feature values. Impurities are compared as
//! exact integer ratios, so ties resolve deterministically: lowest feature
//! index first, then lowest threshold. A node is split only when the best
//! split strictly lowers impurity.

use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cmp {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub feature: usize,
    pub threshold: f64,
    pub cmp: Cmp,
}

impl Predicate {
    pub fn holds(&self, x: f64) -> bool {
        match self.cmp {
            Cmp::Le => x <= self.threshold,
            Cmp::Gt => x > self.threshold,
        }
    }
}

/// One root-to-leaf path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub predicates: Vec<Predicate>,
    pub class: usize,
    pub support: usize,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.predicates.is_empty() {
            f.write_str("TRUE")?;
        }
        for (i, p) in self.predicates.iter().enumerate() {
            if i > 0 {
                f.write_str(" AND ")?;
            }
            let op = match p.cmp {
                Cmp::Le => "<=",
                Cmp::Gt => ">",
            };
            write!(f, "f{} {op} {}", p.feature, p.threshold)?;
        }
        write!(f, " => {} [{}]", self.class, self.support)
    }
}

impl std::str::FromStr for Rule {
    type Err = String;

    /// Parses the [`fmt::Display`] form.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lhs, rhs) = s.split_once(" => ").ok_or("missing ` => `")?;
        let (class, support) = rhs
            .trim()
            .split_once(" [")
            .and_then(|(c, rest)| Some((c, rest.strip_suffix(']')?)))
            .ok_or("expected `<class> [<support>]`")?;
        let class = class.parse().map_err(|_| format!("bad class `{class}`"))?;
        let support = support
            .parse()
            .map_err(|_| format!("bad support `{support}`"))?;
        let mut predicates = Vec::new();
        if lhs != "TRUE" {
            for term in lhs.split(" AND ") {
                let mut parts = term.split_whitespace();
                let (Some(feat), Some(op), Some(thr), None) =
                    (parts.next(), parts.next(), parts.next(), parts.next())
                else {
                    return Err(format!("bad predicate `{term}`"));
                };
                let feature = feat
                    .strip_prefix('f')
                    .and_then(|f| f.parse().ok())
                    .ok_or_else(|| format!("bad feature `{feat}`"))?;
                let cmp = match op {
                    "<=" => Cmp::Le,
                    ">" => Cmp::Gt,
                    _ => return Err(format!("bad operator `{op}`")),
                };
                let threshold = thr.parse().map_err(|_| format!("bad threshold `{thr}`"))?;
                predicates.push(Predicate {
                    feature,
                    threshold,
                    cmp,
                });
            }
        }
        Ok(Rule {
            predicates,
            class,
            support,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
    pub depth: usize,
    pub tree_seed: u64,
}

impl RuleSet {
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Class predicted for a feature vector.
    pub fn classify(&self, x: &[f64]) -> Option<usize> {
        self.rules
            .iter()
            .find(|r| r.predicates.iter().all(|p| p.holds(x[p.feature])))
            .map(|r| r.class)
    }
}

/// `Σ_k c_k² / n` held as an exact fraction.
#[derive(Clone, Copy)]
struct Purity {
    num: u128,
    den: u128,
}

impl Purity {
    fn of(counts: &[u64]) -> Purity {
        let n: u64 = counts.iter().sum();
        Purity {
            num: counts.iter().map(|&c| (c as u128) * (c as u128)).sum(),
            den: n as u128,
        }
    }

    fn split(left: &[u64], right: &[u64]) -> Purity {
        let (l, r) = (Purity::of(left), Purity::of(right));
        Purity {
            num: l.num * r.den + r.num * l.den,
            den: l.den * r.den,
        }
    }

    fn gt(self, other: Purity) -> bool {
        self.num * other.den > other.num * self.den
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    purity: Purity,
}

fn majority(counts: &[u64]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

fn best_split(x: &Array2<f64>, y: &[usize], rows: &[usize], classes: usize) -> Option<Split> {
    let mut total = vec![0u64; classes];
    for &r in rows {
        total[y[r]] += 1;
    }
    let parent = Purity::of(&total);
    let mut best: Option<Split> = None;
    let mut order = rows.to_vec();
    for f in 0..x.ncols() {
        order.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]).then(a.cmp(&b)));
        let mut left = vec![0u64; classes];
        let mut right = total.clone();
        for w in 0..order.len() - 1 {
            let r = order[w];
            left[y[r]] += 1;
            right[y[r]] -= 1;
            let (a, b) = (x[[r, f]], x[[order[w + 1], f]]);
            if a == b {
                continue;
            }
            let purity = Purity::split(&left, &right);
            let improves = match &best {
                None => purity.gt(parent),
                Some(s) => purity.gt(s.purity),
            };
            if improves {
                best = Some(Split {
                    feature: f,
                    threshold: midpoint(a, b),
                    purity,
                });
            }
        }
    }
    best
}

fn grow(
    x: &Array2<f64>,
    y: &[usize],
    rows: Vec<usize>,
    classes: usize,
    depth_left: usize,
    path: &mut Vec<Predicate>,
    out: &mut Vec<Rule>,
) {
    let mut counts = vec![0u64; classes];
    for &r in &rows {
        counts[y[r]] += 1;
    }
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    let split = if depth_left == 0 || pure || rows.len() < 2 {
        None
    } else {
        best_split(x, y, &rows, classes)
    };
    let Some(split) = split else {
        out.push(Rule {
            predicates: path.clone(),
            class: majority(&counts),
            support: rows.len(),
        });
        return;
    };
    let (left, right): (Vec<usize>, Vec<usize>) = rows
        .iter()
        .partition(|&&r| x[[r, split.feature]] <= split.threshold);
    for (side, cmp) in [(left, Cmp::Le), (right, Cmp::Gt)] {
        path.push(Predicate {
            feature: split.feature,
            threshold: split.threshold,
            cmp,
        });
        grow(x, y, side, classes, depth_left - 1, path, out);
        path.pop();
    }
}

/// Fits a tree of at most `depth` levels mapping rows of `x` to `y` and
/// returns its root-to-leaf paths, left branch first. `y` values must be
/// below `classes`.
pub fn fit_tree(
    x: &Array2<f64>,
    y: &[usize],
    classes: usize,
    depth: usize,
    tree_seed: u64,
) -> RuleSet {
    assert_eq!(x.nrows(), y.len(), "one target per row");
    let classes = classes.max(y.iter().max().map_or(0, |&m| m + 1)).max(1);
    let mut rules = Vec::new();
    grow(
        x,
        y,
        (0..y.len()).collect(),
        classes,
        depth,
        &mut Vec::new(),
        &mut rules,
    );
    RuleSet {
        rules,
        depth,
        tree_seed,
    }
}
