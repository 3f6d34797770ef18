"""Statistical tests and descriptive analyses over annotations and topics.

The t-distribution CDF is computed from scratch via the regularized
incomplete beta function (continued fraction), so p-values do not depend
on an external stats library.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

if TYPE_CHECKING:
    from .annotate import ActAnnotation
    from .corpus import Novel, Passage

log = logging.getLogger(__name__)

_CF_TOL = 1e-12
_CF_MAX_ITER = 300
_FPMIN = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function, evaluated with
    the modified Lentz scheme."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_TOL:
            return h
    raise ArithmeticError(
        f"incomplete beta continued fraction did not converge for a={a}, b={b}, x={x}"
    )


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("betainc_reg requires a > 0 and b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log(1.0 - x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_cdf(t: float, df: float) -> float:
    """CDF of Student's t distribution with df degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if t == 0.0:
        return 0.5
    if math.isinf(t):
        return 0.0 if t < 0 else 1.0
    tail = 0.5 * betainc_reg(df / 2.0, 0.5, df / (df + t * t))
    return tail if t < 0 else 1.0 - tail


def _two_sided_p(t: float, df: float) -> float:
    if math.isinf(t):
        return 0.0
    if t == 0.0:
        return 1.0
    return betainc_reg(df / 2.0, 0.5, df / (df + t * t))


def pearson(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Pearson correlation and two-sided p-value (t transform, n-2 df)."""
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 3:
        raise ValueError("pearson requires at least 3 points")
    mx = sum(x) / n
    my = sum(y) / n
    sxx = sum((xi - mx) ** 2 for xi in x)
    syy = sum((yi - my) ** 2 for yi in y)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("undefined correlation: constant input")
    sxy = sum((xi - mx) * (yi - my) for xi, yi in zip(x, y))
    r = sxy / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return r, _two_sided_p(t, n - 2)


@dataclass
class TestResult:
    statistic: float
    df: float
    p_two_sided: float
    mean_a: float
    mean_b: float
    n_a: int
    n_b: int
    group_a: str = "a"
    group_b: str = "b"
    flag: str | None = None

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "df": self.df,
            "p_two_sided": self.p_two_sided,
            "group_a": self.group_a,
            "group_b": self.group_b,
            "mean_a": self.mean_a,
            "mean_b": self.mean_b,
            "n_a": self.n_a,
            "n_b": self.n_b,
            "flag": self.flag,
        }


def ttest_ind(
    a: Sequence[float],
    b: Sequence[float],
    equal_variance: bool = True,
) -> TestResult:
    """Independent two-sample t-test, two-sided.

    Pooled-variance Student t by default; Welch (with Welch-Satterthwaite
    degrees of freedom) when equal_variance is False.
    """
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise ValueError("each group needs at least 2 values")
    ma = sum(a) / na
    mb = sum(b) / nb
    va = sum((v - ma) ** 2 for v in a) / (na - 1)
    vb = sum((v - mb) ** 2 for v in b) / (nb - 1)

    if equal_variance:
        df = float(na + nb - 2)
        pooled = ((na - 1) * va + (nb - 1) * vb) / df
        se = math.sqrt(pooled * (1.0 / na + 1.0 / nb))
    else:
        se = math.sqrt(va / na + vb / nb)
        if se > 0:
            df = (va / na + vb / nb) ** 2 / (
                (va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1)
            )
        else:
            df = float(na + nb - 2)

    if se == 0.0:
        if ma == mb:
            return TestResult(0.0, df, 1.0, ma, mb, na, nb, flag="zero variance")
        t = math.inf if ma > mb else -math.inf
        return TestResult(t, df, 0.0, ma, mb, na, nb, flag="zero variance")

    t = (ma - mb) / se
    return TestResult(t, df, _two_sided_p(t, df), ma, mb, na, nb)


@dataclass
class NovelSeries:
    """A per-novel value series with the grouping tags needed for tests."""

    name: str
    values: dict[str, float]
    gender_groups: dict[str, str] = field(default_factory=dict)
    series_tags: dict[str, str | None] = field(default_factory=dict)

    def ids(self) -> list[str]:
        return list(self.values)

    def to_dict(self) -> dict:
        return {"name": self.name, "values": dict(self.values)}


def make_series(name: str, values: dict[str, float], novels: Sequence["Novel"]) -> NovelSeries:
    by_id = {n.id: n for n in novels}
    gender_groups = {}
    series_tags = {}
    for novel_id in values:
        novel = by_id[novel_id]
        gender_groups[novel_id] = novel.gender_group()
        series_tags[novel_id] = novel.series_tag
    return NovelSeries(name, values, gender_groups, series_tags)


def group_compare(
    series: NovelSeries,
    grouping: str,
    series_tag: str | None = None,
    drop_tagged: bool = True,
    equal_variance: bool = True,
) -> TestResult:
    """Compare per-novel means between two groups.

    grouping='series' contrasts novels carrying series_tag (any tag if not
    named) against the rest. grouping='gender' contrasts female- vs
    male-authored novels after dropping tagged-series novels (drop_tagged)
    and mixed/unknown-gender author teams.
    """
    if grouping == "series":
        if series_tag is None:
            in_group = [i for i in series.ids() if series.series_tags.get(i)]
        else:
            in_group = [i for i in series.ids() if series.series_tags.get(i) == series_tag]
        out_group = [i for i in series.ids() if i not in set(in_group)]
        label_a = series_tag or "series"
        label_b = "rest"
        if not in_group:
            raise ValueError(f"empty group after series filter (tag={series_tag!r})")
        if not out_group:
            raise ValueError("empty comparison group: every novel carries the series tag")
    elif grouping == "gender":
        ids = series.ids()
        if drop_tagged:
            ids = [i for i in ids if not series.series_tags.get(i)]
        in_group = [i for i in ids if series.gender_groups.get(i) == "female"]
        out_group = [i for i in ids if series.gender_groups.get(i) == "male"]
        label_a, label_b = "female", "male"
        if not in_group:
            raise ValueError("empty female group after gender filters")
        if not out_group:
            raise ValueError("empty male group after gender filters")
    else:
        raise ValueError(f"unknown grouping {grouping!r}")

    result = ttest_ind(
        [series.values[i] for i in in_group],
        [series.values[i] for i in out_group],
        equal_variance=equal_variance,
    )
    result.group_a = label_a
    result.group_b = label_b
    return result


@dataclass
class ActProportions:
    series: NovelSeries
    corpus_share: float
    yes_count: int
    total: int
    unresolved_count: int

    def to_dict(self) -> dict:
        return {
            "per_novel": dict(self.series.values),
            "corpus_share": self.corpus_share,
            "yes_count": self.yes_count,
            "total": self.total,
            "unresolved_count": self.unresolved_count,
        }


def act_proportions(
    annotations: Sequence["ActAnnotation"],
    novels: Sequence["Novel"],
) -> ActProportions:
    """Per-novel share of passages whose final verdict is YES.

    Unresolved annotations count as NO and are tallied separately.
    """
    totals: dict[str, int] = {}
    yes: dict[str, int] = {}
    unresolved = 0
    for ann in annotations:
        totals[ann.novel_id] = totals.get(ann.novel_id, 0) + 1
        if ann.status != "ok":
            unresolved += 1
        elif ann.final_label == "YES":
            yes[ann.novel_id] = yes.get(ann.novel_id, 0) + 1
    values = {nid: yes.get(nid, 0) / count for nid, count in totals.items()}
    total = sum(totals.values())
    yes_total = sum(yes.values())
    series = make_series("act_share", values, novels)
    return ActProportions(
        series=series,
        corpus_share=(yes_total / total) if total else 0.0,
        yes_count=yes_total,
        total=total,
        unresolved_count=unresolved,
    )


@dataclass
class PositionDensity:
    bin_edges: list[float]
    counts: list[int]
    density: list[float]
    mean_position: float | None
    n_acts: int

    def to_dict(self) -> dict:
        return {
            "bin_edges": self.bin_edges,
            "counts": self.counts,
            "density": self.density,
            "mean_position": self.mean_position,
            "n_acts": self.n_acts,
        }


def position_density(
    annotations: Sequence["ActAnnotation"],
    passages: Sequence["Passage"],
    bins: int = 20,
) -> PositionDensity:
    """Histogram of YES passages over normalized narrative position [0, 1],
    normalized to unit area, with the mean position."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    position = {p.ref: p.normalized_position for p in passages}
    acts = [
        position[ann.ref]
        for ann in annotations
        if ann.status == "ok" and ann.final_label == "YES" and ann.ref in position
    ]
    counts = [0] * bins
    for pos in acts:
        counts[min(int(pos * bins), bins - 1)] += 1
    n = len(acts)
    density = [c * bins / n if n else 0.0 for c in counts]
    edges = [i / bins for i in range(bins + 1)]
    mean_pos = sum(acts) / n if n else None
    return PositionDensity(edges, counts, density, mean_pos, n)


AFFECT_LABELS = ("INDIVIDUAL", "GROUP")
IMPACT_LABELS = ("LOVING", "PUNISHING", "BOTH", "NEUTRAL")


@dataclass
class CharacterizationShares:
    affect_series: dict[str, NovelSeries]
    impact_series: dict[str, NovelSeries]
    corpus_affect: dict[str, float]
    corpus_impact: dict[str, float]
    acts_per_novel: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "per_novel_affect": {k: dict(s.values) for k, s in self.affect_series.items()},
            "per_novel_impact": {k: dict(s.values) for k, s in self.impact_series.items()},
            "corpus_affect": self.corpus_affect,
            "corpus_impact": self.corpus_impact,
        }


def characterization_shares(
    annotations: Sequence["ActAnnotation"],
    novels: Sequence["Novel"],
) -> CharacterizationShares:
    """Per-novel shares of affect and impact labels among YES acts, plus
    corpus-level aggregates. Novels without YES acts are excluded."""
    acts: dict[str, list] = {}
    for ann in annotations:
        if ann.status == "ok" and ann.final_label == "YES":
            acts.setdefault(ann.novel_id, []).append(ann)

    all_ids = {ann.novel_id for ann in annotations}
    for novel_id in sorted(all_ids - set(acts)):
        log.warning("novel %s has no YES acts; excluded from characterization shares", novel_id)

    affect_values: dict[str, dict[str, float]] = {label: {} for label in AFFECT_LABELS}
    impact_values: dict[str, dict[str, float]] = {label: {} for label in IMPACT_LABELS}
    acts_per_novel = {}
    for novel_id, novel_acts in acts.items():
        n = len(novel_acts)
        acts_per_novel[novel_id] = n
        for label in AFFECT_LABELS:
            affect_values[label][novel_id] = sum(1 for a in novel_acts if a.affect == label) / n
        for label in IMPACT_LABELS:
            impact_values[label][novel_id] = sum(1 for a in novel_acts if a.impact == label) / n

    total = sum(acts_per_novel.values())
    flat = [a for group in acts.values() for a in group]
    corpus_affect = {
        label: (sum(1 for a in flat if a.affect == label) / total if total else 0.0)
        for label in AFFECT_LABELS
    }
    corpus_impact = {
        label: (sum(1 for a in flat if a.impact == label) / total if total else 0.0)
        for label in IMPACT_LABELS
    }
    return CharacterizationShares(
        affect_series={
            label: make_series(f"affect_{label.lower()}_share", values, novels)
            for label, values in affect_values.items()
        },
        impact_series={
            label: make_series(f"impact_{label.lower()}_share", values, novels)
            for label, values in impact_values.items()
        },
        corpus_affect=corpus_affect,
        corpus_impact=corpus_impact,
        acts_per_novel=acts_per_novel,
    )
