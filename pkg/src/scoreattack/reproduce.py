"""Bundled experiment campaigns, one per result id (fig1 ... table4)."""
from __future__ import annotations

from dataclasses import replace

from .harness import ExperimentConfig

DEFAULT_REPETITIONS = 20
PUBLISHED_REPETITIONS = 50

_ENRON = dict(dataset="enron", fraction_real=0.6, attack="refined", ref_speed=10)


def _cfg(name, group, series, **kw) -> ExperimentConfig:
    params = dict(_ENRON)
    params.update(kw)
    return ExperimentConfig(name=name, group=group, series=series, **params)


def _fig1():
    out = []
    for m in (500, 1000, 2000, 4000):
        for k in (15, 30, 60):
            out.append(_cfg(f"fig1-m{m}-k{k}", f"m={m}", f"k={k}", attack="base",
                            m_sim=m, m_real=m, query_count=int(0.15 * m), known_count=k))
    return out


def _fig3():
    return [_cfg(f"fig3-{attack}-k{k}", f"k={k}", attack, attack=attack,
                 m_sim=1200, m_real=1000, query_count=150, known_count=k)
            for k in (5, 10, 20, 40) for attack in ("base", "refined")]


def _fig4():
    return [_cfg(f"fig4-{ds}-l{l}", ds, f"l={l}", dataset=ds,
                 m_sim=1000, m_real=1000, query_count=l, known_count=15)
            for ds in ("enron", "apache", "apache_reduced") for l in (150, 300, 450)]


def _fig5():
    return [_cfg(f"fig5-nsim{n}", f"n_sim={n}", "refined", n_sim=n,
                 m_sim=1000, m_real=1000, query_count=150, known_count=15)
            for n in (1500, 3000, 6000, 12000)]


def _fig6():
    return [_cfg(f"fig6-m{m}-{cm}", f"m={m}", cm, countermeasure=cm,
                 m_sim=m, m_real=m, query_count=int(0.15 * m), known_count=15)
            for m in (500, 1000, 2000, 4000) for cm in ("none", "padding", "obfuscation")]


def _fig7():
    return [_cfg(f"fig7-m{m}-{dist}", f"m={m}", dist, distribution=dist,
                 m_sim=m, m_real=m, query_count=int(0.15 * m), known_count=15)
            for m in (500, 1000, 2000, 4000) for dist in ("uniform", "zipfian", "inv_zipfian")]


def _fig8():
    out = []
    for attack in ("base", "refined"):
        for size in (0, 10):
            series = f"{attack}+clusters" if size else attack
            out.append(_cfg(f"fig8-{series}", "k=10", series, attack=attack,
                            max_cluster_size=size, m_sim=1200, m_real=1000,
                            query_count=150, known_count=10))
    return out


def _table2():
    note = ("known_count follows the table caption (10); the accompanying text "
            "states 15 for the same experiment")
    return [_cfg(f"table2-order{d}", f"order={d}", "refined", order=d,
                 m_sim=300, m_real=300, query_count=75, known_count=10, note=note)
            for d in (2, 3)]


def _table3():
    return [_cfg(f"table3-{policy}", policy, "refined", known_policy=policy,
                 m_sim=1000, m_real=1000, query_count=150, known_count=5)
            for policy in ("uniform", "top_quartile")]


def _table4():
    out = [_cfg(f"table4-m1000-max{s}", "m=1000", f"max={s}", max_cluster_size=s,
                m_sim=1000, m_real=1000, query_count=150, known_count=15)
           for s in (1, 5, 10, 20, 50)]
    out += [_cfg(f"table4-m2000-max{s}", "m=2000", f"max={s}", max_cluster_size=s,
                 m_sim=2000, m_real=2000, query_count=150, known_count=15)
            for s in (5, 10, 20)]
    return out


CAMPAIGNS = {
    "fig1": _fig1, "fig3": _fig3, "fig4": _fig4, "fig5": _fig5, "fig6": _fig6,
    "fig7": _fig7, "fig8": _fig8, "table2": _table2, "table3": _table3, "table4": _table4,
}


def campaign(figure_id: str, published_repetitions: bool = False,
             base_seed: int = 0, **overrides) -> list[ExperimentConfig]:
    """Configurations for ``figure_id``; unknown ids raise ``KeyError`` listing the known ones."""
    key = figure_id.lower()
    if key not in CAMPAIGNS:
        raise KeyError(f"unknown figure id {figure_id!r}; available: {', '.join(CAMPAIGNS)}")
    reps = PUBLISHED_REPETITIONS if published_repetitions else DEFAULT_REPETITIONS
    return [replace(cfg, repetitions=reps, base_seed=base_seed, **overrides).validate()
            for cfg in CAMPAIGNS[key]()]
